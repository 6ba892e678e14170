use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spacetime_oc::experiments::{
    extract_trajectory, read_solution, run_constrained_experiment, run_constrained_level, run_unconstrained_convergence,
    solve_unconstrained, write_convergence_csv, write_solution, write_trajectory_csv, RunArgs, RunConfig,
};
use spacetime_oc::{Error, Result};

#[derive(Parser)]
#[command(name = "spacetime-oc", version, about = "Space-time FEM for state-constrained optimal control of the heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run at --n (constrained when both bounds are set)
    Solve(RunArgs),
    /// Refinement sweep over --levels
    Convergence(RunArgs),
    /// Trajectory at --point of a solution saved by `solve`
    Trajectory(RunArgs),
}

fn init_threads(config: &RunConfig) -> Result<()> {
    if let Some(t) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

fn solve(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir)?;
    let solution = config.out_dir.join("solution.txt");
    if config.lower.is_some() && config.upper.is_some() {
        let (op, level) = run_constrained_level(config, config.n_x)?;
        let r = &level.record;
        println!(
            "n={} dof={} newton={} total_cg={} rel_cg={:.1} converged={} |F2|={:.3e} error={:.6e}",
            r.n, r.dof, r.newton_iterations, r.total_cg, r.rel_cg, level.result.converged, level.complementarity, level.error
        );
        write_convergence_csv(&config.out_dir.join("convergence_hist.csv"), std::slice::from_ref(r))?;
        let name = format!("trajectory_constrained_{}d_refinement_0.csv", config.dim);
        write_trajectory_csv(&config.out_dir.join(name), &level.trajectory)?;
        write_solution(&solution, &op, &level.result.u)?;
    } else {
        let (op, u, report) = solve_unconstrained(config)?;
        let target = spacetime_oc::experiments::builtin_target(&config.target)?;
        let error = op.l2_error(&u, target, None, config.error_order)?;
        println!("n={} dof={} cg={} error={:.6e}", config.n_x, op.n_dofs(), report.iterations, error);
        write_solution(&solution, &op, &u)?;
    }
    println!("wrote {}", solution.display());
    Ok(())
}

fn convergence(config: &RunConfig) -> Result<()> {
    if config.lower.is_some() && config.upper.is_some() {
        let summary = run_constrained_experiment(config)?;
        println!("n,dof,NewtonIterations,TotalCG,relCG");
        for r in summary.records() {
            println!("{},{},{},{},{:.1}", r.n, r.dof, r.newton_iterations, r.total_cg, r.rel_cg);
        }
        for (n, msg) in &summary.failures {
            eprintln!("level {n} failed: {msg}");
        }
        if !summary.failures.is_empty() {
            return Err(Error::Config(format!("{} level(s) failed, see run.log", summary.failures.len())));
        }
    } else {
        println!("n,dof,error,order");
        for r in run_unconstrained_convergence(config, true)? {
            let order = r.order.map(|o| format!("{o:.4}")).unwrap_or_default();
            println!("{},{},{:.6e},{}", r.n, r.dof, r.error, order);
        }
    }
    println!("wrote results to {}", config.out_dir.display());
    Ok(())
}

fn trajectory(config: &RunConfig) -> Result<()> {
    let input: PathBuf = config.input.clone().ok_or_else(|| Error::Config("trajectory needs --input <solution file>".into()))?;
    let saved = read_solution(&input)?;
    if config.point.len() != saved.dim {
        return Err(Error::Config(format!("--point needs {} coordinates for this solution", saved.dim)));
    }
    let (temporal, spatial) = saved.meshes()?;
    let traj = extract_trajectory(&temporal, &spatial, &saved.values, &config.point)?;
    std::fs::create_dir_all(&config.out_dir)?;
    let path = config.out_dir.join(format!("trajectory_{}d_n{}.csv", saved.dim, saved.n_x));
    write_trajectory_csv(&path, &traj)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (args, action): (&RunArgs, fn(&RunConfig) -> Result<()>) = match &cli.command {
        Command::Solve(a) => (a, solve),
        Command::Convergence(a) => (a, convergence),
        Command::Trajectory(a) => (a, trajectory),
    };
    let config = args.to_config()?;
    init_threads(&config)?;
    action(&config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
