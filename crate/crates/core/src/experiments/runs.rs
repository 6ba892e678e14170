use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::RunConfig;
use super::targets::{builtin_target, TargetFn};
use crate::error::{Error, Result};
use crate::krylov::{build_mass_diag_preconditioner, default_max_iter, pcg_solve, SolveReport};
use crate::newton::{complementarity_defect, newton_solve, BoxConstraints, DofState, NewtonResult};
use crate::spacetime::{OperatorOptions, SpaceTimeVector, SystemOperator};
use crate::spatial::SimplicialMesh;
use crate::temporal::TemporalMesh;

/// Operator for `n_x` cells per axis with the temporal and `rho` rules of `config`.
pub fn build_operator(config: &RunConfig, n_x: usize) -> Result<SystemOperator> {
    let n_t = config.temporal_intervals(n_x);
    SystemOperator::assemble(
        TemporalMesh::unit(n_t)?,
        SimplicialMesh::structured(config.dim, n_x)?,
        config.rho_for(n_x),
        &OperatorOptions::default(),
    )
}

/// PCG solve of `K u = f` on `config.n_x`.
pub fn solve_unconstrained(config: &RunConfig) -> Result<(SystemOperator, SpaceTimeVector, SolveReport)> {
    let op = build_operator(config, config.n_x)?;
    let (u, report) = solve_on(&op, builtin_target(&config.target)?, config)?;
    Ok((op, u, report))
}

fn solve_on(op: &SystemOperator, target: TargetFn, config: &RunConfig) -> Result<(SpaceTimeVector, SolveReport)> {
    let f = op.assemble_load_vector(target, config.quadrature)?;
    let pre = build_mass_diag_preconditioner(op.temporal_mass(), op.spatial_mass(), None)?;
    let (x, report) = pcg_solve(
        |v, w| op.apply_into(v, w),
        f.as_slice(),
        &pre,
        config.newton.cg_rel_tol,
        default_max_iter(op.n_dofs()),
    )?;
    if !report.converged {
        return Err(Error::InnerSolve { step: 0, residual: report.relative_residual });
    }
    Ok((SpaceTimeVector::from_vec(op.n_t(), op.m_x(), x)?, report))
}

/// `|| u_h - clamp(target, bounds) ||_{L2(Q)}`.
pub fn l2q_error(
    op: &SystemOperator,
    u: &SpaceTimeVector,
    target: impl Fn(&[f64], f64) -> f64,
    bounds: Option<(f64, f64)>,
    order: usize,
) -> Result<f64> {
    op.l2_error(u, target, bounds, order)
}

/// `(t_j, u_h(point, t_j))` for `j = 0..=N_t`, starting with `(0, 0)`.
pub fn extract_trajectory(
    temporal: &TemporalMesh,
    spatial: &SimplicialMesh,
    u: &SpaceTimeVector,
    point: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if u.n_t() != temporal.n_dofs() || u.m_x() != spatial.n_dofs() {
        return Err(Error::DimensionMismatch { expected: temporal.n_dofs() * spatial.n_dofs(), got: u.len() });
    }
    let (verts, bary) = spatial.locate(point)?;
    let weights: Vec<(usize, f64)> =
        verts.iter().zip(&bary).filter_map(|(&v, &b)| spatial.vertex_dof(v).map(|d| (d, b))).collect();
    let mut out = Vec::with_capacity(u.n_t() + 1);
    out.push((0.0, 0.0));
    for k in 0..u.n_t() {
        let slice = u.slice(k);
        out.push((temporal.dof_time(k), weights.iter().map(|(d, b)| b * slice[*d]).sum()));
    }
    Ok(out)
}

/// One row of `convergence_hist.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub dof: usize,
    pub newton_iterations: usize,
    pub total_cg: usize,
    pub rel_cg: f64,
}

impl ConvergenceRecord {
    pub fn from_result(n: usize, dof: usize, result: &NewtonResult) -> Self {
        let newton_iterations = result.newton_iterations();
        let total_cg = result.total_cg_iterations();
        let rel_cg = if newton_iterations == 0 { 0.0 } else { total_cg as f64 / newton_iterations as f64 };
        Self { n, dof, newton_iterations, total_cg, rel_cg }
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedLevel {
    pub n: usize,
    pub n_t: usize,
    pub rho: f64,
    pub record: ConvergenceRecord,
    pub trajectory: Vec<(f64, f64)>,
    pub result: NewtonResult,
    /// Largest nodal excursion outside `[lower, upper]`.
    pub bound_violation: f64,
    /// `||F2||_inf`
    pub complementarity: f64,
    /// Largest violation of `lambda <= 0` (upper-active), `lambda >= 0`
    /// (lower-active), `lambda = 0` (inactive).
    pub sign_violation: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentSummary {
    pub levels: Vec<ConstrainedLevel>,
    /// `(n, message)` of aborted levels.
    pub failures: Vec<(usize, String)>,
}

impl ExperimentSummary {
    pub fn records(&self) -> Vec<ConvergenceRecord> {
        self.levels.iter().map(|l| l.record.clone()).collect()
    }
}

fn constant_bounds(config: &RunConfig) -> Result<(f64, f64)> {
    match (config.lower, config.upper) {
        (Some(lo), Some(hi)) => Ok((lo, hi)),
        _ => Err(Error::Config("the constrained run needs finite --lower and --upper".into())),
    }
}

/// Constrained solve with `n_x = n` and the `n_t` / `rho` rules of `config`.
pub fn run_constrained_level(config: &RunConfig, n: usize) -> Result<(SystemOperator, ConstrainedLevel)> {
    let (lo, hi) = constant_bounds(config)?;
    let target = builtin_target(&config.target)?;
    let op = build_operator(config, n)?;
    let f = op.assemble_load_vector(target, config.quadrature)?;
    let constraints = BoxConstraints::constant(&op, lo, hi)?;
    let result = newton_solve(&op, &f, &constraints, &config.newton, None)?;
    let (_, complementarity) = complementarity_defect(&op, &result.u, &result.lambda, &f, &constraints, config.newton.c)?;
    let bound_violation =
        result.u.as_slice().iter().map(|&u| (lo - u).max(u - hi).max(0.0)).fold(0.0, f64::max);
    let sign_violation = result
        .partition
        .states()
        .iter()
        .zip(result.lambda.as_slice())
        .map(|(s, &l)| match s {
            DofState::UpperActive => l.max(0.0),
            DofState::LowerActive => (-l).max(0.0),
            DofState::Inactive => l.abs(),
        })
        .fold(0.0, f64::max);
    let trajectory = extract_trajectory(op.temporal_mesh(), op.spatial_mesh(), &result.u, &config.point)?;
    let error = op.l2_error(&result.u, target, Some((lo, hi)), config.error_order)?;
    let level = ConstrainedLevel {
        n,
        n_t: op.n_t(),
        rho: op.rho(),
        record: ConvergenceRecord::from_result(n, op.n_dofs(), &result),
        trajectory,
        result,
        bound_violation,
        complementarity,
        sign_violation,
        error,
    };
    Ok((op, level))
}

fn log_level(log: &mut String, level: &ConstrainedLevel) {
    let r = &level.record;
    let _ = writeln!(
        log,
        "level n={} n_t={} dof={} rho={:e}: newton={} total_cg={} converged={} |F2|={:.3e} bound_violation={:.3e} error={:.6e}",
        r.n,
        level.n_t,
        r.dof,
        level.rho,
        r.newton_iterations,
        r.total_cg,
        level.result.converged,
        level.complementarity,
        level.bound_violation,
        level.error
    );
    for (k, it) in level.result.history.iter().enumerate() {
        let _ = writeln!(
            log,
            "  iter {k}: active lower/upper {}/{} inactive {} cg {} cg_residual {:.3e} increment {:.3e}",
            it.lower_active, it.upper_active, it.inactive, it.cg_iterations, it.cg_relative_residual, it.increment
        );
    }
}

/// Runs every level of `config.levels` with `n_x = n`, writing
/// `convergence_hist.csv`, `trajectory_constrained_<d>d_refinement_<k>.csv`
/// (k is the level index) and `run.log` into `config.out_dir`.
pub fn run_constrained_experiment(config: &RunConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    constant_bounds(config)?;
    fs::create_dir_all(&config.out_dir)?;
    let mut log = String::new();
    let _ = writeln!(log, "# constrained experiment d={} target={} bounds={:?}", config.dim, config.target, config.bounds());
    let _ = writeln!(
        log,
        "# c={} omega={} newton_tol={:e} cg_tol={:e}; TotalCG counts every inner CG iteration of every Newton step",
        config.newton.c, config.newton.omega, config.newton.increment_tol, config.newton.cg_rel_tol
    );
    let mut summary = ExperimentSummary::default();
    for (k, &n) in config.levels.iter().enumerate() {
        match run_constrained_level(config, n) {
            Ok((_, level)) => {
                log::info!(
                    "n={n}: {} Newton steps, {} CG iterations",
                    level.record.newton_iterations,
                    level.record.total_cg
                );
                log_level(&mut log, &level);
                let name = format!("trajectory_constrained_{}d_refinement_{k}.csv", config.dim);
                write_trajectory_csv(&config.out_dir.join(name), &level.trajectory)?;
                summary.levels.push(level);
            }
            Err(e) => {
                log::error!("level n={n} aborted: {e}");
                let _ = writeln!(log, "level n={n} aborted: {e}");
                summary.failures.push((n, e.to_string()));
            }
        }
    }
    write_convergence_csv(&config.out_dir.join("convergence_hist.csv"), &summary.records())?;
    fs::write(config.out_dir.join("run.log"), log)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub n: usize,
    pub dof: usize,
    pub cg_iterations: usize,
    pub error: f64,
    /// `log2` of the error ratio to the previous level per halving of `h_x`.
    pub order: Option<f64>,
}

/// Unconstrained refinement study over `config.levels`; writes
/// `unconstrained_convergence.csv` when `write` is set.
pub fn run_unconstrained_convergence(config: &RunConfig, write: bool) -> Result<Vec<ErrorRow>> {
    config.validate()?;
    let target = builtin_target(&config.target)?;
    let mut rows: Vec<ErrorRow> = Vec::new();
    for &n in &config.levels {
        let op = build_operator(config, n)?;
        let (u, report) = solve_on(&op, target, config)?;
        let error = op.l2_error(&u, target, None, config.error_order)?;
        let order = rows.last().map(|prev| (prev.error / error).ln() / (n as f64 / prev.n as f64).ln());
        log::info!("n={n}: L2 error {error:.6e}, {} CG iterations", report.iterations);
        rows.push(ErrorRow { n, dof: op.n_dofs(), cg_iterations: report.iterations, error, order });
    }
    if write {
        fs::create_dir_all(&config.out_dir)?;
        let mut s = String::from("n,dof,error,order\n");
        for r in &rows {
            let order = r.order.map(|o| format!("{o:.4}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{:.10e},{}", r.n, r.dof, r.error, order);
        }
        fs::write(config.out_dir.join("unconstrained_convergence.csv"), s)?;
    }
    Ok(rows)
}

pub fn write_convergence_csv(path: &Path, records: &[ConvergenceRecord]) -> Result<()> {
    let mut s = String::from("n,dof,NewtonIterations,TotalCG,relCG\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{},{:.1}", r.n, r.dof, r.newton_iterations, r.total_cg, r.rel_cg);
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_convergence_csv(path: &Path) -> Result<Vec<ConvergenceRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("n,dof,NewtonIterations,TotalCG,relCG") {
        return Err(Error::Io(format!("{}: unexpected header", path.display())));
    }
    lines
        .map(|line| {
            let bad = || Error::Io(format!("{}: malformed row `{line}`", path.display()));
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(bad());
            }
            Ok(ConvergenceRecord {
                n: cols[0].parse().map_err(|_| bad())?,
                dof: cols[1].parse().map_err(|_| bad())?,
                newton_iterations: cols[2].parse().map_err(|_| bad())?,
                total_cg: cols[3].parse().map_err(|_| bad())?,
                rel_cg: cols[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn write_trajectory_csv(path: &Path, trajectory: &[(f64, f64)]) -> Result<()> {
    let mut s = String::from("t,u\n");
    for (t, u) in trajectory {
        let _ = writeln!(s, "{t},{u}");
    }
    fs::write(path, s)?;
    Ok(())
}

/// Nodal values of a solution together with the mesh parameters that
/// produced them (unit time horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct SavedSolution {
    pub dim: usize,
    pub n_x: usize,
    pub n_t: usize,
    pub values: SpaceTimeVector,
}

impl SavedSolution {
    pub fn meshes(&self) -> Result<(TemporalMesh, SimplicialMesh)> {
        Ok((TemporalMesh::unit(self.n_t)?, SimplicialMesh::structured(self.dim, self.n_x)?))
    }
}

/// Text format: a header line `dim n_x n_t`, then one value per line
/// in slice-major order.
pub fn write_solution(path: &Path, op: &SystemOperator, u: &SpaceTimeVector) -> Result<()> {
    let mut s = format!("{} {} {}\n", op.spatial_mesh().dim(), op.spatial_mesh().cells_per_axis(), op.n_t());
    for v in u.as_slice() {
        let _ = writeln!(s, "{v:e}");
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_solution(path: &Path) -> Result<SavedSolution> {
    let text = fs::read_to_string(path)?;
    let bad = |what: &str| Error::Io(format!("{}: {what}", path.display()));
    let mut lines = text.lines();
    let header: Vec<usize> = lines
        .next()
        .ok_or_else(|| bad("empty file"))?
        .split_whitespace()
        .map(|x| x.parse().map_err(|_| bad("malformed header")))
        .collect::<Result<_>>()?;
    let [dim, n_x, n_t] = header[..] else {
        return Err(bad("header must be `dim n_x n_t`"));
    };
    let values: Vec<f64> = lines.map(|l| l.trim().parse().map_err(|_| bad("malformed value"))).collect::<Result<_>>()?;
    let m_x = SimplicialMesh::structured(dim, n_x)?.n_dofs();
    Ok(SavedSolution { dim, n_x, n_t, values: SpaceTimeVector::from_vec(n_t, m_x, values)? })
}
