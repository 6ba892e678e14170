//! Acceptance suite: one line per criterion, nonzero exit status on failure.

mod common;

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{rngs::StdRng, Rng, SeedableRng};
use spacetime_oc::experiments::{parse_config, run_constrained_level, run_unconstrained_convergence};
use spacetime_oc::newton::{newton_solve, BoxConstraints, NewtonConfig};
use spacetime_oc::spacetime::{
    EigenStrategy, OperatorKind, OperatorOptions, QuadratureOrders, SpaceTimeVector, SystemOperator,
};
use spacetime_oc::spatial::SimplicialMesh;
use spacetime_oc::temporal::{
    assemble_hilbert_stiffness, assemble_temporal_mass, solve_generalized_evp, try_fast_eigenbasis, EigenMode,
    HilbertOptions, TemporalMesh,
};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn operator(d: usize, n_x: usize, n_t: usize, rho: f64, eigen: EigenStrategy) -> SystemOperator {
    let opts = OperatorOptions { eigen, ..Default::default() };
    SystemOperator::assemble(TemporalMesh::unit(n_t).unwrap(), SimplicialMesh::structured(d, n_x).unwrap(), rho, &opts)
        .unwrap()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    num / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300)
}

fn zeta3() -> f64 {
    // sum_{k<K} k^-3 + Euler-Maclaurin tail
    let big_k = 1000.0f64;
    let s: f64 = (1..1000).map(|k| (k as f64).powi(-3)).sum();
    s + 1.0 / (2.0 * big_k * big_k) + 1.0 / (2.0 * big_k.powi(3)) + 1.0 / (4.0 * big_k.powi(4))
}

fn c1_hilbert_value() -> Outcome {
    let start = Instant::now();
    let a = assemble_hilbert_stiffness(&TemporalMesh::unit(1).unwrap(), &HilbertOptions::default()).unwrap();
    let exact = 14.0 * zeta3() / std::f64::consts::PI.powi(3);
    let err = (a.get(0, 0) - exact).abs();
    let elapsed = start.elapsed();
    check(err < 1e-8 && elapsed < Duration::from_secs(1), format!("A[1,1] = {:.12}, 14 zeta(3)/pi^3 = {exact:.12}, error {err:.2e}", a.get(0, 0)))
}

fn c2_dense_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for &(d, n_x, n_t) in &[(1usize, 4usize, 4usize), (1, 8, 3), (2, 3, 5)] {
        for rho in [0.0, 0.1, (n_x as f64).powi(-2)] {
            let op = operator(d, n_x, n_t, rho, EigenStrategy::Auto);
            let mats = [
                op.dense_oracle(OperatorKind::System).unwrap(),
                op.dense_oracle(OperatorKind::Energy).unwrap(),
                op.dense_oracle(OperatorKind::Control).unwrap(),
            ];
            for _ in 0..20 {
                let v = SpaceTimeVector::from_fn(op.n_t(), op.m_x(), |_, _| rng.gen_range(-1.0..1.0));
                let dv = DVector::from_column_slice(v.as_slice());
                let got = [op.apply_operator(&v).unwrap(), op.apply_energy_operator(&v).unwrap(), op.recover_control(&v).unwrap()];
                for (m, g) in mats.iter().zip(&got) {
                    worst = worst.max(rel_diff(g.as_slice(), (m * &dv).as_slice()));
                }
            }
        }
    }
    check(worst <= 1e-10, format!("max relative deviation {worst:.2e} over 9 configurations x 20 vectors"))
}

fn c3_eigenbasis() -> Outcome {
    let mut worst_orth = 0.0f64;
    let mut worst_res = 0.0f64;
    for n in [1usize, 8, 64, 128] {
        let mesh = TemporalMesh::unit(n).unwrap();
        let a = assemble_hilbert_stiffness(&mesh, &HilbertOptions::default()).unwrap();
        let m = assemble_temporal_mass(&mesh);
        for basis in [solve_generalized_evp(&a, &m).unwrap(), try_fast_eigenbasis(&mesh, &a, &m, 1e-8).unwrap()] {
            let lmax = *basis.eigenvalues().last().unwrap();
            worst_orth = worst_orth.max(basis.orthonormality_defect());
            worst_res = worst_res.max(basis.residual(&a) / lmax);
        }
    }
    let errors: Vec<f64> = [8usize, 16, 32, 64]
        .iter()
        .map(|&n| {
            let mesh = TemporalMesh::unit(n).unwrap();
            let a = assemble_hilbert_stiffness(&mesh, &HilbertOptions::default()).unwrap();
            let basis = solve_generalized_evp(&a, &assemble_temporal_mass(&mesh)).unwrap();
            (basis.eigenvalues()[0] - std::f64::consts::FRAC_PI_2).abs()
        })
        .collect();
    let order = (errors[2] / errors[3]).log2();
    let errors: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    check(
        worst_orth <= 1e-10 && worst_res <= 1e-10 && order >= 1.9,
        format!("|C^T M C - I| {worst_orth:.1e}, residual/lambda_max {worst_res:.1e}, lambda_1 order {order:.2} (errors [{}])", errors.join(", ")),
    )
}

fn c4_unconstrained_rate() -> Outcome {
    let config = parse_config(["--dim", "1", "--levels", "8,16,32,64,128", "--lower", "none", "--upper", "none"]).unwrap();
    let rows = run_unconstrained_convergence(&config, false).unwrap();
    let order = rows.last().unwrap().order.unwrap();
    let errors: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.error)).collect();
    check((1.7..=2.3).contains(&order), format!("finest-ratio order {order:.3}, errors [{}]", errors.join(", ")))
}

fn constrained(levels: &[usize]) -> Vec<spacetime_oc::experiments::ConstrainedLevel> {
    let config = parse_config(["--dim", "3"]).unwrap();
    levels.iter().map(|&n| run_constrained_level(&config, n).unwrap().1).collect()
}

fn c5_constrained_feasibility() -> Outcome {
    let levels = constrained(&[2, 4, 8]);
    let ok = levels.iter().all(|l| {
        l.result.converged && l.bound_violation <= 1e-8 && l.complementarity <= 1e-6 && l.sign_violation <= 1e-8
    });
    let detail: Vec<String> = levels
        .iter()
        .map(|l| {
            format!(
                "n={}: newton {} |F2| {:.1e} bounds {:.1e} sign {:.1e}",
                l.n, l.record.newton_iterations, l.complementarity, l.bound_violation, l.sign_violation
            )
        })
        .collect();
    check(ok, detail.join("; "))
}

fn c6_trajectory_plateau() -> Outcome {
    let levels = constrained(&[2, 4, 8, 16]);
    let maxima: Vec<f64> = levels.iter().map(|l| l.trajectory.iter().map(|p| p.1).fold(f64::MIN, f64::max)).collect();
    let target = (0.51 * std::f64::consts::PI).sin().powi(3);
    let capped = maxima.iter().all(|&m| m <= 0.8 + 1e-8);
    let finest = *maxima.last().unwrap();
    check(
        capped && finest >= 0.79,
        format!("trajectory maxima {maxima:.4?} (n=2..16), target peak {target:.4}"),
    )
}

fn c7_preconditioning() -> Outcome {
    let config = parse_config(["--dim", "1"]).unwrap();
    let per_step: Vec<f64> =
        [8usize, 16, 32, 64].iter().map(|&n| run_constrained_level(&config, n).unwrap().1.record.rel_cg).collect();
    let ratio = per_step.iter().cloned().fold(f64::MIN, f64::max) / per_step.iter().cloned().fold(f64::MAX, f64::min);
    check(ratio < 3.0, format!("d=1 CG per Newton step {per_step:.1?} for n=8..64, spread {ratio:.2}"))
}

fn c8_brute_force_qp() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut mixed = 0;
    for &(n_x, n_t) in &[(2usize, 6usize), (3, 3), (4, 2), (2, 3)] {
        for (scale, clip_lo, clip_hi) in [(3.0, 0.6, 0.6), (-4.0, 0.4, 0.8), (0.5, 1.5, 0.3)] {
            let op = operator(1, n_x, n_t, 0.05, EigenStrategy::Auto);
            let f = op
                .assemble_load_vector(
                    |x, t| scale * (std::f64::consts::PI * x[0]).sin() * (2.0 * std::f64::consts::PI * t).sin() + 0.2 * t,
                    QuadratureOrders::default(),
                )
                .unwrap();
            // bounds cut through the range of the unconstrained minimizer
            let free = op
                .dense_oracle(OperatorKind::System)
                .unwrap()
                .cholesky()
                .unwrap()
                .solve(&DVector::from_column_slice(f.as_slice()));
            let lo = (clip_lo * free.min()).min(-1e-3);
            let hi = (clip_hi * free.max()).max(1e-3);
            let constraints = BoxConstraints::constant(&op, lo, hi).unwrap();
            let k = op.dense_oracle(OperatorKind::System).unwrap();
            let expected =
                common::brute_force_qp(&k, f.as_slice(), constraints.lower().as_slice(), constraints.upper().as_slice());
            let res = newton_solve(&op, &f, &constraints, &NewtonConfig { omega: 1.0, ..Default::default() }, None).unwrap();
            let diff = res.u.as_slice().iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(if res.converged { diff } else { f64::INFINITY });
            let (lower, upper, inactive) = res.partition.counts();
            if inactive > 0 && lower + upper > 0 {
                mixed += 1;
            }
            count += 1;
        }
    }
    check(
        worst <= 1e-8 && mixed * 2 >= count,
        format!("{count} instances ({mixed} with both active and inactive dofs), max deviation from exhaustive enumeration {worst:.2e}"),
    )
}

/// Best per-apply time over 5 batches of at least 50 ms each.
fn time_apply(op: &SystemOperator) -> f64 {
    let v: Vec<f64> = (0..op.n_dofs()).map(|j| ((j * 7919) % 1000) as f64 / 1000.0).collect();
    let mut w = vec![0.0; v.len()];
    op.apply_into(&v, &mut w);
    let t = Instant::now();
    op.apply_into(&v, &mut w);
    let reps = ((0.05 / t.elapsed().as_secs_f64()) as usize).max(1);
    let mut best = f64::MAX;
    for _ in 0..5 {
        let t = Instant::now();
        for _ in 0..reps {
            op.apply_into(&v, &mut w);
        }
        best = best.min(t.elapsed().as_secs_f64() / reps as f64);
    }
    best
}

fn c9_fast_path() -> Outcome {
    let fast = operator(1, 8, 256, 1.0 / 64.0, EigenStrategy::Auto);
    if fast.eigen_mode() != EigenMode::FastSine {
        return Outcome::Skip("fast eigenbasis rejected by validation".into());
    }
    let dense = operator(1, 8, 256, 1.0 / 64.0, EigenStrategy::Dense);
    let mut rng = StdRng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let v = SpaceTimeVector::from_fn(fast.n_t(), fast.m_x(), |_, _| rng.gen_range(-1.0..1.0));
        worst = worst.max(rel_diff(fast.apply_operator(&v).unwrap().as_slice(), dense.apply_operator(&v).unwrap().as_slice()));
    }
    let mut times = Vec::new();
    for n_t in [256usize, 512, 1024, 2048, 4096] {
        let op = operator(1, 16, n_t, 1.0 / 256.0, EigenStrategy::Auto);
        if op.eigen_mode() != EigenMode::FastSine {
            return Outcome::Skip(format!("fast eigenbasis rejected at N_t = {n_t}"));
        }
        times.push(time_apply(&op));
    }
    // least-squares slope of log2(time) against log2(N_t)
    let xs: Vec<f64> = (0..times.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.log2()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let growth = slope.exp2();
    let worst_step = times.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let shown: Vec<String> = times.iter().map(|t| format!("{:.3}ms", t * 1e3)).collect();
    check(
        worst <= 1e-10 && growth <= 2.6,
        format!(
            "fast vs dense {worst:.1e}; M_x=15 apply time [{}] for N_t=256..4096, fitted growth per doubling {growth:.2}, largest single step {worst_step:.2}",
            shown.join(", ")
        ),
    )
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("1 hilbert stiffness analytic value", c1_hilbert_value),
        ("2 dense oracle equivalence", c2_dense_oracle),
        ("3 eigenbasis contracts", c3_eigenbasis),
        ("4 unconstrained L2 rate", c4_unconstrained_rate),
        ("5 constrained feasibility and complementarity", c5_constrained_feasibility),
        ("6 trajectory plateau at the upper bound", c6_trajectory_plateau),
        ("7 preconditioning robustness", c7_preconditioning),
        ("8 brute-force QP oracle", c8_brute_force_qp),
        ("9 fast sine path", c9_fast_path),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Outcome::Pass(d) => println!("criterion {name}: PASS ({d}) [{secs:.1}s]"),
            Outcome::Skip(d) => println!("criterion {name}: SKIP ({d}) [{secs:.1}s]"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("criterion {name}: FAIL ({d}) [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
