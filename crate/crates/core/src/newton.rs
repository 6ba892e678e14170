//! Semi-smooth Newton (primal-dual active set) iteration for the discrete
//! variational inequality `(K u - f, v - u) >= 0` for all `lower <= v <= upper`.
//!
//! The multiplier is `lambda = K u - f`. Each step classifies the dofs,
//! fixes the active ones at their bound, solves the inactive block
//! `R_I K P_I u_I = R_I (f - K u_A)` by CG with the reduced operator
//! (identity on the active block), and recovers `lambda` on the active set
//! from `K u - lambda - f = 0`.

use crate::error::{Error, Result};
use crate::krylov::{build_mass_diag_preconditioner, default_max_iter, pcg_solve, SolveReport};
use crate::spacetime::{norm_inf, SpaceTimeVector, SystemOperator};

/// Nodal barrier values `I_h u_-`, `I_h u_+`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraints {
    lower: SpaceTimeVector,
    upper: SpaceTimeVector,
}

impl BoxConstraints {
    /// Requires `lower < upper` strictly and `lower <= 0 <= upper` at every dof.
    pub fn new(lower: SpaceTimeVector, upper: SpaceTimeVector) -> Result<Self> {
        if !lower.same_shape(&upper) {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        for (j, (lo, hi)) in lower.as_slice().iter().zip(upper.as_slice()).enumerate() {
            if !(lo < hi) {
                return Err(Error::InvalidConstraints(format!("lower bound {lo} not below upper bound {hi} at dof {j}")));
            }
            if *lo > 0.0 || *hi < 0.0 {
                return Err(Error::InvalidConstraints(format!("zero is not admissible at dof {j}: [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn constant(op: &SystemOperator, lower: f64, upper: f64) -> Result<Self> {
        Self::new(op.interpolate(|_, _| lower), op.interpolate(|_, _| upper))
    }

    /// Nodal interpolation of barrier functions `(x, t) -> value`.
    pub fn from_functions(
        op: &SystemOperator,
        lower: impl Fn(&[f64], f64) -> f64,
        upper: impl Fn(&[f64], f64) -> f64,
    ) -> Result<Self> {
        Self::new(op.interpolate(lower), op.interpolate(upper))
    }

    pub fn lower(&self) -> &SpaceTimeVector {
        &self.lower
    }

    pub fn upper(&self) -> &SpaceTimeVector {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Midpoint `(lower + upper) / 2`.
    pub fn midpoint(&self) -> SpaceTimeVector {
        let mut m = self.lower.clone();
        m.as_mut_slice().iter_mut().zip(self.upper.as_slice()).for_each(|(a, b)| *a = 0.5 * (*a + b));
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofState {
    Inactive,
    LowerActive,
    UpperActive,
}

/// Disjoint lower-active / upper-active / inactive index sets covering all dofs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSetPartition {
    states: Vec<DofState>,
}

impl ActiveSetPartition {
    pub fn from_states(states: Vec<DofState>) -> Self {
        Self { states }
    }

    pub fn all_inactive(n: usize) -> Self {
        Self { states: vec![DofState::Inactive; n] }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, j: usize) -> DofState {
        self.states[j]
    }

    pub fn states(&self) -> &[DofState] {
        &self.states
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.states[j] != DofState::Inactive
    }

    pub fn active_mask(&self) -> Vec<bool> {
        self.states.iter().map(|s| *s != DofState::Inactive).collect()
    }

    fn indices(&self, which: DofState) -> Vec<usize> {
        self.states.iter().enumerate().filter(|(_, s)| **s == which).map(|(j, _)| j).collect()
    }

    pub fn lower_active(&self) -> Vec<usize> {
        self.indices(DofState::LowerActive)
    }

    pub fn upper_active(&self) -> Vec<usize> {
        self.indices(DofState::UpperActive)
    }

    pub fn inactive(&self) -> Vec<usize> {
        self.indices(DofState::Inactive)
    }

    /// `(lower-active, upper-active, inactive)` counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for s in &self.states {
            match s {
                DofState::LowerActive => c.0 += 1,
                DofState::UpperActive => c.1 += 1,
                DofState::Inactive => c.2 += 1,
            }
        }
        c
    }
}

/// Lower-active iff `lambda + c (lower - u) > 0`, upper-active iff
/// `lambda + c (upper - u) < 0`, inactive otherwise.
pub fn classify_active_sets(
    u: &SpaceTimeVector,
    lambda: &SpaceTimeVector,
    constraints: &BoxConstraints,
    c: f64,
) -> ActiveSetPartition {
    let states = u
        .as_slice()
        .iter()
        .zip(lambda.as_slice())
        .zip(constraints.lower.as_slice().iter().zip(constraints.upper.as_slice()))
        .map(|((&uj, &lj), (&lo, &hi))| {
            if lj + c * (lo - uj) > 0.0 {
                DofState::LowerActive
            } else if lj + c * (hi - uj) < 0.0 {
                DofState::UpperActive
            } else {
                DofState::Inactive
            }
        })
        .collect();
    ActiveSetPartition { states }
}

/// `F1 = K u - lambda - f`,
/// `F2 = lambda - min(0, lambda + c (upper - u)) - max(0, lambda + c (lower - u))`.
pub fn semismooth_residual(
    op: &SystemOperator,
    u: &SpaceTimeVector,
    lambda: &SpaceTimeVector,
    f: &SpaceTimeVector,
    constraints: &BoxConstraints,
    c: f64,
) -> Result<(SpaceTimeVector, SpaceTimeVector)> {
    let mut f1 = op.apply_operator(u)?;
    f1.as_mut_slice()
        .iter_mut()
        .zip(lambda.as_slice())
        .zip(f.as_slice())
        .for_each(|((r, l), fj)| *r -= l + fj);
    let mut f2 = lambda.clone();
    let lo = constraints.lower.as_slice();
    let hi = constraints.upper.as_slice();
    for (j, r) in f2.as_mut_slice().iter_mut().enumerate() {
        let (uj, lj) = (u.as_slice()[j], lambda.as_slice()[j]);
        *r = lj - (lj + c * (hi[j] - uj)).min(0.0) - (lj + c * (lo[j] - uj)).max(0.0);
    }
    Ok((f1, f2))
}

/// `w = R_I K P_I v` on inactive indices and `w = v` on active indices.
pub fn apply_reduced_operator(op: &SystemOperator, partition: &ActiveSetPartition, v: &[f64], out: &mut [f64]) {
    let mut masked = v.to_vec();
    for (j, m) in masked.iter_mut().enumerate() {
        if partition.is_active(j) {
            *m = 0.0;
        }
    }
    op.apply_into(&masked, out);
    for (j, o) in out.iter_mut().enumerate() {
        if partition.is_active(j) {
            *o = v[j];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Complementarity parameter `c > 0`.
    pub c: f64,
    /// Underrelaxation factor in `(0, 1]`.
    pub omega: f64,
    /// Bound on `||du||_inf + ||dlambda||_inf` between subsequent iterates.
    pub increment_tol: f64,
    pub cg_rel_tol: f64,
    pub max_newton: usize,
    /// Inner CG cap; `None` uses `10 sqrt(n) + 100`.
    pub cg_max_iter: Option<usize>,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { c: 1.0, omega: 0.1, increment_tol: 1e-3, cg_rel_tol: 1e-10, max_newton: 200, cg_max_iter: None }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::Config(format!("omega must lie in (0, 1], got {}", self.omega)));
        }
        if !(self.increment_tol > 0.0) {
            return Err(Error::Config(format!("increment tolerance must be positive, got {}", self.increment_tol)));
        }
        if !(self.cg_rel_tol > 0.0 && self.cg_rel_tol < 1.0) {
            return Err(Error::Config(format!("CG tolerance must lie in (0, 1), got {}", self.cg_rel_tol)));
        }
        Ok(())
    }
}

/// Full (undamped) Newton step from a given partition.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub u: SpaceTimeVector,
    pub lambda: SpaceTimeVector,
    pub partition: ActiveSetPartition,
    pub cg: SolveReport,
}

/// One semi-smooth Newton step from `(u, lambda)`.
pub fn newton_step(
    op: &SystemOperator,
    f: &SpaceTimeVector,
    constraints: &BoxConstraints,
    config: &NewtonConfig,
    u: &SpaceTimeVector,
    lambda: &SpaceTimeVector,
) -> Result<StepOutcome> {
    let partition = classify_active_sets(u, lambda, constraints, config.c);
    step_from_partition(op, f, constraints, config, partition, 0)
}

fn step_from_partition(
    op: &SystemOperator,
    f: &SpaceTimeVector,
    constraints: &BoxConstraints,
    config: &NewtonConfig,
    partition: ActiveSetPartition,
    step_index: usize,
) -> Result<StepOutcome> {
    let n = op.n_dofs();
    let mut u_active = op.zeros();
    for (j, s) in partition.states().iter().enumerate() {
        u_active.as_mut_slice()[j] = match s {
            DofState::LowerActive => constraints.lower.as_slice()[j],
            DofState::UpperActive => constraints.upper.as_slice()[j],
            DofState::Inactive => 0.0,
        };
    }
    let k_active = op.apply_operator(&u_active)?;
    let rhs: Vec<f64> = (0..n)
        .map(|j| if partition.is_active(j) { 0.0 } else { f.as_slice()[j] - k_active.as_slice()[j] })
        .collect();
    let mask = partition.active_mask();
    let pre = build_mass_diag_preconditioner(op.temporal_mass(), op.spatial_mass(), Some(&mask))?;
    let max_iter = config.cg_max_iter.unwrap_or_else(|| default_max_iter(n));
    let (x, report) = pcg_solve(
        |v, w| apply_reduced_operator(op, &partition, v, w),
        &rhs,
        &pre,
        config.cg_rel_tol,
        max_iter,
    )?;
    if !report.converged {
        return Err(Error::InnerSolve { step: step_index, residual: report.relative_residual });
    }
    let mut u_new = u_active;
    for (j, uj) in u_new.as_mut_slice().iter_mut().enumerate() {
        if !partition.is_active(j) {
            *uj = x[j];
        }
    }
    let ku = op.apply_operator(&u_new)?;
    let mut lambda_new = op.zeros();
    for (j, l) in lambda_new.as_mut_slice().iter_mut().enumerate() {
        if partition.is_active(j) {
            *l = ku.as_slice()[j] - f.as_slice()[j];
        }
    }
    Ok(StepOutcome { u: u_new, lambda: lambda_new, partition, cg: report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub lower_active: usize,
    pub upper_active: usize,
    pub inactive: usize,
    pub cg_iterations: usize,
    pub cg_relative_residual: f64,
    /// `||u^{k+1} - u^k||_inf + ||lambda^{k+1} - lambda^k||_inf`
    pub increment: f64,
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub u: SpaceTimeVector,
    pub lambda: SpaceTimeVector,
    pub partition: ActiveSetPartition,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
}

impl NewtonResult {
    pub fn newton_iterations(&self) -> usize {
        self.history.len()
    }

    pub fn total_cg_iterations(&self) -> usize {
        self.history.iter().map(|r| r.cg_iterations).sum()
    }
}

/// `u0 = (lower + upper) / 2`, `lambda0 = K u0 - f`.
pub fn default_initial_guess(
    op: &SystemOperator,
    f: &SpaceTimeVector,
    constraints: &BoxConstraints,
) -> Result<(SpaceTimeVector, SpaceTimeVector)> {
    let u0 = constraints.midpoint();
    let mut l0 = op.apply_operator(&u0)?;
    l0.as_mut_slice().iter_mut().zip(f.as_slice()).for_each(|(l, fj)| *l -= fj);
    Ok((u0, l0))
}

/// Active-set iteration with underrelaxation
/// `(u, lambda) <- (1 - omega) (u, lambda) + omega (u_step, lambda_step)`.
///
/// Terminates once the partition of the new iterate equals the previous one
/// and, for `omega < 1`, the increment is below `increment_tol` and the
/// undamped step is consistent with its own partition. The returned pair is
/// the undamped step of the converged partition, which satisfies the
/// complementarity system up to the CG tolerance.
pub fn newton_solve(
    op: &SystemOperator,
    f: &SpaceTimeVector,
    constraints: &BoxConstraints,
    config: &NewtonConfig,
    initial: Option<(SpaceTimeVector, SpaceTimeVector)>,
) -> Result<NewtonResult> {
    config.validate()?;
    if f.len() != op.n_dofs() || constraints.len() != op.n_dofs() {
        return Err(Error::DimensionMismatch { expected: op.n_dofs(), got: f.len().min(constraints.len()) });
    }
    let (mut u, mut lambda) = match initial {
        Some(pair) => pair,
        None => default_initial_guess(op, f, constraints)?,
    };
    let relaxed = config.omega < 1.0;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut last: Option<StepOutcome> = None;

    for k in 0..config.max_newton {
        let partition = classify_active_sets(&u, &lambda, constraints, config.c);
        if let Some(step) = &last {
            if partition == step.partition {
                let small = !relaxed || history.last().is_some_and(|r| r.increment < config.increment_tol);
                let consistent = !relaxed
                    || classify_active_sets(&step.u, &step.lambda, constraints, config.c) == step.partition;
                if small && consistent {
                    let step = last.take().unwrap();
                    return Ok(NewtonResult {
                        u: step.u,
                        lambda: step.lambda,
                        partition: step.partition,
                        history,
                        converged: true,
                    });
                }
            }
        }
        let step = step_from_partition(op, f, constraints, config, partition, k)?;
        let mut increment_u = 0.0f64;
        let mut increment_l = 0.0f64;
        for (old, new) in u.as_mut_slice().iter_mut().zip(step.u.as_slice()) {
            let next = (1.0 - config.omega) * *old + config.omega * new;
            increment_u = increment_u.max((next - *old).abs());
            *old = next;
        }
        for (old, new) in lambda.as_mut_slice().iter_mut().zip(step.lambda.as_slice()) {
            let next = (1.0 - config.omega) * *old + config.omega * new;
            increment_l = increment_l.max((next - *old).abs());
            *old = next;
        }
        let (lower_active, upper_active, inactive) = step.partition.counts();
        let record = IterationRecord {
            lower_active,
            upper_active,
            inactive,
            cg_iterations: step.cg.iterations,
            cg_relative_residual: step.cg.relative_residual,
            increment: increment_u + increment_l,
        };
        log::debug!(
            "newton {k}: active -/+ {lower_active}/{upper_active}, inactive {inactive}, cg {}, increment {:.3e}",
            record.cg_iterations,
            record.increment
        );
        history.push(record);
        last = Some(step);
    }
    let partition = classify_active_sets(&u, &lambda, constraints, config.c);
    Ok(NewtonResult { u, lambda, partition, history, converged: false })
}

/// `max(||F1||_inf, ||F2||_inf)`-style diagnostics for a solution pair.
pub fn complementarity_defect(
    op: &SystemOperator,
    u: &SpaceTimeVector,
    lambda: &SpaceTimeVector,
    f: &SpaceTimeVector,
    constraints: &BoxConstraints,
    c: f64,
) -> Result<(f64, f64)> {
    let (f1, f2) = semismooth_residual(op, u, lambda, f, constraints, c)?;
    Ok((norm_inf(f1.as_slice()), norm_inf(f2.as_slice())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacetime::OperatorOptions;
    use crate::spatial::SimplicialMesh;
    use crate::temporal::TemporalMesh;

    fn operator(n_x: usize, n_t: usize, rho: f64) -> SystemOperator {
        SystemOperator::assemble(
            TemporalMesh::unit(n_t).unwrap(),
            SimplicialMesh::structured(1, n_x).unwrap(),
            rho,
            &OperatorOptions::default(),
        )
        .unwrap()
    }

    fn single(v: f64) -> SpaceTimeVector {
        SpaceTimeVector::from_vec(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn classification_examples() {
        let bounds = BoxConstraints::new(single(0.0), single(0.8)).unwrap();
        let state = |u| classify_active_sets(&single(u), &single(0.0), &bounds, 1.0).state(0);
        assert_eq!(state(0.9), DofState::UpperActive);
        assert_eq!(state(0.4), DofState::Inactive);
        assert_eq!(state(-0.2), DofState::LowerActive);
    }

    #[test]
    fn invalid_bounds_rejected() {
        assert!(matches!(BoxConstraints::new(single(0.5), single(0.5)), Err(Error::InvalidConstraints(_))));
        assert!(matches!(BoxConstraints::new(single(0.1), single(0.5)), Err(Error::InvalidConstraints(_))));
    }

    #[test]
    fn upper_active_residual_vanishes() {
        let op = operator(2, 1, 0.1);
        let bounds = BoxConstraints::new(single(-1.0), single(0.3)).unwrap();
        let (_, f2) = semismooth_residual(&op, &single(0.3), &single(-2.0), &single(0.0), &bounds, 1.0).unwrap();
        assert_eq!(f2.as_slice()[0], 0.0);
        let (_, f2) = semismooth_residual(&op, &single(0.1), &single(0.0), &single(0.0), &bounds, 1.0).unwrap();
        assert_eq!(f2.as_slice()[0], 0.0);
    }

    #[test]
    fn reduced_operator_extremes() {
        let op = operator(4, 3, 0.05);
        let v: Vec<f64> = (0..op.n_dofs()).map(|j| (j as f64 * 0.7).sin()).collect();
        let mut w = vec![0.0; v.len()];
        apply_reduced_operator(&op, &ActiveSetPartition::all_inactive(v.len()), &v, &mut w);
        let mut full = vec![0.0; v.len()];
        op.apply_into(&v, &mut full);
        assert_eq!(w, full);
        let all = ActiveSetPartition::from_states(vec![DofState::UpperActive; v.len()]);
        apply_reduced_operator(&op, &all, &v, &mut w);
        assert_eq!(w, v);
    }

    #[test]
    fn config_ranges() {
        assert!(NewtonConfig::default().validate().is_ok());
        assert!(NewtonConfig { omega: 0.0, ..Default::default() }.validate().is_err());
        assert!(NewtonConfig { omega: 1.5, ..Default::default() }.validate().is_err());
        assert!(NewtonConfig { c: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn huge_bounds_reduce_to_unconstrained() {
        let op = operator(4, 4, 1.0 / 16.0);
        let f = op.assemble_load_vector(|x, t| (3.0 * x[0]).sin() * t, Default::default()).unwrap();
        let bounds = BoxConstraints::constant(&op, -1e6, 1e6).unwrap();
        let config = NewtonConfig { omega: 1.0, ..Default::default() };
        let res = newton_solve(&op, &f, &bounds, &config, None).unwrap();
        assert!(res.converged);
        assert_eq!(res.partition.counts().2, op.n_dofs());
        let ku = op.apply_operator(&res.u).unwrap();
        let defect: f64 = ku.as_slice().iter().zip(f.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(defect <= 10.0 * config.cg_rel_tol * f.norm_inf().max(1.0));
    }
}
