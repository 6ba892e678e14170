//! Matrix-free preconditioned conjugate gradients with a diagonal
//! preconditioner built from the space-time mass matrix.

use crate::error::{Error, Result};
use crate::spacetime::dot;
use crate::spatial::SparseSymMatrix;
use crate::temporal::TriDiagonalMatrix;

/// Diagonal preconditioner storing reciprocal diagonal entries.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn identity(n: usize) -> Self {
        Self { inv_diag: vec![1.0; n] }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let mut inv_diag = Vec::with_capacity(diag.len());
        for (j, &d) in diag.iter().enumerate() {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::NotPositiveDefinite(format!("diagonal entry {j} is {d}")));
            }
            inv_diag.push(1.0 / d);
        }
        Ok(Self { inv_diag })
    }

    pub fn len(&self) -> usize {
        self.inv_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_diag.is_empty()
    }

    pub fn inverse_diagonal(&self) -> &[f64] {
        &self.inv_diag
    }

    /// `z = P^{-1} r`
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * d;
        }
    }
}

/// Diagonal of `M_t (x) M_x`, with entries on `active_mask` replaced by one.
pub fn build_mass_diag_preconditioner(
    mass_t: &TriDiagonalMatrix,
    mass_x: &SparseSymMatrix,
    active_mask: Option<&[bool]>,
) -> Result<JacobiPreconditioner> {
    let dt = mass_t.main();
    let dx = mass_x.diagonal();
    let n = dt.len() * dx.len();
    if let Some(mask) = active_mask {
        if mask.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mask.len() });
        }
    }
    let mut diag = Vec::with_capacity(n);
    for (k, a) in dt.iter().enumerate() {
        for (i, b) in dx.iter().enumerate() {
            let active = active_mask.is_some_and(|m| m[k * dx.len() + i]);
            diag.push(if active { 1.0 } else { a * b });
        }
    }
    JacobiPreconditioner::from_diagonal(&diag)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// True relative residual `||b - A x|| / ||b||` at exit.
    pub relative_residual: f64,
    pub converged: bool,
    /// Recurrence relative residual after every iteration.
    pub residual_history: Vec<f64>,
}

/// Default iteration cap `10 sqrt(n) + 100`.
pub fn default_max_iter(n: usize) -> usize {
    (10.0 * (n as f64).sqrt()) as usize + 100
}

/// Solves `A x = b` from a zero initial guess.
///
/// Stops on the unpreconditioned relative residual; when the recurrence
/// declares convergence the residual is recomputed explicitly and the
/// iteration continues from it if the true residual has drifted above the
/// tolerance. Non-convergence is reported, not raised; a non-positive
/// curvature `p^T A p` is an error.
pub fn pcg_solve<F>(
    apply: F,
    b: &[f64],
    precond: &JacobiPreconditioner,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    if precond.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: precond.len() });
    }
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        let report = SolveReport { iterations: 0, relative_residual: 0.0, converged: true, residual_history: vec![] };
        return Ok((x, report));
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let mut rel = 1.0;

    for it in 1..=max_iter {
        apply(&p, &mut q);
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            return Err(Error::CgBreakdown { iteration: it, curvature });
        }
        let alpha = rz / curvature;
        for j in 0..n {
            x[j] += alpha * p[j];
            r[j] -= alpha * q[j];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        history.push(rel);
        if rel <= rel_tol {
            apply(&x, &mut q);
            for j in 0..n {
                r[j] = b[j] - q[j];
            }
            rel = dot(&r, &r).sqrt() / b_norm;
            if rel <= rel_tol {
                let report = SolveReport { iterations: it, relative_residual: rel, converged: true, residual_history: history };
                return Ok((x, report));
            }
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for j in 0..n {
            p[j] = z[j] + beta * p[j];
        }
    }
    let report = SolveReport { iterations: max_iter, relative_residual: rel, converged: false, residual_history: history };
    Ok((x, report))
}
