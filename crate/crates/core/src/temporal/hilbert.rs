//! Stiffness matrix of the modified Hilbert transform,
//! `A[j,i] = <d/dt phi_i, H_T phi_j>`.
//!
//! Expanding both arguments in the sine/cosine system of `H_T` gives
//!
//! ```text
//! A = sum_k (2/T) w_k b_k b_k^T,   w_k = (pi/2 + k pi)/T,
//! b_k[i] = int phi_i sin(w_k t) dt.
//! ```
//!
//! On a uniform mesh `w_k^2 b_k` depends on `k` only through `k mod 2N`, and
//! it equals `d_i c_k sin(w_k t_i)` with `c_k = (2 - 2 cos(w_k h))/h`,
//! `d_i = 1` except `d_N = 1/2` for the half hat. The series therefore
//! collapses onto `2N` residue classes, each carrying the scalar weight
//! `(2/T) sum_q w_{r+2Nq}^{-3}`, and
//!
//! ```text
//! A[i,j] = d_i d_j / 2 * (g(i - j) - g(i + j)),
//! g(m)   = sum_r weight_r c_r^2 cos(w_r m h).
//! ```

use nalgebra::DMatrix;

use super::{DenseSymMatrix, TemporalMesh};
use crate::error::{Error, Result};

/// Frequency `(pi/2 + k pi)/T` of the k-th sine mode.
pub fn mode_frequency(horizon: f64, k: usize) -> f64 {
    (k as f64 + 0.5) * std::f64::consts::PI / horizon
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HilbertOptions {
    /// Relative truncation error of each class series: explicit summation
    /// stops once the bound on the Euler-Maclaurin remainder is below it.
    pub series_tol: f64,
    /// Cap on the explicitly summed terms of a single class series.
    pub max_terms: usize,
}

impl Default for HilbertOptions {
    fn default() -> Self {
        Self { series_tol: 1e-10, max_terms: 1_000_000 }
    }
}

/// `sum_{q >= 0} (a + q p)^{-3}`: explicit terms, then an Euler-Maclaurin
/// tail through `B_8`. The tail error is below the first omitted correction
/// `|B_10 f^(9)| / 10! ~ 0.0106 y^-12`, which sets the stopping point.
fn cubic_class_sum(a: f64, p: f64, tol: f64, max_terms: usize) -> Result<(f64, usize)> {
    let x = a / p;
    let mut sum = 0.0;
    let mut q = 0usize;
    loop {
        sum += (x + q as f64).powi(-3);
        q += 1;
        if q >= 10 && 0.0106 * (x + q as f64).powi(-12) <= tol * sum {
            break;
        }
        if q >= max_terms {
            return Err(Error::SeriesCap { tol, cap: max_terms });
        }
    }
    let y = x + q as f64;
    let y2 = y * y;
    let tail = 1.0 / (2.0 * y2) + 1.0 / (2.0 * y2 * y) + 1.0 / (4.0 * y2 * y2)
        - 1.0 / (12.0 * y2 * y2 * y2)
        + 1.0 / (12.0 * y2 * y2 * y2 * y2)
        - 0.15 / (y2 * y2 * y2 * y2 * y2);
    Ok(((sum + tail) / (p * p * p), q))
}

/// Assembles the dense Hilbert-transform stiffness matrix.
pub fn assemble_hilbert_stiffness(mesh: &TemporalMesh, opts: &HilbertOptions) -> Result<DenseSymMatrix> {
    if !(opts.series_tol > 0.0) {
        return Err(Error::Config(format!("series_tol must be positive, got {}", opts.series_tol)));
    }
    let n = mesh.n_dofs();
    let horizon = mesh.horizon();
    let h = mesh.step();
    let period = 2 * n;
    let p = period as f64 * std::f64::consts::PI / horizon;

    let mut class_weight = Vec::with_capacity(period);
    let mut total_terms = 0usize;
    for r in 0..period {
        let w = mode_frequency(horizon, r);
        let (s, used) = cubic_class_sum(w, p, opts.series_tol, opts.max_terms)?;
        total_terms += used;
        let c = (2.0 - 2.0 * (w * h).cos()) / h;
        class_weight.push(2.0 / horizon * s * c * c);
    }
    log::debug!("hilbert stiffness: N={n}, {total_terms} explicit series terms");

    // g(m) for m = 0..=2N; the argument w_r m h = (r + 1/2) pi m / N
    let g: Vec<f64> = (0..=period)
        .map(|m| {
            class_weight
                .iter()
                .enumerate()
                .map(|(r, wt)| wt * ((r as f64 + 0.5) * std::f64::consts::PI * m as f64 / n as f64).cos())
                .sum()
        })
        .collect();

    let scale = |i: usize| if i + 1 == n { 0.5 } else { 1.0 };
    let a = DMatrix::from_fn(n, n, |i, j| {
        // dof i lives at node i+1
        let (ii, jj) = (i + 1, j + 1);
        let diff = ii.abs_diff(jj);
        0.5 * scale(i) * scale(j) * (g[diff] - g[ii + jj])
    });
    Ok(DenseSymMatrix::symmetrized(a))
}
