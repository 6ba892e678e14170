//! Generalized eigenbasis of the temporal pencil `(A, M)`.
//!
//! Eigenvectors are normalized so that `C^T M C = I`; then `C^{-1} = C^T M`
//! and every transform is a product with a structured matrix.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use rayon::prelude::*;

use super::sine::SineTransform;
use super::{DenseSymMatrix, TemporalMesh, TriDiagonalMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMode {
    Dense,
    FastSine,
}

#[derive(Debug, Clone)]
enum Repr {
    Dense {
        vectors: DMatrix<f64>,
        vectors_t: DMatrix<f64>,
        /// `M C`
        mass_vectors: DMatrix<f64>,
        /// `C^T M`
        mass_vectors_t: DMatrix<f64>,
    },
    FastSine {
        /// `1 / sqrt(s_m^T M s_m)`
        scale: Vec<f64>,
        sine: SineTransform,
    },
}

#[derive(Debug, Clone)]
pub struct TemporalEigenbasis {
    eigenvalues: Vec<f64>,
    mass: TriDiagonalMatrix,
    repr: Repr,
}

#[derive(Clone, Copy)]
enum Transform {
    /// `C^T M`
    Analysis,
    /// `C`
    Synthesis,
    /// `M C`
    MassSynthesis,
}

impl TemporalEigenbasis {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mode(&self) -> EigenMode {
        match self.repr {
            Repr::Dense { .. } => EigenMode::Dense,
            Repr::FastSine { .. } => EigenMode::FastSine,
        }
    }

    /// Ascending generalized eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mass(&self) -> &TriDiagonalMatrix {
        &self.mass
    }

    /// Materializes `C` (columns are the eigenvectors).
    pub fn eigenvectors(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Dense { vectors, .. } => vectors.clone(),
            Repr::FastSine { scale, .. } => sine_columns(self.dim(), scale),
        }
    }

    /// Coefficients in the eigenbasis, `C^T M v`.
    pub fn analysis(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.analysis_slices(v, 1, &mut out);
        out
    }

    /// `C v_hat`
    pub fn synthesis(&self, v_hat: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v_hat.len()];
        self.synthesis_slices(v_hat, 1, &mut out);
        out
    }

    /// `M C v_hat`
    pub fn mass_synthesis(&self, v_hat: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v_hat.len()];
        self.mass_synthesis_slices(v_hat, 1, &mut out);
        out
    }

    /// `(C^T M (x) I) v` on a time-major vector with `width` spatial entries per slice.
    pub fn analysis_slices(&self, input: &[f64], width: usize, out: &mut [f64]) {
        self.transform_slices(Transform::Analysis, input, width, out, &mut self.scratch_for(input));
    }

    /// `(C (x) I) v`
    pub fn synthesis_slices(&self, input: &[f64], width: usize, out: &mut [f64]) {
        self.transform_slices(Transform::Synthesis, input, width, out, &mut self.scratch_for(input));
    }

    /// `(M C (x) I) v`
    pub fn mass_synthesis_slices(&self, input: &[f64], width: usize, out: &mut [f64]) {
        self.transform_slices(Transform::MassSynthesis, input, width, out, &mut self.scratch_for(input));
    }

    /// [`Self::analysis_slices`] with a caller-provided scratch of the input length.
    pub fn analysis_slices_with(&self, input: &[f64], width: usize, out: &mut [f64], scratch: &mut [f64]) {
        self.transform_slices(Transform::Analysis, input, width, out, scratch);
    }

    /// [`Self::mass_synthesis_slices`] with a caller-provided scratch of the input length.
    pub fn mass_synthesis_slices_with(&self, input: &[f64], width: usize, out: &mut [f64], scratch: &mut [f64]) {
        self.transform_slices(Transform::MassSynthesis, input, width, out, scratch);
    }

    fn scratch_for(&self, input: &[f64]) -> Vec<f64> {
        match self.repr {
            Repr::Dense { .. } => Vec::new(),
            Repr::FastSine { .. } => vec![0.0; input.len()],
        }
    }

    fn transform_slices(&self, which: Transform, input: &[f64], width: usize, out: &mut [f64], scratch: &mut [f64]) {
        let n = self.dim();
        assert_eq!(input.len(), n * width);
        assert_eq!(out.len(), n * width);
        match &self.repr {
            Repr::Dense { vectors_t, mass_vectors, mass_vectors_t, .. } => {
                // a time-major buffer is the column-major width x n matrix X;
                // (T (x) I) v corresponds to X T^T
                let right = match which {
                    Transform::Analysis => mass_vectors,
                    Transform::Synthesis => vectors_t,
                    Transform::MassSynthesis => mass_vectors_t,
                };
                let x = DMatrixView::from_slice(input, width, n);
                let mut y = DMatrixViewMut::from_slice(out, width, n);
                y.gemm(1.0, &x, right, 0.0);
            }
            Repr::FastSine { scale, sine } => {
                let columns = &mut scratch[..n * width];
                transpose_into(input, n, width, columns);
                columns.par_chunks_mut(n).for_each_init(
                    || (sine.make_buffer(), vec![0.0; n], vec![0.0; n]),
                    |(buf, tmp, tmp2), col| match which {
                        Transform::Analysis => {
                            self.mass.apply(col, tmp);
                            sine.apply_transpose_with(tmp, col, buf);
                            col.iter_mut().zip(scale).for_each(|(c, s)| *c *= s);
                        }
                        Transform::Synthesis => {
                            tmp.iter_mut().zip(col.iter()).zip(scale).for_each(|((t, c), s)| *t = c * s);
                            sine.apply_with(tmp, col, buf);
                        }
                        Transform::MassSynthesis => {
                            tmp.iter_mut().zip(col.iter()).zip(scale).for_each(|((t, c), s)| *t = c * s);
                            sine.apply_with(tmp, tmp2, buf);
                            self.mass.apply(tmp2, col);
                        }
                    },
                );
                transpose_into(columns, width, n, out);
            }
        }
    }

    /// `max |A C - M C Lambda|` over all entries.
    pub fn residual(&self, a: &DenseSymMatrix) -> f64 {
        let c = self.eigenvectors();
        eigen_residual(a, &self.mass, &c, &self.eigenvalues)
    }

    /// `max |C^T M C - I|`
    pub fn orthonormality_defect(&self) -> f64 {
        let c = self.eigenvectors();
        let mc = mass_times(&self.mass, &c);
        let g = c.transpose() * mc;
        (g - DMatrix::identity(self.dim(), self.dim())).amax()
    }

    fn from_dense(eigenvalues: Vec<f64>, vectors: DMatrix<f64>, mass: TriDiagonalMatrix) -> Self {
        let mass_vectors = mass_times(&mass, &vectors);
        let repr = Repr::Dense {
            vectors_t: vectors.transpose(),
            mass_vectors_t: mass_vectors.transpose(),
            vectors,
            mass_vectors,
        };
        Self { eigenvalues, mass, repr }
    }
}

/// `out[j * rows + i] = input[i * cols + j]` for a `rows x cols` row-major input.
fn transpose_into(input: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    const BLOCK: usize = 32;
    for i0 in (0..rows).step_by(BLOCK) {
        for j0 in (0..cols).step_by(BLOCK) {
            for i in i0..(i0 + BLOCK).min(rows) {
                for j in j0..(j0 + BLOCK).min(cols) {
                    out[j * rows + i] = input[i * cols + j];
                }
            }
        }
    }
}

fn mass_times(mass: &TriDiagonalMatrix, c: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(c.nrows(), c.ncols());
    let mut tmp = vec![0.0; c.nrows()];
    for (j, col) in c.column_iter().enumerate() {
        mass.apply(col.as_slice(), &mut tmp);
        out.column_mut(j).copy_from_slice(&tmp);
    }
    out
}

fn eigen_residual(a: &DenseSymMatrix, mass: &TriDiagonalMatrix, c: &DMatrix<f64>, lambda: &[f64]) -> f64 {
    let ac = a.as_matrix() * c;
    let mut mc = mass_times(mass, c);
    for (j, l) in lambda.iter().enumerate() {
        mc.column_mut(j).scale_mut(*l);
    }
    (ac - mc).amax()
}

fn sine_columns(n: usize, scale: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, m| {
        scale[m] * (std::f64::consts::PI * (m as f64 + 0.5) * (i + 1) as f64 / n as f64).sin()
    })
}

/// Dense generalized eigensolve via `M = L L^T` and a symmetric eigensolve
/// of `L^{-1} A L^{-T}`.
pub fn solve_generalized_evp(a: &DenseSymMatrix, m: &TriDiagonalMatrix) -> Result<TemporalEigenbasis> {
    let n = a.dim();
    if m.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
    }
    if !m.is_symmetric() {
        return Err(Error::NotPositiveDefinite("mass matrix is not symmetric".into()));
    }
    let chol = m
        .to_dense()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization of the mass matrix failed".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(a.as_matrix())
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let y = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let reduced = (&y + y.transpose()) * 0.5;
    let eig = reduced.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {:e}", eigenvalues[0])));
    }
    let q = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    let c = l
        .transpose()
        .solve_upper_triangular(&q)
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    Ok(TemporalEigenbasis::from_dense(eigenvalues, c, m.clone()))
}

/// Tries the sampled-sine eigenbasis `sin((pi/2 + k pi) t / T)` at the nodes.
///
/// Returns `None` when the candidate fails the residual check
/// `max |A C - M C Lambda| <= validate_tol * max(lambda)` or its Rayleigh
/// quotients are not positive and ascending; callers then fall back to
/// [`solve_generalized_evp`].
pub fn try_fast_eigenbasis(
    mesh: &TemporalMesh,
    a: &DenseSymMatrix,
    m: &TriDiagonalMatrix,
    validate_tol: f64,
) -> Option<TemporalEigenbasis> {
    let n = mesh.n_dofs();
    if a.dim() != n || m.dim() != n {
        return None;
    }
    let sine = SineTransform::new(n);
    // row j of A S is S^T a_j because A is symmetric
    let mut a_s = DMatrix::zeros(n, n);
    {
        let a_mat = a.as_matrix();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map_init(
                || sine.make_buffer(),
                |buf, j| {
                    let mut row = vec![0.0; n];
                    sine.apply_transpose_with(a_mat.column(j).as_slice(), &mut row, buf);
                    row
                },
            )
            .collect();
        for (j, row) in rows.iter().enumerate() {
            for (m, v) in row.iter().enumerate() {
                a_s[(j, m)] = *v;
            }
        }
    }
    let mut scale = Vec::with_capacity(n);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut residual = 0.0f64;
    let mut col = vec![0.0; n];
    let mut m_col = vec![0.0; n];
    for j in 0..n {
        for (i, c) in col.iter_mut().enumerate() {
            *c = (std::f64::consts::PI * (j as f64 + 0.5) * (i + 1) as f64 / n as f64).sin();
        }
        m.apply(&col, &mut m_col);
        let norm_sq: f64 = col.iter().zip(&m_col).map(|(x, y)| x * y).sum();
        let lambda = a_s.column(j).iter().zip(&col).map(|(x, y)| x * y).sum::<f64>() / norm_sq;
        // unnormalized residual A s - lambda M s, rescaled below
        let r = a_s.column(j).iter().zip(&m_col).map(|(x, y)| (x - lambda * y).abs()).fold(0.0, f64::max);
        residual = residual.max(r / norm_sq.sqrt());
        scale.push(1.0 / norm_sq.sqrt());
        eigenvalues.push(lambda);
    }
    // Rayleigh quotients of M-normalized vectors
    if eigenvalues[0] <= 0.0 || eigenvalues.windows(2).any(|w| w[1] < w[0]) {
        log::debug!("fast eigenbasis rejected: eigenvalues not positive ascending");
        return None;
    }
    let lmax = eigenvalues[n - 1];
    if !(residual <= validate_tol * lmax) {
        log::debug!("fast eigenbasis rejected: residual {residual:e} > {validate_tol:e} * {lmax:e}");
        return None;
    }
    Some(TemporalEigenbasis {
        eigenvalues,
        mass: m.clone(),
        repr: Repr::FastSine { scale, sine },
    })
}
