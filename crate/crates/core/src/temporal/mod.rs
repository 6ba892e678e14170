//! Temporal P1 discretization on a uniform mesh of `(0, T)`.
//!
//! Degrees of freedom sit at the nodes `t_1, ..., t_N` (dof `j` is node
//! `t_{j+1}` in zero-based indexing). The value at `t = 0` is fixed to zero
//! and the last basis function is a half hat ending at `t = T`.

mod eigen;
mod hilbert;
mod sine;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use eigen::{solve_generalized_evp, try_fast_eigenbasis, EigenMode, TemporalEigenbasis};
pub use hilbert::{assemble_hilbert_stiffness, mode_frequency, HilbertOptions};
pub use sine::SineTransform;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalMesh {
    horizon: f64,
    n_dofs: usize,
}

impl TemporalMesh {
    pub fn new(horizon: f64, n_dofs: usize) -> Result<Self> {
        if n_dofs == 0 {
            return Err(Error::InvalidMesh("temporal mesh needs at least one interval".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidMesh(format!("time horizon must be positive, got {horizon}")));
        }
        Ok(Self { horizon, n_dofs })
    }

    /// Uniform mesh of `(0, 1)`.
    pub fn unit(n_dofs: usize) -> Result<Self> {
        Self::new(1.0, n_dofs)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_dofs as f64
    }

    /// Node `t_j = j * h` for `j = 0..=N`.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.n_dofs {
            self.horizon
        } else {
            j as f64 * self.step()
        }
    }

    /// Time of dof `k` (zero-based), i.e. `t_{k+1}`.
    pub fn dof_time(&self, k: usize) -> f64 {
        self.node(k + 1)
    }

    /// Values of the nodal basis functions on element `[t_e, t_{e+1}]` at `t`:
    /// returns `(dof, value)` pairs for the (at most two) non-constrained hats.
    pub fn element_basis(&self, e: usize, t: f64) -> [(Option<usize>, f64); 2] {
        let s = (t - self.node(e)) / self.step();
        let left = if e == 0 { None } else { Some(e - 1) };
        [(left, 1.0 - s), (Some(e), s)]
    }
}

/// Tridiagonal matrix stored by its three diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriDiagonalMatrix {
    lower: Vec<f64>,
    main: Vec<f64>,
    upper: Vec<f64>,
}

impl TriDiagonalMatrix {
    pub fn new(lower: Vec<f64>, main: Vec<f64>, upper: Vec<f64>) -> Self {
        let n = main.len();
        assert!(n >= 1);
        assert_eq!(lower.len(), n - 1);
        assert_eq!(upper.len(), n - 1);
        Self { lower, main, upper }
    }

    pub fn dim(&self) -> usize {
        self.main.len()
    }

    pub fn main(&self) -> &[f64] {
        &self.main
    }

    /// Entries `(i+1, i)`.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Entries `(i, i+1)`.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.main[row]
        } else if row == col + 1 {
            self.lower[col]
        } else if col == row + 1 {
            self.upper[row]
        } else {
            0.0
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.lower == self.upper
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.upper.clone(), self.main.clone(), self.lower.clone())
    }

    /// `y = self * x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        for i in 0..n {
            let mut acc = self.main[i] * x[i];
            if i > 0 {
                acc += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.get(i, j))
    }

    /// LDL^T pivots of a symmetric tridiagonal matrix; `None` when a pivot
    /// is not strictly positive.
    pub fn ldl_pivots(&self) -> Option<Vec<f64>> {
        let n = self.dim();
        let mut d = Vec::with_capacity(n);
        for i in 0..n {
            let mut p = self.main[i];
            if i > 0 {
                p -= self.lower[i - 1] * self.upper[i - 1] / d[i - 1];
            }
            if !(p > 0.0) || !p.is_finite() {
                return None;
            }
            d.push(p);
        }
        Some(d)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.is_symmetric() && self.ldl_pivots().is_some()
    }
}

/// Dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymMatrix(DMatrix<f64>);

impl DenseSymMatrix {
    /// Wraps `m`, replacing it by its symmetric part.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        assert!(m.is_square());
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            *yi = (0..n).map(|j| self.0[(i, j)] * x[j]).sum();
        }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.0.clone().cholesky().is_some()
    }
}

/// `M[j,i] = <phi_i, phi_j>`.
pub fn assemble_temporal_mass(mesh: &TemporalMesh) -> TriDiagonalMatrix {
    let n = mesh.n_dofs();
    let h = mesh.step();
    let mut main = vec![2.0 * h / 3.0; n];
    main[n - 1] = h / 3.0;
    let off = vec![h / 6.0; n - 1];
    TriDiagonalMatrix::new(off.clone(), main, off)
}

/// `G[l,k] = int phi_k' phi_l dt`, the time-derivative coupling used to
/// recover the control from a state.
pub fn assemble_temporal_convection(mesh: &TemporalMesh) -> TriDiagonalMatrix {
    let n = mesh.n_dofs();
    let mut main = vec![0.0; n];
    main[n - 1] = 0.5;
    // G[k+1,k] = int phi_k' phi_{k+1} = -1/2, G[k,k+1] = +1/2
    TriDiagonalMatrix::new(vec![-0.5; n - 1], main, vec![0.5; n - 1])
}

/// `int_0^T phi_i(t) sin(w_k t) dt` with `w_k = (pi/2 + k pi)/T`, in closed form.
pub fn hat_sine_moment(mesh: &TemporalMesh, k: usize, i: usize) -> f64 {
    let n = mesh.n_dofs();
    assert!(i < n, "dof index {i} out of range");
    let w = mode_frequency(mesh.horizon(), k);
    let h = mesh.step();
    if i + 1 < n {
        (2.0 - 2.0 * (w * h).cos()) * (w * mesh.dof_time(i)).sin() / (w * w * h)
    } else {
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        (sign - (w * mesh.node(n - 1)).sin()) / (h * w * w)
    }
}
