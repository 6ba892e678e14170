//! Matrix-free space-time operators on the tensor-product space.
//!
//! Vectors use a time-major layout: entry `(k, i)` for temporal dof `k` and
//! spatial dof `i` is stored at `k * M_x + i`, matching
//! `(A (x) B)[k M_x + i, l M_x + j] = A[k,l] B[i,j]`.
//!
//! The system matrix
//!
//! ```text
//! K = M_t (x) M_x + rho (A_t (x) M_x + M_t (x) A_x)
//! ```
//!
//! is applied through the temporal eigenbasis `A_t C = M_t C Lambda`,
//! `C^T M_t C = I`:
//!
//! ```text
//! K = (M_t C (x) I) [ I (x) M_x + rho (Lambda (x) M_x + I (x) A_x) ] (C^T M_t (x) I),
//! ```
//!
//! so that each eigen-slice costs one mass and one stiffness product.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, simplex_quadrature};
use crate::spatial::{assemble_spatial_mass, assemble_spatial_stiffness, SimplicialMesh, SparseSymMatrix};
use crate::temporal::{
    assemble_hilbert_stiffness, assemble_temporal_convection, assemble_temporal_mass, solve_generalized_evp,
    try_fast_eigenbasis, DenseSymMatrix, EigenMode, HilbertOptions, TemporalEigenbasis, TemporalMesh,
    TriDiagonalMatrix,
};

/// Largest `N_t * M_x` accepted by [`SystemOperator::dense_oracle`].
pub const DENSE_ORACLE_LIMIT: usize = 4096;

/// Coefficient vector on the space-time tensor-product space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeVector {
    n_t: usize,
    m_x: usize,
    values: Vec<f64>,
}

impl SpaceTimeVector {
    pub fn zeros(n_t: usize, m_x: usize) -> Self {
        Self { n_t, m_x, values: vec![0.0; n_t * m_x] }
    }

    pub fn from_vec(n_t: usize, m_x: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_t * m_x {
            return Err(Error::DimensionMismatch { expected: n_t * m_x, got: values.len() });
        }
        Ok(Self { n_t, m_x, values })
    }

    pub fn from_fn(n_t: usize, m_x: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_t * m_x);
        for k in 0..n_t {
            for i in 0..m_x {
                values.push(f(k, i));
            }
        }
        Self { n_t, m_x, values }
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn m_x(&self) -> usize {
        self.m_x
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.m_x + i]
    }

    /// Spatial slice at temporal dof `k`.
    pub fn slice(&self, k: usize) -> &[f64] {
        &self.values[k * self.m_x..(k + 1) * self.m_x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.values, &other.values)
    }

    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.values)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_t == other.n_t && self.m_x == other.m_x
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenStrategy {
    /// Sampled-sine basis when it validates, dense eigensolve otherwise.
    Auto,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorOptions {
    pub hilbert: HilbertOptions,
    pub eigen: EigenStrategy,
    pub validate_tol: f64,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self { hilbert: HilbertOptions::default(), eigen: EigenStrategy::Auto, validate_tol: 1e-8 }
    }
}

/// Quadrature orders for space-time integrals: polynomial exactness on each
/// temporal interval and on each spatial simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureOrders {
    pub time: usize,
    pub space: usize,
}

impl QuadratureOrders {
    pub fn uniform(order: usize) -> Self {
        Self { time: order, space: order }
    }
}

impl Default for QuadratureOrders {
    fn default() -> Self {
        Self { time: 3, space: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `M_t (x) M_x + rho (A_t (x) M_x + M_t (x) A_x)`
    System,
    /// `A_t (x) M_x + M_t (x) A_x`
    Energy,
    /// `G_t (x) M_x + M_t (x) A_x`
    Control,
}

/// All factor matrices of the space-time system plus the regularization
/// weight; applies the Kronecker operators without assembling them.
#[derive(Debug)]
pub struct SystemOperator {
    rho: f64,
    temporal: TemporalMesh,
    spatial: SimplicialMesh,
    mass_t: TriDiagonalMatrix,
    conv_t: TriDiagonalMatrix,
    hilbert_t: DenseSymMatrix,
    basis: TemporalEigenbasis,
    mass_x: SparseSymMatrix,
    stiff_x: SparseSymMatrix,
    spatial_matvecs: AtomicUsize,
    /// Reusable work vectors of length `N_t * M_x`.
    buffers: Mutex<Vec<Vec<f64>>>,
}

impl SystemOperator {
    pub fn assemble(temporal: TemporalMesh, spatial: SimplicialMesh, rho: f64, opts: &OperatorOptions) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::Config(format!("regularization must be finite and >= 0, got {rho}")));
        }
        let mass_t = assemble_temporal_mass(&temporal);
        let conv_t = assemble_temporal_convection(&temporal);
        let hilbert_t = assemble_hilbert_stiffness(&temporal, &opts.hilbert)?;
        let fast = match opts.eigen {
            EigenStrategy::Auto => try_fast_eigenbasis(&temporal, &hilbert_t, &mass_t, opts.validate_tol),
            EigenStrategy::Dense => None,
        };
        let basis = match fast {
            Some(b) => b,
            None => solve_generalized_evp(&hilbert_t, &mass_t)?,
        };
        log::debug!("temporal eigenbasis: N_t = {}, mode {:?}", temporal.n_dofs(), basis.mode());
        let mass_x = assemble_spatial_mass(&spatial)?;
        let stiff_x = assemble_spatial_stiffness(&spatial)?;
        Ok(Self {
            rho,
            temporal,
            spatial,
            mass_t,
            conv_t,
            hilbert_t,
            basis,
            mass_x,
            stiff_x,
            spatial_matvecs: AtomicUsize::new(0),
            buffers: Mutex::new(Vec::new()),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n_t(&self) -> usize {
        self.temporal.n_dofs()
    }

    pub fn m_x(&self) -> usize {
        self.spatial.n_dofs()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_t() * self.m_x()
    }

    pub fn temporal_mesh(&self) -> &TemporalMesh {
        &self.temporal
    }

    pub fn spatial_mesh(&self) -> &SimplicialMesh {
        &self.spatial
    }

    pub fn temporal_mass(&self) -> &TriDiagonalMatrix {
        &self.mass_t
    }

    pub fn temporal_convection(&self) -> &TriDiagonalMatrix {
        &self.conv_t
    }

    pub fn temporal_hilbert(&self) -> &DenseSymMatrix {
        &self.hilbert_t
    }

    pub fn eigenbasis(&self) -> &TemporalEigenbasis {
        &self.basis
    }

    pub fn eigen_mode(&self) -> EigenMode {
        self.basis.mode()
    }

    pub fn spatial_mass(&self) -> &SparseSymMatrix {
        &self.mass_x
    }

    pub fn spatial_stiffness(&self) -> &SparseSymMatrix {
        &self.stiff_x
    }

    /// Total number of sparse spatial matrix-vector products performed so far.
    pub fn spatial_matvec_count(&self) -> usize {
        self.spatial_matvecs.load(Ordering::Relaxed)
    }

    pub fn zeros(&self) -> SpaceTimeVector {
        SpaceTimeVector::zeros(self.n_t(), self.m_x())
    }

    fn check(&self, v: &SpaceTimeVector) -> Result<()> {
        if v.n_t() != self.n_t() || v.m_x() != self.m_x() {
            return Err(Error::DimensionMismatch { expected: self.n_dofs(), got: v.len() });
        }
        Ok(())
    }

    /// `w = K v`
    pub fn apply_operator(&self, v: &SpaceTimeVector) -> Result<SpaceTimeVector> {
        self.check(v)?;
        let mut out = self.zeros();
        self.apply_into(v.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// `w = K v` on raw time-major slices.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let rho = self.rho;
        self.apply_spectral(v, out, |lambda| (1.0 + rho * lambda, rho));
    }

    /// `w = (A_t (x) M_x + M_t (x) A_x) v`
    pub fn apply_energy_operator(&self, v: &SpaceTimeVector) -> Result<SpaceTimeVector> {
        self.check(v)?;
        let mut out = self.zeros();
        self.apply_spectral(v.as_slice(), out.as_mut_slice(), |lambda| (lambda, 1.0));
        Ok(out)
    }

    /// `v^T D v`, the squared discrete anisotropic norm.
    pub fn anisotropic_norm_sq(&self, v: &SpaceTimeVector) -> Result<f64> {
        Ok(v.dot(&self.apply_energy_operator(v)?))
    }

    /// Per slice `i` applies `mass_coef(lambda_i) M_x + stiff_coef A_x` in
    /// the temporal eigenbasis.
    fn apply_spectral(&self, v: &[f64], out: &mut [f64], coefs: impl Fn(f64) -> (f64, f64) + Sync) {
        let m_x = self.m_x();
        let mut hat = self.take_buffer();
        let mut mixed = self.take_buffer();
        self.basis.analysis_slices_with(v, m_x, &mut hat, &mut mixed);
        let lambdas = self.basis.eigenvalues();
        mixed.par_chunks_mut(m_x).zip(hat.par_chunks(m_x)).enumerate().for_each(|(k, (w, x))| {
            let (cm, ca) = coefs(lambdas[k]);
            self.mass_x.apply(x, w);
            w.iter_mut().for_each(|e| *e *= cm);
            self.stiff_x.apply_add(ca, x, w);
        });
        self.spatial_matvecs.fetch_add(2 * self.n_t(), Ordering::Relaxed);
        self.basis.mass_synthesis_slices_with(&mixed, m_x, out, &mut hat);
        self.return_buffer(hat);
        self.return_buffer(mixed);
    }

    fn take_buffer(&self) -> Vec<f64> {
        let n = self.n_dofs();
        self.buffers.lock().ok().and_then(|mut pool| pool.pop()).unwrap_or_else(|| vec![0.0; n])
    }

    fn return_buffer(&self, buf: Vec<f64>) {
        if let Ok(mut pool) = self.buffers.lock() {
            if pool.len() < 4 {
                pool.push(buf);
            }
        }
    }

    /// `(M_t (x) M_x) v`
    pub fn apply_mass(&self, v: &SpaceTimeVector) -> Result<SpaceTimeVector> {
        self.check(v)?;
        let slices = self.spatial_slices(v.as_slice(), &self.mass_x);
        Ok(self.temporal_combine(&self.mass_t, &slices))
    }

    /// Dual representation of the control, `(G_t (x) M_x + M_t (x) A_x) u`.
    pub fn recover_control(&self, u: &SpaceTimeVector) -> Result<SpaceTimeVector> {
        self.check(u)?;
        let mu = self.spatial_slices(u.as_slice(), &self.mass_x);
        let au = self.spatial_slices(u.as_slice(), &self.stiff_x);
        let mut out = self.temporal_combine(&self.conv_t, &mu);
        let second = self.temporal_combine(&self.mass_t, &au);
        out.as_mut_slice().iter_mut().zip(second.as_slice()).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    fn spatial_slices(&self, v: &[f64], mat: &SparseSymMatrix) -> Vec<f64> {
        let m_x = self.m_x();
        let mut out = vec![0.0; v.len()];
        out.par_chunks_mut(m_x).zip(v.par_chunks(m_x)).for_each(|(w, x)| mat.apply(x, w));
        self.spatial_matvecs.fetch_add(self.n_t(), Ordering::Relaxed);
        out
    }

    /// `(T (x) I) s` for a tridiagonal temporal factor.
    fn temporal_combine(&self, t: &TriDiagonalMatrix, s: &[f64]) -> SpaceTimeVector {
        let (n_t, m_x) = (self.n_t(), self.m_x());
        let mut out = self.zeros();
        let o = out.as_mut_slice();
        for k in 0..n_t {
            for l in k.saturating_sub(1)..(k + 2).min(n_t) {
                let c = t.get(k, l);
                if c != 0.0 {
                    for i in 0..m_x {
                        o[k * m_x + i] += c * s[l * m_x + i];
                    }
                }
            }
        }
        out
    }

    /// Explicit Kronecker assembly (test oracle and direct-application baseline).
    pub fn dense_oracle(&self, which: OperatorKind) -> Result<DMatrix<f64>> {
        let size = self.n_dofs();
        if size > DENSE_ORACLE_LIMIT {
            return Err(Error::SizeGuard { size, limit: DENSE_ORACLE_LIMIT });
        }
        let mt = self.mass_t.to_dense();
        let mx = self.mass_x.to_dense();
        let ax = self.stiff_x.to_dense();
        let at = self.hilbert_t.as_matrix();
        let energy = at.kronecker(&mx) + mt.kronecker(&ax);
        Ok(match which {
            OperatorKind::System => mt.kronecker(&mx) + energy * self.rho,
            OperatorKind::Energy => energy,
            OperatorKind::Control => self.conv_t.to_dense().kronecker(&mx) + mt.kronecker(&ax),
        })
    }

    /// Nodal interpolant of `g(x, t)` at the space-time dofs.
    pub fn interpolate(&self, g: impl Fn(&[f64], f64) -> f64) -> SpaceTimeVector {
        let spatial = &self.spatial;
        SpaceTimeVector::from_fn(self.n_t(), self.m_x(), |k, i| {
            g(spatial.vertex(spatial.dof_vertex(i)), self.temporal.dof_time(k))
        })
    }

    /// Load vector `f[(k,i)] = int_Q target * phi_k psi_i` by tensorized quadrature.
    pub fn assemble_load_vector(
        &self,
        target: impl Fn(&[f64], f64) -> f64,
        orders: QuadratureOrders,
    ) -> Result<SpaceTimeVector> {
        let rule = simplex_quadrature(self.spatial.dim(), orders.space)?;
        if !(1..=5).contains(&orders.time) {
            return Err(Error::QuadratureOrder(orders.time));
        }
        let (tq, tw) = gauss_legendre((orders.time + 2) / 2);
        let spatial_points = SpatialPoints::new(&self.spatial, &rule.points, &rule.weights);
        let m_x = self.m_x();
        let h = self.temporal.step();
        let mut f = self.zeros();
        let fv = f.as_mut_slice();
        for e in 0..self.n_t() {
            for (s, w) in tq.iter().zip(&tw) {
                let t = self.temporal.node(e) + s * h;
                let basis = self.temporal.element_basis(e, t);
                for p in &spatial_points.points {
                    let val = target(&p.x, t) * p.weight * w * h;
                    for (dof_t, phi) in basis.iter() {
                        let Some(k) = dof_t else { continue };
                        for (dof_x, psi) in &p.dofs {
                            fv[k * m_x + dof_x] += val * phi * psi;
                        }
                    }
                }
            }
        }
        Ok(f)
    }

    /// `|| u_h - P(target) ||_{L2(Q)}` with `P` the pointwise clamp to
    /// `bounds` (identity when absent), by composite quadrature.
    pub fn l2_error(
        &self,
        u: &SpaceTimeVector,
        target: impl Fn(&[f64], f64) -> f64,
        bounds: Option<(f64, f64)>,
        order: usize,
    ) -> Result<f64> {
        self.check(u)?;
        let rule = simplex_quadrature(self.spatial.dim(), order)?;
        let (tq, tw) = gauss_legendre((order + 2) / 2);
        let pts = SpatialPoints::new(&self.spatial, &rule.points, &rule.weights);
        let m_x = self.m_x();
        let h = self.temporal.step();
        let uv = u.as_slice();
        let mut total = 0.0;
        for e in 0..self.n_t() {
            for (s, w) in tq.iter().zip(&tw) {
                let t = self.temporal.node(e) + s * h;
                let basis = self.temporal.element_basis(e, t);
                for p in &pts.points {
                    let mut uh = 0.0;
                    for (dof_t, phi) in basis.iter() {
                        let Some(k) = dof_t else { continue };
                        for (dof_x, psi) in &p.dofs {
                            uh += phi * psi * uv[k * m_x + dof_x];
                        }
                    }
                    let mut g = target(&p.x, t);
                    if let Some((lo, hi)) = bounds {
                        g = g.clamp(lo, hi);
                    }
                    total += (uh - g).powi(2) * p.weight * w * h;
                }
            }
        }
        Ok(total.sqrt())
    }
}

struct SpatialPoint {
    x: Vec<f64>,
    weight: f64,
    dofs: Vec<(usize, f64)>,
}

/// Physical quadrature points of every simplex with their interior-dof shape values.
struct SpatialPoints {
    points: Vec<SpatialPoint>,
}

impl SpatialPoints {
    fn new(mesh: &SimplicialMesh, bary: &[Vec<f64>], weights: &[f64]) -> Self {
        let d = mesh.dim();
        let fact: f64 = (1..=d).product::<usize>() as f64;
        let mut points = Vec::with_capacity(mesh.n_simplices() * weights.len());
        for s in 0..mesh.n_simplices() {
            let vol = mesh.simplex_volume(s);
            let verts = mesh.simplex(s);
            for (b, w) in bary.iter().zip(weights) {
                let mut x = vec![0.0; d];
                mesh.map_point(s, b, &mut x);
                let dofs = verts
                    .iter()
                    .zip(b)
                    .filter_map(|(&v, &lam)| mesh.vertex_dof(v).map(|dof| (dof, lam)))
                    .collect();
                points.push(SpatialPoint { x, weight: w * vol * fact, dofs });
            }
        }
        Self { points }
    }
}
