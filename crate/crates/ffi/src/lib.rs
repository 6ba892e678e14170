//! C interface to the space-time optimal control solver.
//!
//! A `StocProblem` owns the assembled system operator for one discretization.
//! Vectors crossing the boundary are flat `double` arrays of length
//! `stoc_problem_dofs`, time-major: entry `k * m_x + i` belongs to temporal
//! dof `k` and spatial dof `i`. Every fallible call returns a `StocStatus`;
//! on failure `stoc_last_error_message` describes the cause for the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use spacetime_oc::krylov::{build_mass_diag_preconditioner, default_max_iter, pcg_solve};
use spacetime_oc::newton::{complementarity_defect, newton_solve, BoxConstraints, NewtonConfig};
use spacetime_oc::spacetime::{OperatorOptions, QuadratureOrders, SpaceTimeVector, SystemOperator};
use spacetime_oc::spatial::SimplicialMesh;
use spacetime_oc::temporal::TemporalMesh;
use spacetime_oc::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StocStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotPositiveDefinite = 4,
    SolverFailure = 5,
    Io = 6,
    Panic = 7,
}

/// Opaque handle to an assembled space-time system.
pub struct StocProblem {
    op: SystemOperator,
}

/// `double target(const double *x, size_t dim, double t, void *user)`
pub type StocTargetFn = Option<unsafe extern "C" fn(x: *const f64, dim: usize, t: f64, user: *mut c_void) -> f64>;

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StocNewtonOptions {
    pub c: f64,
    pub omega: f64,
    pub increment_tol: f64,
    pub cg_rel_tol: f64,
    pub max_newton: usize,
    /// 0 selects `10 sqrt(n) + 100`.
    pub cg_max_iter: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct StocNewtonStats {
    pub converged: bool,
    pub newton_iterations: usize,
    pub total_cg_iterations: usize,
    pub lower_active: usize,
    pub upper_active: usize,
    /// `||F2||_inf` of the returned pair.
    pub complementarity: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> StocStatus {
    match err {
        Error::DimensionMismatch { .. } => StocStatus::DimensionMismatch,
        Error::NotPositiveDefinite(_) => StocStatus::NotPositiveDefinite,
        Error::CgBreakdown { .. } | Error::InnerSolve { .. } | Error::SeriesCap { .. } => StocStatus::SolverFailure,
        Error::Io(_) => StocStatus::Io,
        _ => StocStatus::InvalidArgument,
    }
}

struct Fail(StocStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> StocStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            StocStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            StocStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(StocStatus::NullPointer, format!("{what} is null"))
}

unsafe fn problem<'a>(p: *const StocProblem) -> Result<&'a StocProblem, Fail> {
    p.as_ref().ok_or_else(|| null("problem"))
}

unsafe fn input<'a>(ptr: *const f64, len: usize, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    if len != n {
        return Err(Fail(StocStatus::DimensionMismatch, format!("{what}: expected {n} entries, got {len}")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a>(ptr: *mut f64, len: usize, n: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    if len != n {
        return Err(Fail(StocStatus::DimensionMismatch, format!("{what}: expected {n} entries, got {len}")));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// Default semi-smooth Newton options.
#[no_mangle]
pub extern "C" fn stoc_newton_options_default() -> StocNewtonOptions {
    let d = NewtonConfig::default();
    StocNewtonOptions {
        c: d.c,
        omega: d.omega,
        increment_tol: d.increment_tol,
        cg_rel_tol: d.cg_rel_tol,
        max_newton: d.max_newton,
        cg_max_iter: 0,
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn stoc_status_string(status: StocStatus) -> *const c_char {
    let s: &'static CStr = match status {
        StocStatus::Ok => c"ok",
        StocStatus::NullPointer => c"null pointer",
        StocStatus::InvalidArgument => c"invalid argument",
        StocStatus::DimensionMismatch => c"dimension mismatch",
        StocStatus::NotPositiveDefinite => c"not positive definite",
        StocStatus::SolverFailure => c"solver failure",
        StocStatus::Io => c"i/o error",
        StocStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn stoc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Assembles the system on the unit cube of dimension `dim` with `n_x` cells
/// per axis, `n_t` temporal intervals on `(0, 1)` and regularization `rho`.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn stoc_problem_new(
    dim: usize,
    n_x: usize,
    n_t: usize,
    rho: f64,
    out: *mut *mut StocProblem,
) -> StocStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = std::ptr::null_mut();
        let op = SystemOperator::assemble(
            TemporalMesh::unit(n_t)?,
            SimplicialMesh::structured(dim, n_x)?,
            rho,
            &OperatorOptions::default(),
        )?;
        *out = Box::into_raw(Box::new(StocProblem { op }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from `stoc_problem_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stoc_problem_free(p: *mut StocProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Total number of unknowns `n_t * m_x`; the factors are written to the
/// optional out-pointers.
///
/// # Safety
/// `p` must be a live handle; `n_t` and `m_x` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn stoc_problem_dofs(p: *const StocProblem, n_t: *mut usize, m_x: *mut usize) -> usize {
    let Some(p) = p.as_ref() else { return 0 };
    if let Some(n) = n_t.as_mut() {
        *n = p.op.n_t();
    }
    if let Some(m) = m_x.as_mut() {
        *m = p.op.m_x();
    }
    p.op.n_dofs()
}

/// `out = K v`.
///
/// # Safety
/// `v` and `out` must hold `len` doubles and must not overlap.
#[no_mangle]
pub unsafe extern "C" fn stoc_problem_apply(p: *const StocProblem, v: *const f64, out: *mut f64, len: usize) -> StocStatus {
    guard(|| {
        let p = problem(p)?;
        let n = p.op.n_dofs();
        let v = input(v, len, n, "v")?;
        let out = output(out, len, n, "out")?;
        p.op.apply_into(v, out);
        Ok(())
    })
}

/// Load vector of `target(x, t)` with Gauss rules exact to `order` in time
/// and space (1..=5).
///
/// # Safety
/// `target` is called with a pointer to `dim` coordinates; `out` must hold
/// `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn stoc_problem_load(
    p: *const StocProblem,
    target: StocTargetFn,
    user: *mut c_void,
    order: usize,
    out: *mut f64,
    len: usize,
) -> StocStatus {
    guard(|| {
        let p = problem(p)?;
        let target = target.ok_or_else(|| null("target"))?;
        let out = output(out, len, p.op.n_dofs(), "out")?;
        let f = p.op.assemble_load_vector(|x, t| target(x.as_ptr(), x.len(), t, user), QuadratureOrders::uniform(order))?;
        out.copy_from_slice(f.as_slice());
        Ok(())
    })
}

/// Solves `K u = f` by mass-diagonal preconditioned CG.
///
/// # Safety
/// `f` and `u` must hold `len` doubles; `iterations` may be null.
#[no_mangle]
pub unsafe extern "C" fn stoc_problem_solve(
    p: *const StocProblem,
    f: *const f64,
    u: *mut f64,
    len: usize,
    rel_tol: f64,
    iterations: *mut usize,
) -> StocStatus {
    guard(|| {
        let p = problem(p)?;
        let n = p.op.n_dofs();
        let f = input(f, len, n, "f")?;
        let u = output(u, len, n, "u")?;
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Fail(StocStatus::InvalidArgument, format!("rel_tol must lie in (0, 1), got {rel_tol}")));
        }
        let pre = build_mass_diag_preconditioner(p.op.temporal_mass(), p.op.spatial_mass(), None)?;
        let (x, report) = pcg_solve(|v, w| p.op.apply_into(v, w), f, &pre, rel_tol, default_max_iter(n))?;
        if let Some(it) = iterations.as_mut() {
            *it = report.iterations;
        }
        if !report.converged {
            return Err(Error::InnerSolve { step: 0, residual: report.relative_residual }.into());
        }
        u.copy_from_slice(&x);
        Ok(())
    })
}

/// Box-constrained problem `lower <= u <= upper` by semi-smooth Newton.
/// `lambda` may be null. Non-convergence within `max_newton` steps returns
/// `SolverFailure` but still fills the outputs and `stats`.
///
/// # Safety
/// All non-null arrays must hold `len` doubles; `options` and `stats` may
/// be null.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn stoc_problem_solve_constrained(
    p: *const StocProblem,
    f: *const f64,
    lower: *const f64,
    upper: *const f64,
    options: *const StocNewtonOptions,
    u: *mut f64,
    lambda: *mut f64,
    len: usize,
    stats: *mut StocNewtonStats,
) -> StocStatus {
    guard(|| {
        let p = problem(p)?;
        let op = &p.op;
        let n = op.n_dofs();
        let (n_t, m_x) = (op.n_t(), op.m_x());
        let f = SpaceTimeVector::from_vec(n_t, m_x, input(f, len, n, "f")?.to_vec())?;
        let lo = SpaceTimeVector::from_vec(n_t, m_x, input(lower, len, n, "lower")?.to_vec())?;
        let hi = SpaceTimeVector::from_vec(n_t, m_x, input(upper, len, n, "upper")?.to_vec())?;
        let u_out = output(u, len, n, "u")?;
        let lambda_out = if lambda.is_null() { None } else { Some(output(lambda, len, n, "lambda")?) };
        let o = options.as_ref().copied().unwrap_or_else(|| stoc_newton_options_default());
        let config = NewtonConfig {
            c: o.c,
            omega: o.omega,
            increment_tol: o.increment_tol,
            cg_rel_tol: o.cg_rel_tol,
            max_newton: o.max_newton,
            cg_max_iter: (o.cg_max_iter > 0).then_some(o.cg_max_iter),
        };
        let constraints = BoxConstraints::new(lo, hi)?;
        let result = newton_solve(op, &f, &constraints, &config, None)?;
        let (_, f2) = complementarity_defect(op, &result.u, &result.lambda, &f, &constraints, config.c)?;
        let (lower_active, upper_active, _) = result.partition.counts();
        if let Some(s) = stats.as_mut() {
            *s = StocNewtonStats {
                converged: result.converged,
                newton_iterations: result.newton_iterations(),
                total_cg_iterations: result.total_cg_iterations(),
                lower_active,
                upper_active,
                complementarity: f2,
            };
        }
        u_out.copy_from_slice(result.u.as_slice());
        if let Some(l) = lambda_out {
            l.copy_from_slice(result.lambda.as_slice());
        }
        if !result.converged {
            return Err(Fail(
                StocStatus::SolverFailure,
                format!("semi-smooth Newton did not converge in {} steps", config.max_newton),
            ));
        }
        Ok(())
    })
}
