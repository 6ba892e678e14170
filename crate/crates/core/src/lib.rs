//! Space-time finite element solver for distributed tracking-type optimal
//! control of the heat equation with pointwise state constraints.
//!
//! The state is sought in the tensor-product space `W_hx (x) V_ht`, the
//! regularization is the anisotropic `H^{1,1/2}` energy realized through the
//! modified Hilbert transform, and the box constraints are handled by a
//! semi-smooth Newton (primal-dual active set) iteration whose linear systems
//! are solved matrix-free by diagonally preconditioned CG.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod krylov;
pub mod newton;
pub mod quadrature;
pub mod spacetime;
pub mod spatial;
pub mod temporal;

pub use error::{Error, Result};
