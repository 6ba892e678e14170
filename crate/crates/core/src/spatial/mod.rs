//! Structured P1 finite elements on the unit cube with homogeneous
//! Dirichlet conditions.

mod assembly;
mod mesh;
mod sparse;

pub use assembly::{assemble_full, assemble_spatial_mass, assemble_spatial_stiffness, SpatialForm};
pub use mesh::{build_structured_mesh, SimplicialMesh};
pub use sparse::SparseSymMatrix;

use crate::error::Result;

/// Evaluates the finite element function with interior values `dofs` at `x`.
pub fn evaluate_fe_function(mesh: &SimplicialMesh, dofs: &[f64], x: &[f64]) -> Result<f64> {
    mesh.evaluate(dofs, x)
}

pub use crate::quadrature::{simplex_quadrature, SimplexRule};
