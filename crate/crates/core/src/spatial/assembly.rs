use super::mesh::SimplicialMesh;
use super::sparse::SparseSymMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialForm {
    Stiffness,
    Mass,
}

/// Element matrix of simplex `s` (row-major, `(d+1) x (d+1)`).
pub(crate) fn element_matrix(mesh: &SimplicialMesh, s: usize, form: SpatialForm) -> Result<Vec<f64>> {
    let d = mesh.dim();
    let nv = d + 1;
    let verts = mesh.simplex(s);
    let jac = mesh.jacobian(verts);
    let det = jac.determinant();
    let fact: f64 = (1..=d).product::<usize>() as f64;
    let vol = det.abs() / fact;
    if !(vol > 1e-300) {
        return Err(Error::DegenerateSimplex(s));
    }
    let mut out = vec![0.0; nv * nv];
    match form {
        SpatialForm::Mass => {
            let base = vol / ((d + 1) * (d + 2)) as f64;
            for a in 0..nv {
                for b in 0..nv {
                    out[a * nv + b] = if a == b { 2.0 * base } else { base };
                }
            }
        }
        SpatialForm::Stiffness => {
            let inv = jac.try_inverse().ok_or(Error::DegenerateSimplex(s))?;
            // grad lambda_j (j >= 1) is row j-1 of J^{-1}
            let mut grads = vec![vec![0.0; d]; nv];
            for j in 1..nv {
                for c in 0..d {
                    grads[j][c] = inv[(j - 1, c)];
                    grads[0][c] -= inv[(j - 1, c)];
                }
            }
            for a in 0..nv {
                for b in 0..nv {
                    out[a * nv + b] = vol * grads[a].iter().zip(&grads[b]).map(|(x, y)| x * y).sum::<f64>();
                }
            }
        }
    }
    Ok(out)
}

/// Assembly over all vertices, before Dirichlet elimination.
pub fn assemble_full(mesh: &SimplicialMesh, form: SpatialForm) -> Result<SparseSymMatrix> {
    let nv = mesh.dim() + 1;
    let mut triplets = Vec::with_capacity(mesh.n_simplices() * nv * nv);
    for s in 0..mesh.n_simplices() {
        let local = element_matrix(mesh, s, form)?;
        let verts = mesh.simplex(s);
        for a in 0..nv {
            for b in 0..nv {
                triplets.push((verts[a], verts[b], local[a * nv + b]));
            }
        }
    }
    Ok(SparseSymMatrix::from_triplets(mesh.n_vertices(), triplets))
}

fn assemble_interior(mesh: &SimplicialMesh, form: SpatialForm) -> Result<SparseSymMatrix> {
    let nv = mesh.dim() + 1;
    let mut triplets = Vec::with_capacity(mesh.n_simplices() * nv * nv);
    for s in 0..mesh.n_simplices() {
        let local = element_matrix(mesh, s, form)?;
        let verts = mesh.simplex(s);
        for a in 0..nv {
            let Some(ra) = mesh.vertex_dof(verts[a]) else { continue };
            for b in 0..nv {
                if let Some(cb) = mesh.vertex_dof(verts[b]) {
                    triplets.push((ra, cb, local[a * nv + b]));
                }
            }
        }
    }
    Ok(SparseSymMatrix::from_triplets(mesh.n_dofs(), triplets))
}

/// `A[l,k] = <grad psi_k, grad psi_l>` on the interior dofs.
pub fn assemble_spatial_stiffness(mesh: &SimplicialMesh) -> Result<SparseSymMatrix> {
    assemble_interior(mesh, SpatialForm::Stiffness)
}

/// `M[l,k] = <psi_k, psi_l>` on the interior dofs.
pub fn assemble_spatial_mass(mesh: &SimplicialMesh) -> Result<SparseSymMatrix> {
    assemble_interior(mesh, SpatialForm::Mass)
}
