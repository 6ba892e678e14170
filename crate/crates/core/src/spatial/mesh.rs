use crate::error::{Error, Result};

/// Axis permutations defining the Kuhn simplices of a cube.
fn kuhn_permutations(dim: usize) -> Vec<Vec<usize>> {
    match dim {
        1 => vec![vec![0]],
        2 => vec![vec![0, 1], vec![1, 0]],
        3 => vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]],
        _ => unreachable!(),
    }
}

/// Structured Kuhn triangulation of the unit cube `(0,1)^d` with homogeneous
/// Dirichlet conditions on the boundary.
///
/// Vertices are numbered lexicographically with axis 0 running fastest;
/// interior dofs follow the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialMesh {
    dim: usize,
    cells: usize,
    coords: Vec<f64>,
    simplices: Vec<usize>,
    vertex_dof: Vec<Option<usize>>,
    dof_vertex: Vec<usize>,
}

impl SimplicialMesh {
    pub fn structured(dim: usize, cells: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidMesh(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if cells < 2 {
            return Err(Error::InvalidMesh(format!("need at least 2 cells per axis for an interior dof, got {cells}")));
        }
        let per_axis = cells + 1;
        let n_vertices = per_axis.pow(dim as u32);
        let h = 1.0 / cells as f64;
        let mut coords = Vec::with_capacity(n_vertices * dim);
        let mut vertex_dof = Vec::with_capacity(n_vertices);
        let mut dof_vertex = Vec::new();
        for v in 0..n_vertices {
            let mut rest = v;
            let mut interior = true;
            for _ in 0..dim {
                let c = rest % per_axis;
                rest /= per_axis;
                coords.push(if c == cells { 1.0 } else { c as f64 * h });
                interior &= c > 0 && c < cells;
            }
            if interior {
                vertex_dof.push(Some(dof_vertex.len()));
                dof_vertex.push(v);
            } else {
                vertex_dof.push(None);
            }
        }

        let perms = kuhn_permutations(dim);
        let n_cubes = cells.pow(dim as u32);
        let mut simplices = Vec::with_capacity(n_cubes * perms.len() * (dim + 1));
        let stride: Vec<usize> = (0..dim).map(|a| per_axis.pow(a as u32)).collect();
        for cube in 0..n_cubes {
            let mut rest = cube;
            let mut corner = 0;
            for s in &stride {
                corner += (rest % cells) * s;
                rest /= cells;
            }
            for perm in &perms {
                let mut v = corner;
                simplices.push(v);
                for &axis in perm {
                    v += stride[axis];
                    simplices.push(v);
                }
            }
        }
        Ok(Self { dim, cells, coords, simplices, vertex_dof, dof_vertex })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn step(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_dof.len()
    }

    pub fn n_simplices(&self) -> usize {
        self.simplices.len() / (self.dim + 1)
    }

    /// Number of interior degrees of freedom `M_x = (n - 1)^d`.
    pub fn n_dofs(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn simplex(&self, s: usize) -> &[usize] {
        &self.simplices[s * (self.dim + 1)..(s + 1) * (self.dim + 1)]
    }

    pub fn vertex_dof(&self, v: usize) -> Option<usize> {
        self.vertex_dof[v]
    }

    pub fn dof_vertex(&self, dof: usize) -> usize {
        self.dof_vertex[dof]
    }

    pub fn simplex_volume(&self, s: usize) -> f64 {
        let verts = self.simplex(s);
        let jac = self.jacobian(verts);
        jac.determinant().abs() / (1..=self.dim).product::<usize>() as f64
    }

    pub(crate) fn jacobian(&self, verts: &[usize]) -> nalgebra::DMatrix<f64> {
        let d = self.dim;
        let origin = self.vertex(verts[0]);
        nalgebra::DMatrix::from_fn(d, d, |r, c| self.vertex(verts[c + 1])[r] - origin[r])
    }

    /// Maps barycentric coordinates on simplex `s` to a physical point.
    pub fn map_point(&self, s: usize, bary: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (&v, &b) in self.simplex(s).iter().zip(bary) {
            for (o, x) in out.iter_mut().zip(self.vertex(v)) {
                *o += b * x;
            }
        }
    }

    /// Containing simplex of `x` as `(vertices, barycentric coordinates)`.
    pub fn locate(&self, x: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
        let d = self.dim;
        if x.len() != d || x.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(Error::PointOutside(x.to_vec()));
        }
        let n = self.cells;
        let per_axis = n + 1;
        let mut corner = 0usize;
        let mut local = vec![0.0; d];
        let mut stride = 1usize;
        let mut strides = vec![0usize; d];
        for a in 0..d {
            let scaled = x[a] * n as f64;
            let c = (scaled.floor() as usize).min(n - 1);
            local[a] = scaled - c as f64;
            corner += c * stride;
            strides[a] = stride;
            stride *= per_axis;
        }
        let mut perm: Vec<usize> = (0..d).collect();
        // stable sort keeps ties on the same Kuhn simplex deterministically
        perm.sort_by(|&a, &b| local[b].total_cmp(&local[a]));
        let mut verts = Vec::with_capacity(d + 1);
        let mut bary = Vec::with_capacity(d + 1);
        let mut v = corner;
        verts.push(v);
        bary.push(1.0 - local[perm[0]]);
        for j in 0..d {
            v += strides[perm[j]];
            verts.push(v);
            let next = if j + 1 < d { local[perm[j + 1]] } else { 0.0 };
            bary.push(local[perm[j]] - next);
        }
        Ok((verts, bary))
    }

    /// Evaluates the P1 function with interior values `dofs` at `x`.
    pub fn evaluate(&self, dofs: &[f64], x: &[f64]) -> Result<f64> {
        if dofs.len() != self.n_dofs() {
            return Err(Error::DimensionMismatch { expected: self.n_dofs(), got: dofs.len() });
        }
        let (verts, bary) = self.locate(x)?;
        Ok(verts
            .iter()
            .zip(&bary)
            .filter_map(|(&v, &b)| self.vertex_dof(v).map(|dof| b * dofs[dof]))
            .sum())
    }

    /// Nodal interpolant of `g` on the interior vertices.
    pub fn interpolate(&self, g: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.dof_vertex.iter().map(|&v| g(self.vertex(v))).collect()
    }
}

/// Builds the structured simplicial mesh of `(0,1)^d` with `cells` per axis.
pub fn build_structured_mesh(dim: usize, cells: usize) -> Result<SimplicialMesh> {
    SimplicialMesh::structured(dim, cells)
}
