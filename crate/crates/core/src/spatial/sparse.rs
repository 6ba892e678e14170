use nalgebra::DMatrix;

/// Symmetric matrix in compressed sparse row storage with sorted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed in
    /// input order, so the result is deterministic for a fixed input.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; dim + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self { dim, row_offsets, cols, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `y = self * x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let range = self.row_offsets[i]..self.row_offsets[i + 1];
            *yi = self.cols[range.clone()].iter().zip(&self.values[range]).map(|(&j, v)| v * x[j]).sum();
        }
    }

    /// `y += alpha * self * x`
    pub fn apply_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let range = self.row_offsets[i]..self.row_offsets[i + 1];
            let s: f64 = self.cols[range.clone()].iter().zip(&self.values[range]).map(|(&j, v)| v * x[j]).sum();
            *yi += alpha * s;
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.dim];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_row, &old_row) in keep.iter().enumerate() {
            for (c, v) in self.row(old_row) {
                if map[c] != usize::MAX {
                    triplets.push((new_row, map[c], v));
                }
            }
        }
        Self::from_triplets(keep.len(), triplets)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}
