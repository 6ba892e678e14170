//! Quarter-wave sine transforms of length N (DST-II and DST-III).

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

/// The sine matrix `S[i, m] = sin(pi (m + 1/2) (i + 1) / N)` for
/// `i, m = 0..N`; its columns are the sampled eigenfunctions of `H_T`.
///
/// `S x` is the unnormalized DST-II of `x`; `S^T y` is the DST-III of `y`
/// with its last entry doubled.
#[derive(Clone)]
pub struct SineTransform {
    n: usize,
    plan: Arc<dyn TransformType2And3<f64>>,
}

impl std::fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SineTransform").field("n", &self.n).finish()
    }
}

impl SineTransform {
    pub fn new(n: usize) -> Self {
        let plan = DctPlanner::new().plan_dst2(n);
        Self { n, plan }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Scratch buffer for [`Self::apply_with`] / [`Self::apply_transpose_with`].
    pub fn make_buffer(&self) -> Vec<f64> {
        vec![0.0; self.plan.get_scratch_len()]
    }

    /// `out = S x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut buf = self.make_buffer();
        self.apply_with(x, out, &mut buf);
    }

    /// `out = S^T y`
    pub fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        let mut buf = self.make_buffer();
        self.apply_transpose_with(y, out, &mut buf);
    }

    pub fn apply_with(&self, x: &[f64], out: &mut [f64], buf: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        out.copy_from_slice(x);
        self.plan.process_dst2_with_scratch(out, buf);
    }

    pub fn apply_transpose_with(&self, y: &[f64], out: &mut [f64], buf: &mut [f64]) {
        assert_eq!(y.len(), self.n);
        out.copy_from_slice(y);
        if let Some(last) = out.last_mut() {
            *last *= 2.0;
        }
        self.plan.process_dst3_with_scratch(out, buf);
    }
}
