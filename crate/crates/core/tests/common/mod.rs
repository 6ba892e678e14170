use nalgebra::{DMatrix, DVector};

/// Minimizer of `u^T K u / 2 - f^T u` over the box, by enumerating every
/// lower / upper / free assignment and keeping the best feasible candidate.
pub fn brute_force_qp(k: &DMatrix<f64>, f: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut states = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            states.push(c % 3);
            c /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&j| states[j] == 2).collect();
        let mut u: Vec<f64> = (0..n).map(|j| if states[j] == 0 { lo[j] } else if states[j] == 1 { hi[j] } else { 0.0 }).collect();
        if !free.is_empty() {
            let kff = DMatrix::from_fn(free.len(), free.len(), |a, b| k[(free[a], free[b])]);
            let rhs = DVector::from_fn(free.len(), |a, _| {
                let j = free[a];
                f[j] - (0..n).filter(|&m| states[m] != 2).map(|m| k[(j, m)] * u[m]).sum::<f64>()
            });
            let sol = kff.cholesky().unwrap().solve(&rhs);
            for (a, &j) in free.iter().enumerate() {
                u[j] = sol[a];
            }
        }
        if (0..n).any(|j| u[j] < lo[j] - 1e-13 || u[j] > hi[j] + 1e-13) {
            continue;
        }
        let uv = DVector::from_column_slice(&u);
        let obj = 0.5 * (uv.transpose() * k * &uv)[0] - uv.dot(&DVector::from_column_slice(f));
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, u));
        }
    }
    best.unwrap().1
}
