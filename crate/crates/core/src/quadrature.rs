//! Gauss-Legendre and reference-simplex quadrature rules.

use crate::error::{Error, Result};

/// `n`-point Gauss-Legendre rule on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.5], vec![1.0]);
    }
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton on P_n from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = 0.5 * (1.0 - x);
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (points, weights)
}

/// Points in barycentric coordinates with weights on the reference simplex
/// (volume `1/d!`).
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexRule {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SimplexRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Rule on the reference `d`-simplex exact for polynomials of degree `order`.
pub fn simplex_quadrature(dim: usize, order: usize) -> Result<SimplexRule> {
    if !(1..=5).contains(&order) {
        return Err(Error::QuadratureOrder(order));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidMesh(format!("unsupported dimension {dim}")));
    }
    let rule = match (dim, order) {
        (1, _) => {
            let (x, w) = gauss_legendre((order + 2) / 2);
            SimplexRule { dim, points: x.iter().map(|&s| vec![1.0 - s, s]).collect(), weights: w }
        }
        (2, 1) => SimplexRule { dim, points: vec![vec![1.0 / 3.0; 3]], weights: vec![0.5] },
        (2, 2) => SimplexRule {
            dim,
            points: vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5]],
            weights: vec![1.0 / 6.0; 3],
        },
        (3, 1) => SimplexRule { dim, points: vec![vec![0.25; 4]], weights: vec![1.0 / 6.0] },
        (3, 2) => {
            let a = (5.0 - 5f64.sqrt()) / 20.0;
            let b = 1.0 - 3.0 * a;
            let points = (0..4).map(|k| (0..4).map(|j| if j == k { b } else { a }).collect()).collect();
            SimplexRule { dim, points, weights: vec![1.0 / 24.0; 4] }
        }
        _ => collapsed_rule(dim, order),
    };
    Ok(rule)
}

/// Conical product rule: Gauss-Legendre on the unit cube mapped by the
/// Duffy transform, with the Jacobian folded into the weights.
fn collapsed_rule(dim: usize, order: usize) -> SimplexRule {
    let q = (order + dim).div_ceil(2);
    let (x, w) = gauss_legendre(q);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        2 => {
            for (u1, w1) in x.iter().zip(&w) {
                for (u2, w2) in x.iter().zip(&w) {
                    let (a, b) = (*u1, u2 * (1.0 - u1));
                    points.push(vec![1.0 - a - b, a, b]);
                    weights.push(w1 * w2 * (1.0 - u1));
                }
            }
        }
        3 => {
            for (u1, w1) in x.iter().zip(&w) {
                for (u2, w2) in x.iter().zip(&w) {
                    for (u3, w3) in x.iter().zip(&w) {
                        let a = *u1;
                        let b = u2 * (1.0 - u1);
                        let c = u3 * (1.0 - u1) * (1.0 - u2);
                        points.push(vec![1.0 - a - b - c, a, b, c]);
                        weights.push(w1 * w2 * w3 * (1.0 - u1).powi(2) * (1.0 - u2));
                    }
                }
            }
        }
        _ => unreachable!("collapsed rules are only used for d = 2, 3"),
    }
    SimplexRule { dim, points, weights }
}
