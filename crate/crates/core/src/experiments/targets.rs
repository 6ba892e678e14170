use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Target `(x, t) -> value` on `Q = (0,1)^d x (0,1)`.
pub type TargetFn = fn(&[f64], f64) -> f64;

fn sine(x: &[f64], t: f64) -> f64 {
    x.iter().map(|c| (PI * c).sin()).product::<f64>() * (PI * t).sin()
}

fn ramp(x: &[f64], t: f64) -> f64 {
    x.iter().map(|c| (PI * c).sin()).product::<f64>() * t
}

fn zero(_: &[f64], _: f64) -> f64 {
    0.0
}

fn one(_: &[f64], _: f64) -> f64 {
    1.0
}

const REGISTRY: [(&str, TargetFn); 4] = [("sine", sine), ("ramp", ramp), ("zero", zero), ("one", one)];

pub fn target_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

/// `sine` is `prod_i sin(pi x_i) sin(pi t)`; `ramp` replaces the time
/// factor by `t`; `zero` and `one` are constants.
pub fn builtin_target(name: &str) -> Result<TargetFn> {
    REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, f)| *f)
        .ok_or_else(|| Error::UnknownTarget(format!("{name} (known: {})", target_names().join(", "))))
}
