#![allow(dead_code)]

use nsmc::examples::{random_chain, random_drift, random_rate_drift, random_rate_matrix};
use nsmc::jump::{RateDriftModel, RateMatrix};
use nsmc::model::drift_matrix;
use nsmc::{DriftModel, Matrix, TransitionSequence};

/// Three-state chain with strictly positive entries and small drift matrices.
pub fn drift3(e1_scale: f64, e2_scale: f64) -> DriftModel {
    DriftModel::new(random_chain(3, 21), random_drift(3, 22, e1_scale), Some(random_drift(3, 23, e2_scale))).unwrap()
}

/// `P_k = P + t E1 + t^2/2 E2` with `t = min(k - 1, clamp)`.
pub fn forward_sequence(dm: &DriftModel, clamp: usize) -> TransitionSequence {
    let dm = dm.clone();
    TransitionSequence::from_fn(dm.dim(), None, move |k| drift_matrix(&dm, (k - 1).min(clamp) as f64, k))
}

/// `P_{n-j} = P - t E1 + t^2/2 E2` with `t = min(j, clamp)`, so `P_n = P`.
pub fn backward_sequence(dm: &DriftModel, n: usize, clamp: usize) -> TransitionSequence {
    let rev = DriftModel { base: dm.base.clone(), e1: dm.e1.scaled(-1.0), e2: dm.e2.clone() };
    TransitionSequence::from_fn(dm.dim(), Some(n), move |k| drift_matrix(&rev, (n - k).min(clamp) as f64, k))
}

pub fn rate_model(seed: u64, f1_scale: f64, f2_scale: Option<f64>) -> RateDriftModel {
    let q = RateMatrix::new(random_rate_matrix(3, seed)).unwrap();
    let f1 = random_rate_drift(3, seed + 1, f1_scale);
    let f2 = f2_scale.map(|s| random_rate_drift(3, seed + 2, s));
    RateDriftModel::new(q, f1, f2).unwrap()
}

/// Successive ratios `e_i / e_{i+1}`.
pub fn ratios(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| w[0] / w[1]).collect()
}

pub fn fmt_ratios(r: &[f64]) -> String {
    r.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", ")
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).max_abs()
}
