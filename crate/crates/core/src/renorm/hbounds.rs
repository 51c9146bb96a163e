use serde::{Deserialize, Serialize};

use super::scheme::HBounds;
use crate::error::{Error, Result};

/// Summability report for `eps_n = (R L_{n-1})^{1 - gamma (beta - d/2)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HBoundReport {
    pub exponent: f64,
    pub eps: Vec<f64>,
    /// Partial sum of `eps` in index order.
    pub sum: f64,
    /// `R^e / (1 - lambda^e)`.
    pub geometric_sum: f64,
    /// `R^{-3/2} / 2`.
    pub target: f64,
    pub holds: bool,
    /// Smallest `R >= 1` for which the geometric sum meets the target.
    pub r_min: f64,
    /// Bounds on `P[H_n^c]` used downstream: `exp(-(R L_{n-1})^2)`.
    pub h_bounds: HBounds,
}

/// Builds the `eps_n` sequence (`n = 1..=terms`) and checks its sum against
/// `R^{-3/2}/2`.
pub fn make_h_bounds(
    r: f64,
    gamma: f64,
    beta: f64,
    d: usize,
    lambda: u64,
    terms: usize,
) -> Result<HBoundReport> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::Config {
            path: "R".into(),
            message: "must be a finite number >= 1".into(),
        });
    }
    if lambda < 2 {
        return Err(Error::Config {
            path: "lambda".into(),
            message: "must be at least 2".into(),
        });
    }
    if !(gamma > 0.0) {
        return Err(Error::Config {
            path: "gamma".into(),
            message: "must be positive".into(),
        });
    }
    let e = 1.0 - gamma * (beta - d as f64 / 2.0);
    if e >= 0.0 {
        return Err(Error::Precondition(format!(
            "exponent 1 - gamma(beta - d/2) = {e} is not negative; the series diverges"
        )));
    }
    let beta_min = 5.0 / (2.0 * gamma) + d as f64 / 2.0;
    if beta <= beta_min {
        return Err(Error::Precondition(format!(
            "need beta > 5/(2 gamma) + d/2 = {beta_min}, got beta = {beta}"
        )));
    }
    let lam = lambda as f64;
    let eps: Vec<f64> = (1..=terms.max(1))
        .map(|n| (r * lam.powi(n as i32 - 1)).powf(e))
        .collect();
    let sum = eps.iter().sum();
    let geometric_sum = r.powf(e) / (1.0 - lam.powf(e));
    let target = 0.5 * r.powf(-1.5);
    // R^{e + 3/2} <= (1 - lambda^e)/2 with e + 3/2 < 0
    let r_min = ((1.0 - lam.powf(e)) / 2.0).powf(1.0 / (e + 1.5)).max(1.0);
    Ok(HBoundReport {
        exponent: e,
        eps,
        sum,
        geometric_sum,
        target,
        holds: geometric_sum <= target,
        r_min,
        h_bounds: HBounds::Gaussian { r, c: 1.0 },
    })
}
