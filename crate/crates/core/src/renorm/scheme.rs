use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric data of a multiscale scheme: scale ratio, range and separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub d: usize,
    pub lambda: u64,
    pub rho: u64,
    pub sigma: u64,
}

impl ScaleParams {
    pub fn new(d: usize, lambda: u64, rho: u64, sigma: u64) -> Result<Self> {
        let p = Self {
            d,
            lambda,
            rho,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: &str| {
            Err(Error::Config {
                path: path.into(),
                message: message.into(),
            })
        };
        if self.d == 0 {
            return bad("d", "dimension must be positive");
        }
        if self.lambda < 2 {
            return bad("lambda", "must be at least 2");
        }
        if self.rho == 0 {
            return bad("rho", "must be positive");
        }
        if self.sigma == 0 {
            return bad("sigma", "must be positive");
        }
        Ok(())
    }

    /// `L_n = lambda^n`, exact.
    pub fn scale(&self, n: usize) -> BigUint {
        BigUint::from(self.lambda).pow(n as u32)
    }

    /// `L_n` when it fits an `i64`.
    pub fn scale_i64(&self, n: usize) -> Option<i64> {
        self.scale(n).to_i64()
    }

    /// `(3 rho lambda)^{2d}`, the number of child pairs in the union bound.
    pub fn pair_count(&self) -> BigUint {
        (BigUint::from(3u32) * self.rho * self.lambda).pow(2 * self.d as u32)
    }

    /// `1 / (4 (3 rho lambda)^{2d})` rounded to the nearest float.
    pub fn qbar0(&self) -> f64 {
        1.0 / (4.0 * self.pair_count().to_f64().unwrap_or(f64::INFINITY))
    }

    pub fn log2_qbar0(&self) -> f64 {
        -2.0 - 2.0 * self.d as f64 * (3.0 * self.rho as f64 * self.lambda as f64).log2()
    }

    /// The separation condition required by the connectivity statement.
    pub fn check_geometric(&self) -> Result<()> {
        if (self.lambda as u128) * (self.rho as u128) < 100 * self.sigma as u128 || self.rho < 2 {
            return Err(Error::Precondition(format!(
                "connectivity needs lambda*rho >= 100*sigma and rho >= 2 (got lambda={}, rho={}, sigma={})",
                self.lambda, self.rho, self.sigma
            )));
        }
        Ok(())
    }

    /// Half-width `4 rho L_n` of the box seen by `G_{n,x}`.
    pub fn reach(&self, n: usize) -> Option<i64> {
        self.scale_i64(n)?.checked_mul(4 * self.rho as i64)
    }

    /// Radius of the box of `G_0` inputs that `G_{n,0}` can read.
    pub fn dependency_radius(&self, n: usize) -> Option<i64> {
        (1..=n).try_fold(0i64, |acc, k| acc.checked_add(self.reach(k)?))
    }
}

/// A probability bound given either absolutely or as a multiple of its cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbBound {
    /// `factor * qbar0` (for `q0`).
    Relative(f64),
    Absolute(f64),
}

/// Upper bounds on `P[H_n^c]`, `n >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HBounds {
    /// `factor * qbar0 * 2^{-2^n}`.
    Cap { factor: f64 },
    /// Absolute values for `n = 1, 2, ...`.
    Explicit(Vec<f64>),
    /// `exp(-c (R L_{n-1})^2)`.
    Gaussian { r: f64, c: f64 },
}

impl HBounds {
    /// `log2 P[H_n^c]` bound, or `None` for an explicit list that is too short.
    pub fn log2(&self, p: &ScaleParams, n: usize) -> Option<f64> {
        match self {
            Self::Cap { factor } => Some(factor.log2() + p.log2_qbar0() - 2f64.powi(n as i32)),
            Self::Explicit(v) => v.get(n.checked_sub(1)?).map(|h| h.log2()),
            Self::Gaussian { r, c } => {
                let x = r * (p.lambda as f64).powi(n as i32 - 1);
                Some(-c * x * x / std::f64::consts::LN_2)
            }
        }
    }
}

/// Scale data plus the probability inputs of the doubly-exponential bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormScheme {
    #[serde(flatten)]
    pub scales: ScaleParams,
    pub q0: ProbBound,
    pub h_bounds: HBounds,
}

impl RenormScheme {
    /// Both `q0` and every `P[H_n^c]` at their caps.
    pub fn at_cap(scales: ScaleParams) -> Self {
        Self {
            scales,
            q0: ProbBound::Relative(1.0),
            h_bounds: HBounds::Cap { factor: 1.0 },
        }
    }
}

/// `lambda^n` as a decimal string, for reports.
pub fn scale_string(p: &ScaleParams, n: usize) -> String {
    p.scale(n).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_scales() {
        let p = ScaleParams::new(2, 10_000_000_000, 2, 1000).unwrap();
        assert_eq!(scale_string(&p, 3), format!("1{}", "0".repeat(30)));
        assert_eq!(p.scale_i64(1), Some(10_000_000_000));
        assert_eq!(p.scale_i64(2), None);
        // (6e10)^4 = 1.296e43
        assert_eq!(
            p.pair_count().to_string(),
            format!("1296{}", "0".repeat(40))
        );
        assert!((p.qbar0() * 4.0 * 1.296e43 - 1.0).abs() < 1e-12);
        assert!((p.log2_qbar0() - p.qbar0().log2()).abs() < 1e-9);
        p.check_geometric().unwrap();
    }

    #[test]
    fn geometric_condition() {
        assert!(ScaleParams::new(2, 50, 2, 1)
            .unwrap()
            .check_geometric()
            .is_ok());
        assert!(ScaleParams::new(2, 49, 2, 1)
            .unwrap()
            .check_geometric()
            .is_err());
        assert!(ScaleParams::new(2, 100, 1, 1)
            .unwrap()
            .check_geometric()
            .is_err());
        assert!(ScaleParams::new(2, 1, 2, 1).is_err());
    }

    #[test]
    fn reach_and_cone() {
        let p = ScaleParams::new(2, 50, 2, 1).unwrap();
        assert_eq!(p.reach(1), Some(400));
        assert_eq!(p.dependency_radius(2), Some(400 + 20_000));
        assert_eq!(p.dependency_radius(0), Some(0));
    }
}
