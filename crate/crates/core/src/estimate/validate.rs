//! Statistical validators: positive association, sprinkling, truncation
//! error and the critical-point bound on component counts.

use serde::{Deserialize, Serialize};

use super::mc::{check_compatible, map_replicates, replicate_values};
use super::stats::{Estimate, Stats, Z95};
use crate::error::{Error, Result};
use crate::events::{complement_crossing, component_count, crossing, CrossingSpec, Detector};
use crate::fieldgen::{make_kernel, GridGeometry, KernelSpec, SamplerConfig, TruncatedKernel};
use crate::quad::{sphere_area, Composite};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub p_a: f64,
    pub p_b: f64,
    pub p_ab: f64,
    pub cov: f64,
    pub std_err: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: u64,
}

/// Empirical covariance of two increasing events on the same realizations,
/// with a delta-method standard error.
pub fn fkg_check(
    a: &Detector,
    b: &Detector,
    config: &SamplerConfig,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<CovarianceEstimate> {
    for d in [a, b] {
        if !d.is_increasing() {
            return Err(Error::NotMonotone(format!(
                "{}: positive association only holds for increasing events",
                d.name()
            )));
        }
    }
    if n < 2 {
        return Err(Error::Precondition("need at least two replicates".into()));
    }
    let sampler = config.build()?;
    check_compatible(a, &sampler)?;
    check_compatible(b, &sampler)?;
    let pairs = map_replicates(&sampler, 0..n, seed, workers, |s| {
        Ok((a.evaluate(s, 0.0)?, b.evaluate(s, 0.0)?))
    })?;
    Ok(covariance(&pairs))
}

/// Sample covariance of paired values. The standard error uses the
/// influence function `(A - mean A)(B - mean B) - cov`.
pub fn covariance(pairs: &[(f64, f64)]) -> CovarianceEstimate {
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mab = pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / n;
    let cov = mab - ma * mb;
    let infl = Stats::from_values(
        &pairs
            .iter()
            .map(|p| (p.0 - ma) * (p.1 - mb) - cov)
            .collect::<Vec<_>>(),
    );
    let se = (infl.variance() / n).sqrt();
    CovarianceEstimate {
        p_a: ma,
        p_b: mb,
        p_ab: mab,
        cov,
        std_err: se,
        ci_lo: cov - Z95 * se,
        ci_hi: cov + Z95 * se,
        n: pairs.len() as u64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SprinklingResult {
    /// `P[f in A]`.
    pub p_base: f64,
    /// `P[f + t in A]`.
    pub p_raised: f64,
    pub diff: f64,
    pub diff_std_err: f64,
    /// `|diff| / (|t| R)`, the smallest constant compatible with this run.
    pub c_fit: f64,
    pub n: u64,
}

/// Compares an increasing event for `f` and for `f + t` on the same
/// realizations.
pub fn sprinkling_check(
    detector: &Detector,
    config: &SamplerConfig,
    scale: f64,
    t: f64,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<SprinklingResult> {
    if !detector.is_increasing() {
        return Err(Error::NotMonotone(detector.name().into()));
    }
    let sampler = config.build()?;
    let rows = replicate_values(detector, &sampler, 0..n, seed, &[0.0, -t], workers)?;
    let base = Stats::from_values(&rows.iter().map(|r| r[0]).collect::<Vec<_>>());
    let raised = Stats::from_values(&rows.iter().map(|r| r[1]).collect::<Vec<_>>());
    let d = Stats::from_values(&rows.iter().map(|r| r[1] - r[0]).collect::<Vec<_>>());
    let diff = raised.mean() - base.mean();
    Ok(SprinklingResult {
        p_base: base.mean(),
        p_raised: raised.mean(),
        diff,
        diff_std_err: (d.variance() / n as f64).sqrt(),
        c_fit: if t == 0.0 {
            0.0
        } else {
            diff.abs() / (t.abs() * scale)
        },
        n,
    })
}

/// Standard deviation of `f - f_r` at a point, `||q - q_r||_2`, by radial
/// quadrature.
pub fn truncation_sd(kernel: &TruncatedKernel) -> f64 {
    let full = kernel.untruncated();
    let d = kernel.dim() as f64;
    let s_max = full.support_radius();
    let Some(r) = kernel.r else { return 0.0 };
    let start = 0.5 * r - 0.25;
    if start >= s_max {
        return 0.0;
    }
    let rule = Composite::new(start, s_max, &[0.5 * r], 200, 8);
    let v = sphere_area(kernel.dim() - 1)
        * rule.integrate(|s| (full.eval(s) - kernel.eval(s)).powi(2) * s.powf(d - 1.0));
    v.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub r: f64,
    pub median: f64,
    pub p95: f64,
    /// Pointwise standard deviation of `f - f_r` from quadrature.
    pub sd_oracle: f64,
    pub threshold: f64,
    pub exceed_prob: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    pub kernel: KernelSpec,
    /// Radius of the ball `B(R)` over which the sup-norm is taken.
    pub radius: f64,
    pub h: f64,
    pub radii: Vec<f64>,
    /// Multiplier `C` of the exceedance threshold.
    pub threshold_const: f64,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos - pos.floor());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Quantiles of `||f - f_r||` over `B(R)` for each truncation radius.
///
/// The exceedance threshold is `C log(R) r^{-(beta - d/2)}` for kernels
/// with polynomial decay `beta`; for kernels without one (Gaussian decay)
/// it is `C sd_r sqrt(2 log N)`, the Gaussian maximum scale over the `N`
/// nodes of the ball.
pub fn truncation_check(
    params: &TruncationParams,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<TruncationRow>> {
    let dim = params.kernel.dim;
    let big_r = params.radius;
    params
        .radii
        .iter()
        .map(|&r| {
            let kernel = make_kernel(params.kernel.clone(), Some(r))?;
            let pad = kernel.untruncated().support_radius();
            let grid = GridGeometry::centered(dim, big_r, params.h, pad)?;
            let config = SamplerConfig::Convolution {
                kernel: kernel.clone(),
                grid: grid.clone(),
                coupled: true,
            };
            let sampler = config.build()?;
            let inside = |idx: &[usize]| {
                let p = grid.point(idx);
                (0..dim).map(|a| p[a] * p[a]).sum::<f64>() <= big_r * big_r + 1e-9
            };
            let mut gaps =
                map_replicates(&sampler, 0..n, seed, workers, |s| s.coupling_gap(inside))?;
            gaps.sort_by(f64::total_cmp);
            let sd = truncation_sd(&kernel);
            let nodes = grid.len() as f64;
            let threshold = match params.kernel.beta {
                Some(beta) => {
                    params.threshold_const
                        * big_r.ln().max(1.0)
                        * r.powf(-(beta - dim as f64 / 2.0))
                }
                None => params.threshold_const * sd * (2.0 * nodes.ln()).sqrt(),
            };
            let exceed = gaps.iter().filter(|&&g| g > threshold).count() as f64 / n as f64;
            Ok(TruncationRow {
                r,
                median: quantile(&gaps, 0.5),
                p95: quantile(&gaps, 0.95),
                sd_oracle: sd,
                threshold,
                exceed_prob: exceed,
                n,
            })
        })
        .collect()
}

/// Expected critical-point counts `(E N1, E N2)` bounding the number of
/// components of `{f >= l}` that meet the unit disk: `N1` on the unit
/// circle, `N2` in the disk. The kernel must be planar.
pub fn kac_rice_bound(kernel: &TruncatedKernel) -> Result<(f64, f64)> {
    if kernel.dim() != 2 {
        return Err(Error::UnsupportedCombination(
            "the critical-point bound is planar".into(),
        ));
    }
    let (k2, k4) = kernel.covariance_derivatives();
    let k2a = k2.abs();
    // f on the circle is stationary in the angle with second and fourth
    // derivatives -k2 and k4 - k2.
    let n1 = 2.0 * ((k4 - k2) / k2a).sqrt();
    // Hessian entries: Var(H11) = k4, Cov(H11, H22) = Var(H12) = k4 / 3.
    // det H = u^2 - (v^2 + w^2) with u ~ N(0, 2m), v^2 + w^2 ~ Exp(mean 2m).
    let m = k4 / 3.0;
    let mean_exp = 2.0 * m;
    let rule = Composite::new(-12.0, 12.0, &[0.0], 48, 12);
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let e_abs_det = rule.integrate(|z| {
        let x = 2.0 * m * z * z;
        phi(z) * (x - mean_exp + 2.0 * mean_exp * (-x / mean_exp).exp())
    });
    let n2 = std::f64::consts::PI / (2.0 * std::f64::consts::PI * k2a) * e_abs_det;
    Ok((n1, n2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KacRiceResult {
    pub mc: Estimate,
    pub n1: f64,
    pub n2: f64,
    pub bound: f64,
}

/// Monte Carlo mean number of components of `{f_r >= level}` meeting the
/// unit disk, sampled on `[-half, half]^2`, against the critical-point bound.
pub fn kac_rice_check(
    kernel: &TruncatedKernel,
    level: f64,
    half: f64,
    h: f64,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<KacRiceResult> {
    let (n1, n2) = kac_rice_bound(kernel)?;
    let grid = GridGeometry::centered(2, half, h, kernel.support_radius())?;
    let config = SamplerConfig::Convolution {
        kernel: kernel.clone(),
        grid,
        coupled: false,
    };
    let sampler = config.build()?;
    let counts = map_replicates(&sampler, 0..n, seed, workers, |s| {
        Ok(component_count(s, &[0.0, 0.0], 1.0, level)? as f64)
    })?;
    Ok(KacRiceResult {
        mc: Estimate::mean(&Stats::from_values(&counts), seed),
        n1,
        n2,
        bound: n1 + n2,
    })
}

/// Empirical covariance of the field at one lag along the first axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagCovariance {
    pub lag: f64,
    /// Mean over replicates of the grid average of `f(x) f(x + lag e_1)`.
    pub estimate: f64,
    pub std_err: f64,
    /// Exact covariance of the sampled kernel.
    pub oracle: f64,
    pub n: u64,
}

impl LagCovariance {
    /// `|estimate - oracle| <= k std_err + budget`.
    pub fn within(&self, k: f64, budget: f64) -> bool {
        (self.estimate - self.oracle).abs() <= k * self.std_err + budget
    }
}

/// Per-replicate spatial averages of `f(x) f(x + lag e_1)`; replicates are
/// independent, so their spread gives the standard error. Lags must be
/// multiples of the grid spacing.
pub fn field_covariance(
    config: &SamplerConfig,
    lags: &[f64],
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<LagCovariance>> {
    let SamplerConfig::Convolution { kernel, grid, .. } = config else {
        return Err(Error::UnsupportedCombination(
            "covariance oracle needs a convolution sampler".into(),
        ));
    };
    if n < 2 {
        return Err(Error::Precondition("need at least two replicates".into()));
    }
    let shape = grid.shape();
    let mut steps = Vec::with_capacity(lags.len());
    for &lag in lags {
        let k = lag / grid.h;
        if !(lag >= 0.0) || (k - k.round()).abs() > 1e-9 || k.round() as usize >= shape[0] {
            return Err(Error::Geometry(format!(
                "lag {lag} is not a grid multiple inside the box"
            )));
        }
        steps.push(k.round() as usize);
    }
    let stride0: usize = shape[1..].iter().product();
    let sampler = config.build()?;
    let rows = map_replicates(&sampler, 0..n, seed, workers, |s| {
        Ok(steps
            .iter()
            .map(|&k| {
                let m = (shape[0] - k) * stride0;
                let off = k * stride0;
                s.values[..m]
                    .iter()
                    .zip(&s.values[off..off + m])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / m as f64
            })
            .collect::<Vec<f64>>())
    })?;
    Ok(lags
        .iter()
        .enumerate()
        .map(|(j, &lag)| {
            let st = Stats::from_values(&rows.iter().map(|r| r[j]).collect::<Vec<_>>());
            LagCovariance {
                lag,
                estimate: st.mean(),
                std_err: (st.variance() / n as f64).sqrt(),
                oracle: kernel.covariance(lag),
                n,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityResult {
    pub n: u64,
    /// Realizations with exactly one of the crossing and its dual.
    pub exclusive: u64,
    pub crossing: Estimate,
}

/// Counts realizations where the crossing of `{f >= l}` and the dual crossing
/// of `{f < l}` are mutually exclusive and exhaustive.
pub fn duality_check(
    spec: &CrossingSpec,
    config: &SamplerConfig,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<DualityResult> {
    if config.dim() != 2 {
        return Err(Error::UnsupportedCombination("duality is planar".into()));
    }
    let dual = spec.dual();
    let sampler = config.build()?;
    let pairs = map_replicates(&sampler, 0..n, seed, workers, |s| {
        Ok((crossing(s, spec)?, complement_crossing(s, &dual)?))
    })?;
    let hits: Vec<f64> = pairs.iter().map(|p| if p.0 { 1.0 } else { 0.0 }).collect();
    Ok(DualityResult {
        n,
        exclusive: pairs.iter().filter(|p| p.0 != p.1).count() as u64,
        crossing: Estimate::proportion(&Stats::from_values(&hits), seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bargmann_fock_bound() {
        let k = make_kernel(KernelSpec::bargmann_fock(2), None).unwrap();
        let (n1, n2) = kac_rice_bound(&k).unwrap();
        // kappa'' = -1, kappa'''' = 3: N1 = 4 and E|det H| = 4/sqrt(3)
        assert!((n1 - 4.0).abs() < 1e-4, "{n1}");
        assert!((n2 - 2.0 / 3f64.sqrt()).abs() < 1e-4, "{n2}");
    }

    #[test]
    fn covariance_of_identical_events() {
        let pairs: Vec<(f64, f64)> = (0..1000)
            .map(|i| ((i % 4 == 0) as u8 as f64, (i % 4 == 0) as u8 as f64))
            .collect();
        let c = covariance(&pairs);
        assert!((c.cov - 0.25 * 0.75).abs() < 1e-12);
        assert!(c.ci_lo > 0.0);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
    }

    #[test]
    fn truncation_sd_decreases() {
        let sd: Vec<f64> = [4.0, 6.0, 8.0]
            .iter()
            .map(|&r| truncation_sd(&make_kernel(KernelSpec::bargmann_fock(2), Some(r)).unwrap()))
            .collect();
        assert!(sd[0] > sd[1] && sd[1] > sd[2] && sd[2] > 0.0, "{sd:?}");
        let far = make_kernel(KernelSpec::bargmann_fock(2), Some(20.0)).unwrap();
        assert_eq!(truncation_sd(&far), 0.0);
    }

    #[test]
    fn lag_covariance_small_run() {
        let cfg = SamplerConfig::bargmann_fock(vec![-4.0; 2], vec![4.0; 2], 0.25, Some(8.0), false)
            .unwrap();
        let rows = field_covariance(&cfg, &[0.0, 1.0], 40, 3, 1).unwrap();
        assert!((rows[1].oracle - (-0.5f64).exp()).abs() < 1e-3);
        for r in &rows {
            assert!(r.within(4.0, 0.05), "{r:?}");
        }
        assert!(field_covariance(&cfg, &[0.3], 4, 0, 1).is_err());
    }

    #[test]
    fn duality_is_exact() {
        let cfg =
            SamplerConfig::bargmann_fock(vec![0.0; 2], vec![3.0; 2], 0.25, None, false).unwrap();
        let d = duality_check(&CrossingSpec::square(3.0, 0.0), &cfg, 30, 1, 1).unwrap();
        assert_eq!(d.exclusive, 30);
    }

    #[test]
    fn refuses_non_monotone() {
        let cfg =
            SamplerConfig::bargmann_fock(vec![-1.0; 2], vec![1.0; 2], 0.5, None, false).unwrap();
        let coin = Detector::Coin { p: 0.5 };
        let pv = Detector::PointValue {
            point: vec![0.0, 0.0],
            level: 0.0,
        };
        assert!(matches!(
            fkg_check(&coin, &pv, &cfg, 10, 0, 1),
            Err(Error::NotMonotone(_))
        ));
        assert!(matches!(
            sprinkling_check(&coin, &cfg, 1.0, 0.1, 10, 0, 1),
            Err(Error::NotMonotone(_))
        ));
    }
}
