use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{Estimate, Stats};
use crate::error::{Error, Result};
use crate::events::{Detector, Record};
use crate::fieldgen::{FieldSample, Sampler, SamplerConfig};
use crate::rng::{replicate_seed, stream, SeedRecord};

/// Rejects detector/sampler pairs that cannot work together.
pub fn check_compatible(detector: &Detector, sampler: &Sampler) -> Result<()> {
    let dim = sampler.grid().dim;
    if let Some(d) = detector.dim() {
        if d != dim {
            return Err(Error::Config {
                path: "detector".into(),
                message: format!(
                    "{} expects a {d}D sample, sampler is {dim}D",
                    detector.name()
                ),
            });
        }
    }
    if detector.needs_coupled() && !sampler.is_coupled() {
        return Err(Error::Config {
            path: "sampler.coupled".into(),
            message: format!("{} needs a coupled sampler", detector.name()),
        });
    }
    Ok(())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))
}

/// Applies `f` to the sample of every replicate in `range` under `master`.
/// Results come back in replicate order whatever `workers` is (0 means all
/// cores).
pub fn map_replicates<T: Send>(
    sampler: &Sampler,
    range: Range<u64>,
    master: u64,
    workers: usize,
    f: impl Fn(&FieldSample) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    par_map_indexed(range, workers, |i| {
        f(&sampler.sample(replicate_seed(master, i)))
    })
}

/// Ordered parallel map over an index range.
pub(crate) fn par_map_indexed<T: Send>(
    range: Range<u64>,
    workers: usize,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if workers == 1 {
        return range.map(f).collect();
    }
    pool(workers)?.install(|| range.into_par_iter().map(&f).collect())
}

/// Values of `detector` at each shift in `shifts`; row `i` belongs to
/// replicate `range.start + i`.
pub fn replicate_values(
    detector: &Detector,
    sampler: &Sampler,
    range: Range<u64>,
    master: u64,
    shifts: &[f64],
    workers: usize,
) -> Result<Vec<Vec<f64>>> {
    check_compatible(detector, sampler)?;
    map_replicates(sampler, range, master, workers, |s| {
        shifts.iter().map(|&t| detector.evaluate(s, t)).collect()
    })
}

/// Per-replicate records for the JSONL stream.
pub fn run_records(
    detector: &Detector,
    sampler: &Sampler,
    range: Range<u64>,
    master: u64,
    workers: usize,
) -> Result<Vec<Record>> {
    let start = range.start;
    let rows = replicate_values(detector, sampler, range, master, &[0.0], workers)?;
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            let i = start + k as u64;
            Record {
                replicate: i,
                seed: replicate_seed(master, i),
                value: v[0],
            }
        })
        .collect())
}

/// Estimate from raw replicate values.
pub fn summarize(detector: &Detector, values: &[f64], seed: u64) -> Estimate {
    let stats = Stats::from_values(values);
    if detector.is_boolean() {
        Estimate::proportion(&stats, seed)
    } else {
        Estimate::mean(&stats, seed)
    }
}

/// Monte Carlo estimate of `P[detector]` (or its mean for counts).
pub fn run_mc(
    detector: &Detector,
    config: &SamplerConfig,
    n: u64,
    master_seed: u64,
    workers: usize,
) -> Result<Estimate> {
    let sampler = config.build()?;
    run_mc_with(detector, &sampler, n, master_seed, workers)
}

pub fn run_mc_with(
    detector: &Detector,
    sampler: &Sampler,
    n: u64,
    master_seed: u64,
    workers: usize,
) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::Precondition("need at least one replicate".into()));
    }
    let rows = replicate_values(detector, sampler, 0..n, master_seed, &[0.0], workers)?;
    let values: Vec<f64> = rows.into_iter().map(|v| v[0]).collect();
    Ok(summarize(detector, &values, master_seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCurve {
    /// Shifts added to the detector's own levels, increasing.
    pub levels: Vec<f64>,
    pub estimates: Vec<Estimate>,
    pub common_rng: bool,
    /// With common random numbers and an increasing detector: number of
    /// realizations whose values increase somewhere along the levels.
    pub monotone_violations: Option<u64>,
}

/// Estimates at each level. With `common_rng` every level sees the same
/// realizations; otherwise each level gets its own seed stream.
pub fn sweep_levels(
    detector: &Detector,
    config: &SamplerConfig,
    levels: &[f64],
    n: u64,
    seed: u64,
    common_rng: bool,
    workers: usize,
) -> Result<LevelCurve> {
    if levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config {
            path: "levels".into(),
            message: "levels must be strictly increasing".into(),
        });
    }
    if n == 0 {
        return Err(Error::Precondition("need at least one replicate".into()));
    }
    let sampler = config.build()?;
    if common_rng {
        let rows = replicate_values(detector, &sampler, 0..n, seed, levels, workers)?;
        let estimates = (0..levels.len())
            .map(|j| {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                summarize(detector, &col, seed)
            })
            .collect();
        let violations = detector.is_increasing().then(|| {
            rows.iter()
                .filter(|r| r.windows(2).any(|w| w[1] > w[0]))
                .count() as u64
        });
        return Ok(LevelCurve {
            levels: levels.to_vec(),
            estimates,
            common_rng,
            monotone_violations: violations,
        });
    }
    let estimates = levels
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let s = SeedRecord::new(seed, j as u64, stream::SWEEP).derive();
            let rows = replicate_values(detector, &sampler, 0..n, s, &[t], workers)?;
            let col: Vec<f64> = rows.into_iter().map(|r| r[0]).collect();
            Ok(summarize(detector, &col, s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LevelCurve {
        levels: levels.to_vec(),
        estimates,
        common_rng,
        monotone_violations: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionParams {
    pub target: f64,
    pub bracket: (f64, f64),
    pub tol: f64,
    /// Replicates per step before any doubling.
    pub n: u64,
    /// Cap on replicates per step when the interval straddles the target.
    pub max_n: u64,
}

impl BisectionParams {
    pub fn new(target: f64, bracket: (f64, f64), tol: f64, n: u64) -> Self {
        Self {
            target,
            bracket,
            tol,
            n,
            max_n: 8 * n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub level: f64,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionResult {
    pub level_hat: f64,
    pub bracket: (f64, f64),
    pub target: f64,
    pub iterations: usize,
    pub steps: Vec<BisectionStep>,
}

/// Level at which an increasing detector has probability `target`.
pub fn bisect_level(
    detector: &Detector,
    config: &SamplerConfig,
    params: &BisectionParams,
    seed: u64,
    workers: usize,
) -> Result<BisectionResult> {
    let (mut lo, mut hi) = params.bracket;
    if !(lo < hi && params.tol > 0.0 && params.n > 0) {
        return Err(Error::Config {
            path: "bisect".into(),
            message: "need lo < hi, tol > 0 and n > 0".into(),
        });
    }
    if !detector.is_increasing() || !detector.is_boolean() {
        return Err(Error::NotMonotone(detector.name().into()));
    }
    let sampler = config.build()?;
    let target = params.target;
    let mut steps = Vec::new();
    let mut step_no = 0u64;
    let mut estimate_at = |level: f64, steps: &mut Vec<BisectionStep>| -> Result<Estimate> {
        let s = SeedRecord::new(seed, step_no, stream::BISECTION).derive();
        step_no += 1;
        let mut stats = Stats::default();
        let mut n_done = 0u64;
        let mut n_goal = params.n;
        loop {
            let rows = replicate_values(detector, &sampler, n_done..n_goal, s, &[level], workers)?;
            rows.iter().for_each(|r| stats.push(r[0]));
            n_done = n_goal;
            let est = Estimate::proportion(&stats, s);
            if !est.contains(target) || n_goal >= params.max_n {
                steps.push(BisectionStep {
                    level,
                    estimate: est,
                });
                return Ok(est);
            }
            n_goal = (2 * n_goal).min(params.max_n);
        }
    };
    let e_lo = estimate_at(lo, &mut steps)?;
    let e_hi = estimate_at(hi, &mut steps)?;
    if !(e_lo.p_hat > target && target > e_hi.p_hat) {
        return Err(Error::Bracket {
            p_lo: e_lo.p_hat,
            p_hi: e_hi.p_hat,
            target,
        });
    }
    let mut iterations = 0;
    while hi - lo > params.tol {
        let mid = 0.5 * (lo + hi);
        let e = estimate_at(mid, &mut steps)?;
        if e.p_hat > target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(BisectionResult {
        level_hat: 0.5 * (lo + hi),
        bracket: (lo, hi),
        target,
        iterations,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::CrossingSpec;

    fn tiny() -> SamplerConfig {
        SamplerConfig::bargmann_fock(vec![-1.0, -1.0], vec![1.0, 1.0], 0.5, None, false).unwrap()
    }

    #[test]
    fn constant_detector() {
        // f(0) >= -1e9 always holds
        let d = Detector::PointValue {
            point: vec![0.0, 0.0],
            level: -1e9,
        };
        let e = run_mc(&d, &tiny(), 50, 1, 1).unwrap();
        assert_eq!(e.p_hat, 1.0);
        assert!(e.contains(1.0));
    }

    #[test]
    fn worker_count_invariance() {
        let d = Detector::PointValue {
            point: vec![0.5, 0.0],
            level: 0.3,
        };
        let a = run_mc(&d, &tiny(), 300, 9, 1).unwrap();
        let b = run_mc(&d, &tiny(), 300, 9, 8).unwrap();
        assert_eq!(a, b);
        let cnt = Detector::ComponentCount {
            center: vec![0.0, 0.0],
            radius: 1.0,
            level: 0.0,
        };
        let a = run_mc(&cnt, &tiny(), 100, 9, 1).unwrap();
        let b = run_mc(&cnt, &tiny(), 100, 9, 3).unwrap();
        assert_eq!(a.p_hat.to_bits(), b.p_hat.to_bits());
        assert_eq!(a.ci_hi.to_bits(), b.ci_hi.to_bits());
    }

    #[test]
    fn dim_mismatch_is_config_error() {
        let d = Detector::Crossing(CrossingSpec::slab(1.0, 1.0, 0.0));
        assert!(matches!(
            run_mc(&d, &tiny(), 1, 0, 1),
            Err(Error::Config { .. })
        ));
        assert!(run_mc(&d, &tiny(), 0, 0, 1).is_err());
    }

    #[test]
    fn sweep_rejects_unsorted_and_saturates() {
        let d = Detector::PointValue {
            point: vec![0.0, 0.0],
            level: 0.0,
        };
        assert!(sweep_levels(&d, &tiny(), &[0.0, -1.0], 10, 0, true, 1).is_err());
        let c = sweep_levels(&d, &tiny(), &[-1e9, -0.5, 0.0, 0.5, 1e9], 200, 0, true, 1).unwrap();
        assert_eq!(c.estimates[0].p_hat, 1.0);
        assert_eq!(c.estimates[4].p_hat, 0.0);
        assert_eq!(c.monotone_violations, Some(0));
        assert!(c.estimates.windows(2).all(|w| w[0].p_hat >= w[1].p_hat));
        let ind = sweep_levels(&d, &tiny(), &[-1e9, 1e9], 20, 0, false, 1).unwrap();
        assert_eq!(ind.estimates[0].p_hat, 1.0);
        assert_eq!(ind.monotone_violations, None);
    }

    #[test]
    fn bisection_on_gaussian_tail() {
        // P[f(0) >= l] = Phi(-l) has its median at l = 0
        let d = Detector::PointValue {
            point: vec![0.0, 0.0],
            level: 0.0,
        };
        let p = BisectionParams::new(0.5, (-1.0, 1.0), 0.02, 2000);
        let r = bisect_level(&d, &tiny(), &p, 3, 1).unwrap();
        // one bisection step of slack for a mis-sided midpoint near the root
        assert!(r.level_hat.abs() <= 2.0 * p.tol, "{}", r.level_hat);
        assert!(r.bracket.1 - r.bracket.0 <= 0.02);
        let bad = BisectionParams::new(0.5, (1.0, 2.0), 0.02, 200);
        assert!(matches!(
            bisect_level(&d, &tiny(), &bad, 3, 1),
            Err(Error::Bracket { .. })
        ));
    }
}
