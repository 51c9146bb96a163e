use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;

/// Sufficient statistics of a replicate stream. Merging is exact for 0/1
/// values; callers fold in index order so float sums are reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stats {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Stats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Stats) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn from_values(values: &[f64]) -> Self {
        let mut s = Self::default();
        values.iter().for_each(|&x| s.push(x));
        s
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: f64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (
        (centre - half).max(0.0).min(p),
        (centre + half).min(1.0).max(p),
    )
}

/// A probability (Wilson interval) or a mean (normal interval).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub n: u64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
    /// Standard error of `p_hat`.
    pub std_err: f64,
}

impl Estimate {
    /// Estimate of a 0/1 observable.
    pub fn proportion(stats: &Stats, seed: u64) -> Self {
        let p = stats.mean();
        let (lo, hi) = wilson(stats.sum, stats.n, Z95);
        Self {
            p_hat: p,
            n: stats.n,
            ci_lo: lo,
            ci_hi: hi,
            seed,
            std_err: (p * (1.0 - p) / stats.n as f64).sqrt(),
        }
    }

    /// Estimate of the mean of a real observable.
    pub fn mean(stats: &Stats, seed: u64) -> Self {
        let m = stats.mean();
        let se = (stats.variance() / stats.n as f64).sqrt();
        Self {
            p_hat: m,
            n: stats.n,
            ci_lo: m - Z95 * se,
            ci_hi: m + Z95 * se,
            seed,
            std_err: se,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_lo <= p && p <= self.ci_hi
    }
}
