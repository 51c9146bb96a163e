use gfperc_core::estimate::Stats;
use gfperc_core::fieldgen::{FieldSample, SamplerConfig};
use statrs::distribution::{ContinuousCDF, Normal};

fn small_bf(coupled: bool, r: Option<f64>) -> SamplerConfig {
    SamplerConfig::bargmann_fock(vec![0.0, 0.0], vec![4.0, 4.0], 0.25, r, coupled).unwrap()
}

/// Values at the interior nodes `[0, 4]^2`, every fourth node per axis.
fn spaced_values(s: &FieldSample) -> Vec<f64> {
    let mut out = Vec::new();
    for i in (0..=16).step_by(4) {
        for j in (0..=16).step_by(4) {
            out.push(s.value_at(&[i, j]));
        }
    }
    out
}

#[test]
fn marginals_are_standard_normal() {
    let sampler = small_bf(false, None).build().unwrap();
    let mut stats = Stats::default();
    let mut above = 0u64;
    for seed in 0..400 {
        for v in spaced_values(&sampler.sample(seed)) {
            stats.push(v);
            above += u64::from(v >= 1.0);
        }
    }
    let n = stats.n as f64;
    // Nodes in one sample are correlated (about 0.14 at distance 1), so
    // the effective count is smaller than n; the slack covers that.
    assert!(stats.mean().abs() < 0.06, "mean {}", stats.mean());
    assert!(
        (stats.variance() - 1.0).abs() < 0.06,
        "variance {}",
        stats.variance()
    );
    let tail = 1.0 - Normal::new(0.0, 1.0).unwrap().cdf(1.0);
    let p = above as f64 / n;
    assert!(
        (p - tail).abs() < 0.02,
        "P[f >= 1] = {p}, normal tail {tail}"
    );
}

#[test]
fn sample_is_a_function_of_the_seed() {
    let a = small_bf(false, None).build().unwrap();
    let b = small_bf(false, None).build().unwrap();
    assert_eq!(a.sample(7).values, b.sample(7).values);
    assert_ne!(a.sample(7).values, a.sample(8).values);
}

#[test]
fn coupled_samples_agree_for_long_truncation() {
    // At r = 32 the truncated kernel equals the full one on its support.
    let s = small_bf(true, Some(32.0)).build().unwrap().sample(3);
    assert!(s.is_coupled());
    assert_eq!(s.coupling_gap(|_| true).unwrap(), 0.0);
}

#[test]
fn short_truncation_decorrelates_far_nodes() {
    // With r = 2 the kernel support is 1, so nodes at distance 3 are independent.
    let sc = SamplerConfig::bargmann_fock(vec![0.0, 0.0], vec![3.0, 0.5], 0.25, Some(2.0), false)
        .unwrap();
    let sampler = sc.build().unwrap();
    let mut prod = Stats::default();
    for seed in 0..3000 {
        let s = sampler.sample(seed);
        prod.push(s.value_at(&[0, 0]) * s.value_at(&[12, 0]));
    }
    let se = (prod.variance() / prod.n as f64).sqrt();
    assert!(prod.mean().abs() < 4.0 * se, "cov {} se {se}", prod.mean());
}
