use serde::{Deserialize, Serialize};

use super::scheme::ScaleParams;
use crate::error::{Error, Result};
use crate::rng::{splitmix, stream};

/// A vertex of `Z^d`, `d <= 3`; unused coordinates are zero.
pub type Site = [i64; 3];

/// Source of the base events `G_{0,x}` and of the translates of `H_m`.
pub trait LatticeInputs {
    fn g0(&self, x: Site) -> bool;
    /// Translate of `H_m` to `k * L_m`.
    fn h(&self, m: usize, k: Site) -> bool;
}

/// Independent Bernoulli inputs hashed from `(seed, level, site)`.
/// Every input is available on demand, so no region needs to be stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticInputs {
    pub seed: u64,
    pub p_g0: f64,
    /// `p_h[m - 1] = P[H_m]`.
    pub p_h: Vec<f64>,
}

fn site_uniform(seed: u64, tag: u64, level: u64, x: Site) -> f64 {
    let mut h = splitmix(seed ^ 0x3c6e_f372_fe94_f82b);
    h = splitmix(h ^ tag);
    h = splitmix(h ^ level);
    for c in x {
        h = splitmix(h ^ c as u64);
    }
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl LatticeInputs for SyntheticInputs {
    fn g0(&self, x: Site) -> bool {
        site_uniform(self.seed, stream::LATTICE_G0, 0, x) < self.p_g0
    }

    fn h(&self, m: usize, k: Site) -> bool {
        let p = self.p_h.get(m - 1).copied().unwrap_or(1.0);
        site_uniform(self.seed, stream::LATTICE_H, m as u64, k) < p
    }
}

/// Visits the box `[lo, hi]` (first `d` axes) until `f` returns false.
/// Returns whether the visit completed.
pub(crate) fn for_box(d: usize, lo: Site, hi: Site, mut f: impl FnMut(Site) -> bool) -> bool {
    if (0..d).any(|a| lo[a] > hi[a]) {
        return true;
    }
    let mut x = [0i64; 3];
    x[..d].copy_from_slice(&lo[..d]);
    loop {
        if !f(x) {
            return false;
        }
        let mut a = 0;
        loop {
            if a == d {
                return true;
            }
            if x[a] < hi[a] {
                x[a] += 1;
                break;
            }
            x[a] = lo[a];
            a += 1;
        }
    }
}

fn dist2(a: Site, b: Site) -> i128 {
    (0..3).map(|i| ((a[i] - b[i]) as i128).pow(2)).sum()
}

fn check_dim(p: &ScaleParams) -> Result<()> {
    p.validate()?;
    if p.d > 3 {
        return Err(Error::Config {
            path: "d".into(),
            message: "lattice simulation supports d <= 3".into(),
        });
    }
    Ok(())
}

/// `G_{n, k L_n}`, evaluated recursively from the inputs.
///
/// `G_{n,x}` holds iff `H_n` holds at `x` and the failing children in
/// `x + [-4 rho L_n, 4 rho L_n]^d` are pairwise closer than `sigma L_{n-1}`
/// (Euclidean distance). The child scan stops at the first far pair.
pub fn g_event<I: LatticeInputs + ?Sized>(p: &ScaleParams, inp: &I, n: usize, k: Site) -> bool {
    if n == 0 {
        return inp.g0(k);
    }
    if !inp.h(n, k) {
        return false;
    }
    let lam = p.lambda as i64;
    let span = 4 * p.rho as i64 * lam;
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for a in 0..p.d {
        lo[a] = k[a] * lam - span;
        hi[a] = k[a] * lam + span;
    }
    let s2 = (p.sigma as i128).pow(2);
    let mut failing: Vec<Site> = Vec::new();
    for_box(p.d, lo, hi, |c| {
        if g_event(p, inp, n - 1, c) {
            return true;
        }
        if failing.iter().any(|&f| dist2(f, c) >= s2) {
            return false;
        }
        failing.push(c);
        true
    })
}

/// Whether some translate of `H_m` by `y in L_m Z^d` with
/// `x in y + [-4 rho L_m, 4 rho L_m]^d` holds.
fn covered<I: LatticeInputs + ?Sized>(p: &ScaleParams, inp: &I, m: usize, x: Site, l: i64) -> bool {
    let reach = 4 * p.rho as i64 * l;
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for a in 0..p.d {
        lo[a] = (x[a] - reach).div_euclid(l) + i64::from((x[a] - reach).rem_euclid(l) != 0);
        hi[a] = (x[a] + reach).div_euclid(l);
    }
    !for_box(p.d, lo, hi, |k| !inp.h(m, k))
}

/// Black at scale `n`: `G_{0,x}` and, for every `m` in `1..=n`, `x` is covered
/// by a translate of `H_m` that holds.
pub fn is_black<I: LatticeInputs + ?Sized>(
    p: &ScaleParams,
    inp: &I,
    x: Site,
    n: usize,
) -> Result<bool> {
    if !inp.g0(x) {
        return Ok(false);
    }
    for m in 1..=n {
        let l = p
            .scale_i64(m)
            .ok_or_else(|| Error::Precondition(format!("L_{m} overflows i64")))?;
        if !covered(p, inp, m, x, l) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Inputs for one synthetic lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub scales: ScaleParams,
    pub n: usize,
    pub p_g0: f64,
    pub p_h: Vec<f64>,
    pub seed: u64,
    /// Half-width of the dense region; defaults to `4 rho L_n`.
    #[serde(default)]
    pub half: Option<i64>,
    #[serde(default = "default_budget")]
    pub budget_bytes: u64,
    /// Largest number of site visits spent on `G_{m,0}`.
    #[serde(default = "default_g_work")]
    pub max_g_work: f64,
}

fn default_budget() -> u64 {
    1 << 29
}

fn default_g_work() -> f64 {
    1e8
}

impl LatticeConfig {
    pub fn new(scales: ScaleParams, n: usize, p_g0: f64, p_h: Vec<f64>, seed: u64) -> Self {
        Self {
            scales,
            n,
            p_g0,
            p_h,
            seed,
            half: None,
            budget_bytes: default_budget(),
            max_g_work: default_g_work(),
        }
    }

    pub fn inputs(&self) -> SyntheticInputs {
        SyntheticInputs {
            seed: self.seed,
            p_g0: self.p_g0,
            p_h: self.p_h.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        check_dim(&self.scales)?;
        let prob = |path: String, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Config {
                    path,
                    message: "must lie in [0, 1]".into(),
                })
            }
        };
        prob("p_g0".into(), self.p_g0)?;
        for (i, &x) in self.p_h.iter().enumerate() {
            prob(format!("p_h[{i}]"), x)?;
        }
        if self.p_h.len() < self.n {
            return Err(Error::Config {
                path: "p_h".into(),
                message: format!("needs {} entries", self.n),
            });
        }
        Ok(())
    }
}

/// Dense base events and black flags on `[-half, half]^d`, plus `G_{m,0}`.
#[derive(Debug, Clone)]
pub struct BlackLattice {
    pub scales: ScaleParams,
    pub n: usize,
    pub half: i64,
    pub g0: Vec<bool>,
    pub black: Vec<bool>,
    /// `G_{m,0}` for `m = 0..=n`; `None` where it exceeded the work limit.
    pub g_origin: Vec<Option<bool>>,
    pub inputs: SyntheticInputs,
}

impl BlackLattice {
    pub fn side(&self) -> usize {
        (2 * self.half + 1) as usize
    }

    pub fn index(&self, x: Site) -> Option<usize> {
        let side = self.side() as i64;
        let mut idx = 0i64;
        for a in (0..self.scales.d).rev() {
            if x[a].abs() > self.half {
                return None;
            }
            idx = idx * side + x[a] + self.half;
        }
        Some(idx as usize)
    }

    pub fn site(&self, mut idx: usize) -> Site {
        let side = self.side();
        let mut x = [0i64; 3];
        for xa in x.iter_mut().take(self.scales.d) {
            *xa = (idx % side) as i64 - self.half;
            idx /= side;
        }
        x
    }

    pub fn is_black(&self, x: Site) -> bool {
        self.index(x).is_some_and(|i| self.black[i])
    }

    /// `G_{m, k L_m}`, computed on demand.
    pub fn g(&self, m: usize, k: Site) -> bool {
        g_event(&self.scales, &self.inputs, m, k)
    }

    pub fn black_count(&self) -> usize {
        self.black.iter().filter(|&&b| b).count()
    }
}

/// Marks the union of boxes `[c - r, c + r]` within `[-half, half]^d` using
/// a difference array.
fn paint_boxes(d: usize, half: i64, centers: &[Site], r: i64) -> Vec<bool> {
    let side = (2 * half + 1) as usize;
    let ext = side + 1;
    let mut diff = vec![0i32; ext.pow(d as u32)];
    for c in centers {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut empty = false;
        for a in 0..d {
            let l = (c[a] - r).max(-half);
            let h = (c[a] + r).min(half);
            empty |= l > h;
            lo[a] = (l + half) as usize;
            hi[a] = (h + half + 1) as usize;
        }
        if empty {
            continue;
        }
        for corner in 0..(1usize << d) {
            let mut idx = 0;
            let mut sign = 1;
            for a in (0..d).rev() {
                let upper = corner >> a & 1 == 1;
                idx = idx * ext + if upper { hi[a] } else { lo[a] };
                if upper {
                    sign = -sign;
                }
            }
            diff[idx] += sign;
        }
    }
    let mut stride = 1;
    for _ in 0..d {
        for i in 0..diff.len() {
            if (i / stride) % ext != 0 {
                diff[i] += diff[i - stride];
            }
        }
        stride *= ext;
    }
    let mut out = vec![false; side.pow(d as u32)];
    for_box(d, [0; 3], [side as i64 - 1; 3], |x| {
        let (mut i, mut j) = (0usize, 0usize);
        for a in (0..d).rev() {
            i = i * ext + x[a] as usize;
            j = j * side + x[a] as usize;
        }
        out[j] = diff[i] > 0;
        true
    });
    out
}

/// Samples the inputs of one lattice and evaluates base events, black flags
/// at scale `n` over the dense region, and `G_{m,0}` for `m <= n`.
pub fn simulate_black_lattice(cfg: &LatticeConfig) -> Result<BlackLattice> {
    cfg.validate()?;
    let p = cfg.scales;
    let d = p.d;
    let half = match cfg.half {
        Some(h) if h >= 0 => h,
        Some(_) => {
            return Err(Error::Config {
                path: "half".into(),
                message: "must be non-negative".into(),
            })
        }
        None => p
            .reach(cfg.n)
            .ok_or_else(|| Error::Precondition("4 rho L_n overflows i64".into()))?,
    };
    let side = 2 * half as u128 + 1;
    let sites = side.pow(d as u32);
    let needed = sites.saturating_mul(2) + (side + 1).pow(d as u32).saturating_mul(4);
    if needed > cfg.budget_bytes as u128 {
        return Err(Error::Resource {
            what: format!(
                "dense lattice of {sites} sites; evaluate single sites lazily with is_black and g_event"
            ),
            required_bytes: needed.min(u64::MAX as u128) as u64,
            budget_bytes: cfg.budget_bytes,
        });
    }
    let inputs = cfg.inputs();
    let mut lat = BlackLattice {
        scales: p,
        n: cfg.n,
        half,
        g0: Vec::new(),
        black: Vec::new(),
        g_origin: Vec::new(),
        inputs,
    };
    lat.g0 = (0..sites as usize)
        .map(|i| lat.inputs.g0(lat.site(i)))
        .collect();
    lat.black = lat.g0.clone();
    for m in 1..=cfg.n {
        let l = p
            .scale_i64(m)
            .ok_or_else(|| Error::Precondition(format!("L_{m} overflows i64")))?;
        let reach = 4 * p.rho as i64 * l;
        let kmax = (half + reach) / l;
        let mut centers = Vec::new();
        for_box(d, [-kmax; 3], [kmax; 3], |k| {
            if lat.inputs.h(m, k) {
                let mut c = [0i64; 3];
                for a in 0..d {
                    c[a] = k[a] * l;
                }
                centers.push(c);
            }
            true
        });
        let cov = paint_boxes(d, half, &centers, reach);
        for (b, c) in lat.black.iter_mut().zip(cov) {
            *b &= c;
        }
    }
    let children = (8.0 * p.rho as f64 * p.lambda as f64 + 1.0).powi(d as i32);
    lat.g_origin = (0..=cfg.n)
        .map(|m| (children.powi(m as i32) <= cfg.max_g_work).then(|| lat.g(m, [0; 3])))
        .collect();
    Ok(lat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;
    use std::collections::{BTreeSet, HashSet};

    /// Inputs given by a base rule with explicit overrides, recording reads.
    struct Overridden<'a> {
        base: &'a SyntheticInputs,
        g0_set: HashSet<Site>,
        read: RefCell<BTreeSet<Site>>,
    }

    impl LatticeInputs for Overridden<'_> {
        fn g0(&self, x: Site) -> bool {
            self.read.borrow_mut().insert(x);
            self.g0_set.contains(&x) || self.base.g0(x)
        }
        fn h(&self, m: usize, k: Site) -> bool {
            self.base.h(m, k)
        }
    }

    fn small() -> ScaleParams {
        ScaleParams::new(2, 2, 1, 1).unwrap()
    }

    #[test]
    fn trivial_extremes() {
        let p = ScaleParams::new(2, 50, 2, 1).unwrap();
        let mut cfg = LatticeConfig::new(p, 1, 1.0, vec![1.0], 3);
        let lat = simulate_black_lattice(&cfg).unwrap();
        assert_eq!(lat.black_count(), 801 * 801);
        assert_eq!(lat.g_origin, vec![Some(true), Some(true)]);
        assert!(lat.g(1, [1, -1, 0]));
        cfg.p_g0 = 0.0;
        let lat = simulate_black_lattice(&cfg).unwrap();
        assert_eq!(lat.black_count(), 0);
        assert_eq!(lat.g_origin[1], Some(false));
    }

    #[test]
    fn single_failure_tolerated_two_far_failures_not() {
        let p = ScaleParams::new(2, 50, 2, 3).unwrap();
        let base = SyntheticInputs {
            seed: 0,
            p_g0: 1.0,
            p_h: vec![1.0],
        };
        struct Holes(SyntheticInputs, Vec<Site>);
        impl LatticeInputs for Holes {
            fn g0(&self, x: Site) -> bool {
                !self.1.contains(&x)
            }
            fn h(&self, m: usize, k: Site) -> bool {
                self.0.h(m, k)
            }
        }
        let g = |holes: Vec<Site>| g_event(&p, &Holes(base.clone(), holes), 1, [0; 3]);
        assert!(g(vec![]));
        assert!(g(vec![[5, 5, 0]]));
        // distance 2 < sigma = 3
        assert!(g(vec![[5, 5, 0], [7, 5, 0], [6, 6, 0]]));
        // distance sqrt(9) = 3 >= sigma
        assert!(!g(vec![[5, 5, 0], [8, 5, 0]]));
        // outside the box: ignored
        assert!(g(vec![[5, 5, 0], [500, 5, 0]]));
    }

    #[test]
    fn h_gates_the_event_and_black_flags() {
        let p = ScaleParams::new(2, 50, 2, 1).unwrap();
        let cfg = LatticeConfig::new(p, 1, 1.0, vec![0.0], 9);
        let lat = simulate_black_lattice(&cfg).unwrap();
        assert_eq!(lat.g_origin, vec![Some(true), Some(false)]);
        assert_eq!(lat.black_count(), 0);
    }

    #[test]
    fn dense_and_lazy_black_agree() {
        let p = small();
        let mut cfg = LatticeConfig::new(p, 2, 0.9, vec![0.3, 0.4], 11);
        cfg.half = Some(20);
        let lat = simulate_black_lattice(&cfg).unwrap();
        let inp = cfg.inputs();
        for i in 0..lat.g0.len() {
            let x = lat.site(i);
            assert_eq!(lat.index(x), Some(i));
            assert_eq!(lat.black[i], is_black(&p, &inp, x, 2).unwrap(), "at {x:?}");
        }
        assert!(lat.black_count() > 0 && lat.black_count() < lat.g0.len());
    }

    #[test]
    fn black_is_monotone_in_scale() {
        let p = small();
        let inp = SyntheticInputs {
            seed: 5,
            p_g0: 0.8,
            p_h: vec![0.5, 0.5, 0.5],
        };
        for_box(2, [-30; 3], [30; 3], |x| {
            let flags: Vec<bool> = (0..=3).map(|n| is_black(&p, &inp, x, n).unwrap()).collect();
            assert!(flags.windows(2).all(|w| w[0] || !w[1]));
            true
        });
    }

    #[test]
    fn reads_stay_in_dependency_cone() {
        let p = small();
        let base = SyntheticInputs {
            seed: 1,
            p_g0: 1.0,
            p_h: vec![1.0, 1.0],
        };
        let inp = Overridden {
            base: &base,
            g0_set: HashSet::new(),
            read: RefCell::new(BTreeSet::new()),
        };
        assert!(g_event(&p, &inp, 2, [0; 3]));
        let r = p.dependency_radius(2).unwrap();
        let read = inp.read.borrow();
        assert!(read.iter().all(|x| x[0].abs() <= r && x[1].abs() <= r));
        // with every input true nothing short-circuits: the cone is filled
        assert!(read.contains(&[r, -r, 0]) && read.len() == ((2 * r + 1) * (2 * r + 1)) as usize);
    }

    #[test]
    fn far_events_read_disjoint_inputs() {
        // 2 r_n < sigma L_n makes axis-aligned cones disjoint
        let p = ScaleParams::new(2, 2, 1, 100).unwrap();
        for n in 0..=2 {
            let r = p.dependency_radius(n).unwrap();
            let l = p.scale_i64(n).unwrap();
            let base = SyntheticInputs {
                seed: 2,
                p_g0: 1.0,
                p_h: vec![1.0, 1.0],
            };
            let reads = |k: Site| {
                let inp = Overridden {
                    base: &base,
                    g0_set: HashSet::new(),
                    read: RefCell::new(BTreeSet::new()),
                };
                g_event(&p, &inp, n, k);
                inp.read.into_inner()
            };
            let step = p.sigma as i64;
            let a = reads([0; 3]);
            let b = reads([step, 0, 0]);
            assert!(a.is_disjoint(&b), "n = {n}");
            assert!(2 * r < step * l);
        }
        // the published parameters leave the same margin at every scale
        let q = ScaleParams::new(2, 10_000_000_000, 2, 1000).unwrap();
        let ratio = 2.0 * 4.0 * 2.0 * 1e10 / (1e10 - 1.0);
        assert!(ratio * 2f64.sqrt() < q.sigma as f64);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn raising_a_base_event_never_breaks_g(seed in 0u64..1000, fx in -6i64..=6, fy in -6i64..=6, p_g0 in 0.9f64..1.0) {
            let p = small();
            let base = SyntheticInputs { seed, p_g0, p_h: vec![0.9, 0.9] };
            let make = |set: HashSet<Site>| Overridden { base: &base, g0_set: set, read: RefCell::new(BTreeSet::new()) };
            let before = make(HashSet::new());
            let after = make([[fx, fy, 0]].into_iter().collect());
            for n in 0..=2usize {
                for k in [[0, 0, 0], [1, 0, 0], [0, -1, 0]] {
                    if g_event(&p, &before, n, k) {
                        proptest::prop_assert!(g_event(&p, &after, n, k));
                    }
                }
            }
        }
    }

    #[test]
    fn oversized_region_is_a_resource_error() {
        let p = ScaleParams::new(3, 50, 2, 1).unwrap();
        let cfg = LatticeConfig::new(p, 2, 1.0, vec![1.0, 1.0], 0);
        assert!(matches!(
            simulate_black_lattice(&cfg),
            Err(Error::Resource { .. })
        ));
    }
}
