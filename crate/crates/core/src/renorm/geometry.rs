use std::collections::{HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lattice::{for_box, simulate_black_lattice, BlackLattice, LatticeConfig, Site};
use crate::error::{Error, Result};
use crate::estimate::par_map_indexed;
use crate::rng::{replicate_seed, sample_rng, stream};

fn neighbours(d: usize, x: Site) -> impl Iterator<Item = Site> {
    (0..d).flat_map(move |a| {
        [-1i64, 1].into_iter().map(move |s| {
            let mut y = x;
            y[a] += s;
            y
        })
    })
}

fn euclid(a: Site, b: Site) -> f64 {
    (0..3)
        .map(|i| ((a[i] - b[i]) as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean diameter of a finite point set.
pub fn diameter(s: &[Site]) -> f64 {
    let mut best = 0.0f64;
    for (i, &a) in s.iter().enumerate() {
        for &b in &s[i + 1..] {
            best = best.max(euclid(a, b));
        }
    }
    best
}

/// Checks that `s` is a nonempty nearest-neighbour connected subset of
/// `[-half, half]^d` with diameter at least `min_diam`.
fn validate_set(name: &str, d: usize, s: &[Site], half: i64, min_diam: f64) -> Result<()> {
    let err = |m: String| Err(Error::Geometry(format!("{name}: {m}")));
    if s.is_empty() {
        return err("empty set".into());
    }
    if let Some(x) = s
        .iter()
        .find(|x| (0..3).any(|a| if a < d { x[a].abs() > half } else { x[a] != 0 }))
    {
        return err(format!("{x:?} lies outside [-{half}, {half}]^{d}"));
    }
    let set: HashSet<Site> = s.iter().copied().collect();
    let mut seen = HashSet::from([s[0]]);
    let mut queue = VecDeque::from([s[0]]);
    while let Some(x) = queue.pop_front() {
        for y in neighbours(d, x) {
            if set.contains(&y) && seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    if seen.len() != set.len() {
        return err("not connected".into());
    }
    let pts: Vec<Site> = set.into_iter().collect();
    let diam = diameter(&pts);
    if diam < min_diam {
        return err(format!("diameter {diam:.3} below {min_diam}"));
    }
    Ok(())
}

/// Whether a path of black vertices inside `[-4 rho L_n, 4 rho L_n]^d` joins
/// `s1` to `s2`.
///
/// `s1` and `s2` must be connected subsets of `[-rho L_n, rho L_n]^d` with
/// diameter at least `10 sigma L_{n-1}`, and the scales must satisfy the
/// separation condition.
pub fn check_geometry(lat: &BlackLattice, s1: &[Site], s2: &[Site], n: usize) -> Result<bool> {
    let p = &lat.scales;
    p.check_geometric()?;
    if n == 0 || n != lat.n {
        return Err(Error::Precondition(format!(
            "scale {n} must be positive and equal to the lattice scale {}",
            lat.n
        )));
    }
    let overflow = || Error::Precondition("scale overflows i64".into());
    let l_n = p.scale_i64(n).ok_or_else(overflow)?;
    let l_prev = p.scale_i64(n - 1).ok_or_else(overflow)?;
    let inner = p.rho as i64 * l_n;
    let outer = 4 * inner;
    if lat.half < outer {
        return Err(Error::Geometry(format!(
            "lattice half-width {} does not cover [-{outer}, {outer}]^d",
            lat.half
        )));
    }
    let min_diam = 10.0 * p.sigma as f64 * l_prev as f64;
    validate_set("S1", p.d, s1, inner, min_diam)?;
    validate_set("S2", p.d, s2, inner, min_diam)?;

    let target: HashSet<usize> = s2
        .iter()
        .filter_map(|&x| lat.index(x))
        .filter(|&i| lat.black[i])
        .collect();
    if target.is_empty() {
        return Ok(false);
    }
    let mut seen = vec![false; lat.black.len()];
    let mut queue = VecDeque::new();
    for &x in s1 {
        let i = lat.index(x).expect("validated");
        if lat.black[i] && !seen[i] {
            seen[i] = true;
            queue.push_back(x);
        }
    }
    while let Some(x) = queue.pop_front() {
        if target.contains(&lat.index(x).expect("inside")) {
            return Ok(true);
        }
        for y in neighbours(p.d, x) {
            if (0..p.d).any(|a| y[a].abs() > outer) {
                continue;
            }
            let j = lat.index(y).expect("inside");
            if lat.black[j] && !seen[j] {
                seen[j] = true;
                queue.push_back(y);
            }
        }
    }
    Ok(false)
}

/// A random nearest-neighbour path in `[-half, half]^d` whose diameter is at
/// least `min_diam`, built from straight runs in random directions.
pub fn random_connected_set<R: Rng>(rng: &mut R, d: usize, half: i64, min_diam: f64) -> Vec<Site> {
    assert!(
        2.0 * half as f64 * (d as f64).sqrt() >= min_diam,
        "box too small"
    );
    let run_max = (min_diam as i64 / 2).max(2);
    loop {
        let mut x = [0i64; 3];
        for xa in x.iter_mut().take(d) {
            *xa = rng.random_range(-half..=half);
        }
        let start = x;
        let mut path = vec![x];
        let mut far = 0.0f64;
        let mut extra: Option<usize> = None;
        for _ in 0..(200.0 * min_diam.max(1.0)) as usize {
            let a = rng.random_range(0..d);
            let s = if rng.random_bool(0.5) { 1 } else { -1 };
            for _ in 0..rng.random_range(1..=run_max) {
                if (x[a] + s).abs() > half {
                    break;
                }
                x[a] += s;
                path.push(x);
                far = far.max(euclid(start, x));
            }
            match extra {
                Some(0) => {
                    path.sort_unstable();
                    path.dedup();
                    return path;
                }
                Some(ref mut k) => *k -= 1,
                None if far >= min_diam => extra = Some(rng.random_range(0..4)),
                None => {}
            }
        }
    }
}

/// A pair of sets on which the connectivity statement failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trial: u64,
    pub seed: u64,
    pub s1: Vec<Site>,
    pub s2: Vec<Site>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub trials: u64,
    /// Trials in which `G_{n,0}` held.
    pub g_held: u64,
    pub pairs_checked: u64,
    pub counterexamples: Vec<Counterexample>,
}

/// Runs `trials` independent lattices; whenever `G_{n,0}` holds, checks
/// `pairs` random set pairs for a black connection.
pub fn geometry_trials(
    cfg: &LatticeConfig,
    trials: u64,
    pairs: usize,
    workers: usize,
) -> Result<GeometryReport> {
    cfg.scales.check_geometric()?;
    let n = cfg.n;
    let l_n = cfg
        .scales
        .scale_i64(n)
        .ok_or_else(|| Error::Precondition("scale overflows i64".into()))?;
    let l_prev = cfg.scales.scale_i64(n.saturating_sub(1)).unwrap_or(1);
    let inner = cfg.scales.rho as i64 * l_n;
    let min_diam = 10.0 * cfg.scales.sigma as f64 * l_prev as f64;
    let per_trial = par_map_indexed(0..trials, workers, |t| {
        let seed = replicate_seed(cfg.seed, t);
        let lat = simulate_black_lattice(&LatticeConfig {
            seed,
            ..cfg.clone()
        })?;
        let held = lat.g_origin[n].ok_or_else(|| Error::Resource {
            what: format!("G_{n},0 exceeds the work limit; use n = 1 or raise max_g_work"),
            required_bytes: 0,
            budget_bytes: 0,
        })?;
        let mut bad = Vec::new();
        if !held {
            return Ok((false, bad));
        }
        let mut rng = sample_rng(seed, stream::SYNTHETIC);
        for _ in 0..pairs {
            let s1 = random_connected_set(&mut rng, cfg.scales.d, inner, min_diam);
            let s2 = random_connected_set(&mut rng, cfg.scales.d, inner, min_diam);
            if !check_geometry(&lat, &s1, &s2, n)? {
                bad.push(Counterexample {
                    trial: t,
                    seed,
                    s1,
                    s2,
                });
            }
        }
        Ok((true, bad))
    })?;
    let g_held = per_trial.iter().filter(|(h, _)| *h).count() as u64;
    Ok(GeometryReport {
        trials,
        g_held,
        pairs_checked: g_held * pairs as u64,
        counterexamples: per_trial.into_iter().flat_map(|(_, b)| b).collect(),
    })
}

/// Number of nearest-neighbour components of black vertices in
/// `[-r, r]^d`; a cross-check for small regions.
pub fn black_components(lat: &BlackLattice, r: i64) -> usize {
    let d = lat.scales.d;
    let mut seen = vec![false; lat.black.len()];
    let mut count = 0;
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for a in 0..d {
        lo[a] = -r;
        hi[a] = r;
    }
    for_box(d, lo, hi, |x| {
        let i = match lat.index(x) {
            Some(i) => i,
            None => return true,
        };
        if !lat.black[i] || seen[i] {
            return true;
        }
        count += 1;
        seen[i] = true;
        let mut stack = vec![x];
        while let Some(y) = stack.pop() {
            for z in neighbours(d, y) {
                if (0..d).any(|a| z[a].abs() > r) {
                    continue;
                }
                let j = lat.index(z).expect("inside");
                if lat.black[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(z);
                }
            }
        }
        true
    });
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renorm::scheme::ScaleParams;

    fn desk() -> ScaleParams {
        ScaleParams::new(2, 50, 2, 1).unwrap()
    }

    fn segment(from: Site, len: i64, axis: usize) -> Vec<Site> {
        (0..=len)
            .map(|t| {
                let mut x = from;
                x[axis] += t;
                x
            })
            .collect()
    }

    #[test]
    fn all_black_and_no_black() {
        let mut cfg = LatticeConfig::new(desk(), 1, 1.0, vec![1.0], 0);
        let lat = simulate_black_lattice(&cfg).unwrap();
        let s1 = segment([-100, -100, 0], 10, 0);
        let s2 = segment([90, 50, 0], 10, 1);
        assert!(check_geometry(&lat, &s1, &s2, 1).unwrap());
        cfg.p_g0 = 0.0;
        let none = simulate_black_lattice(&cfg).unwrap();
        assert!(!check_geometry(&none, &s1, &s2, 1).unwrap());
    }

    #[test]
    fn malformed_sets_rejected() {
        let lat =
            simulate_black_lattice(&LatticeConfig::new(desk(), 1, 1.0, vec![1.0], 0)).unwrap();
        let ok = segment([0, 0, 0], 10, 0);
        let short = segment([0, 0, 0], 9, 0);
        let outside = segment([95, 0, 0], 10, 0);
        let mut gap = segment([0, 0, 0], 10, 0);
        gap.remove(4);
        for bad in [vec![], short, outside, gap] {
            assert!(matches!(
                check_geometry(&lat, &bad, &ok, 1),
                Err(Error::Geometry(_))
            ));
        }
        assert!(check_geometry(&lat, &ok, &ok, 2).is_err());
        let narrow = ScaleParams::new(2, 40, 2, 1).unwrap();
        let lat =
            simulate_black_lattice(&LatticeConfig::new(narrow, 1, 1.0, vec![1.0], 0)).unwrap();
        assert!(matches!(
            check_geometry(&lat, &ok, &ok, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn random_sets_are_valid() {
        let mut rng = sample_rng(4, stream::SYNTHETIC);
        for _ in 0..50 {
            let s = random_connected_set(&mut rng, 2, 100, 10.0);
            validate_set("S", 2, &s, 100, 10.0).unwrap();
        }
        for _ in 0..10 {
            let s = random_connected_set(&mut rng, 3, 12, 10.0);
            validate_set("S", 3, &s, 12, 10.0).unwrap();
        }
    }

    #[test]
    fn a_wall_of_failures_separates() {
        // black everywhere except a vertical wall: no G, and no path
        let lat0 =
            simulate_black_lattice(&LatticeConfig::new(desk(), 1, 1.0, vec![1.0], 0)).unwrap();
        let mut lat = lat0.clone();
        for y in -400..=400 {
            let i = lat.index([0, y, 0]).unwrap();
            lat.black[i] = false;
        }
        let s1 = segment([-50, 0, 0], 10, 1);
        let s2 = segment([50, 0, 0], 10, 1);
        assert!(!check_geometry(&lat, &s1, &s2, 1).unwrap());
        assert_eq!(black_components(&lat, 400), 2);
        assert_eq!(black_components(&lat0, 400), 1);
    }

    #[test]
    fn trials_find_no_counterexample() {
        let cfg = LatticeConfig::new(desk(), 1, 1.0 - 1.0 / 641_601.0, vec![1.0], 17);
        let rep = geometry_trials(&cfg, 12, 5, 1).unwrap();
        assert!(rep.g_held > 0);
        assert!(rep.counterexamples.is_empty());
        assert_eq!(rep, geometry_trials(&cfg, 12, 5, 2).unwrap());
    }
}
