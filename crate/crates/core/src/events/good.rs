//! Good points, contact points along a path, and good pairs.

use serde::{Deserialize, Serialize};

use super::slab::planar_components;
use super::window::{
    all_joined, connects, dist, field_values, large_components, node_at, Local, Window,
};
use crate::error::{Error, Result};
use crate::excursion::Connectivity;
use crate::fieldgen::{FieldSample, GridGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GoodVariant {
    /// Planar component, slab uniqueness and coupling gap.
    #[default]
    Planar,
    /// Components on the six face squares of a cube, joined inside it.
    Faces,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodPointSpec {
    #[serde(default)]
    pub center: [f64; 3],
    pub scale: f64,
    pub delta: f64,
    pub gamma: f64,
    pub a: f64,
    #[serde(default)]
    pub variant: GoodVariant,
    /// Sprinkled level, default `2R^{-3/2}`.
    #[serde(default)]
    pub high_level: Option<f64>,
    /// Connection level, default `R^{-3/2}`.
    #[serde(default)]
    pub low_level: Option<f64>,
    /// Budget for `|f - f_r|`, default `R^{-3/2} / 2`.
    #[serde(default)]
    pub gap_budget: Option<f64>,
    /// Reject parameters outside `0 < gamma < a^2 < 1` (otherwise warn).
    #[serde(default = "yes")]
    pub enforce_regime: bool,
}

fn yes() -> bool {
    true
}

impl GoodPointSpec {
    pub fn new(scale: f64, delta: f64, gamma: f64, a: f64, variant: GoodVariant) -> Self {
        Self {
            center: [0.0; 3],
            scale,
            delta,
            gamma,
            a,
            variant,
            high_level: None,
            low_level: None,
            gap_budget: None,
            enforce_regime: true,
        }
    }

    pub fn high(&self) -> f64 {
        self.high_level.unwrap_or(2.0 * self.scale.powf(-1.5))
    }

    pub fn low(&self) -> f64 {
        self.low_level.unwrap_or(self.scale.powf(-1.5))
    }

    pub fn budget(&self) -> f64 {
        self.gap_budget.unwrap_or(0.5 * self.scale.powf(-1.5))
    }

    /// Truncation radius `max(R^gamma, r_q)` of the field to sample.
    pub fn truncation_radius(&self, r_q: f64) -> f64 {
        self.scale.powf(self.gamma).max(r_q)
    }

    /// Checks the parameter regime. Returns a warning when it is violated
    /// but not enforced.
    pub fn validate(&self) -> Result<Option<String>> {
        if !(self.scale > 0.0 && self.delta > 0.0) {
            return Err(Error::Precondition(
                "scale and delta must be positive".into(),
            ));
        }
        if self.high() < self.low() {
            return Err(Error::Precondition(
                "high level must be >= low level".into(),
            ));
        }
        let a2 = self.a * self.a;
        if 0.0 < self.gamma && self.gamma < a2 && a2 < 1.0 {
            return Ok(None);
        }
        let msg = format!(
            "gamma = {}, a = {} outside 0 < gamma < a^2 < 1",
            self.gamma, self.a
        );
        if self.enforce_regime {
            Err(Error::Precondition(msg))
        } else {
            Ok(Some(msg))
        }
    }

    pub fn shifted(&self, t: f64) -> Self {
        Self {
            high_level: Some(self.high() + t),
            low_level: Some(self.low() + t),
            ..self.clone()
        }
    }
}

/// Good point test on a coupled sample whose `values` hold `f_{R^gamma}`.
pub fn good_point(sample: &FieldSample, spec: &GoodPointSpec) -> Result<bool> {
    spec.validate()?;
    if sample.dim() != 3 {
        return Err(Error::UnsupportedCombination(
            "good points are defined on 3D samples".into(),
        ));
    }
    let coupled = field_values(sample, true)?;
    let grid = &sample.grid;
    let values = &sample.values;
    let r = spec.scale;
    let x = spec.center;
    let delta_r = spec.delta * r;
    match spec.variant {
        GoodVariant::Planar => {
            let c = [x[0], x[1]];
            let slab_lo = [x[0] - 4.0 * r, x[1] - 4.0 * r, 0.0];
            let slab_hi = [x[0] + 4.0 * r, x[1] + 4.0 * r, r.powf(spec.a)];
            let slab = Window::covering(grid, &slab_lo, &slab_hi)?;
            if planar_components(grid, values, c, r, spec.high(), delta_r)?.is_empty() {
                return Ok(false);
            }
            let wide = planar_components(grid, values, c, 2.0 * r, spec.high(), delta_r)?;
            if !all_joined(grid, values, &slab, spec.low(), &wide) {
                return Ok(false);
            }
            Ok(gap(grid, values, coupled, &slab) <= spec.budget())
        }
        GoodVariant::Faces => {
            let lo: Vec<f64> = x.iter().map(|v| v - r / 2.0).collect();
            let hi: Vec<f64> = x.iter().map(|v| v + r / 2.0).collect();
            let cube = Window::covering(grid, &lo, &hi)?;
            let mut all = Vec::new();
            for axis in 0..3 {
                for side in [-0.5, 0.5] {
                    let plane = x[axis] + side * r;
                    node_at(grid, axis, plane)?;
                    let mut a: Vec<f64> = x.iter().map(|v| v - r / 4.0).collect();
                    let mut b: Vec<f64> = x.iter().map(|v| v + r / 4.0).collect();
                    a[axis] = plane;
                    b[axis] = plane;
                    let comps = large_components(grid, values, &a, &b, spec.high(), delta_r)?;
                    if comps.is_empty() {
                        return Ok(false);
                    }
                    all.extend(comps);
                }
            }
            if !all_joined(grid, values, &cube, spec.low(), &all) {
                return Ok(false);
            }
            Ok(gap(grid, values, coupled, &cube) <= spec.budget())
        }
    }
}

fn gap(grid: &GridGeometry, a: &[f64], b: &[f64], win: &Window) -> f64 {
    win.global_indices(grid)
        .into_iter()
        .map(|g| (a[g] - b[g]).abs())
        .fold(0.0, f64::max)
}

/// Points along a polyline at spacing at most `step`, endpoints included.
pub fn densify(path: &[[f64; 2]], step: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    if let Some(first) = path.first() {
        out.push(*first);
    }
    for w in path.windows(2) {
        let (p, q) = (w[0], w[1]);
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        let n = (len / step).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn norm2(p: [f64; 2]) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

fn dist2(p: [f64; 2], q: [f64; 2]) -> f64 {
    norm2([p[0] - q[0], p[1] - q[1]])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactCount {
    /// The greedily placed points `y_i`.
    pub placed: Vec<[f64; 2]>,
    /// How many of them connect to the outer circle.
    pub count: usize,
}

/// Places points along `path` at mutual distances at least `20 rho` and
/// counts those whose small disk connects to `∂D(3R)` in `{f >= level}`
/// while avoiding the `2 rho` disks around the other points.
pub fn contact_points(
    sample: &FieldSample,
    path: &[[f64; 2]],
    rho: f64,
    scale: f64,
    level: f64,
) -> Result<ContactCount> {
    if sample.dim() != 2 {
        return Err(Error::UnsupportedCombination(
            "contact points need a 2D sample".into(),
        ));
    }
    if path.is_empty() {
        return Err(Error::Geometry("empty path".into()));
    }
    if !(rho > 0.0 && rho <= scale) {
        return Err(Error::Precondition(format!(
            "need 0 < rho <= R, got rho = {rho}, R = {scale}"
        )));
    }
    let tol = 1e-9 * scale;
    if let Some(p) = path.iter().find(|p| norm2(**p) > 2.0 * scale + tol) {
        return Err(Error::Geometry(format!("path point {p:?} exits D(2R)")));
    }
    let grid = &sample.grid;
    let outer = 3.0 * scale;
    let local = Local::covering(grid, &[-outer, -outer], &[outer, outer])?;
    let values = field_values(sample, false)?;
    let h = grid.h;

    let mut placed: Vec<[f64; 2]> = Vec::new();
    for p in densify(path, h / 2.0) {
        if placed.iter().all(|y| dist2(*y, p) >= 20.0 * rho) {
            placed.push(p);
        }
    }

    let base = local.map(|g, p| values[g] >= level && dist(p, &[0.0, 0.0], 2) <= outer);
    let target = local.map(|_, p| dist(p, &[0.0, 0.0], 2) >= outer - h);
    let seed_r = (rho / 100.0).max(2.0 * h);
    let mut count = 0;
    for (i, y) in placed.iter().enumerate() {
        let open: Vec<bool> = base
            .iter()
            .zip(&local.points)
            .map(|(&b, p)| {
                b && placed
                    .iter()
                    .enumerate()
                    .all(|(j, yj)| j == i || dist(p, yj, 2) > 2.0 * rho)
            })
            .collect();
        let source: Vec<bool> = local
            .points
            .iter()
            .map(|p| dist(p, y, 2) <= seed_r)
            .collect();
        if connects(
            &local.shape,
            &open,
            Connectivity::FaceOnly,
            &source,
            &target,
        ) {
            count += 1;
        }
    }
    Ok(ContactCount { placed, count })
}

/// First `R'`-good pair for `path ∩ D(1.9R)` in angular scan order, with
/// `x` on `∂D(1.9R + 2R')` and `z` the radial point on `∂D(1.9R + 12R')`.
pub fn good_pair_exists(
    path: &[[f64; 2]],
    scale: f64,
    r_prime: f64,
) -> Option<([f64; 2], [f64; 2])> {
    if path.is_empty() || !(r_prime > 0.0) {
        return None;
    }
    let clip = 1.9 * scale;
    let dense = densify(path, r_prime / 16.0);
    let inside: Vec<bool> = dense.iter().map(|p| norm2(*p) <= clip).collect();
    if !inside.iter().any(|&b| b) {
        return None;
    }
    let rx = clip + 2.0 * r_prime;
    let rz = clip + 12.0 * r_prime;
    let m = ((std::f64::consts::TAU * rx) / (r_prime / 8.0)).ceil() as usize;
    for k in 0..m {
        let t = std::f64::consts::TAU * k as f64 / m as f64;
        let (s, c) = t.sin_cos();
        let x = [rx * c, rx * s];
        let z = [rz * c, rz * s];
        let d: Vec<f64> = dense.iter().map(|p| dist2(*p, x)).collect();
        let near = (0..dense.len()).any(|i| inside[i] && d[i] <= 2.0 * r_prime);
        if !near {
            continue;
        }
        let ring = 10.0 * r_prime;
        let crosses = (0..dense.len()).any(|i| inside[i] && d[i] == ring)
            || (1..dense.len())
                .any(|i| inside[i - 1] && inside[i] && (d[i - 1] - ring) * (d[i] - ring) <= 0.0);
        if !crosses {
            continue;
        }
        let far = (0..dense.len()).all(|i| !inside[i] || dist2(dense[i], z) >= 11.0 * r_prime);
        if far {
            return Some((x, z));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coupled(grid: GridGeometry, v: f64, w: f64) -> FieldSample {
        let n = grid.len();
        FieldSample::constant(grid, v)
            .with_coupled(vec![w; n])
            .unwrap()
    }

    #[test]
    fn good_point_trivial() {
        let r = 4.0;
        let spec = GoodPointSpec::new(r, 0.25, 0.2, 0.5, GoodVariant::Planar);
        let g =
            GridGeometry::new(vec![-16.0, -16.0, 0.0], vec![16.0, 16.0, 2.0], 0.5, 0.0).unwrap();
        assert!(good_point(&coupled(g.clone(), 1.0, 1.0), &spec).unwrap());
        assert!(!good_point(&coupled(g.clone(), -10.0, -10.0), &spec).unwrap());
        // item iii fails on a large gap
        assert!(!good_point(&coupled(g.clone(), 1.0, 2.0), &spec).unwrap());
        let faces = GoodPointSpec::new(r, 0.25, 0.2, 0.5, GoodVariant::Faces);
        let cube = GridGeometry::centered(3, 3.0, 0.5, 0.0).unwrap();
        assert!(good_point(&coupled(cube.clone(), 1.0, 1.0), &faces).unwrap());
        assert!(!good_point(&coupled(cube, 1.0, 1.0).shifted(-3.0), &faces).unwrap());
    }

    #[test]
    fn regime_checks() {
        let mut spec = GoodPointSpec::new(4.0, 0.25, 0.3, 0.5, GoodVariant::Planar);
        assert!(spec.validate().is_err());
        spec.enforce_regime = false;
        assert!(spec.validate().unwrap().is_some());
        let g =
            GridGeometry::new(vec![-16.0, -16.0, 0.0], vec![16.0, 16.0, 2.0], 0.5, 0.0).unwrap();
        assert!(good_point(
            &FieldSample::constant(g, 1.0),
            &GoodPointSpec::new(4.0, 0.25, 0.2, 0.5, GoodVariant::Planar)
        )
        .is_err());
    }

    #[test]
    fn contact_trivial() {
        let r = 8.0;
        let g = GridGeometry::centered(2, 3.0 * r, 0.5, 0.0).unwrap();
        let path = [[-2.0 * r, 0.0], [2.0 * r, 0.0]];
        let all =
            contact_points(&FieldSample::constant(g.clone(), 1.0), &path, 0.5, r, 0.0).unwrap();
        assert_eq!(all.count, all.placed.len());
        assert_eq!(all.placed.len(), 4);
        let none =
            contact_points(&FieldSample::constant(g.clone(), -1.0), &path, 0.5, r, 0.0).unwrap();
        assert_eq!(none.count, 0);
        let bad = contact_points(
            &FieldSample::constant(g, 1.0),
            &[[0.0, 0.0], [2.5 * r, 0.0]],
            0.5,
            r,
            0.0,
        );
        assert!(matches!(bad, Err(Error::Geometry(_))));
    }

    #[test]
    fn densify_spacing() {
        let d = densify(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], 0.3);
        assert_eq!(d.first(), Some(&[0.0, 0.0]));
        assert_eq!(d.last(), Some(&[1.0, 1.0]));
        assert!(d.windows(2).all(|w| dist2(w[0], w[1]) <= 0.3 + 1e-12));
    }
}
