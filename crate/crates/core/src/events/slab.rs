//! Events in slabs `[-L, L]^2 x [0, H]` of 3D samples.

use serde::{Deserialize, Serialize};

use super::window::{all_joined, connects, field_values, large_components, node_at, Local, Window};
use crate::error::{Error, Result};
use crate::excursion::{label_grid, Connectivity};
use crate::fieldgen::{unravel, FieldSample, GridGeometry};

fn require_3d(sample: &FieldSample) -> Result<()> {
    if sample.dim() != 3 {
        return Err(Error::UnsupportedCombination(
            "slab events need a 3D sample".into(),
        ));
    }
    Ok(())
}

/// Crossing of `([0,r] x {0} x [0,r]) ∪ ([0,r] x [0,r] x {0})` from the
/// edge `x3 = r` of the first square to the edge `x2 = r` of the second.
pub fn orthogonal_squares_crossing(sample: &FieldSample, r: f64, level: f64) -> Result<bool> {
    require_3d(sample)?;
    if !(r > 0.0) {
        return Err(Error::Geometry("square side must be positive".into()));
    }
    let grid = &sample.grid;
    let y0 = node_at(grid, 1, 0.0)?;
    let z0 = node_at(grid, 2, 0.0)?;
    let win = Window::covering(grid, &[0.0, 0.0, 0.0], &[r, r, r])?;
    let (wy, wz) = (y0 - win.lo[1], z0 - win.lo[2]);
    let local = Local::new(grid, &win);
    let values = field_values(sample, false)?;
    let shape = local.shape.clone();
    let mut idx = [0usize; 3];
    let mut open = Vec::with_capacity(local.global.len());
    let mut source = Vec::with_capacity(open.capacity());
    let mut target = Vec::with_capacity(open.capacity());
    for (k, &g) in local.global.iter().enumerate() {
        unravel(k, &shape, &mut idx);
        let (on1, on2) = (idx[1] == wy, idx[2] == wz);
        open.push((on1 || on2) && values[g] >= level);
        source.push(on1 && idx[2] == shape[2] - 1);
        target.push(on2 && idx[1] == shape[1] - 1);
    }
    Ok(connects(
        &shape,
        &open,
        Connectivity::FaceOnly,
        &source,
        &target,
    ))
}

/// Planar components of `{f_r >= planar_level}` in `center + [-planar_half,
/// planar_half]^2` (plane `x3 = 0`) against 3D components of
/// `{f_r >= slab_level}` in `center + [-slab_half, slab_half]^2 x [0, slab_height]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabEventSpec {
    #[serde(default)]
    pub center: [f64; 2],
    pub planar_half: f64,
    pub slab_half: f64,
    pub slab_height: f64,
    pub planar_level: f64,
    pub slab_level: f64,
    pub min_diameter: f64,
}

impl SlabEventSpec {
    /// Boxes `[-2R,2R]^2` and `[-4R,4R]^2 x [0,R^a]` with levels `2R^{-3/2}`
    /// and `R^{-3/2}`.
    pub fn scaled(scale: f64, a: f64, delta: f64) -> Self {
        let s = scale.powf(-1.5);
        Self {
            center: [0.0, 0.0],
            planar_half: 2.0 * scale,
            slab_half: 4.0 * scale,
            slab_height: scale.powf(a),
            planar_level: 2.0 * s,
            slab_level: s,
            min_diameter: delta * scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.planar_level < self.slab_level {
            return Err(Error::Precondition(
                "planar level must be >= slab level".into(),
            ));
        }
        if !(self.slab_height > 0.0 && self.min_diameter > 0.0) {
            return Err(Error::Precondition(
                "slab height and min diameter must be positive".into(),
            ));
        }
        if !(self.planar_half > 0.0 && self.planar_half <= self.slab_half) {
            return Err(Error::Geometry(
                "planar box must lie inside the slab".into(),
            ));
        }
        Ok(())
    }

    pub fn shifted(&self, t: f64) -> Self {
        Self {
            planar_level: self.planar_level + t,
            slab_level: self.slab_level + t,
            ..self.clone()
        }
    }
}

pub(crate) fn planar_components(
    grid: &GridGeometry,
    values: &[f64],
    c: [f64; 2],
    half: f64,
    level: f64,
    min_diameter: f64,
) -> Result<Vec<Vec<usize>>> {
    node_at(grid, 2, 0.0)?;
    large_components(
        grid,
        values,
        &[c[0] - half, c[1] - half, 0.0],
        &[c[0] + half, c[1] + half, 0.0],
        level,
        min_diameter,
    )
}

/// Every large planar component at the sprinkled level lies in one 3D
/// component at the lower level. Vacuously true with fewer than two.
pub fn uniqueness_in_slab(sample: &FieldSample, spec: &SlabEventSpec) -> Result<bool> {
    require_3d(sample)?;
    spec.validate()?;
    let grid = &sample.grid;
    let values = field_values(sample, false)?;
    let c = spec.center;
    let (s, hgt) = (spec.slab_half, spec.slab_height);
    let slab = Window::covering(grid, &[c[0] - s, c[1] - s, 0.0], &[c[0] + s, c[1] + s, hgt])?;
    let comps = planar_components(
        grid,
        values,
        c,
        spec.planar_half,
        spec.planar_level,
        spec.min_diameter,
    )?;
    Ok(all_joined(grid, values, &slab, spec.slab_level, &comps))
}

/// Parameters of the sprouting event: planar components of diameter at
/// least `R^a` in `[-2R, 2R]^2` must reach the plane `x3 = R^{a^2}` through
/// the lower level by a set of diameter at most `3R^a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SproutsSpec {
    pub scale: f64,
    pub a: f64,
    pub gamma: f64,
    pub planar_level: f64,
    pub path_level: f64,
}

impl SproutsSpec {
    pub fn new(scale: f64, a: f64, gamma: f64) -> Self {
        let s = scale.powf(-1.5);
        Self {
            scale,
            a,
            gamma,
            planar_level: 2.0 * s,
            path_level: s,
        }
    }

    pub fn height(&self) -> f64 {
        self.scale.powf(self.a * self.a)
    }

    pub fn min_diameter(&self) -> f64 {
        self.scale.powf(self.a)
    }

    /// Side of the square tiles within which an upward path is searched;
    /// any set inside a tile column has diameter at most `3R^a`.
    pub fn tile_side(&self) -> f64 {
        let d = 3.0 * self.min_diameter();
        ((d * d - self.height().powi(2)) / 2.0).max(0.0).sqrt()
    }

    pub fn shifted(&self, t: f64) -> Self {
        Self {
            planar_level: self.planar_level + t,
            path_level: self.path_level + t,
            ..self.clone()
        }
    }
}

/// Sprouting event; see [`SproutsSpec`]. Upward paths are searched in
/// overlapping tile columns of side `w` at offsets `w/2`.
pub fn sprouts(sample: &FieldSample, spec: &SproutsSpec) -> Result<bool> {
    require_3d(sample)?;
    if spec.planar_level < spec.path_level {
        return Err(Error::Precondition(
            "planar level must be >= path level".into(),
        ));
    }
    let grid = &sample.grid;
    let values = field_values(sample, false)?;
    let half = 2.0 * spec.scale;
    let height = spec.height();
    let w = spec.tile_side();
    if w < grid.h {
        return Err(Error::Precondition(format!(
            "tile side {w:.3} below grid spacing; the slab is too tall for the diameter cap"
        )));
    }
    let slab = Window::covering(grid, &[-half, -half, 0.0], &[half, half, height])?;
    let comps = planar_components(
        grid,
        values,
        [0.0, 0.0],
        half,
        spec.planar_level,
        spec.min_diameter(),
    )?;
    if comps.is_empty() {
        return Ok(true);
    }
    // plane nodes joined upward within some tile column
    let mut sprouted = vec![false; grid.len()];
    let step = w / 2.0;
    let n_tiles = ((2.0 * half - w) / step).ceil().max(0.0) as usize + 1;
    for ti in 0..n_tiles {
        for tj in 0..n_tiles {
            let x0 = (-half + ti as f64 * step).min(half - w).max(-half);
            let y0 = (-half + tj as f64 * step).min(half - w).max(-half);
            let hi_x = (x0 + w).min(half);
            let hi_y = (y0 + w).min(half);
            let win = Window::covering(grid, &[x0, y0, 0.0], &[hi_x, hi_y, height])?;
            mark_sprouts(
                grid,
                values,
                &win,
                slab.hi[2],
                spec.path_level,
                &mut sprouted,
            );
        }
    }
    Ok(comps.iter().all(|m| m.iter().any(|&g| sprouted[g])))
}

fn mark_sprouts(
    grid: &GridGeometry,
    values: &[f64],
    win: &Window,
    top: usize,
    level: f64,
    sprouted: &mut [bool],
) {
    let global = win.global_indices(grid);
    let shape = win.shape();
    let mask: Vec<bool> = global.iter().map(|&g| values[g] >= level).collect();
    let (labels, count) = label_grid(&shape, &mask, Connectivity::FaceOnly);
    let mut reaches = vec![false; count + 1];
    let top_local = top - win.lo[2];
    let mut idx = [0usize; 3];
    for k in 0..global.len() {
        unravel(k, &shape, &mut idx);
        if idx[2] == top_local && labels[k] > 0 {
            reaches[labels[k] as usize] = true;
        }
    }
    for k in 0..global.len() {
        unravel(k, &shape, &mut idx);
        if idx[2] == 0 && labels[k] > 0 && reaches[labels[k] as usize] {
            sprouted[global[k]] = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab_grid(half: f64, top: f64, h: f64) -> GridGeometry {
        GridGeometry::new(vec![-half, -half, 0.0], vec![half, half, top], h, 0.0).unwrap()
    }

    fn field(grid: &GridGeometry, f: impl Fn([f64; 3]) -> f64) -> FieldSample {
        let shape = grid.shape();
        let mut idx = [0; 3];
        let v = (0..grid.len())
            .map(|k| {
                unravel(k, &shape, &mut idx);
                f(grid.point(&idx))
            })
            .collect();
        FieldSample::from_values(grid.clone(), v).unwrap()
    }

    #[test]
    fn orthogonal_squares() {
        let g = GridGeometry::new(vec![0.0; 3], vec![4.0; 3], 0.5, 0.0).unwrap();
        assert!(
            orthogonal_squares_crossing(&FieldSample::constant(g.clone(), 1.0), 4.0, 0.0).unwrap()
        );
        let first_only = field(&g, |p| if p[1] == 0.0 { 1.0 } else { -1.0 });
        assert!(!orthogonal_squares_crossing(&first_only, 4.0, 0.0).unwrap());
        let off = GridGeometry::new(vec![0.25; 3], vec![4.25; 3], 0.5, 0.0).unwrap();
        assert!(orthogonal_squares_crossing(&FieldSample::constant(off, 1.0), 4.0, 0.0).is_err());
    }

    #[test]
    fn uniqueness_trivial_cases() {
        let g = slab_grid(8.0, 2.0, 0.5);
        let spec = SlabEventSpec {
            center: [0.0, 0.0],
            planar_half: 4.0,
            slab_half: 8.0,
            slab_height: 2.0,
            planar_level: 0.2,
            slab_level: 0.1,
            min_diameter: 1.0,
        };
        assert!(uniqueness_in_slab(&FieldSample::constant(g.clone(), 1.0), &spec).unwrap());
        assert!(uniqueness_in_slab(&FieldSample::constant(g.clone(), -1.0), &spec).unwrap());
        // two planar bars joined only through the top layer
        let joined = field(&g, |p| {
            let bar = p[0].abs() == 2.0 && p[1].abs() <= 3.0;
            let bridge = p[1] == 0.0 && p[0].abs() <= 2.0;
            if (bar && p[2] <= 2.0) || (bridge && p[2] == 2.0) {
                1.0
            } else {
                -1.0
            }
        });
        assert!(uniqueness_in_slab(&joined, &spec).unwrap());
        let lower = SlabEventSpec {
            slab_height: 1.5,
            ..spec.clone()
        };
        assert!(!uniqueness_in_slab(&joined, &lower).unwrap());
        // the bridge above the plane is below the slab level but above the planar one
        let sprinkled = field(&g, |p| {
            let bar = p[0].abs() == 2.0 && p[1].abs() <= 3.0 && p[2] == 0.0;
            let bridge = p[1] == 0.0 && p[0].abs() <= 2.0 && p[2] == 0.0;
            if bar {
                1.0
            } else if bridge {
                0.15
            } else {
                -1.0
            }
        });
        assert!(uniqueness_in_slab(&sprinkled, &spec).unwrap());
    }

    #[test]
    fn sprouts_trivial_cases() {
        let spec = SproutsSpec::new(4.0, 0.5, 0.2);
        assert!((spec.height() - 4f64.powf(0.25)).abs() < 1e-12);
        let g = slab_grid(8.0, 2.0, 0.25);
        assert!(sprouts(&FieldSample::constant(g.clone(), 1.0), &spec).unwrap());
        assert!(sprouts(&FieldSample::constant(g.clone(), -1.0), &spec).unwrap());
        // a flat planar sheet with nothing above it
        let flat = field(&g, |p| if p[2] == 0.0 { 1.0 } else { -1.0 });
        assert!(!sprouts(&flat, &spec).unwrap());
        // a chimney at the origin rescues the sheet
        let chimney = field(&g, |p| {
            if p[2] == 0.0 || (p[0] == 0.0 && p[1] == 0.0) {
                1.0
            } else {
                -1.0
            }
        });
        assert!(sprouts(&chimney, &spec).unwrap());
    }
}
