//! Excursion sets `{f >= level}` on grids and their connected components.

mod label;

use serde::{Deserialize, Serialize};

pub use label::{label_grid, Connectivity};

use crate::error::{Error, Result};
use crate::fieldgen::{unravel, FieldSample, GridGeometry};

#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionMask {
    pub grid: GridGeometry,
    pub level: f64,
    pub mask: Vec<bool>,
    pub connectivity: Connectivity,
}

/// `{f >= level}` node by node; `use_coupled` selects the untruncated partner.
pub fn threshold(sample: &FieldSample, level: f64, use_coupled: bool) -> Result<ExcursionMask> {
    if !level.is_finite() {
        return Err(Error::Precondition(format!("level {level} is not finite")));
    }
    let values = if use_coupled {
        sample
            .coupled_values
            .as_ref()
            .ok_or_else(|| Error::Precondition("no coupled values to threshold".into()))?
    } else {
        &sample.values
    };
    Ok(ExcursionMask {
        grid: sample.grid.clone(),
        level,
        mask: values.iter().map(|&v| v >= level).collect(),
        connectivity: Connectivity::FaceOnly,
    })
}

impl ExcursionMask {
    pub fn from_mask(
        grid: GridGeometry,
        mask: Vec<bool>,
        connectivity: Connectivity,
    ) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::Geometry("mask length does not match grid".into()));
        }
        Ok(Self {
            grid,
            level: f64::NAN,
            mask,
            connectivity,
        })
    }

    /// The complement with the dual connectivity.
    pub fn complement(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            level: self.level,
            mask: self.mask.iter().map(|m| !m).collect(),
            connectivity: self.connectivity.dual(),
        }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub size: usize,
    /// Largest distance between member node centres.
    pub diameter: f64,
    pub bbox_lo: Vec<usize>,
    pub bbox_hi: Vec<usize>,
    /// `touches[axis] = [low face, high face]` of the labeled box.
    pub touches: Vec<[bool; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLabeling {
    pub shape: Vec<usize>,
    pub h: f64,
    pub labels: Vec<u32>,
    pub count: usize,
    pub components: Vec<ComponentInfo>,
}

impl ComponentLabeling {
    /// Info for label `id` (1-based).
    pub fn info(&self, id: u32) -> &ComponentInfo {
        &self.components[id as usize - 1]
    }

    /// Flat node indices of every component, in label order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (flat, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push(flat);
            }
        }
        out
    }
}

pub fn label(mask: &ExcursionMask) -> ComponentLabeling {
    label_raw(
        &mask.grid.shape(),
        mask.grid.h,
        &mask.mask,
        mask.connectivity,
    )
}

pub(crate) fn label_raw(
    shape: &[usize],
    h: f64,
    mask: &[bool],
    conn: Connectivity,
) -> ComponentLabeling {
    let (labels, count) = label_grid(shape, mask, conn);
    let dim = shape.len();
    let mut members = vec![Vec::new(); count];
    for (flat, &l) in labels.iter().enumerate() {
        if l > 0 {
            members[l as usize - 1].push(flat);
        }
    }
    let mut idx = vec![0; dim];
    let components = members
        .iter()
        .map(|m| {
            let mut lo = vec![usize::MAX; dim];
            let mut hi = vec![0; dim];
            for &flat in m {
                unravel(flat, shape, &mut idx);
                for a in 0..dim {
                    lo[a] = lo[a].min(idx[a]);
                    hi[a] = hi[a].max(idx[a]);
                }
            }
            let touches = (0..dim)
                .map(|a| [lo[a] == 0, hi[a] == shape[a] - 1])
                .collect();
            ComponentInfo {
                size: m.len(),
                diameter: h * index_diameter(shape, m),
                bbox_lo: lo,
                bbox_hi: hi,
                touches,
            }
        })
        .collect();
    ComponentLabeling {
        shape: shape.to_vec(),
        h,
        labels,
        count,
        components,
    }
}

/// Components with diameter at least `min_diameter`.
pub fn diameter_filter(labeling: &ComponentLabeling, min_diameter: f64) -> Result<Vec<u32>> {
    if !(min_diameter > 0.0) {
        return Err(Error::Precondition(
            "minimum diameter must be positive".into(),
        ));
    }
    let tol = 1e-9 * labeling.h;
    Ok(labeling
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.diameter >= min_diameter - tol)
        .map(|(i, _)| i as u32 + 1)
        .collect())
}

/// Diameter, in index units, of a set of grid nodes.
///
/// Only nodes that are extreme on every axis-parallel line through them can
/// be vertices of the convex hull, and the diameter is attained between hull
/// vertices, so the pairwise search runs over that subset only.
pub fn index_diameter(shape: &[usize], nodes: &[usize]) -> f64 {
    let dim = shape.len();
    if nodes.len() < 2 {
        return 0.0;
    }
    let pts: Vec<[i64; 3]> = nodes
        .iter()
        .map(|&f| {
            let mut idx = [0usize; 3];
            unravel(f, shape, &mut idx[..dim]);
            [idx[0] as i64, idx[1] as i64, idx[2] as i64]
        })
        .collect();
    let candidates = if pts.len() <= 64 {
        pts
    } else {
        line_extremes(&pts, dim)
    };
    let mut best = 0i64;
    for (i, a) in candidates.iter().enumerate() {
        for b in &candidates[i + 1..] {
            let d2 = (0..3).map(|k| (a[k] - b[k]).pow(2)).sum::<i64>();
            best = best.max(d2);
        }
    }
    (best as f64).sqrt()
}

fn line_extremes(pts: &[[i64; 3]], dim: usize) -> Vec<[i64; 3]> {
    use std::collections::HashMap;
    let mut keep = vec![true; pts.len()];
    for axis in 0..dim {
        let mut range: HashMap<[i64; 3], (i64, i64)> = HashMap::new();
        for p in pts {
            let mut key = *p;
            key[axis] = 0;
            let e = range.entry(key).or_insert((p[axis], p[axis]));
            e.0 = e.0.min(p[axis]);
            e.1 = e.1.max(p[axis]);
        }
        for (k, p) in pts.iter().enumerate() {
            let mut key = *p;
            key[axis] = 0;
            let (lo, hi) = range[&key];
            if p[axis] != lo && p[axis] != hi {
                keep[k] = false;
            }
        }
    }
    pts.iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(p, _)| *p)
        .collect()
}
