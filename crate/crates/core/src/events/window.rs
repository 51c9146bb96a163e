//! Rectangular node windows of a sample and region-restricted connectivity.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::excursion::{label_grid, Connectivity};
use crate::fieldgen::{strides, unravel, FieldSample, GridGeometry};

/// Index box `[lo, hi]` (inclusive) of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl Window {
    /// Nodes whose coordinates lie in the physical box `[a, b]`.
    pub fn covering(grid: &GridGeometry, a: &[f64], b: &[f64]) -> Result<Self> {
        if !grid.covers(a, b) {
            return Err(Error::Geometry(format!(
                "box {a:?}..{b:?} exceeds sampled extent {:?}..{:?}",
                grid.lo, grid.hi
            )));
        }
        let mut lo = Vec::with_capacity(grid.dim);
        let mut hi = Vec::with_capacity(grid.dim);
        for ax in 0..grid.dim {
            let (f, l) = grid.index_range(ax, a[ax], b[ax]).ok_or_else(|| {
                Error::Geometry(format!("axis {ax}: no nodes in [{}, {}]", a[ax], b[ax]))
            })?;
            lo.push(f);
            hi.push(l);
        }
        Ok(Self { lo, hi })
    }

    pub fn shape(&self) -> Vec<usize> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l + 1)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Global flat index of every window node, in window row-major order.
    pub fn global_indices(&self, grid: &GridGeometry) -> Vec<usize> {
        let shape = self.shape();
        let st = grid.strides();
        let dim = shape.len();
        let mut idx = vec![0; dim];
        (0..self.len())
            .map(|k| {
                unravel(k, &shape, &mut idx);
                (0..dim).map(|a| (idx[a] + self.lo[a]) * st[a]).sum()
            })
            .collect()
    }

    /// Physical coordinates of every window node.
    pub fn points(&self, grid: &GridGeometry) -> Vec<[f64; 3]> {
        let shape = self.shape();
        let dim = shape.len();
        let mut idx = vec![0; dim];
        (0..self.len())
            .map(|k| {
                unravel(k, &shape, &mut idx);
                let mut p = [0.0; 3];
                for a in 0..dim {
                    p[a] = grid.coord(a, idx[a] + self.lo[a]);
                }
                p
            })
            .collect()
    }
}

/// Index of the node sitting exactly at coordinate `x` on `axis`.
pub fn node_at(grid: &GridGeometry, axis: usize, x: f64) -> Result<usize> {
    let t = (x - grid.lo[axis]) / grid.h;
    let i = t.round();
    if (t - i).abs() > 1e-6 || i < 0.0 || i as usize >= grid.shape()[axis] {
        return Err(Error::Geometry(format!(
            "no grid node at coordinate {x} on axis {axis}"
        )));
    }
    Ok(i as usize)
}

pub(crate) fn field_values(sample: &FieldSample, coupled: bool) -> Result<&[f64]> {
    if coupled {
        sample
            .coupled_values
            .as_deref()
            .ok_or_else(|| Error::Precondition("detector needs a coupled sample".into()))
    } else {
        Ok(&sample.values)
    }
}

/// Whether some `source` node reaches some `target` node through `open`
/// nodes (all index sets are local to a box of `shape`).
pub fn connects(
    shape: &[usize],
    open: &[bool],
    conn: Connectivity,
    source: &[bool],
    target: &[bool],
) -> bool {
    let dim = shape.len();
    let st = strides(shape);
    let offs = conn.offsets(dim);
    let mut seen = vec![false; open.len()];
    let mut queue = VecDeque::new();
    for k in 0..open.len() {
        if open[k] && source[k] {
            if target[k] {
                return true;
            }
            seen[k] = true;
            queue.push_back(k);
        }
    }
    let mut idx = [0usize; 3];
    while let Some(u) = queue.pop_front() {
        unravel(u, shape, &mut idx[..dim]);
        for o in &offs {
            let mut v = 0usize;
            let mut inside = true;
            for a in 0..dim {
                let j = idx[a] as i64 + o[a];
                if j < 0 || j >= shape[a] as i64 {
                    inside = false;
                    break;
                }
                v += j as usize * st[a];
            }
            if inside && open[v] && !seen[v] {
                if target[v] {
                    return true;
                }
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    false
}

/// Labels `open` within a local box and reports whether a single component
/// meets both `source` and `target`.
pub fn labels_meet(
    shape: &[usize],
    open: &[bool],
    conn: Connectivity,
    source: &[bool],
    target: &[bool],
) -> bool {
    let (labels, count) = label_grid(shape, open, conn);
    let mut hit = vec![false; count + 1];
    for k in 0..open.len() {
        if labels[k] > 0 && source[k] {
            hit[labels[k] as usize] = true;
        }
    }
    (0..open.len()).any(|k| labels[k] > 0 && target[k] && hit[labels[k] as usize])
}

/// Nodes of a window with their global indices and coordinates.
pub(crate) struct Local {
    pub shape: Vec<usize>,
    pub global: Vec<usize>,
    pub points: Vec<[f64; 3]>,
}

impl Local {
    pub fn new(grid: &GridGeometry, win: &Window) -> Self {
        Self {
            shape: win.shape(),
            global: win.global_indices(grid),
            points: win.points(grid),
        }
    }

    pub fn covering(grid: &GridGeometry, a: &[f64], b: &[f64]) -> Result<Self> {
        Ok(Self::new(grid, &Window::covering(grid, a, b)?))
    }

    pub fn map<T>(&self, f: impl Fn(usize, &[f64; 3]) -> T) -> Vec<T> {
        self.global
            .iter()
            .zip(&self.points)
            .map(|(&g, p)| f(g, p))
            .collect()
    }
}

pub(crate) fn dist(p: &[f64; 3], c: &[f64], dim: usize) -> f64 {
    (0..dim).map(|a| (p[a] - c[a]).powi(2)).sum::<f64>().sqrt()
}

/// Components of `{v >= level}` within the box `[a, b]` (which may be flat
/// along some axes) with diameter at least `min_diameter`, as lists of
/// global node indices.
pub(crate) fn large_components(
    grid: &GridGeometry,
    values: &[f64],
    a: &[f64],
    b: &[f64],
    level: f64,
    min_diameter: f64,
) -> Result<Vec<Vec<usize>>> {
    let win = Window::covering(grid, a, b)?;
    let global = win.global_indices(grid);
    let mask: Vec<bool> = global.iter().map(|&g| values[g] >= level).collect();
    let lab = crate::excursion::label_raw(&win.shape(), grid.h, &mask, Connectivity::FaceOnly);
    let keep = crate::excursion::diameter_filter(&lab, min_diameter)?;
    let members = lab.members();
    Ok(keep
        .into_iter()
        .map(|id| {
            members[id as usize - 1]
                .iter()
                .map(|&k| global[k])
                .collect()
        })
        .collect())
}

/// Position of global node `g` inside `win` (row-major local index).
pub(crate) fn local_index(grid: &GridGeometry, win: &Window, g: usize) -> usize {
    let shape = grid.shape();
    let wshape = win.shape();
    let mut idx = [0usize; 3];
    unravel(g, &shape, &mut idx[..shape.len()]);
    let mut k = 0;
    for a in 0..shape.len() {
        k = k * wshape[a] + (idx[a] - win.lo[a]);
    }
    k
}

/// Whether every listed component lies in one FaceOnly component of
/// `{v >= level}` restricted to `win`.
pub(crate) fn all_joined(
    grid: &GridGeometry,
    values: &[f64],
    win: &Window,
    level: f64,
    comps: &[Vec<usize>],
) -> bool {
    if comps.len() < 2 {
        return true;
    }
    let global = win.global_indices(grid);
    let mask: Vec<bool> = global.iter().map(|&g| values[g] >= level).collect();
    let (labels, _) = label_grid(&win.shape(), &mask, Connectivity::FaceOnly);
    let label_of = |g: usize| labels[local_index(grid, win, g)];
    let first = label_of(comps[0][0]);
    first > 0 && comps.iter().all(|m| label_of(m[0]) == first)
}
