use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A rectilinear grid `lo + i*h` per axis, plus padding for convolution support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub dim: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: f64,
    pub pad: f64,
}

impl GridGeometry {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, h: f64, pad: f64) -> Result<Self> {
        let g = Self {
            dim: lo.len(),
            lo,
            hi,
            h,
            pad,
        };
        g.validate()?;
        Ok(g)
    }

    /// Cube `[-half, half]^dim`.
    pub fn centered(dim: usize, half: f64, h: f64, pad: f64) -> Result<Self> {
        Self::new(vec![-half; dim], vec![half; dim], h, pad)
    }

    /// Smallest grid with nodes on `hZ^dim` containing `[lo, hi]`; a
    /// degenerate axis is widened by one node each way.
    pub fn snapped(lo: &[f64], hi: &[f64], h: f64, pad: f64) -> Result<Self> {
        let snap = |x: f64, up: bool| {
            let k = x / h;
            let k = if up {
                (k - 1e-9).ceil()
            } else {
                (k + 1e-9).floor()
            };
            k * h
        };
        let mut a: Vec<f64> = lo.iter().map(|&x| snap(x, false)).collect();
        let mut b: Vec<f64> = hi.iter().map(|&x| snap(x, true)).collect();
        for i in 0..a.len().min(b.len()) {
            if b[i] <= a[i] {
                a[i] -= h;
                b[i] += h;
            }
        }
        Self::new(a, b, h, pad)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::Geometry(format!("dim {} not in {{2, 3}}", self.dim)));
        }
        if self.lo.len() != self.dim || self.hi.len() != self.dim {
            return Err(Error::Geometry("lo/hi length must equal dim".into()));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Geometry(format!(
                "spacing h = {} must be positive",
                self.h
            )));
        }
        if !(self.pad >= 0.0) {
            return Err(Error::Geometry(format!(
                "pad = {} must be nonnegative",
                self.pad
            )));
        }
        for a in 0..self.dim {
            if !(self.hi[a] > self.lo[a]) {
                return Err(Error::Geometry(format!("axis {a}: hi must exceed lo")));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Vec<usize> {
        (0..self.dim)
            .map(|a| ((self.hi[a] - self.lo[a]) / self.h).round() as usize + 1)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Padding width in nodes.
    pub fn pad_nodes(&self) -> usize {
        (self.pad / self.h - 1e-9).ceil().max(0.0) as usize
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + i as f64 * self.h
    }

    pub fn point(&self, idx: &[usize]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (a, &i) in idx.iter().enumerate() {
            p[a] = self.coord(a, i);
        }
        p
    }

    /// Row-major strides (last axis contiguous).
    pub fn strides(&self) -> Vec<usize> {
        strides(&self.shape())
    }

    /// Node range `[first, last]` along `axis` whose coordinates lie in `[a, b]`.
    pub fn index_range(&self, axis: usize, a: f64, b: f64) -> Option<(usize, usize)> {
        let n = self.shape()[axis];
        let tol = 1e-9 * self.h;
        let first = ((a - self.lo[axis]) / self.h - 1e-9).ceil().max(0.0) as usize;
        let last_f = ((b - self.lo[axis]) / self.h + 1e-9).floor();
        if last_f < 0.0 {
            return None;
        }
        let last = (last_f as usize).min(n - 1);
        if first > last || self.coord(axis, first) > b + tol {
            return None;
        }
        Some((first, last))
    }

    /// Whether `[a, b]` per axis lies inside the sampled extent.
    pub fn covers(&self, lo: &[f64], hi: &[f64]) -> bool {
        let shape = self.shape();
        let tol = 1e-9 * self.h;
        (0..self.dim)
            .all(|ax| lo[ax] >= self.lo[ax] - tol && hi[ax] <= self.coord(ax, shape[ax] - 1) + tol)
    }

    /// Euclidean diameter of the grid box.
    pub fn diameter(&self) -> f64 {
        (0..self.dim)
            .map(|a| (self.hi[a] - self.lo[a]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * shape[a + 1];
    }
    s
}

/// Multi-index of a flat row-major offset.
pub(crate) fn unravel(mut flat: usize, shape: &[usize], out: &mut [usize]) {
    for a in (0..shape.len()).rev() {
        out[a] = flat % shape[a];
        flat /= shape[a];
    }
}
