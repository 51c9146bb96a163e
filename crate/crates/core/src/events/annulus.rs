use serde::{Deserialize, Serialize};

use super::window::{connects, dist, field_values, node_at, Local};
use crate::error::{Error, Result};
use crate::excursion::Connectivity;
use crate::fieldgen::FieldSample;

/// Half-plane `{x[fixed] = c[fixed], x[positive] >= c[positive]}`; in 2D
/// `fixed_axis` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfPlane {
    #[serde(default)]
    pub fixed_axis: Option<usize>,
    pub positive_axis: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnulusMode {
    Circuit,
    Arm,
    HalfPlaneArm(HalfPlane),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub center: Vec<f64>,
    pub r_inner: f64,
    pub r_outer: f64,
    pub mode: AnnulusMode,
    #[serde(default)]
    pub level: f64,
}

impl AnnulusSpec {
    pub fn new(
        center: Vec<f64>,
        r_inner: f64,
        r_outer: f64,
        mode: AnnulusMode,
        level: f64,
    ) -> Self {
        Self {
            center,
            r_inner,
            r_outer,
            mode,
            level,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.center.len() != dim {
            return Err(Error::Geometry(format!(
                "annulus center must have {dim} coordinates"
            )));
        }
        if !(self.r_inner > 0.0 && self.r_inner < self.r_outer) {
            return Err(Error::Geometry(format!(
                "need 0 < r_inner < r_outer, got {} and {}",
                self.r_inner, self.r_outer
            )));
        }
        match self.mode {
            AnnulusMode::Circuit if dim != 2 => Err(Error::UnsupportedCombination(
                "circuits are planar; use a 2D sample".into(),
            )),
            AnnulusMode::HalfPlaneArm(hp) => {
                let ok = hp.positive_axis < dim
                    && match (dim, hp.fixed_axis) {
                        (2, None) => true,
                        (3, Some(f)) => f < 3 && f != hp.positive_axis,
                        _ => false,
                    };
                if ok {
                    Ok(())
                } else {
                    Err(Error::Geometry(format!(
                        "half-plane {hp:?} invalid in dimension {dim}"
                    )))
                }
            }
            _ => Ok(()),
        }
    }
}

/// Circuit, arm or half-plane arm event of `{f >= level}` in an annulus.
pub fn annulus_event(sample: &FieldSample, spec: &AnnulusSpec) -> Result<bool> {
    let dim = sample.dim();
    spec.validate(dim)?;
    let grid = &sample.grid;
    let values = field_values(sample, false)?;
    let c = &spec.center;
    let (r_in, r_out, h) = (spec.r_inner, spec.r_outer, grid.h);
    let mut lo: Vec<f64> = c.iter().map(|x| x - r_out).collect();
    let mut hi: Vec<f64> = c.iter().map(|x| x + r_out).collect();
    if let AnnulusMode::HalfPlaneArm(hp) = spec.mode {
        lo[hp.positive_axis] = c[hp.positive_axis];
        if let Some(f) = hp.fixed_axis {
            node_at(grid, f, c[f])?;
            lo[f] = c[f];
            hi[f] = c[f];
        }
    }
    let local = Local::covering(grid, &lo, &hi)?;
    let radius = |p: &[f64; 3]| dist(p, c, dim);
    let outer = |p: &[f64; 3]| radius(p) >= r_out - h;
    match spec.mode {
        AnnulusMode::Circuit => {
            let open = local.map(|g, p| {
                let s = radius(p);
                values[g] < spec.level && s >= r_in && s <= r_out
            });
            let source = local.map(|_, p| radius(p) <= r_in + h);
            let target = local.map(|_, p| outer(p));
            Ok(!connects(
                &local.shape,
                &open,
                Connectivity::FaceAndDiagonal,
                &source,
                &target,
            ))
        }
        AnnulusMode::Arm | AnnulusMode::HalfPlaneArm(_) => {
            let open = local.map(|g, p| values[g] >= spec.level && radius(p) <= r_out);
            let source = local.map(|_, p| radius(p) <= r_in);
            let target = local.map(|_, p| outer(p));
            Ok(connects(
                &local.shape,
                &open,
                Connectivity::FaceOnly,
                &source,
                &target,
            ))
        }
    }
}

/// Two half-plane arms in the orthogonal half-planes `R x {0} x R+` and
/// `R x R+ x {0}` of a 3D sample.
pub fn two_arms(
    sample: &FieldSample,
    center: &[f64],
    r1: f64,
    r2: f64,
    level: f64,
) -> Result<bool> {
    let arm = |fixed, positive| {
        AnnulusSpec::new(
            center.to_vec(),
            r1,
            r2,
            AnnulusMode::HalfPlaneArm(HalfPlane {
                fixed_axis: Some(fixed),
                positive_axis: positive,
            }),
            level,
        )
    };
    Ok(annulus_event(sample, &arm(1, 2))? && annulus_event(sample, &arm(2, 1))?)
}
