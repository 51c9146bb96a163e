use serde::{Deserialize, Serialize};

use super::annulus::{annulus_event, two_arms, AnnulusSpec};
use super::crossing::{complement_crossing, crossing, CrossingSpec};
use super::good::{contact_points, good_point, GoodPointSpec, GoodVariant};
use super::slab::{
    orthogonal_squares_crossing, sprouts, uniqueness_in_slab, SlabEventSpec, SproutsSpec,
};
use super::window::{dist, Local};
use crate::error::{Error, Result};
use crate::excursion::{label_grid, Connectivity};
use crate::fieldgen::FieldSample;
use crate::rng::{sample_rng, stream};

/// A named, serializable event or observable on a field sample.
///
/// JSON form is `{"<name>": {params}}`, e.g.
/// `{"crossing": {"lo": [0,0], "hi": [10,10], ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Crossing(CrossingSpec),
    /// Crossing of `{f < level}` with diagonal steps.
    ComplementCrossing(CrossingSpec),
    Annulus(AnnulusSpec),
    TwoArms {
        center: Vec<f64>,
        r_inner: f64,
        r_outer: f64,
        #[serde(default)]
        level: f64,
    },
    OrthogonalSquares {
        r: f64,
        #[serde(default)]
        level: f64,
    },
    Uniqueness(SlabEventSpec),
    Sprouts(SproutsSpec),
    ContactPoints {
        path: Vec<[f64; 2]>,
        rho: f64,
        scale: f64,
        #[serde(default)]
        level: f64,
    },
    GoodPoint(GoodPointSpec),
    /// Number of components of `{f >= level}` meeting `D(center, radius)`.
    ComponentCount {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        level: f64,
    },
    /// Indicator of `f(point) >= level` at the nearest node.
    PointValue {
        point: Vec<f64>,
        #[serde(default)]
        level: f64,
    },
    /// Bernoulli(p) drawn from the sample seed; ignores the field.
    Coin {
        p: f64,
    },
}

impl Detector {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Crossing(_) => "crossing",
            Self::ComplementCrossing(_) => "complement_crossing",
            Self::Annulus(_) => "annulus",
            Self::TwoArms { .. } => "two_arms",
            Self::OrthogonalSquares { .. } => "orthogonal_squares",
            Self::Uniqueness(_) => "uniqueness",
            Self::Sprouts(_) => "sprouts",
            Self::ContactPoints { .. } => "contact_points",
            Self::GoodPoint(_) => "good_point",
            Self::ComponentCount { .. } => "component_count",
            Self::PointValue { .. } => "point_value",
            Self::Coin { .. } => "coin",
        }
    }

    /// Builds a detector from its name and JSON parameters.
    pub fn from_name(name: &str, params: serde_json::Value) -> Result<Self> {
        let mut obj = serde_json::Map::new();
        obj.insert(name.to_string(), params);
        serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| Error::Format(format!("detector {name}: {e}")))
    }

    /// Whether raising the field can only raise the value.
    pub fn is_increasing(&self) -> bool {
        !matches!(
            self,
            Self::ComplementCrossing(_)
                | Self::Uniqueness(_)
                | Self::GoodPoint(_)
                | Self::ComponentCount { .. }
                | Self::Coin { .. }
        )
    }

    /// Whether the value is a 0/1 indicator.
    pub fn is_boolean(&self) -> bool {
        !matches!(
            self,
            Self::ContactPoints { .. } | Self::ComponentCount { .. }
        )
    }

    /// Sample dimension the detector requires, if fixed.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Crossing(s) | Self::ComplementCrossing(s) => Some(s.lo.len()),
            Self::Annulus(s) => Some(s.center.len()),
            Self::ComponentCount { center, .. } => Some(center.len()),
            Self::PointValue { point, .. } => Some(point.len()),
            Self::TwoArms { .. }
            | Self::OrthogonalSquares { .. }
            | Self::Uniqueness(_)
            | Self::Sprouts(_)
            | Self::GoodPoint(_) => Some(3),
            Self::ContactPoints { .. } => Some(2),
            Self::Coin { .. } => None,
        }
    }

    /// Bounding box `(lo, hi)` of the points the detector reads, or `None`
    /// when it reads no field values.
    pub fn extent(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let ball = |c: &[f64], r: f64| {
            Some((
                c.iter().map(|x| x - r).collect(),
                c.iter().map(|x| x + r).collect(),
            ))
        };
        match self {
            Self::Crossing(s) | Self::ComplementCrossing(s) => Some((s.lo.clone(), s.hi.clone())),
            Self::Annulus(s) => ball(&s.center, s.r_outer),
            Self::TwoArms {
                center, r_outer, ..
            } => ball(center, *r_outer),
            Self::OrthogonalSquares { r, .. } => Some((vec![0.0; 3], vec![*r; 3])),
            Self::Uniqueness(s) => {
                let (c, w) = (s.center, s.slab_half);
                Some((
                    vec![c[0] - w, c[1] - w, 0.0],
                    vec![c[0] + w, c[1] + w, s.slab_height],
                ))
            }
            Self::Sprouts(s) => {
                let w = 2.0 * s.scale;
                Some((vec![-w, -w, 0.0], vec![w, w, s.height()]))
            }
            Self::ContactPoints { scale, .. } => ball(&[0.0, 0.0], 3.0 * scale),
            Self::GoodPoint(s) => {
                let (x, r) = (s.center, s.scale);
                match s.variant {
                    GoodVariant::Planar => Some((
                        vec![x[0] - 4.0 * r, x[1] - 4.0 * r, 0.0],
                        vec![x[0] + 4.0 * r, x[1] + 4.0 * r, r.powf(s.a)],
                    )),
                    GoodVariant::Faces => ball(&x, r / 2.0),
                }
            }
            Self::ComponentCount { center, radius, .. } => ball(center, *radius),
            Self::PointValue { point, .. } => ball(point, 0.0),
            Self::Coin { .. } => None,
        }
    }

    pub fn needs_coupled(&self) -> bool {
        matches!(self, Self::GoodPoint(_))
    }

    /// Copy with every level raised by `t`.
    pub fn shifted(&self, t: f64) -> Self {
        let mut d = self.clone();
        match &mut d {
            Self::Crossing(s) | Self::ComplementCrossing(s) => s.level += t,
            Self::Annulus(s) => s.level += t,
            Self::Uniqueness(s) => *s = s.shifted(t),
            Self::Sprouts(s) => *s = s.shifted(t),
            Self::GoodPoint(s) => *s = s.shifted(t),
            Self::TwoArms { level, .. }
            | Self::OrthogonalSquares { level, .. }
            | Self::ContactPoints { level, .. }
            | Self::ComponentCount { level, .. }
            | Self::PointValue { level, .. } => *level += t,
            Self::Coin { .. } => {}
        }
        d
    }

    /// Evaluates with all levels raised by `level_shift`.
    pub fn evaluate(&self, sample: &FieldSample, level_shift: f64) -> Result<f64> {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        let d = if level_shift == 0.0 {
            None
        } else {
            Some(self.shifted(level_shift))
        };
        let d = d.as_ref().unwrap_or(self);
        Ok(match d {
            Self::Crossing(s) => b(crossing(sample, s)?),
            Self::ComplementCrossing(s) => b(complement_crossing(sample, s)?),
            Self::Annulus(s) => b(annulus_event(sample, s)?),
            Self::TwoArms {
                center,
                r_inner,
                r_outer,
                level,
            } => b(two_arms(sample, center, *r_inner, *r_outer, *level)?),
            Self::OrthogonalSquares { r, level } => {
                b(orthogonal_squares_crossing(sample, *r, *level)?)
            }
            Self::Uniqueness(s) => b(uniqueness_in_slab(sample, s)?),
            Self::Sprouts(s) => b(sprouts(sample, s)?),
            Self::ContactPoints {
                path,
                rho,
                scale,
                level,
            } => contact_points(sample, path, *rho, *scale, *level)?.count as f64,
            Self::GoodPoint(s) => b(good_point(sample, s)?),
            Self::ComponentCount {
                center,
                radius,
                level,
            } => component_count(sample, center, *radius, *level)? as f64,
            Self::PointValue { point, level } => {
                let g = &sample.grid;
                if point.len() != g.dim || !g.covers(point, point) {
                    return Err(Error::Geometry(format!("point {point:?} outside the grid")));
                }
                let idx: Vec<usize> = (0..g.dim)
                    .map(|a| ((point[a] - g.lo[a]) / g.h).round() as usize)
                    .collect();
                b(sample.value_at(&idx) >= *level)
            }
            Self::Coin { p } => {
                use rand::Rng;
                b(sample_rng(sample.seed, stream::SYNTHETIC).random::<f64>() < *p)
            }
        })
    }
}

/// Components of `{f >= level}` (over the whole grid) that meet the ball.
pub fn component_count(
    sample: &FieldSample,
    center: &[f64],
    radius: f64,
    level: f64,
) -> Result<usize> {
    let g = &sample.grid;
    if center.len() != g.dim {
        return Err(Error::Geometry("center dimension mismatch".into()));
    }
    let lo: Vec<f64> = center.iter().map(|c| c - radius).collect();
    let hi: Vec<f64> = center.iter().map(|c| c + radius).collect();
    let ball = Local::covering(g, &lo, &hi)?;
    let mask: Vec<bool> = sample.values.iter().map(|&v| v >= level).collect();
    let (labels, count) = label_grid(&g.shape(), &mask, Connectivity::FaceOnly);
    let mut seen = vec![false; count + 1];
    for (&gi, p) in ball.global.iter().zip(&ball.points) {
        if dist(p, center, g.dim) <= radius {
            seen[labels[gi] as usize] = true;
        }
    }
    Ok(seen[1..].iter().filter(|&&s| s).count())
}
