use serde::{Deserialize, Serialize};

use super::window::{field_values, labels_meet, Window};
use crate::error::{Error, Result};
use crate::excursion::Connectivity;
use crate::fieldgen::FieldSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    pub axis: usize,
    pub high: bool,
}

impl Face {
    pub const fn new(axis: usize, high: bool) -> Self {
        Self { axis, high }
    }
}

/// Crossing of the box `[lo, hi]` between two of its faces by `{f >= level}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub from_face: Face,
    pub to_face: Face,
    #[serde(default)]
    pub level: f64,
}

impl CrossingSpec {
    /// Crossing along axis 0 ("left to right").
    pub fn along(axis: usize, lo: Vec<f64>, hi: Vec<f64>, level: f64) -> Self {
        Self {
            lo,
            hi,
            from_face: Face::new(axis, false),
            to_face: Face::new(axis, true),
            level,
        }
    }

    /// Square `[0, side]^2` crossed left to right.
    pub fn square(side: f64, level: f64) -> Self {
        Self::along(0, vec![0.0, 0.0], vec![side, side], level)
    }

    /// `[0, long] x [0, short]` crossed along its long side.
    pub fn rectangle(long: f64, short: f64, level: f64) -> Self {
        Self::along(0, vec![0.0, 0.0], vec![long, short], level)
    }

    /// Slab `[0, side]^2 x [0, height]` crossed along axis 0.
    pub fn slab(side: f64, height: f64, level: f64) -> Self {
        Self::along(0, vec![0.0, 0.0, 0.0], vec![side, side, height], level)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.lo.len() != dim || self.hi.len() != dim {
            return Err(Error::Geometry(format!(
                "crossing box must be {dim}-dimensional"
            )));
        }
        if self.from_face == self.to_face {
            return Err(Error::Geometry("from_face must differ from to_face".into()));
        }
        if self.from_face.axis >= dim || self.to_face.axis >= dim {
            return Err(Error::Geometry("face axis out of range".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(b > a)) {
            return Err(Error::Geometry("crossing box is degenerate".into()));
        }
        Ok(())
    }

    /// The planar dual: the perpendicular crossing.
    pub fn dual(&self) -> Self {
        let axis = 1 - self.from_face.axis;
        Self {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            from_face: Face::new(axis, false),
            to_face: Face::new(axis, true),
            level: self.level,
        }
    }
}

/// Face-connected crossing of `{f >= level}` inside the box.
pub fn crossing(sample: &FieldSample, spec: &CrossingSpec) -> Result<bool> {
    crossing_with(sample, spec, false, Connectivity::FaceOnly, false)
}

/// Crossing of `{f < level}` with diagonal connectivity, the planar dual
/// partner of [`crossing`].
pub fn complement_crossing(sample: &FieldSample, spec: &CrossingSpec) -> Result<bool> {
    crossing_with(sample, spec, true, Connectivity::FaceAndDiagonal, false)
}

pub(crate) fn crossing_with(
    sample: &FieldSample,
    spec: &CrossingSpec,
    complement: bool,
    conn: Connectivity,
    coupled: bool,
) -> Result<bool> {
    spec.validate(sample.dim())?;
    let grid = &sample.grid;
    let win = Window::covering(grid, &spec.lo, &spec.hi)?;
    let values = field_values(sample, coupled)?;
    let shape = win.shape();
    let open: Vec<bool> = win
        .global_indices(grid)
        .into_iter()
        .map(|g| (values[g] >= spec.level) != complement)
        .collect();
    let on_face = |face: Face| -> Vec<bool> {
        let n = shape.len();
        let mut idx = vec![0; n];
        (0..open.len())
            .map(|k| {
                crate::fieldgen::unravel(k, &shape, &mut idx);
                idx[face.axis] == if face.high { shape[face.axis] - 1 } else { 0 }
            })
            .collect()
    };
    let from = on_face(spec.from_face);
    let to = on_face(spec.to_face);
    Ok(labels_meet(&shape, &open, conn, &from, &to))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgen::GridGeometry;

    fn grid(n: usize) -> GridGeometry {
        GridGeometry::new(vec![0.0, 0.0], vec![(n - 1) as f64; 2], 1.0, 0.0).unwrap()
    }

    #[test]
    fn all_true_crosses() {
        let s = FieldSample::constant(grid(6), 1.0);
        let spec = CrossingSpec::square(5.0, 0.0);
        assert!(crossing(&s, &spec).unwrap());
        assert!(crossing(&s, &spec.dual()).unwrap());
        assert!(!complement_crossing(&s, &spec.dual()).unwrap());
    }

    #[test]
    fn box_outside_grid() {
        let s = FieldSample::constant(grid(6), 1.0);
        let err = crossing(&s, &CrossingSpec::square(9.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn diagonal_path_only_crosses_dually() {
        // a diagonal staircase: not face connected, diagonal connected
        let n = 5;
        let mut v = vec![-1.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        let s = FieldSample::from_values(grid(n), v).unwrap();
        let spec = CrossingSpec::square(4.0, 0.0);
        assert!(!crossing(&s, &spec).unwrap());
        let flipped =
            FieldSample::from_values(s.grid.clone(), s.values.iter().map(|x| -x).collect())
                .unwrap();
        assert!(complement_crossing(&flipped, &spec).unwrap());
    }
}
