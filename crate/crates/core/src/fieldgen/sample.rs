use serde::{Deserialize, Serialize};

use super::grid::GridGeometry;
use super::kernel::{KernelSpec, TruncatedKernel};
use crate::error::{Error, Result};

/// How a sample was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SampleSource {
    Convolution {
        kernel: TruncatedKernel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        partner: Option<TruncatedKernel>,
    },
    Series {
        spec: KernelSpec,
        degree: usize,
    },
    PlaneWaves {
        spec: KernelSpec,
        num_waves: usize,
    },
    /// Values supplied directly (tests, files).
    External,
}

/// A realized field on a grid.
///
/// When `coupled_values` is present, `values` holds `f_r` and
/// `coupled_values` the untruncated `f` driven by the same white noise.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub grid: GridGeometry,
    pub values: Vec<f64>,
    pub seed: u64,
    pub source: SampleSource,
    pub coupled_values: Option<Vec<f64>>,
}

impl FieldSample {
    pub fn from_values(grid: GridGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Geometry(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            seed: 0,
            source: SampleSource::External,
            coupled_values: None,
        })
    }

    pub fn constant(grid: GridGeometry, value: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![value; n],
            seed: 0,
            source: SampleSource::External,
            coupled_values: None,
        }
    }

    pub fn with_coupled(mut self, coupled: Vec<f64>) -> Result<Self> {
        if coupled.len() != self.values.len() {
            return Err(Error::Geometry("coupled array length mismatch".into()));
        }
        self.coupled_values = Some(coupled);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn is_coupled(&self) -> bool {
        self.coupled_values.is_some()
    }

    pub fn value_at(&self, idx: &[usize]) -> f64 {
        let st = self.grid.strides();
        self.values[idx.iter().zip(&st).map(|(i, s)| i * s).sum::<usize>()]
    }

    /// Copy of this sample with `t` added to every value (both arrays).
    pub fn shifted(&self, t: f64) -> Self {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v += t);
        if let Some(c) = s.coupled_values.as_mut() {
            c.iter_mut().for_each(|v| *v += t);
        }
        s
    }

    /// `max |f - f_r|` over nodes selected by `keep`.
    pub fn coupling_gap(&self, mut keep: impl FnMut(&[usize]) -> bool) -> Result<f64> {
        let c = self
            .coupled_values
            .as_ref()
            .ok_or_else(|| Error::Precondition("sample has no coupled partner".into()))?;
        let shape = self.grid.shape();
        let mut idx = vec![0; shape.len()];
        let mut gap = 0.0f64;
        for (flat, (a, b)) in self.values.iter().zip(c).enumerate() {
            super::grid::unravel(flat, &shape, &mut idx);
            if keep(&idx) {
                gap = gap.max((a - b).abs());
            }
        }
        Ok(gap)
    }
}
