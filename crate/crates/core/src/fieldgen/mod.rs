//! Kernels and stationary Gaussian field samplers on rectilinear grids.

mod conv;
pub mod fft;
mod grid;
mod kernel;
mod sample;
pub mod series;
mod waves;

use serde::{Deserialize, Serialize};

pub use conv::{ConvolutionSampler, DEFAULT_MEMORY_BUDGET};
pub use grid::GridGeometry;
pub(crate) use grid::{strides, unravel};
pub use kernel::{
    bf_amplitude, cross_covariance, make_kernel, smoothstep, KernelFamily, KernelSpec, RadialTable,
    TruncatedKernel, NEGLIGIBLE,
};
pub use sample::{FieldSample, SampleSource};
pub use series::{required_degree, SeriesSampler};
pub use waves::{PlaneWaveSampler, MIN_WAVES};

use crate::error::Result;

/// `(q_r * q_r)(lag e_1)`.
pub fn covariance(kernel: &TruncatedKernel, lag: f64) -> f64 {
    kernel.covariance(lag)
}

pub fn sample_convolution(
    kernel: &TruncatedKernel,
    grid: &GridGeometry,
    seed: u64,
    coupled: bool,
) -> Result<FieldSample> {
    Ok(ConvolutionSampler::new(kernel.clone(), grid.clone(), coupled)?.sample(seed))
}

pub fn sample_series(grid: &GridGeometry, degree_cap: usize, seed: u64) -> Result<FieldSample> {
    Ok(SeriesSampler::new(grid.clone(), degree_cap)?.sample(seed))
}

pub fn sample_plane_waves(grid: &GridGeometry, num_waves: usize, seed: u64) -> Result<FieldSample> {
    Ok(PlaneWaveSampler::new(grid.clone(), num_waves)?.sample(seed))
}

/// Serializable description of a sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SamplerConfig {
    Convolution {
        kernel: TruncatedKernel,
        grid: GridGeometry,
        #[serde(default)]
        coupled: bool,
    },
    Series {
        grid: GridGeometry,
        /// Defaults to the smallest cap meeting the tail bound.
        #[serde(default)]
        degree: Option<usize>,
    },
    PlaneWaves {
        grid: GridGeometry,
        num_waves: usize,
    },
}

impl SamplerConfig {
    /// Bargmann–Fock convolution sampler over `[lo, hi]` with padding sized
    /// to the kernel (and to its untruncated partner when coupled).
    pub fn bargmann_fock(
        lo: Vec<f64>,
        hi: Vec<f64>,
        h: f64,
        r: Option<f64>,
        coupled: bool,
    ) -> Result<Self> {
        let dim = lo.len();
        let kernel = make_kernel(KernelSpec::bargmann_fock(dim), r)?;
        let pad = if coupled {
            kernel.untruncated().support_radius()
        } else {
            kernel.support_radius()
        };
        let grid = GridGeometry::new(lo, hi, h, pad)?;
        Ok(Self::Convolution {
            kernel,
            grid,
            coupled,
        })
    }

    pub fn grid(&self) -> &GridGeometry {
        match self {
            Self::Convolution { grid, .. }
            | Self::Series { grid, .. }
            | Self::PlaneWaves { grid, .. } => grid,
        }
    }

    pub fn dim(&self) -> usize {
        self.grid().dim
    }

    pub fn build(&self) -> Result<Sampler> {
        Ok(match self {
            Self::Convolution {
                kernel,
                grid,
                coupled,
            } => Sampler::Convolution(Box::new(ConvolutionSampler::new(
                kernel.clone(),
                grid.clone(),
                *coupled,
            )?)),
            Self::Series { grid, degree } => {
                let n = degree.unwrap_or_else(|| required_degree(grid));
                Sampler::Series(SeriesSampler::new(grid.clone(), n)?)
            }
            Self::PlaneWaves { grid, num_waves } => {
                Sampler::PlaneWaves(PlaneWaveSampler::new(grid.clone(), *num_waves)?)
            }
        })
    }
}

/// A ready-to-use sampler; `sample` is a pure function of the seed.
#[derive(Debug)]
pub enum Sampler {
    Convolution(Box<ConvolutionSampler>),
    Series(SeriesSampler),
    PlaneWaves(PlaneWaveSampler),
}

impl Sampler {
    pub fn sample(&self, seed: u64) -> FieldSample {
        match self {
            Self::Convolution(s) => s.sample(seed),
            Self::Series(s) => s.sample(seed),
            Self::PlaneWaves(s) => s.sample(seed),
        }
    }

    pub fn grid(&self) -> &GridGeometry {
        match self {
            Self::Convolution(s) => s.grid(),
            Self::Series(s) => s.grid(),
            Self::PlaneWaves(s) => s.grid(),
        }
    }

    pub fn is_coupled(&self) -> bool {
        matches!(self, Self::Convolution(s) if s.is_coupled())
    }
}
