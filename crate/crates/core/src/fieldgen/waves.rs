//! Monochromatic random plane waves, `sqrt(2/M) sum_j cos(<k_j, x> + phi_j)`
//! with `k_j` uniform on the unit sphere.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::grid::{unravel, GridGeometry};
use super::kernel::KernelSpec;
use super::sample::{FieldSample, SampleSource};
use crate::error::{Error, Result};
use crate::rng::{sample_rng, stream};

pub const MIN_WAVES: usize = 100;

#[derive(Debug, Clone)]
pub struct PlaneWaveSampler {
    grid: GridGeometry,
    num_waves: usize,
}

impl PlaneWaveSampler {
    pub fn new(grid: GridGeometry, num_waves: usize) -> Result<Self> {
        grid.validate()?;
        if num_waves < MIN_WAVES {
            return Err(Error::Precondition(format!(
                "num_waves {num_waves} < {MIN_WAVES}"
            )));
        }
        Ok(Self { grid, num_waves })
    }

    pub fn grid(&self) -> &GridGeometry {
        &self.grid
    }

    pub fn sample(&self, seed: u64) -> FieldSample {
        let dim = self.grid.dim;
        let mut rng = sample_rng(seed, stream::PLANE_WAVES);
        let waves: Vec<([f64; 3], f64)> = (0..self.num_waves)
            .map(|_| {
                let mut k = [0.0; 3];
                let mut norm = 0.0;
                while norm == 0.0 {
                    for c in k.iter_mut().take(dim) {
                        *c = StandardNormal.sample(&mut rng);
                    }
                    norm = k.iter().map(|c| c * c).sum::<f64>().sqrt();
                }
                k.iter_mut().for_each(|c| *c /= norm);
                (k, rng.random::<f64>() * TAU)
            })
            .collect();
        let amp = (2.0 / self.num_waves as f64).sqrt();
        let shape = self.grid.shape();
        let mut idx = vec![0; dim];
        let values = (0..self.grid.len())
            .map(|flat| {
                unravel(flat, &shape, &mut idx);
                let x = self.grid.point(&idx);
                amp * waves
                    .iter()
                    .map(|(k, phi)| (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + phi).cos())
                    .sum::<f64>()
            })
            .collect();
        FieldSample {
            grid: self.grid.clone(),
            values,
            seed,
            source: SampleSource::PlaneWaves {
                spec: KernelSpec::random_plane_wave(dim),
                num_waves: self.num_waves,
            },
            coupled_values: None,
        }
    }
}
