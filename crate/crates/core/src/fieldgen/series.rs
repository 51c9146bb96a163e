//! Entire-series realization of the planar Bargmann–Fock field,
//! `f(x) = e^{-|x|^2/2} sum_{i+j<=N} a_ij x1^i x2^j / sqrt(i! j!)`.

use rand_distr::{Distribution, StandardNormal};

use super::grid::GridGeometry;
use super::kernel::KernelSpec;
use super::sample::{FieldSample, SampleSource};
use crate::error::{Error, Result};
use crate::rng::{sample_rng, stream};

/// Target for the tail bound `e^{rho^2} rho^{2N} / N!`.
pub const SERIES_TAIL: f64 = 1e-8;

/// `ln(e^{rho^2} rho^{2N} / N!)`.
pub fn log_tail_bound(rho: f64, n: usize) -> f64 {
    let log_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    let pow = if rho == 0.0 {
        if n == 0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        2.0 * n as f64 * rho.ln()
    };
    rho * rho + pow - log_fact
}

/// Largest distance from the origin to a grid node.
pub fn grid_radius(grid: &GridGeometry) -> f64 {
    (0..grid.dim)
        .map(|a| grid.lo[a].abs().max(grid.hi[a].abs()).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Smallest degree cap meeting the tail requirement on `grid`.
pub fn required_degree(grid: &GridGeometry) -> usize {
    let rho = grid_radius(grid);
    let target = SERIES_TAIL.ln();
    (1..)
        .find(|&n| log_tail_bound(rho, n) < target)
        .expect("tail bound eventually decays")
}

#[derive(Debug, Clone)]
pub struct SeriesSampler {
    grid: GridGeometry,
    degree: usize,
    basis: [Vec<Vec<f64>>; 2],
}

impl SeriesSampler {
    pub fn new(grid: GridGeometry, degree: usize) -> Result<Self> {
        grid.validate()?;
        if grid.dim != 2 {
            return Err(Error::UnsupportedCombination(
                "the series sampler is planar only".into(),
            ));
        }
        let need = required_degree(&grid);
        if degree < need {
            return Err(Error::Precondition(format!(
                "degree cap {degree} below tail requirement {need}"
            )));
        }
        let shape = grid.shape();
        let basis = [0, 1].map(|axis| {
            (0..shape[axis])
                .map(|i| {
                    let x = grid.coord(axis, i);
                    let mut u = Vec::with_capacity(degree + 1);
                    u.push((-0.5 * x * x).exp());
                    for k in 1..=degree {
                        let prev = u[k - 1];
                        u.push(prev * x / (k as f64).sqrt());
                    }
                    u
                })
                .collect()
        });
        Ok(Self {
            grid,
            degree,
            basis,
        })
    }

    pub fn grid(&self) -> &GridGeometry {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn sample(&self, seed: u64) -> FieldSample {
        let n = self.degree;
        let mut rng = sample_rng(seed, stream::SERIES);
        // coefficients ordered by total degree, then by the x1 exponent
        let mut coef = vec![vec![0.0; n + 1]; n + 1];
        for total in 0..=n {
            for i in 0..=total {
                coef[i][total - i] = StandardNormal.sample(&mut rng);
            }
        }
        let shape = self.grid.shape();
        let (b0, b1) = (&self.basis[0], &self.basis[1]);
        let mut values = Vec::with_capacity(shape[0] * shape[1]);
        let mut partial = vec![0.0; n + 1];
        for u in b0.iter() {
            for (j, p) in partial.iter_mut().enumerate() {
                *p = (0..=n - j).map(|i| coef[i][j] * u[i]).sum();
            }
            for v in b1.iter() {
                values.push(partial.iter().zip(v).map(|(p, v)| p * v).sum());
            }
        }
        FieldSample {
            grid: self.grid.clone(),
            values,
            seed,
            source: SampleSource::Series {
                spec: KernelSpec::bargmann_fock(2),
                degree: n,
            },
            coupled_values: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_requirement() {
        let grid = GridGeometry::centered(2, 4.0, 0.25, 0.0).unwrap();
        let need = required_degree(&grid);
        let rho = grid_radius(&grid);
        assert!(log_tail_bound(rho, need) < SERIES_TAIL.ln());
        assert!(log_tail_bound(rho, need - 1) >= SERIES_TAIL.ln());
        assert!(SeriesSampler::new(grid.clone(), need - 1).is_err());
        assert!(SeriesSampler::new(grid, need).is_ok());
    }

    #[test]
    fn origin_is_constant_coefficient() {
        let grid = GridGeometry::centered(2, 1.0, 0.5, 0.0).unwrap();
        let s = SeriesSampler::new(grid, 40).unwrap();
        let sample = s.sample(5);
        let mut rng = sample_rng(5, stream::SERIES);
        let a0: f64 = StandardNormal.sample(&mut rng);
        assert_eq!(sample.value_at(&[2, 2]), a0);
        assert_eq!(sample.values, s.sample(5).values);
    }
}
