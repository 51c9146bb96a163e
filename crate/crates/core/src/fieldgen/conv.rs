//! White-noise convolution sampler, `f_r = q_r * W` on a grid.
//!
//! The discrete noise is the cell average of L² white noise, so each padded
//! node carries `xi_v * h^{d/2}` with `xi_v` iid standard normal. The sum
//! `sum_v q_r(x - v) xi_v h^{d/2}` is evaluated as a circular FFT convolution
//! large enough that no wrap-around reaches the output window.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftDirection;

use super::fft::{fast_len, FftNd};
use super::grid::{strides, unravel, GridGeometry};
use super::kernel::TruncatedKernel;
use super::sample::{FieldSample, SampleSource};
use crate::error::{Error, Result};
use crate::rng::{sample_rng, stream};

/// Default ceiling on sampler working memory.
pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

#[derive(Debug)]
pub struct ConvolutionSampler {
    kernel: TruncatedKernel,
    partner: Option<TruncatedKernel>,
    grid: GridGeometry,
    noise_shape: Vec<usize>,
    fft_shape: Vec<usize>,
    pad_nodes: usize,
    fft: FftNd,
    spectrum: Vec<Complex64>,
    partner_spectrum: Option<Vec<Complex64>>,
}

impl ConvolutionSampler {
    pub fn new(kernel: TruncatedKernel, grid: GridGeometry, coupled: bool) -> Result<Self> {
        Self::with_budget(kernel, grid, coupled, DEFAULT_MEMORY_BUDGET)
    }

    pub fn with_budget(
        kernel: TruncatedKernel,
        grid: GridGeometry,
        coupled: bool,
        budget_bytes: u64,
    ) -> Result<Self> {
        grid.validate()?;
        if kernel.dim() != grid.dim {
            return Err(Error::Precondition(format!(
                "kernel dim {} != grid dim {}",
                kernel.dim(),
                grid.dim
            )));
        }
        let partner = coupled.then(|| kernel.untruncated());
        let support = partner
            .as_ref()
            .map_or(kernel.support_radius(), |p| p.support_radius());
        if grid.pad < support {
            return Err(Error::Precondition(format!(
                "padding {} is below the kernel support radius {support:.4}",
                grid.pad
            )));
        }
        let pad_nodes = grid.pad_nodes();
        let noise_shape: Vec<usize> = grid.shape().iter().map(|n| n + 2 * pad_nodes).collect();
        let fft_shape: Vec<usize> = noise_shape.iter().map(|&n| fast_len(n)).collect();
        let cells: u64 = fft_shape.iter().map(|&n| n as u64).product();
        let arrays = 2 + u64::from(coupled) * 2;
        let required = cells * 16 * arrays;
        if required > budget_bytes {
            return Err(Error::Resource {
                what: format!("convolution grid {fft_shape:?}"),
                required_bytes: required,
                budget_bytes,
            });
        }
        let fft = FftNd::new(&fft_shape);
        let spectrum = kernel_spectrum(&kernel, &grid, &fft_shape, &fft);
        let partner_spectrum = partner
            .as_ref()
            .map(|p| kernel_spectrum(p, &grid, &fft_shape, &fft));
        Ok(Self {
            kernel,
            partner,
            grid,
            noise_shape,
            fft_shape,
            pad_nodes,
            fft,
            spectrum,
            partner_spectrum,
        })
    }

    pub fn grid(&self) -> &GridGeometry {
        &self.grid
    }

    pub fn kernel(&self) -> &TruncatedKernel {
        &self.kernel
    }

    pub fn is_coupled(&self) -> bool {
        self.partner.is_some()
    }

    /// Draws the padded noise and returns its spectrum.
    fn noise_spectrum(&self, seed: u64) -> Vec<Complex64> {
        let mut rng = sample_rng(seed, stream::NOISE);
        let total: usize = self.fft_shape.iter().product();
        let mut data = vec![Complex64::default(); total];
        let fst = strides(&self.fft_shape);
        let count: usize = self.noise_shape.iter().product();
        let mut idx = vec![0; self.noise_shape.len()];
        for flat in 0..count {
            unravel(flat, &self.noise_shape, &mut idx);
            let off: usize = idx.iter().zip(&fst).map(|(i, s)| i * s).sum();
            let xi: f64 = StandardNormal.sample(&mut rng);
            data[off] = Complex64::new(xi, 0.0);
        }
        self.fft.process(&mut data, FftDirection::Forward);
        data
    }

    fn convolve(&self, noise: &[Complex64], spectrum: &[Complex64]) -> Vec<f64> {
        let mut work: Vec<Complex64> = noise.iter().zip(spectrum).map(|(a, b)| a * b).collect();
        self.fft.process(&mut work, FftDirection::Inverse);
        let norm = 1.0 / work.len() as f64;
        let shape = self.grid.shape();
        let fst = strides(&self.fft_shape);
        let mut out = Vec::with_capacity(self.grid.len());
        let mut idx = vec![0; shape.len()];
        for flat in 0..self.grid.len() {
            unravel(flat, &shape, &mut idx);
            let off: usize = idx
                .iter()
                .zip(&fst)
                .map(|(i, s)| (i + self.pad_nodes) * s)
                .sum();
            out.push(work[off].re * norm);
        }
        out
    }

    pub fn sample(&self, seed: u64) -> FieldSample {
        let noise = self.noise_spectrum(seed);
        let values = self.convolve(&noise, &self.spectrum);
        let coupled_values = self.partner_spectrum.as_ref().map(|ps| {
            if ps == &self.spectrum {
                values.clone()
            } else {
                self.convolve(&noise, ps)
            }
        });
        FieldSample {
            grid: self.grid.clone(),
            values,
            seed,
            source: SampleSource::Convolution {
                kernel: self.kernel.clone(),
                partner: self.partner.clone(),
            },
            coupled_values,
        }
    }
}

/// FFT of the kernel laid out circularly around the origin, scaled by `h^{d/2}`.
fn kernel_spectrum(
    kernel: &TruncatedKernel,
    grid: &GridGeometry,
    fft_shape: &[usize],
    fft: &FftNd,
) -> Vec<Complex64> {
    let h = grid.h;
    let dim = grid.dim;
    let weight = h.powf(dim as f64 / 2.0);
    let k = (kernel.support_radius() / h + 1e-9).floor() as i64;
    let fst = strides(fft_shape);
    let mut data = vec![Complex64::default(); fft.len()];
    let span = (2 * k + 1) as usize;
    let count = span.pow(dim as u32);
    let shape = vec![span; dim];
    let mut idx = vec![0; dim];
    for flat in 0..count {
        unravel(flat, &shape, &mut idx);
        let mut r2 = 0.0;
        let mut off = 0;
        for a in 0..dim {
            let j = idx[a] as i64 - k;
            r2 += (j as f64 * h).powi(2);
            off += (j.rem_euclid(fft_shape[a] as i64) as usize) * fst[a];
        }
        let q = kernel.eval(r2.sqrt());
        if q != 0.0 {
            data[off] = Complex64::new(weight * q, 0.0);
        }
    }
    fft.process(&mut data, FftDirection::Forward);
    data
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgen::kernel::{make_kernel, KernelSpec};

    fn small_grid(pad: f64) -> GridGeometry {
        GridGeometry::new(vec![0.0, 0.0], vec![3.0, 2.0], 0.25, pad).unwrap()
    }

    #[test]
    fn matches_direct_sum() {
        let kernel = make_kernel(KernelSpec::bargmann_fock(2), Some(4.0)).unwrap();
        let grid = small_grid(2.0);
        let s = ConvolutionSampler::new(kernel.clone(), grid.clone(), false).unwrap();
        let sample = s.sample(11);
        // rebuild the noise and evaluate the sum directly at one node
        let mut rng = sample_rng(11, stream::NOISE);
        let p = grid.pad_nodes();
        let ns: Vec<usize> = grid.shape().iter().map(|n| n + 2 * p).collect();
        let noise: Vec<f64> = (0..ns[0] * ns[1])
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let (i, j) = (5usize, 3usize);
        let mut direct = 0.0;
        for a in 0..ns[0] {
            for b in 0..ns[1] {
                let dx = (i as f64 - (a as f64 - p as f64)) * 0.25;
                let dy = (j as f64 - (b as f64 - p as f64)) * 0.25;
                direct += kernel.eval((dx * dx + dy * dy).sqrt()) * noise[a * ns[1] + b] * 0.25;
            }
        }
        let got = sample.value_at(&[i, j]);
        assert!((got - direct).abs() < 1e-12, "{got} vs {direct}");
    }

    #[test]
    fn deterministic_given_seed() {
        let kernel = make_kernel(KernelSpec::bargmann_fock(2), None).unwrap();
        let s = ConvolutionSampler::new(kernel, small_grid(6.0), false).unwrap();
        let a = s.sample(3);
        let b = s.sample(3);
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, s.sample(4).values);
    }

    #[test]
    fn insufficient_padding() {
        let kernel = make_kernel(KernelSpec::bargmann_fock(2), Some(8.0)).unwrap();
        let err = ConvolutionSampler::new(kernel.clone(), small_grid(3.0), false).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        // coupling needs the untruncated support
        let err = ConvolutionSampler::new(kernel, small_grid(4.0), true).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn memory_budget() {
        let kernel = make_kernel(KernelSpec::bargmann_fock(3), Some(4.0)).unwrap();
        let grid = GridGeometry::centered(3, 50.0, 0.1, 2.0).unwrap();
        match ConvolutionSampler::with_budget(kernel, grid, false, 1 << 20).unwrap_err() {
            Error::Resource { required_bytes, .. } => assert!(required_bytes > 1 << 20),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn large_truncation_couples_exactly() {
        let kernel = make_kernel(KernelSpec::bargmann_fock(2), Some(30.0)).unwrap();
        let s = ConvolutionSampler::new(kernel, small_grid(6.0), true).unwrap();
        let sample = s.sample(9);
        assert_eq!(sample.coupling_gap(|_| true).unwrap(), 0.0);
    }
}
