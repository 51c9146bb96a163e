//! In-place multi-dimensional complex FFT over row-major arrays.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

pub struct FftNd {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("shape", &self.shape).finish()
    }
}

impl FftNd {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self {
            shape: shape.to_vec(),
            forward,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn process(&self, data: &mut [Complex64], direction: FftDirection) {
        assert_eq!(data.len(), self.len());
        let plans = match direction {
            FftDirection::Forward => &self.forward,
            FftDirection::Inverse => &self.inverse,
        };
        let nd = self.shape.len();
        let mut scratch = Vec::new();
        let mut line = Vec::new();
        for axis in 0..nd {
            let n = self.shape[axis];
            let plan = &plans[axis];
            scratch.resize(plan.get_inplace_scratch_len(), Complex64::default());
            let inner: usize = self.shape[axis + 1..].iter().product();
            if inner == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let outer: usize = self.shape[..axis].iter().product();
            line.resize(n * inner, Complex64::default());
            for o in 0..outer {
                let base = o * n * inner;
                // transpose the (n x inner) block so each line is contiguous
                for i in 0..n {
                    for j in 0..inner {
                        line[j * n + i] = data[base + i * inner + j];
                    }
                }
                for chunk in line.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
                for i in 0..n {
                    for j in 0..inner {
                        data[base + i * inner + j] = line[j * n + i];
                    }
                }
            }
        }
    }
}

/// Smallest `m >= n` of the form `2^a 3^b 5^c`.
pub fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k.is_multiple_of(p) {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}
