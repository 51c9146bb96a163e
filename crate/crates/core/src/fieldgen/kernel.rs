use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{sphere_area, Composite};

/// Values of the base profile below this are treated as zero.
pub const NEGLIGIBLE: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    BargmannFock,
    CustomRadialTable,
    RandomPlaneWave,
}

/// Sampled radial profile, linearly interpolated and zero past the last radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialTable {
    fn eval(&self, s: f64) -> f64 {
        let r = &self.radii;
        if s > r[r.len() - 1] {
            return 0.0;
        }
        let k = r.partition_point(|&x| x <= s);
        if k == 0 {
            return self.values[0];
        }
        if k == r.len() {
            return self.values[k - 1];
        }
        let t = (s - r[k - 1]) / (r[k] - r[k - 1]);
        self.values[k - 1] * (1.0 - t) + self.values[k] * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub dim: usize,
    /// Polynomial decay exponent; `None` is super-polynomial decay.
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<RadialTable>,
}

impl KernelSpec {
    pub fn bargmann_fock(dim: usize) -> Self {
        Self {
            family: KernelFamily::BargmannFock,
            dim,
            beta: None,
            table: None,
        }
    }

    pub fn radial_table(dim: usize, beta: f64, table: RadialTable) -> Self {
        Self {
            family: KernelFamily::CustomRadialTable,
            dim,
            beta: Some(beta),
            table: Some(table),
        }
    }

    pub fn random_plane_wave(dim: usize) -> Self {
        Self {
            family: KernelFamily::RandomPlaneWave,
            dim,
            beta: None,
            table: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Precondition(format!("dim {} < 2", self.dim)));
        }
        match self.family {
            KernelFamily::BargmannFock | KernelFamily::RandomPlaneWave => {}
            KernelFamily::CustomRadialTable => {
                let t = self.table.as_ref().ok_or_else(|| {
                    Error::Precondition("CustomRadialTable requires a table".into())
                })?;
                if t.radii.is_empty() || t.radii.len() != t.values.len() {
                    return Err(Error::Precondition("radial table shape mismatch".into()));
                }
                if t.radii[0] < 0.0 || t.radii.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Precondition(
                        "radial table radii must be nonnegative and increasing".into(),
                    ));
                }
                if t.values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Precondition(
                        "radial table values must be finite and nonnegative".into(),
                    ));
                }
                if t.values.iter().all(|&v| v == 0.0) {
                    return Err(Error::Precondition(
                        "radial table is identically zero".into(),
                    ));
                }
                match self.beta {
                    Some(b) if b > self.dim as f64 => {}
                    _ => {
                        return Err(Error::Precondition(format!(
                            "decay exponent must exceed dim = {}",
                            self.dim
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// Base radial profile `q(|x|)`, cut to zero past the effective support.
    pub fn profile(&self, s: f64) -> f64 {
        match self.family {
            KernelFamily::BargmannFock => {
                if s > self.effective_support() {
                    0.0
                } else {
                    bf_amplitude(self.dim) * (-s * s).exp()
                }
            }
            KernelFamily::CustomRadialTable => self.table.as_ref().map_or(0.0, |t| t.eval(s)),
            KernelFamily::RandomPlaneWave => 0.0,
        }
    }

    /// Radius past which the profile is below [`NEGLIGIBLE`] (or exactly zero).
    pub fn effective_support(&self) -> f64 {
        match self.family {
            KernelFamily::BargmannFock => (bf_amplitude(self.dim) / NEGLIGIBLE).ln().sqrt(),
            KernelFamily::CustomRadialTable => self
                .table
                .as_ref()
                .map_or(0.0, |t| t.radii[t.radii.len() - 1]),
            KernelFamily::RandomPlaneWave => f64::INFINITY,
        }
    }

    /// `r_q = 1 + sup{ r >= 1 : q_r == 0 }` with `sup {} = 1`.
    pub fn r_q(&self) -> f64 {
        let first_positive = match self.family {
            KernelFamily::BargmannFock => 0.0,
            KernelFamily::CustomRadialTable => {
                let t = self.table.as_ref().expect("validated table");
                let k = t.values.iter().position(|&v| v > 0.0).unwrap_or(0);
                // linear interpolation is positive just after the previous node
                if k == 0 {
                    0.0
                } else {
                    t.radii[k - 1]
                }
            }
            KernelFamily::RandomPlaneWave => 0.0,
        };
        1.0 + (2.0 * first_positive).max(1.0)
    }
}

/// `(2/pi)^{d/4}`, the Bargmann–Fock kernel amplitude.
pub fn bf_amplitude(dim: usize) -> f64 {
    (2.0 / PI).powf(dim as f64 / 4.0)
}

/// Quintic smoothstep `6u^5 - 15u^4 + 10u^3` clamped to `[0, 1]`.
pub fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * (u * (6.0 * u - 15.0) + 10.0)
    }
}

/// A kernel `q_r = q * chi_r`; `r = None` is the untruncated kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedKernel {
    pub base: KernelSpec,
    pub r: Option<f64>,
}

pub fn make_kernel(spec: KernelSpec, r: Option<f64>) -> Result<TruncatedKernel> {
    spec.validate()?;
    if let Some(r) = r {
        if spec.family == KernelFamily::RandomPlaneWave {
            return Err(Error::UnsupportedCombination(
                "random plane waves have no convolution kernel to truncate".into(),
            ));
        }
        let r_q = spec.r_q();
        if !(r >= r_q) || !r.is_finite() {
            return Err(Error::InvalidTruncation { r, r_q });
        }
    }
    Ok(TruncatedKernel { base: spec, r })
}

impl TruncatedKernel {
    pub fn dim(&self) -> usize {
        self.base.dim
    }

    pub fn is_truncated(&self) -> bool {
        self.r.is_some()
    }

    /// The smooth cutoff `chi_r` as a function of `|x|`.
    pub fn chi(&self, s: f64) -> f64 {
        match self.r {
            None => 1.0,
            Some(r) => {
                let outer = 0.5 * r;
                let inner = outer - 0.25;
                if s <= inner {
                    1.0
                } else if s >= outer {
                    0.0
                } else {
                    1.0 - smoothstep((s - inner) / 0.25)
                }
            }
        }
    }

    /// `q_r(|x|)`.
    pub fn eval(&self, s: f64) -> f64 {
        let c = self.chi(s);
        if c == 1.0 {
            self.base.profile(s)
        } else if c == 0.0 {
            0.0
        } else {
            self.base.profile(s) * c
        }
    }

    /// Radius outside of which `q_r` vanishes identically.
    pub fn support_radius(&self) -> f64 {
        let eff = self.base.effective_support();
        match self.r {
            None => eff,
            Some(r) => eff.min(0.5 * r),
        }
    }

    /// The untruncated partner of this kernel.
    pub fn untruncated(&self) -> TruncatedKernel {
        TruncatedKernel {
            base: self.base.clone(),
            r: None,
        }
    }

    fn breaks(&self) -> Vec<f64> {
        let mut b = vec![self.support_radius()];
        if let Some(r) = self.r {
            b.push(0.5 * r - 0.25);
        }
        if let Some(t) = &self.base.table {
            b.extend(t.radii.iter().copied());
        }
        b
    }

    /// `(q_r * q_r)(lag e_1)` by radial quadrature; closed form for the
    /// untruncated Bargmann–Fock kernel.
    pub fn covariance(&self, lag: f64) -> f64 {
        assert!(lag >= 0.0, "lag must be nonnegative");
        if self.r.is_none() && self.base.family == KernelFamily::BargmannFock {
            return (-0.5 * lag * lag).exp();
        }
        cross_covariance(self, self, lag)
    }

    /// Covariance derivatives `(kappa''(0), kappa''''(0))` along a line,
    /// from radial integrals of the profile derivatives.
    pub fn covariance_derivatives(&self) -> (f64, f64) {
        let d = self.dim() as f64;
        let area = sphere_area(self.dim() - 1);
        let s_max = self.support_radius();
        let rule = Composite::new(0.0, s_max, &self.breaks(), 400, 8);
        let step = 1e-4;
        let p = |s: f64| self.eval(s.abs());
        let d1 = |s: f64| (p(s + step) - p(s - step)) / (2.0 * step);
        let d2 = |s: f64| (p(s + step) - 2.0 * p(s) + p(s - step)) / (step * step);
        let e_t = 1.0 / d;
        let e_t2 = 3.0 / (d * (d + 2.0));
        let k2 = -area / d
            * rule.integrate(|s| {
                let g = d1(s);
                g * g * s.powf(d - 1.0)
            });
        let k4 = area
            * rule.integrate(|s| {
                let a = d2(s);
                let b = d1(s) / s;
                let m = (a - b) * (a - b) * e_t2 + 2.0 * b * (a - b) * e_t + b * b;
                m * s.powf(d - 1.0)
            });
        (k2, k4)
    }
}

/// `E[f_a(0) f_b(lag e_1)] = (q_a * q_b)(lag e_1)` for two radial kernels in
/// the same dimension, integrated in axisymmetric coordinates.
pub fn cross_covariance(a: &TruncatedKernel, b: &TruncatedKernel, lag: f64) -> f64 {
    let dim = a.dim();
    let d = dim as f64;
    let s_max = a.support_radius();
    let mut breaks = a.breaks();
    breaks.extend(b.breaks().iter().map(|x| (x - lag).abs()));
    breaks.extend(b.breaks().iter().map(|x| x + lag));
    let radial = Composite::new(0.0, s_max, &breaks, 256, 8);
    if lag == 0.0 {
        let area = sphere_area(dim - 1);
        return area * radial.integrate(|s| a.eval(s) * b.eval(s) * s.powf(d - 1.0));
    }
    let angular = Composite::new(0.0, PI, &[], 128, 8);
    let ring = sphere_area(dim - 2);
    ring * radial.integrate(|s| {
        let ps = a.eval(s);
        if ps == 0.0 {
            return 0.0;
        }
        let inner = angular.integrate(|phi| {
            let dist = (s * s + lag * lag - 2.0 * s * lag * phi.cos())
                .max(0.0)
                .sqrt();
            b.eval(dist) * phi.sin().powf(d - 2.0)
        });
        ps * inner * s.powf(d - 1.0)
    })
}
