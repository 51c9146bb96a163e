use num_bigint::BigUint;
use num_traits::{Float, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::scheme::{HBounds, ProbBound, RenormScheme};
use crate::error::{Error, Result};

/// Steps carried out in exact dyadic arithmetic. Mantissas double in length
/// at every step, so later steps are rounded upward to `ROUNDED_BITS`.
pub const EXACT_MAX_N: usize = 20;
const ROUNDED_BITS: u64 = 256;
const MAX_N: usize = 60;

/// Non-negative dyadic rational `m / 2^e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Dyadic {
    m: BigUint,
    e: u64,
}

impl Dyadic {
    fn zero() -> Self {
        Self {
            m: BigUint::zero(),
            e: 0,
        }
    }

    fn pow2(k: i64) -> Self {
        if k >= 0 {
            Self {
                m: BigUint::from(1u32) << k as u64,
                e: 0,
            }
        } else {
            Self {
                m: BigUint::from(1u32),
                e: k.unsigned_abs(),
            }
        }
    }

    /// Exact value of a finite non-negative float.
    fn from_f64(x: f64) -> Self {
        assert!(x.is_finite() && x >= 0.0);
        let (mant, exp, _) = x.integer_decode();
        let m = BigUint::from(mant);
        let mut d = if exp >= 0 {
            Self {
                m: m << exp as u64,
                e: 0,
            }
        } else {
            Self {
                m,
                e: exp.unsigned_abs() as u64,
            }
        };
        d.normalize();
        d
    }

    fn normalize(&mut self) {
        if self.m.is_zero() {
            self.e = 0;
            return;
        }
        let tz = self.m.trailing_zeros().unwrap_or(0).min(self.e);
        self.m >>= tz;
        self.e -= tz;
    }

    fn mul_int(&self, k: &BigUint) -> Self {
        let mut d = Self {
            m: &self.m * k,
            e: self.e,
        };
        d.normalize();
        d
    }

    /// Multiplies by `2^s`.
    fn shl(&self, s: u64) -> Self {
        if self.e >= s {
            Self {
                m: self.m.clone(),
                e: self.e - s,
            }
        } else {
            Self {
                m: &self.m << (s - self.e),
                e: 0,
            }
        }
    }

    /// `self^2 / 4`.
    fn square_quarter(&self) -> Self {
        let mut d = Self {
            m: &self.m * &self.m,
            e: 2 * self.e + 2,
        };
        d.normalize();
        d
    }

    fn add(&self, o: &Self) -> Self {
        let e = self.e.max(o.e);
        let mut d = Self {
            m: (&self.m << (e - self.e)) + (&o.m << (e - o.e)),
            e,
        };
        d.normalize();
        d
    }

    /// `self <= 2^k` for `k >= 0`.
    fn le_pow2(&self, k: u64) -> bool {
        let bits = self.m.bits();
        if bits <= self.e + k {
            return true;
        }
        if bits > self.e + k + 1 {
            return false;
        }
        self.m <= BigUint::from(1u32) << (self.e + k)
    }

    /// Rounds upward to `bits` significant bits.
    fn round_up(&mut self, bits: u64) {
        let len = self.m.bits();
        if len <= bits {
            return;
        }
        let t = (len - bits).min(self.e);
        let lost = self.m.trailing_zeros().is_some_and(|tz| tz < t);
        self.m >>= t;
        if lost {
            self.m += 1u32;
        }
        self.e -= t;
        self.normalize();
    }

    fn to_f64(&self) -> f64 {
        let bits = self.m.bits();
        let t = bits.saturating_sub(64);
        let top = (&self.m >> t).to_u64().unwrap_or(u64::MAX) as f64;
        let exp = t as i64 - self.e as i64;
        top * 2f64.powi(exp.clamp(-1100, 1100) as i32)
    }
}

/// One step of the iteration `q_{n+1} = P[H_{n+1}^c] + (3 rho lambda)^{2d} q_n^2`.
///
/// `u = q_n / (qbar0 2^{-2^n})`; the target bound is `u <= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionRow {
    pub n: usize,
    pub u_float: f64,
    pub u_exact: f64,
    pub log2_q: f64,
    pub log2_bound: f64,
    pub log2_h: Option<f64>,
    pub pass_float: bool,
    pub pass_exact: bool,
    /// Exact arithmetic (otherwise an upward-rounded upper bound).
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionTrace {
    pub qbar0: f64,
    pub log2_qbar0: f64,
    pub rows: Vec<RecursionRow>,
    pub all_pass: bool,
}

/// `u_0` as an exact dyadic and as a float.
fn initial(s: &RenormScheme, four_k: &BigUint) -> (Dyadic, f64) {
    match s.q0 {
        ProbBound::Relative(f) => (Dyadic::from_f64(f), f),
        ProbBound::Absolute(q) => (
            Dyadic::from_f64(q).mul_int(four_k),
            q * four_k.to_f64().unwrap_or(f64::INFINITY),
        ),
    }
}

/// `v_n = P[H_n^c] / (qbar0 2^{-2^n})` as a dyadic upper bound and a float.
fn h_ratio(s: &RenormScheme, n: usize, four_k: &BigUint) -> Result<(Dyadic, f64)> {
    let p = &s.scales;
    // any smaller ratio is replaced by this one; still an upper bound
    let floor = 1i64 << (n + 2).min(24);
    match &s.h_bounds {
        HBounds::Cap { factor } => Ok((Dyadic::from_f64(*factor), *factor)),
        HBounds::Explicit(v) => {
            let h = *v.get(n - 1).ok_or_else(|| Error::Config {
                path: "h_bounds".into(),
                message: format!("no bound given for n = {n}"),
            })?;
            if h == 0.0 {
                return Ok((Dyadic::zero(), 0.0));
            }
            let log2_v = h.log2() + 2f64.powi(n as i32) - p.log2_qbar0();
            if log2_v > 1.0 {
                // fails the hypothesis; keep the float and skip the huge shift
                return Ok((Dyadic::pow2(2), log2_v.exp2()));
            }
            Ok((
                Dyadic::from_f64(h).mul_int(four_k).shl(1u64 << n),
                log2_v.exp2(),
            ))
        }
        HBounds::Gaussian { .. } => {
            let log2_h = s.h_bounds.log2(p, n).unwrap_or(f64::NEG_INFINITY);
            let log2_v = log2_h + 2f64.powi(n as i32) - p.log2_qbar0();
            let k = if log2_v.is_finite() {
                ((log2_v + 1e-9 * (1.0 + log2_v.abs())).ceil() as i64).max(-floor)
            } else {
                -floor
            };
            Ok((Dyadic::pow2(k), log2_v.exp2()))
        }
    }
}

/// Iterates the union-bound recursion at equality and checks
/// `q_n <= 2 qbar0 2^{-2^n}` for `n = 0..=n_max`.
///
/// Hypotheses `q0 <= qbar0` and `P[H_n^c] <= qbar0 2^{-2^n}` are checked
/// exactly first; the first violation is an error.
pub fn verify_recursion(s: &RenormScheme, n_max: usize) -> Result<RecursionTrace> {
    s.scales.validate()?;
    if n_max > MAX_N {
        return Err(Error::Config {
            path: "nmax".into(),
            message: format!("at most {MAX_N}"),
        });
    }
    for (path, x) in [
        (
            "q0",
            match s.q0 {
                ProbBound::Relative(f) | ProbBound::Absolute(f) => f,
            },
        ),
        (
            "h_bounds",
            match &s.h_bounds {
                HBounds::Cap { factor } => *factor,
                HBounds::Gaussian { r, c } => r.min(*c),
                HBounds::Explicit(v) => v.iter().copied().fold(0.0, f64::min),
            },
        ),
    ] {
        if !(x.is_finite() && x >= 0.0) {
            return Err(Error::Config {
                path: path.into(),
                message: "must be finite and non-negative".into(),
            });
        }
    }

    let four_k = s.scales.pair_count() * 4u32;
    let (mut u, mut u_f) = initial(s, &four_k);
    if !u.le_pow2(0) {
        return Err(Error::Hypothesis {
            n: 0,
            message: format!("q0 exceeds qbar0 (ratio {:.6})", u.to_f64()),
        });
    }
    let mut vs = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let (v, v_f) = h_ratio(s, n, &four_k)?;
        if !v.le_pow2(0) {
            return Err(Error::Hypothesis {
                n,
                message: format!(
                    "P[H_n^c] bound exceeds qbar0 2^(-2^n) (ratio {:.6})",
                    v.to_f64()
                ),
            });
        }
        vs.push((v, v_f));
    }

    let lq = s.scales.log2_qbar0();
    let row = |n: usize, u: &Dyadic, u_f: f64| {
        let ue = u.to_f64();
        let log2_bound = 1.0 + lq - 2f64.powi(n as i32);
        RecursionRow {
            n,
            u_float: u_f,
            u_exact: ue,
            log2_q: lq - 2f64.powi(n as i32) + ue.log2(),
            log2_bound,
            log2_h: (n > 0).then(|| s.h_bounds.log2(&s.scales, n)).flatten(),
            pass_float: u_f <= 2.0,
            pass_exact: u.le_pow2(1),
            exact: n <= EXACT_MAX_N,
        }
    };
    let mut rows = vec![row(0, &u, u_f)];
    for (i, (v, v_f)) in vs.iter().enumerate() {
        let n = i + 1;
        u = v.add(&u.square_quarter());
        if n > EXACT_MAX_N {
            u.round_up(ROUNDED_BITS);
        }
        u_f = v_f + u_f * u_f / 4.0;
        rows.push(row(n, &u, u_f));
    }
    let all_pass = rows.iter().all(|r| r.pass_float && r.pass_exact);
    Ok(RecursionTrace {
        qbar0: s.scales.qbar0(),
        log2_qbar0: lq,
        rows,
        all_pass,
    })
}
