//! Scalar helpers: log-sum-exp, guarded powers of the time ratio and
//! divided differences of `a -> r^a` that stay accurate when the two
//! exponents nearly coincide.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `exp` underflows to zero below this argument.
pub const EXP_UNDERFLOW: f64 = -745.0;

/// Eigenvalue-collision threshold for the 2D closed form.
pub const COLLISION_TOL: f64 = 1e-9;

pub fn logsumexp(values: impl IntoIterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.into_iter().collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = vals.iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}

/// `ln` with `ln(0) = -inf` and no NaN for exact zeros.
#[inline]
pub fn ln0(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        x.ln()
    }
}

/// `-w * ln(p) + (1 + w) * ln(q)`: log of `p^-w q^(1+w)`.
///
/// A zero `q` forces `-inf` unless its exponent is exactly zero, and a zero
/// exponent contributes nothing regardless of the base.
#[inline]
pub fn log_tilt(log_p: f64, log_q: f64, w: f64) -> f64 {
    let q_part = if w == -1.0 {
        0.0
    } else if log_q == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    } else {
        (1.0 + w) * log_q
    };
    let p_part = if w == 0.0 { 0.0 } else { -w * log_p };
    q_part + p_part
}

/// `exp(x)` flushed to exactly zero below [`EXP_UNDERFLOW`]; the flag
/// reports whether the flush happened.
#[inline]
pub fn guarded_exp(x: f64) -> (f64, bool) {
    if x < EXP_UNDERFLOW {
        (0.0, x > f64::NEG_INFINITY)
    } else {
        (x.exp(), false)
    }
}

/// Time ratio `r(t) = (1 - e^{-(T-t)}) / (1 - e^{-T})` on a horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeRatio {
    pub horizon: f64,
    pub t: f64,
    pub r: f64,
    pub ln_r: f64,
}

impl TimeRatio {
    pub fn new(horizon: f64, t: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon T = {horizon} must be positive")));
        }
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::InvalidArgument(format!("t = {t} outside [0, {horizon}]")));
        }
        let rem = horizon - t;
        let den = -(-horizon).exp_m1();
        let (r, ln_r) = if rem == 0.0 {
            (0.0, f64::NEG_INFINITY)
        } else if t == 0.0 {
            (1.0, 0.0)
        } else {
            let num = -(-rem).exp_m1();
            (num / den, num.ln() - den.ln())
        };
        Ok(Self {
            horizon,
            t,
            r,
            ln_r,
        })
    }

    /// Reverse time change `s(t) = ln(1/r(t))`, the integral of the
    /// reverse time factor over `[0, t]`.
    pub fn log_time_change(&self) -> f64 {
        -self.ln_r
    }

    /// `r^a` for `a > 0`.
    pub fn pow(&self, a: f64) -> f64 {
        self.pow_flagged(a).0
    }

    pub fn pow_flagged(&self, a: f64) -> (f64, bool) {
        if a == 0.0 {
            return (1.0, false);
        }
        if self.r == 0.0 {
            return (0.0, false);
        }
        if self.ln_r == 0.0 {
            return (1.0, false);
        }
        guarded_exp(a * self.ln_r)
    }

    /// Divided difference `(r^a - r^b) / (a - b)` for `a, b > 0`.
    ///
    /// Evaluated as `r^min * expm1(|a-b| ln r) / |a-b|`, which has no
    /// cancellation. Within [`COLLISION_TOL`] the derivative `r^a ln r` is
    /// substituted; the flag reports the substitution.
    pub fn pow_divided_difference(&self, a: f64, b: f64) -> (f64, bool) {
        if self.r == 0.0 {
            return (0.0, false);
        }
        if self.t == 0.0 {
            return (0.0, false);
        }
        let gap = (a - b).abs();
        let lo = a.min(b);
        if gap < COLLISION_TOL {
            let mid = 0.5 * (a + b);
            return (self.pow(mid) * self.ln_r, true);
        }
        let x = gap * self.ln_r;
        (self.pow(lo) * x.exp_m1() / gap, false)
    }

    /// Natural log of `|(r^a - r^b) / (a - b)|`; finite whenever `0 < r < 1`.
    pub fn ln_abs_pow_divided_difference(&self, a: f64, b: f64) -> f64 {
        if self.r == 0.0 || self.t == 0.0 {
            return f64::NEG_INFINITY;
        }
        let gap = (a - b).abs();
        let lo = a.min(b);
        if gap < COLLISION_TOL {
            return 0.5 * (a + b) * self.ln_r + (-self.ln_r).ln();
        }
        let x = gap * self.ln_r;
        lo * self.ln_r + (-x.exp_m1()).ln() - gap.ln()
    }
}

/// Reverse time factor `e^{-t} / (1 - e^{-t})` of the masking process.
#[inline]
pub fn time_factor(t: f64) -> f64 {
    1.0 / t.exp_m1()
}
