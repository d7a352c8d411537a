//! Log-scaled reals and vectors for long products.
//!
//! Products of `n` random matrices grow or shrink like `e^{λ n}`; storing a
//! mantissa together with a natural-log exponent keeps every intermediate
//! in range no matter how long the product gets.

use std::f64::consts::{E, LN_10};

/// `mantissa · e^{log_scale}` with `1 ≤ |mantissa| < e`, or zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaled {
    mantissa: f64,
    log_scale: f64,
}

impl LogScaled {
    pub const ZERO: LogScaled = LogScaled { mantissa: 0.0, log_scale: 0.0 };

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            return Self::ZERO;
        }
        Self::from_parts(v, 0.0)
    }

    /// Value with sign `signum` and natural log of magnitude `ln_abs`.
    pub fn from_ln(signum: f64, ln_abs: f64) -> Self {
        if ln_abs == f64::NEG_INFINITY || signum == 0.0 {
            return Self::ZERO;
        }
        let k = ln_abs.floor();
        let m = (ln_abs - k).exp().min(E.next_down());
        LogScaled { mantissa: m.copysign(signum), log_scale: k }
    }

    /// Normalizes an arbitrary `mantissa · e^{log_scale}` pair.
    pub fn from_parts(mantissa: f64, log_scale: f64) -> Self {
        if mantissa == 0.0 {
            return Self::ZERO;
        }
        Self::from_ln(mantissa.signum(), mantissa.abs().ln() + log_scale)
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    /// `ln |value|`, `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mantissa.abs().ln() + self.log_scale
        }
    }

    /// Plain value; underflows to zero or overflows to infinity outside the
    /// `f64` range.
    pub fn to_f64(&self) -> f64 {
        self.mantissa * self.log_scale.exp()
    }

    pub fn mul(&self, other: &LogScaled) -> LogScaled {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        Self::from_parts(self.mantissa * other.mantissa, self.log_scale + other.log_scale)
    }
}

impl std::fmt::Display for LogScaled {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&format_ln(self.mantissa.signum(), self.ln_abs()))
    }
}

/// Formats `signum · e^{ln_abs}` with 17 significant digits in scientific
/// notation, including magnitudes outside the `f64` range.
pub fn format_ln(signum: f64, ln_abs: f64) -> String {
    if ln_abs.is_nan() {
        return "NaN".into();
    }
    if ln_abs == f64::NEG_INFINITY || signum == 0.0 {
        return "0".into();
    }
    if ln_abs.abs() < 700.0 {
        return format_f64((signum * ln_abs.exp()).copysign(signum));
    }
    let log10 = ln_abs / LN_10;
    let mut exp10 = log10.floor();
    let mut mant = 10f64.powf(log10 - exp10);
    if mant >= 9.999_999_999_999_999 {
        mant /= 10.0;
        exp10 += 1.0;
    }
    let sign = if signum < 0.0 { "-" } else { "" };
    format!("{sign}{mant:.16}e{}", exp10 as i64)
}

/// 17-significant-digit scientific rendering of a finite `f64`; round-trips
/// exactly through `str::parse`.
pub fn format_f64(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A vector stored as `values · e^{log_scale}` with `max |values| = 1`
/// after every [`ScaledVec::renormalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledVec {
    pub values: Vec<f64>,
    pub log_scale: f64,
}

impl ScaledVec {
    pub fn new(values: Vec<f64>) -> Self {
        let mut v = ScaledVec { values, log_scale: 0.0 };
        v.renormalize();
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Rescales so the largest magnitude is one. An all-zero vector is
    /// left untouched.
    pub fn renormalize(&mut self) {
        let m = self.max_abs();
        if m > 0.0 && m.is_finite() && m != 1.0 {
            let inv = 1.0 / m;
            self.values.iter_mut().for_each(|v| *v *= inv);
            self.log_scale += m.ln();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `ln` of the Euclidean norm of the represented vector.
    pub fn ln_norm(&self) -> f64 {
        let n2: f64 = self.values.iter().map(|v| v * v).sum();
        if n2 == 0.0 {
            f64::NEG_INFINITY
        } else {
            0.5 * n2.ln() + self.log_scale
        }
    }
}
