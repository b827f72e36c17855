//! Sign/log-magnitude representation of amplitudes.
//!
//! Overlaps of many-site states decay like `k^M` and underflow `f64` long
//! before `M` reaches interesting sizes, so every contraction in this crate
//! reports amplitudes as a sign together with the natural log of the
//! magnitude.

/// An amplitude stored as `sign * exp(log_mag)`.
///
/// The zero amplitude is `sign = 0`, `log_mag = -inf`; the two fields are
/// kept consistent by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogAmplitude {
    pub sign: i8,
    pub log_mag: f64,
}

impl LogAmplitude {
    /// The exact zero amplitude.
    pub const ZERO: LogAmplitude = LogAmplitude {
        sign: 0,
        log_mag: f64::NEG_INFINITY,
    };

    pub fn new(sign: i8, log_mag: f64) -> Self {
        if sign == 0 || log_mag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogAmplitude { sign, log_mag }
        }
    }

    /// Represents a plain `f64` value exactly (up to the log).
    pub fn from_value(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            LogAmplitude {
                sign: if v > 0.0 { 1 } else { -1 },
                log_mag: v.abs().ln(),
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Recovers the plain value; underflows to signed zero for very negative
    /// `log_mag`.
    pub fn value(&self) -> f64 {
        self.sign as f64 * self.log_mag.exp()
    }

    /// Product of two amplitudes: signs multiply, log-magnitudes add.
    pub fn mul(&self, other: &LogAmplitude) -> LogAmplitude {
        if self.is_zero() || other.is_zero() {
            Self::ZERO
        } else {
            LogAmplitude {
                sign: self.sign * other.sign,
                log_mag: self.log_mag + other.log_mag,
            }
        }
    }
}
