//! Signed log-domain scalars.
//!
//! A `LogNum` stores a sign and the natural log of the absolute value, so it
//! can hold quantities like `exp(-q^{2.25})` with `ln q ~ 90` that underflow
//! any native float. Addition goes through log-sum-exp; all other field
//! operations are exact up to f64 rounding of the log magnitude.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNum {
    /// +1, 0 or -1.
    pub sign: i8,
    /// ln |x|; NEG_INFINITY encodes zero.
    pub ln_mag: f64,
}

impl LogNum {
    pub const ZERO: LogNum = LogNum {
        sign: 0,
        ln_mag: f64::NEG_INFINITY,
    };
    pub const ONE: LogNum = LogNum {
        sign: 1,
        ln_mag: 0.0,
    };

    /// Positive value with the given natural log.
    pub fn from_ln(ln_mag: f64) -> Self {
        LogNum { sign: 1, ln_mag }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            LogNum::ZERO
        } else {
            LogNum {
                sign: if x > 0.0 { 1 } else { -1 },
                ln_mag: x.abs().ln(),
            }
        }
    }

    /// May overflow to +-inf or underflow to +-0 outside f64 range.
    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            1 => self.ln_mag.exp(),
            _ => -self.ln_mag.exp(),
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn abs(self) -> Self {
        LogNum {
            sign: self.sign.abs(),
            ln_mag: self.ln_mag,
        }
    }

    /// ln of a positive value; panics on zero or negative input.
    pub fn ln_value(self) -> f64 {
        assert!(self.sign > 0, "ln of non-positive LogNum");
        self.ln_mag
    }

    /// x^p for positive x (or zero with p > 0).
    pub fn powf(self, p: f64) -> Self {
        if self.sign == 0 {
            assert!(p > 0.0, "0^p needs p > 0");
            return LogNum::ZERO;
        }
        assert!(self.sign > 0, "powf of negative LogNum");
        LogNum::from_ln(self.ln_mag * p)
    }

    pub fn recip(self) -> Self {
        assert!(self.sign != 0, "reciprocal of zero");
        LogNum {
            sign: self.sign,
            ln_mag: -self.ln_mag,
        }
    }

    pub fn sqrt(self) -> Self {
        assert!(self.sign >= 0, "sqrt of negative LogNum");
        if self.sign == 0 {
            return LogNum::ZERO;
        }
        LogNum::from_ln(self.ln_mag * 0.5)
    }

    /// Multiply by a plain f64 scalar.
    pub fn scale(self, s: f64) -> Self {
        self * LogNum::from_f64(s)
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
}

/// ln(1 - e^x) for x < 0, numerically stable near both ends.
fn ln_1m_exp(x: f64) -> f64 {
    debug_assert!(x < 0.0);
    if x < -std::f64::consts::LN_2 {
        (-x.exp()).ln_1p()
    } else {
        (-x.exp_m1()).ln()
    }
}

impl Add for LogNum {
    type Output = LogNum;
    fn add(self, rhs: LogNum) -> LogNum {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        if self.sign == rhs.sign {
            let (hi, lo) = if self.ln_mag >= rhs.ln_mag {
                (self.ln_mag, rhs.ln_mag)
            } else {
                (rhs.ln_mag, self.ln_mag)
            };
            LogNum {
                sign: self.sign,
                ln_mag: hi + (lo - hi).exp().ln_1p(),
            }
        } else {
            match self
                .ln_mag
                .partial_cmp(&rhs.ln_mag)
                .expect("NaN log magnitude")
            {
                Ordering::Equal => LogNum::ZERO,
                Ordering::Greater => LogNum {
                    sign: self.sign,
                    ln_mag: self.ln_mag + ln_1m_exp(rhs.ln_mag - self.ln_mag),
                },
                Ordering::Less => LogNum {
                    sign: rhs.sign,
                    ln_mag: rhs.ln_mag + ln_1m_exp(self.ln_mag - rhs.ln_mag),
                },
            }
        }
    }
}

impl Neg for LogNum {
    type Output = LogNum;
    fn neg(self) -> LogNum {
        LogNum {
            sign: -self.sign,
            ln_mag: self.ln_mag,
        }
    }
}

impl Sub for LogNum {
    type Output = LogNum;
    fn sub(self, rhs: LogNum) -> LogNum {
        self + (-rhs)
    }
}

impl Mul for LogNum {
    type Output = LogNum;
    fn mul(self, rhs: LogNum) -> LogNum {
        let sign = self.sign * rhs.sign;
        if sign == 0 {
            LogNum::ZERO
        } else {
            LogNum {
                sign,
                ln_mag: self.ln_mag + rhs.ln_mag,
            }
        }
    }
}

impl Div for LogNum {
    type Output = LogNum;
    fn div(self, rhs: LogNum) -> LogNum {
        assert!(rhs.sign != 0, "division by zero LogNum");
        let sign = self.sign * rhs.sign;
        if sign == 0 {
            LogNum::ZERO
        } else {
            LogNum {
                sign,
                ln_mag: self.ln_mag - rhs.ln_mag,
            }
        }
    }
}

impl PartialOrd for LogNum {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.sign, other.sign) {
            (a, b) if a < b => Some(Ordering::Less),
            (a, b) if a > b => Some(Ordering::Greater),
            (0, 0) => Some(Ordering::Equal),
            (1, 1) => self.ln_mag.partial_cmp(&other.ln_mag),
            (-1, -1) => other.ln_mag.partial_cmp(&self.ln_mag),
            _ => unreachable!(),
        }
    }
}

/// Sum of an iterator of LogNums, accumulated pairwise.
pub fn log_sum<I: IntoIterator<Item = LogNum>>(it: I) -> LogNum {
    it.into_iter().fold(LogNum::ZERO, |a, b| a + b)
}
