//! Numeric back ends.
//!
//! Every probability table is generic over [`Scalar`]. Two implementations
//! exist: `f64` for empirical data and [`Rational`] (arbitrary precision) for
//! exact fixtures, where every axiom verdict is decided without rounding.

use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub type Rational = BigRational;

/// Absolute tolerance applied to float comparisons unless overridden.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumericMode {
    Float,
    Rational,
}

impl NumericMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NumericMode::Float => "float",
            NumericMode::Rational => "rational",
        }
    }
}

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Send
    + Sync
    + 'static
{
    const MODE: NumericMode;

    fn default_tolerance() -> f64 {
        match Self::MODE {
            NumericMode::Float => FLOAT_TOLERANCE,
            NumericMode::Rational => 0.0,
        }
    }

    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Parses `"0.25"`, `"1"`, `"-3e-2"` or `"num/den"`.
    fn parse_prob(s: &str) -> Option<Self>;

    /// Canonical text form used by the dataset format.
    fn format_prob(&self) -> String;

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// `self < -tol`.
    fn is_negative_beyond(&self, tol: f64) -> bool {
        if tol == 0.0 {
            *self < Self::zero()
        } else {
            self.to_f64() < -tol
        }
    }

    /// `|self| > tol`.
    fn is_nonzero_beyond(&self, tol: f64) -> bool {
        if tol == 0.0 {
            !self.is_zero()
        } else {
            self.to_f64().abs() > tol
        }
    }

    /// `self > tol`.
    fn is_positive_beyond(&self, tol: f64) -> bool {
        if tol == 0.0 {
            *self > Self::zero()
        } else {
            self.to_f64() > tol
        }
    }
}

impl Scalar for f64 {
    const MODE: NumericMode = NumericMode::Float;

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn parse_prob(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: f64 = n.trim().parse().ok()?;
            let d: f64 = d.trim().parse().ok()?;
            if d == 0.0 {
                return None;
            }
            return Some(n / d);
        }
        let v: f64 = s.parse().ok()?;
        v.is_finite().then_some(v)
    }

    fn format_prob(&self) -> String {
        // shortest representation that round-trips
        format!("{}", self)
    }
}

impl Scalar for Rational {
    const MODE: NumericMode = NumericMode::Rational;

    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).unwrap_or_else(BigRational::zero)
    }

    fn to_f64(&self) -> f64 {
        // ratio of two big integers; go through f64 of each part when small
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
            _ => {
                let shift = self.denom().bits().max(self.numer().bits()).saturating_sub(1000);
                let n = (self.numer() >> shift).to_f64().unwrap_or(0.0);
                let d = (self.denom() >> shift).to_f64().unwrap_or(1.0);
                n / d
            }
        }
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn parse_prob(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            return Some(BigRational::new(n, d));
        }
        parse_decimal(s)
    }

    fn format_prob(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }
}

/// Exact decimal parse: `-12.345e-3` becomes `-12345/10^6`.
fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{}{}", int_part, frac_part);
    let mut numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().ok()? };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(value)
}

/// Converts between numeric back ends.
pub fn convert<A: Scalar, B: Scalar>(a: &A) -> B {
    match (A::MODE, B::MODE) {
        (NumericMode::Rational, NumericMode::Rational) | (NumericMode::Float, NumericMode::Float) => {
            B::parse_prob(&a.format_prob()).expect("canonical form parses")
        }
        _ => B::from_f64(a.to_f64()),
    }
}
