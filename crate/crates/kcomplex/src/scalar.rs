//! Scalar abstraction for weights, LP values and balance ratios.
//!
//! Everything that carries a fractional weight is generic over [`Scalar`].
//! The exact instantiation ([`Rational`]) is the one used for verification;
//! `f64`/`f32` are available for quick screening where a tolerance is acceptable.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational.
pub type Rational = BigRational;

pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + FromStr + Send + Sync + 'static
{
    /// `true` when arithmetic is exact and comparisons need no tolerance.
    const EXACT: bool;

    fn from_ratio(numer: i64, denom: i64) -> Self;

    fn from_int(v: i64) -> Self {
        Self::from_ratio(v, 1)
    }

    fn to_f64_lossy(&self) -> f64;

    /// Sign with the scalar's own notion of zero.
    fn sign_tol(&self) -> Ordering;

    fn is_zero_tol(&self) -> bool {
        self.sign_tol() == Ordering::Equal
    }

    fn is_positive_tol(&self) -> bool {
        self.sign_tol() == Ordering::Greater
    }

    fn is_negative_tol(&self) -> bool {
        self.sign_tol() == Ordering::Less
    }

    /// Textual form that round-trips through `FromStr`.
    fn to_text(&self) -> String {
        self.to_string()
    }

    fn parse_text(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn to_f64_lossy(&self) -> f64 {
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
            _ => {
                // huge numerators/denominators: fall back to the reduced quotient
                let q = self.to_integer();
                q.to_f64().unwrap_or(f64::NAN)
            }
        }
    }

    fn sign_tol(&self) -> Ordering {
        if self.is_zero() {
            Ordering::Equal
        } else if self.is_positive() {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    }
}

const F64_EPS: f64 = 1e-9;
const F32_EPS: f32 = 1e-5;

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }

    fn sign_tol(&self) -> Ordering {
        if self.abs() <= F64_EPS {
            Ordering::Equal
        } else if *self > 0.0 {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    }

    fn to_text(&self) -> String {
        format!("{self:?}")
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f32 / denom as f32
    }

    fn to_f64_lossy(&self) -> f64 {
        *self as f64
    }

    fn sign_tol(&self) -> Ordering {
        if self.abs() <= F32_EPS {
            Ordering::Equal
        } else if *self > 0.0 {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    }

    fn to_text(&self) -> String {
        format!("{self:?}")
    }
}

/// Exact rational from an `f64` that is known to be a short decimal (config values).
pub fn rational_from_f64(x: f64) -> Rational {
    BigRational::from_f64(x).unwrap_or_else(Rational::zero)
}

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::from_ratio(numer, denom)
}

/// Serde adapter storing scalars as strings (`"1/3"`, `"0.5"`).
pub(crate) mod as_text {
    use super::Scalar;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Scalar, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_text())
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        let raw = String::deserialize(d)?;
        T::parse_text(&raw).ok_or_else(|| D::Error::custom(format!("bad scalar `{raw}`")))
    }
}
