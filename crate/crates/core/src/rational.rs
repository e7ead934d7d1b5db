//! Exact rational numbers used for every metric accumulation.
//!
//! Metrics are kept as `numerator / denominator` pairs end to end so that
//! macro averages do not depend on summation order. Decimal conversion only
//! happens at render time, with round-half-even.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    /// Builds `num / den`. Panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_bigints(num: BigInt, den: BigInt) -> Option<Self> {
        if den.is_zero() {
            None
        } else {
            Some(Rational(BigRational::new(num, den)))
        }
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// Count ratio `part / whole`. Panics if `whole == 0`.
    pub fn ratio(part: usize, whole: usize) -> Self {
        assert!(whole != 0, "zero denominator");
        Rational(BigRational::new(BigInt::from(part), BigInt::from(whole)))
    }

    /// The exact value of the shortest decimal that round-trips to `x`.
    ///
    /// `0.64_f64` becomes `16/25`, not the binary expansion of the float,
    /// so boundary comparisons against decimal thresholds behave as written.
    pub fn from_decimal_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        Self::parse_decimal(&format!("{x}"))
    }

    /// Parses a plain decimal literal such as `-12.050` or `3e-2`.
    pub fn parse_decimal(s: &str) -> Option<Self> {
        let s = s.trim();
        let (mantissa, exponent) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
            None => (s, 0),
        };
        let (negative, digits) = match mantissa.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((i, f)) => (i, f),
            None => (digits, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
            return None;
        }
        let all_digits = format!("{int_part}{frac_part}");
        let mut num: BigInt = all_digits.parse().ok()?;
        if negative {
            num = -num;
        }
        let scale = exponent - frac_part.len() as i32;
        let ten = BigInt::from(10);
        let value = if scale >= 0 {
            BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
        };
        Some(Rational(value))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn mean<'a, I: IntoIterator<Item = &'a Rational>>(values: I) -> Option<Rational> {
        let mut sum = BigRational::zero();
        let mut n = 0usize;
        for v in values {
            sum += &v.0;
            n += 1;
        }
        (n > 0).then(|| Rational(sum / BigRational::from_integer(BigInt::from(n))))
    }

    /// Rounds `self * 10^decimals` to an integer, ties to even.
    pub fn round_half_even_scaled(&self, decimals: u32) -> BigInt {
        let scaled = &self.0 * BigRational::from_integer(num_traits::pow(BigInt::from(10), decimals as usize));
        let floor = scaled.floor();
        let frac = &scaled - &floor;
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let base = floor.to_integer();
        match frac.cmp(&half) {
            Ordering::Less => base,
            Ordering::Greater => base + 1,
            Ordering::Equal => {
                if base.is_even() {
                    base
                } else {
                    base + 1
                }
            }
        }
    }

    /// Fixed-point decimal rendering with `decimals` places, half-even.
    pub fn to_fixed(&self, decimals: u32) -> String {
        let n = self.round_half_even_scaled(decimals);
        let negative = n.is_negative();
        let digits = n.abs().to_string();
        let d = decimals as usize;
        let body = if d == 0 {
            digits
        } else {
            let padded = format!("{digits:0>width$}", width = d + 1);
            let (int, frac) = padded.split_at(padded.len() - d);
            format!("{int}.{frac}")
        };
        if negative {
            format!("-{body}")
        } else {
            body
        }
    }

    /// Percentage (`self * 100`) with `decimals` places, half-even.
    pub fn to_percent(&self, decimals: u32) -> String {
        (self * &Rational::from_integer(100)).to_fixed(decimals)
    }
}

impl Default for Rational {
    fn default() -> Self {
        Rational::zero()
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0 $op rhs.0)
            }
        }
        impl<'a> $trait<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(&self.0 $op &rhs.0)
            }
        }
    };
}

forward_binop!(Add, add, +);
forward_binop!(Sub, sub, -);
forward_binop!(Mul, mul, *);
forward_binop!(Div, div, /);

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        Rational(iter.fold(BigRational::zero(), |acc, r| acc + r.0))
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        Rational(iter.fold(BigRational::zero(), |acc, r| acc + &r.0))
    }
}

// On disk a rational is `[numerator, denominator]`. Components that do not
// fit in an i64 are written as decimal strings.
impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut tup = serializer.serialize_tuple(2)?;
        for part in [self.0.numer(), self.0.denom()] {
            match part.to_i64() {
                Some(v) => tup.serialize_element(&v)?,
                None => tup.serialize_element(&part.to_string())?,
            }
        }
        tup.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IntOrString {
    Int(i64),
    Str(String),
}

impl IntOrString {
    fn into_bigint(self) -> Option<BigInt> {
        match self {
            IntOrString::Int(v) => Some(BigInt::from(v)),
            IntOrString::Str(s) => s.parse().ok(),
        }
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (num, den) = <(IntOrString, IntOrString)>::deserialize(deserializer)?;
        let num = num.into_bigint().ok_or_else(|| de::Error::custom("bad numerator"))?;
        let den = den.into_bigint().ok_or_else(|| de::Error::custom("bad denominator"))?;
        Rational::from_bigints(num, den).ok_or_else(|| de::Error::custom("zero denominator"))
    }
}
