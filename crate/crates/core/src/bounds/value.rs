//! Exact-rational values with a log-domain fallback.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Numerator/denominator bit length above which values move to the log domain.
pub const DEFAULT_BIT_LIMIT: u64 = 4096;

/// Relative slack applied when a value is pushed into the log domain.
const LOG_SLACK_REL: f64 = 1e-9;
const LOG_SLACK_ABS: f64 = 1e-9;

/// Direction to round when a value cannot be represented exactly.
///
/// Upper bounds round up and lower bounds round down, so a rounded value
/// never claims more than the exact one would.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rounding {
    Up,
    Down,
}

impl Rounding {
    pub(crate) fn nudge(self, log2: f64) -> f64 {
        if !log2.is_finite() {
            return log2;
        }
        let slack = LOG_SLACK_ABS + LOG_SLACK_REL * log2.abs();
        match self {
            Rounding::Up => log2 + slack,
            Rounding::Down => log2 - slack,
        }
    }
}

/// A probability or bound value.
///
/// `Exact` carries a reduced rational. `Log` carries a sign and the base-2
/// logarithm of the magnitude; zero is always exact.
#[derive(Clone, Debug, PartialEq)]
pub enum ExactValue {
    Exact(BigRational),
    Log { negative: bool, log2: f64 },
}

impl ExactValue {
    pub fn zero() -> Self {
        ExactValue::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactValue::Exact(BigRational::one())
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        ExactValue::Exact(BigRational::from_integer(n.into()))
    }

    pub fn from_biguint(n: BigUint) -> Self {
        Self::from_integer(BigInt::from(n))
    }

    pub fn ratio(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Self {
        ExactValue::Exact(BigRational::new(numer.into(), denom.into()))
    }

    pub fn from_log2(log2: f64) -> Self {
        ExactValue::Log {
            negative: false,
            log2,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, ExactValue::Exact(_))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            ExactValue::Exact(r) => Some(r),
            ExactValue::Log { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ExactValue::Exact(r) => r.is_zero(),
            ExactValue::Log { log2, .. } => *log2 == f64::NEG_INFINITY,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            ExactValue::Exact(r) => r.is_negative(),
            ExactValue::Log { negative, log2 } => *negative && *log2 > f64::NEG_INFINITY,
        }
    }

    /// Base-2 logarithm of the magnitude (`-inf` for zero).
    pub fn log2(&self) -> f64 {
        match self {
            ExactValue::Exact(r) => rational_log2(r),
            ExactValue::Log { log2, .. } => *log2,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExactValue::Exact(r) => rational_to_f64(r),
            ExactValue::Log { negative, log2 } => {
                let m = log2.exp2();
                if *negative {
                    -m
                } else {
                    m
                }
            }
        }
    }

    /// Moves the value into the log domain, rounding in `dir`.
    pub fn into_log(self, dir: Rounding) -> Self {
        match self {
            ExactValue::Exact(ref r) if r.is_zero() => self,
            ExactValue::Exact(r) => {
                let negative = r.is_negative();
                // a negative number's magnitude rounds the opposite way
                let d = if negative { flip(dir) } else { dir };
                ExactValue::Log {
                    negative,
                    log2: d.nudge(rational_log2(&r)),
                }
            }
            v @ ExactValue::Log { .. } => v,
        }
    }

    /// Converts to the log domain when the rational exceeds `bit_limit` bits.
    pub fn fit(self, bit_limit: u64, dir: Rounding) -> Self {
        match &self {
            ExactValue::Exact(r) if rational_bits(r) > bit_limit => self.into_log(dir),
            _ => self,
        }
    }

    pub fn mul(&self, other: &Self, dir: Rounding) -> Self {
        match (self, other) {
            (ExactValue::Exact(a), ExactValue::Exact(b)) => ExactValue::Exact(a * b),
            _ if self.is_zero() || other.is_zero() => Self::zero(),
            _ => ExactValue::Log {
                negative: self.is_negative() != other.is_negative(),
                log2: dir.nudge(self.log2() + other.log2()),
            },
        }
    }

    pub fn div(&self, other: &Self, dir: Rounding) -> Self {
        assert!(!other.is_zero(), "division by zero value");
        match (self, other) {
            (ExactValue::Exact(a), ExactValue::Exact(b)) => ExactValue::Exact(a / b),
            _ if self.is_zero() => Self::zero(),
            _ => ExactValue::Log {
                negative: self.is_negative() != other.is_negative(),
                log2: dir.nudge(self.log2() - other.log2()),
            },
        }
    }

    /// Sum of two nonnegative values.
    pub fn add(&self, other: &Self, dir: Rounding) -> Self {
        match (self, other) {
            (ExactValue::Exact(a), ExactValue::Exact(b)) => ExactValue::Exact(a + b),
            _ => {
                debug_assert!(!self.is_negative() && !other.is_negative());
                let (a, b) = (self.log2(), other.log2());
                let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                if hi == f64::NEG_INFINITY {
                    return Self::zero();
                }
                let log2 = hi + (lo - hi).exp2().ln_1p() / std::f64::consts::LN_2;
                ExactValue::Log {
                    negative: false,
                    log2: dir.nudge(log2),
                }
            }
        }
    }

    pub fn pow(&self, exp: u64, dir: Rounding) -> Self {
        match self {
            ExactValue::Exact(r) => {
                let e = i32::try_from(exp).expect("exponent fits in i32");
                ExactValue::Exact(num_traits::Pow::pow(r, e))
            }
            ExactValue::Log { negative, log2 } => ExactValue::Log {
                negative: *negative && exp % 2 == 1,
                log2: dir.nudge(log2 * exp as f64),
            },
        }
    }

    /// `min(self, 1)`.
    pub fn cap_at_one(&self) -> Self {
        if self.cmp_value(&Self::one()) == Ordering::Greater {
            Self::one()
        } else {
            self.clone()
        }
    }

    /// Total order on values, exact when both sides are exact.
    pub fn cmp_value(&self, other: &Self) -> Ordering {
        if let (ExactValue::Exact(a), ExactValue::Exact(b)) = (self, other) {
            return a.cmp(b);
        }
        let sa = self.signum();
        let sb = other.signum();
        if sa != sb {
            return sa.cmp(&sb);
        }
        let ord = self
            .log2()
            .partial_cmp(&other.log2())
            .unwrap_or(Ordering::Equal);
        if sa < 0 {
            ord.reverse()
        } else {
            ord
        }
    }

    fn signum(&self) -> i8 {
        if self.is_zero() {
            0
        } else if self.is_negative() {
            -1
        } else {
            1
        }
    }
}

fn flip(dir: Rounding) -> Rounding {
    match dir {
        Rounding::Up => Rounding::Down,
        Rounding::Down => Rounding::Up,
    }
}

impl PartialOrd for ExactValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp_value(other))
    }
}

impl fmt::Display for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactValue::Exact(r) => {
                if r.is_integer() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            ExactValue::Log { negative, log2 } => {
                let sign = if *negative { "-" } else { "" };
                write!(f, "≈ {sign}{} (log2 {log2:.6})", format_decimal(*log2))
            }
        }
    }
}

/// Decimal rendering from a log2 magnitude, in scientific form when large.
fn format_decimal(log2: f64) -> String {
    if log2.abs() < 60.0 {
        return format!("{:.6e}", log2.exp2());
    }
    let log10 = log2 * std::f64::consts::LOG10_2;
    let exponent = log10.floor();
    let mantissa = 10f64.powf(log10 - exponent);
    format!("{mantissa:.6}e{exponent}")
}

pub(crate) fn biguint_log2(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 64 {
        return (n.to_u64().unwrap() as f64).log2();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_u64().unwrap() as f64;
    top.log2() + shift as f64
}

pub(crate) fn rational_log2(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    let n = r.numer().magnitude();
    let d = r.denom().magnitude();
    biguint_log2(n) - biguint_log2(d)
}

fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let (n, d) = (r.numer(), r.denom());
    if n.bits() < 1000 && d.bits() < 1000 {
        if let (Some(a), Some(b)) = (n.to_f64(), d.to_f64()) {
            if a.is_finite() && b.is_finite() && b != 0.0 {
                return a / b;
            }
        }
    }
    let m = rational_log2(r).exp2();
    if n.sign() == Sign::Minus {
        -m
    } else {
        m
    }
}

/// Larger of the numerator and denominator bit lengths.
pub fn rational_bits(r: &BigRational) -> u64 {
    r.numer().bits().max(r.denom().bits())
}

#[derive(Serialize, Deserialize)]
struct ValueRepr {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    negative: Option<bool>,
    log2: Option<f64>,
    #[serde(default)]
    decimal: Option<f64>,
}

impl Serialize for ExactValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let log2 = self.log2();
        let repr = match self {
            ExactValue::Exact(r) => ValueRepr {
                exact: Some(format!("{}/{}", r.numer(), r.denom())),
                negative: None,
                log2: log2.is_finite().then_some(log2),
                decimal: Some(self.to_f64()).filter(|d| d.is_finite()),
            },
            ExactValue::Log { negative, log2 } => ValueRepr {
                exact: None,
                negative: Some(*negative),
                log2: Some(*log2),
                decimal: Some(self.to_f64()).filter(|d| d.is_finite()),
            },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExactValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = ValueRepr::deserialize(d)?;
        if let Some(text) = repr.exact {
            let (n, den) = text
                .split_once('/')
                .ok_or_else(|| serde::de::Error::custom("exact value must be n/d"))?;
            let n: BigInt = n.parse().map_err(serde::de::Error::custom)?;
            let den: BigInt = den.parse().map_err(serde::de::Error::custom)?;
            if den.is_zero() {
                return Err(serde::de::Error::custom("zero denominator"));
            }
            return Ok(ExactValue::Exact(BigRational::new(n, den)));
        }
        let log2 = repr
            .log2
            .ok_or_else(|| serde::de::Error::custom("log-domain value needs log2"))?;
        Ok(ExactValue::Log {
            negative: repr.negative.unwrap_or(false),
            log2,
        })
    }
}
