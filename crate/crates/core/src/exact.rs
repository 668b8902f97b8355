//! Exact rational values.
//!
//! Every class number and trace in this crate is carried as an exact
//! rational. Class numbers and traces have denominators dividing 12, but the
//! intermediate multiplicative factors (for instance the local factors of the
//! `xi` functions) can have arbitrary denominators, so the type itself is a
//! general reduced fraction over `i128`. Overflow is a bug, not a rounding
//! event: every operation is checked and panics with a descriptive message.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational number.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ExactValue(Ratio<i128>);

impl ExactValue {
    pub const ZERO: ExactValue = ExactValue(Ratio::new_raw(0, 1));
    pub const ONE: ExactValue = ExactValue(Ratio::new_raw(1, 1));

    /// Builds `num / den`, reduced. Panics if `den == 0`.
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "ExactValue with zero denominator");
        ExactValue(Ratio::new(num, den))
    }

    pub fn from_int(n: i128) -> Self {
        ExactValue(Ratio::from_integer(n))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// The value as an integer, if it is one.
    pub fn to_integer(&self) -> Option<i128> {
        self.is_integer().then(|| self.numer())
    }

    /// -1, 0 or 1.
    pub fn signum(&self) -> i32 {
        match self.numer().cmp(&0) {
            Ordering::Less => -1,
            Ordering::Equal => 0,
            Ordering::Greater => 1,
        }
    }

    pub fn abs(&self) -> Self {
        ExactValue(self.0.abs())
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// True when the reduced denominator divides `d`.
    pub fn denom_divides(&self, d: i128) -> bool {
        d % self.denom() == 0
    }

    pub fn scale(&self, k: i128) -> Self {
        *self * ExactValue::from_int(k)
    }
}

impl From<i64> for ExactValue {
    fn from(n: i64) -> Self {
        ExactValue::from_int(n as i128)
    }
}

impl From<i32> for ExactValue {
    fn from(n: i32) -> Self {
        ExactValue::from_int(n as i128)
    }
}

impl From<i128> for ExactValue {
    fn from(n: i128) -> Self {
        ExactValue::from_int(n)
    }
}

impl Add for ExactValue {
    type Output = ExactValue;
    fn add(self, rhs: Self) -> Self {
        ExactValue(self.0.checked_add(&rhs.0).expect("exact arithmetic overflow in add"))
    }
}

impl Sub for ExactValue {
    type Output = ExactValue;
    fn sub(self, rhs: Self) -> Self {
        ExactValue(self.0.checked_sub(&rhs.0).expect("exact arithmetic overflow in sub"))
    }
}

impl Mul for ExactValue {
    type Output = ExactValue;
    fn mul(self, rhs: Self) -> Self {
        ExactValue(self.0.checked_mul(&rhs.0).expect("exact arithmetic overflow in mul"))
    }
}

impl Div for ExactValue {
    type Output = ExactValue;
    fn div(self, rhs: Self) -> Self {
        assert!(!rhs.is_zero(), "ExactValue division by zero");
        ExactValue(self.0.checked_div(&rhs.0).expect("exact arithmetic overflow in div"))
    }
}

impl Neg for ExactValue {
    type Output = ExactValue;
    fn neg(self) -> Self {
        ExactValue(-self.0)
    }
}

impl AddAssign for ExactValue {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for ExactValue {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl Sum for ExactValue {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ExactValue::ZERO, |acc, x| acc + x)
    }
}

impl Zero for ExactValue {
    fn zero() -> Self {
        ExactValue::ZERO
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl One for ExactValue {
    fn one() -> Self {
        ExactValue::ONE
    }
}

impl PartialOrd for ExactValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl fmt::Display for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse exact value from {0:?}")]
pub struct ParseExactError(String);

impl FromStr for ExactValue {
    type Err = ParseExactError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseExactError(s.to_string());
        match s.trim().split_once('/') {
            Some((n, d)) => {
                let n: i128 = n.trim().parse().map_err(|_| err())?;
                let d: i128 = d.trim().parse().map_err(|_| err())?;
                if d == 0 {
                    return Err(err());
                }
                Ok(ExactValue::new(n, d))
            }
            None => s.trim().parse().map(ExactValue::from_int).map_err(|_| err()),
        }
    }
}

impl Serialize for ExactValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExactValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_and_prints() {
        let v = ExactValue::new(6, -12);
        assert_eq!(v.to_string(), "-1/2");
        assert_eq!(ExactValue::new(24, 12).to_string(), "2");
        assert!(ExactValue::new(1, 3).denom_divides(12));
        assert!(!ExactValue::new(1, 5).denom_divides(12));
    }

    #[test]
    fn parse_round_trip() {
        for s in ["0", "-7", "1/3", "-5/12"] {
            let v: ExactValue = s.parse().unwrap();
            assert_eq!(v.to_string(), s);
        }
        assert!("1/0".parse::<ExactValue>().is_err());
        assert!("x".parse::<ExactValue>().is_err());
    }

    #[test]
    #[should_panic(expected = "overflow")]
    fn overflow_panics() {
        let big = ExactValue::from_int(i128::MAX / 2 + 1);
        let _ = big + big;
    }
}
