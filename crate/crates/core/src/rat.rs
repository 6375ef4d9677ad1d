//! Exact nonnegative rationals.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul};
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A nonnegative rational in lowest terms. Serialized as `"num/den"`, or as
/// a bare integer when the denominator is 1.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Rat(Ratio<BigUint>);

impl Rat {
    pub fn zero() -> Self {
        Rat(Ratio::zero())
    }

    pub fn one() -> Self {
        Rat(Ratio::one())
    }

    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::input("zero denominator"));
        }
        Ok(Rat(Ratio::new(BigUint::from(num), BigUint::from(den))))
    }

    pub fn from_big(num: BigUint, den: BigUint) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::input("zero denominator"));
        }
        Ok(Rat(Ratio::new(num, den)))
    }

    pub fn integer(n: u64) -> Self {
        Rat(Ratio::from_integer(BigUint::from(n)))
    }

    /// `2^{-n}`.
    pub fn pow2_neg(n: usize) -> Self {
        Rat(Ratio::new(BigUint::one(), BigUint::one() << n))
    }

    /// `2^{n}`.
    pub fn pow2(n: usize) -> Self {
        Rat(Ratio::from_integer(BigUint::one() << n))
    }

    /// `count · 2^{-n}`.
    pub fn dyadic(count: u64, n: usize) -> Self {
        Rat(Ratio::new(BigUint::from(count), BigUint::one() << n))
    }

    pub fn numer(&self) -> &BigUint {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigUint {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Whether the denominator is a power of two.
    pub fn is_dyadic(&self) -> bool {
        let d = self.denom();
        d.count_ones() == 1
    }

    /// `self - other`, or `None` when that would be negative.
    pub fn checked_sub(&self, other: &Rat) -> Option<Rat> {
        if other > self {
            None
        } else {
            Some(Rat(&self.0 - &other.0))
        }
    }

    /// `max(self - other, 0)`.
    pub fn saturating_sub(&self, other: &Rat) -> Rat {
        self.checked_sub(other).unwrap_or_else(Rat::zero)
    }

    /// Least integer strictly greater than `self`.
    pub fn next_integer_above(&self) -> BigUint {
        self.0.floor().to_integer() + BigUint::one()
    }

    pub fn to_f64(&self) -> f64 {
        // Display only; nothing in the library computes with floats.
        self.0.numer().to_f64().unwrap_or(f64::INFINITY)
            / self.0.denom().to_f64().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom().is_one() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Rat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |t: &str| {
            t.trim()
                .parse::<BigUint>()
                .map_err(|_| Error::input(format!("invalid rational {s:?}")))
        };
        match s.split_once('/') {
            Some((n, d)) => Rat::from_big(parse(n)?, parse(d)?),
            None => Ok(Rat(Ratio::from_integer(parse(s)?))),
        }
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Add for Rat {
    type Output = Rat;
    fn add(self, rhs: Rat) -> Rat {
        Rat(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn add(self, rhs: &Rat) -> Rat {
        Rat(&self.0 + &rhs.0)
    }
}

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, rhs: Rat) -> Rat {
        Rat(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn mul(self, rhs: &Rat) -> Rat {
        Rat(&self.0 * &rhs.0)
    }
}

impl<'a> Div<&'a Rat> for &'a Rat {
    type Output = Rat;
    /// Panics on division by zero, like the integer types.
    fn div(self, rhs: &Rat) -> Rat {
        Rat(&self.0 / &rhs.0)
    }
}

impl Sum for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Rat> for Rat {
    fn sum<I: Iterator<Item = &'a Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |a, b| &a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowest_terms_and_text() {
        let r = Rat::new(2, 4).unwrap();
        assert_eq!(r.to_string(), "1/2");
        assert_eq!(Rat::zero().to_string(), "0");
        assert_eq!("3/6".parse::<Rat>().unwrap(), r);
        assert_eq!("1".parse::<Rat>().unwrap(), Rat::one());
        assert!("1/0".parse::<Rat>().is_err());
        assert!("-1/2".parse::<Rat>().is_err());
    }

    #[test]
    fn saturating_sub_clamps() {
        let a = Rat::new(1, 4).unwrap();
        let b = Rat::new(1, 2).unwrap();
        assert_eq!(a.saturating_sub(&b), Rat::zero());
        assert_eq!(b.saturating_sub(&a), a);
    }

    #[test]
    fn dyadic_detection() {
        assert!(Rat::new(3, 8).unwrap().is_dyadic());
        assert!(Rat::integer(5).is_dyadic());
        assert!(!Rat::new(1, 3).unwrap().is_dyadic());
    }

    #[test]
    fn next_integer() {
        assert_eq!(Rat::new(5, 2).unwrap().next_integer_above(), BigUint::from(3u8));
        assert_eq!(Rat::integer(2).next_integer_above(), BigUint::from(3u8));
    }
}
