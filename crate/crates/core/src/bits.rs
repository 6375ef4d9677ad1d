//! Finite binary strings.
//!
//! A [`BitStr`] is stored inline as a left-aligned `u128` plus a length, so
//! the derived ordering is the lexicographic order on strings in which every
//! proper prefix sorts before its extensions. Text form is ASCII `0`/`1`;
//! the empty string is `""`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A finite binary string of length at most [`BitStr::MAX_LEN`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitStr {
    // Field order matters for the derived `Ord`: bits first, then length.
    bits: u128,
    len: u32,
}

impl BitStr {
    pub const MAX_LEN: usize = 128;

    pub const fn empty() -> Self {
        BitStr { bits: 0, len: 0 }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(iter: I) -> Result<Self> {
        let mut s = BitStr::empty();
        for b in iter {
            s = s.push(b)?;
        }
        Ok(s)
    }

    /// The string `b^n`.
    pub fn repeat(bit: bool, n: usize) -> Result<Self> {
        BitStr::from_bits(std::iter::repeat_n(bit, n))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        BitStr::repeat(false, n)
    }

    /// The `n`-bit string whose integer value is `value`, most significant bit first.
    pub fn from_index(value: u128, n: usize) -> Result<Self> {
        if n > Self::MAX_LEN {
            return Err(Error::TooLong { len: n });
        }
        if n == 0 {
            return Ok(BitStr::empty());
        }
        if n < 128 && value >> n != 0 {
            return Err(Error::input(format!("{value} does not fit in {n} bits")));
        }
        Ok(BitStr {
            bits: value << (128 - n),
            len: n as u32,
        })
    }

    /// Integer value of the string read as a binary numeral (empty is 0).
    pub fn to_index(&self) -> u128 {
        if self.len == 0 {
            0
        } else {
            self.bits >> (128 - self.len)
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        if i < self.len() {
            Some(self.bits >> (127 - i) & 1 == 1)
        } else {
            None
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |i| self.bits >> (127 - i) & 1 == 1)
    }

    pub fn push(&self, bit: bool) -> Result<Self> {
        if self.len() >= Self::MAX_LEN {
            return Err(Error::TooLong { len: self.len() + 1 });
        }
        let mut bits = self.bits;
        if bit {
            bits |= 1u128 << (127 - self.len);
        }
        Ok(BitStr {
            bits,
            len: self.len + 1,
        })
    }

    /// `self ⌢ bit`; panics only past `MAX_LEN`, which callers bound by depth checks.
    pub fn child(&self, bit: bool) -> Self {
        self.push(bit).expect("string length exceeds BitStr::MAX_LEN")
    }

    pub fn concat(&self, other: &BitStr) -> Result<Self> {
        let len = self.len() + other.len();
        if len > Self::MAX_LEN {
            return Err(Error::TooLong { len });
        }
        let bits = if other.len == 0 {
            self.bits
        } else {
            self.bits | (other.bits >> self.len)
        };
        Ok(BitStr {
            bits,
            len: len as u32,
        })
    }

    /// `self ↾ n`.
    pub fn restrict(&self, n: usize) -> Self {
        let n = n.min(self.len());
        BitStr {
            bits: self.bits & prefix_mask(n),
            len: n as u32,
        }
    }

    pub fn parent(&self) -> Option<Self> {
        if self.len == 0 {
            None
        } else {
            Some(self.restrict(self.len() - 1))
        }
    }

    /// `self ⊆ other` in the prefix order (reflexive).
    pub fn is_prefix_of(&self, other: &BitStr) -> bool {
        self.len <= other.len && other.bits & prefix_mask(self.len()) == self.bits
    }

    pub fn is_comparable(&self, other: &BitStr) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    /// All strings `τ ⊇ self` with `|τ| = n`, in lexicographic order.
    pub fn extensions(&self, n: usize) -> Result<Vec<BitStr>> {
        if n < self.len() {
            return Err(Error::DepthDeficit {
                needed: self.len(),
                got: n,
            });
        }
        let extra = n - self.len();
        if n > Self::MAX_LEN || extra >= 32 {
            return Err(Error::TooLong { len: n });
        }
        (0..(1u128 << extra))
            .map(|k| self.concat(&BitStr::from_index(k, extra)?))
            .collect()
    }

    /// Every string of length `n`, in lexicographic order.
    pub fn all_of_len(n: usize) -> Result<Vec<BitStr>> {
        BitStr::empty().extensions(n)
    }

    /// `self` followed by `count` copies of `bit`.
    pub fn pad_with(&self, bit: bool, count: usize) -> Result<Self> {
        self.concat(&BitStr::repeat(bit, count)?)
    }
}

fn prefix_mask(n: usize) -> u128 {
    if n == 0 {
        0
    } else {
        !0u128 << (128 - n)
    }
}

impl fmt::Display for BitStr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitStr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for BitStr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = BitStr::empty();
        for (i, c) in s.chars().enumerate() {
            out = match c {
                '0' => out.push(false)?,
                '1' => out.push(true)?,
                other => {
                    return Err(Error::input(format!(
                        "invalid bit {other:?} at position {i} in {s:?}"
                    )))
                }
            };
        }
        Ok(out)
    }
}

impl Serialize for BitStr {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitStr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `x0 ⊕ x1`: even positions from `x0`, odd positions from `x1`.
pub fn interleave(x0: &BitStr, x1: &BitStr) -> Result<BitStr> {
    if x0.len() != x1.len() {
        return Err(Error::LengthMismatch {
            left: x0.len(),
            right: x1.len(),
        });
    }
    BitStr::from_bits(x0.iter().zip(x1.iter()).flat_map(|(a, b)| [a, b]))
}

/// Inverse of [`interleave`]; an odd trailing bit goes to the even half.
pub fn split(x: &BitStr) -> (BitStr, BitStr) {
    let even = x.iter().step_by(2);
    let odd = x.iter().skip(1).step_by(2);
    // Both halves are no longer than `x`, so pushes cannot overflow.
    (
        BitStr::from_bits(even).expect("half of a valid string"),
        BitStr::from_bits(odd).expect("half of a valid string"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(s: &str) -> BitStr {
        s.parse().unwrap()
    }

    #[test]
    fn order_is_lexicographic_with_prefixes_first() {
        let mut v = [b("1"), b("01"), b(""), b("0"), b("10"), b("00")];
        v.sort();
        let shown: Vec<String> = v.iter().map(|s| s.to_string()).collect();
        assert_eq!(shown, ["", "0", "00", "01", "1", "10"]);
    }

    #[test]
    fn prefix_relation() {
        assert!(b("").is_prefix_of(&b("0110")));
        assert!(b("01").is_prefix_of(&b("0110")));
        assert!(!b("011").is_prefix_of(&b("0101")));
        assert!(!b("0110").is_prefix_of(&b("01")));
        assert_eq!(b("0110").restrict(2), b("01"));
    }

    #[test]
    fn interleave_examples() {
        assert_eq!(interleave(&b("00"), &b("11")).unwrap(), b("0101"));
        assert_eq!(interleave(&b(""), &b("")).unwrap(), b(""));
        assert!(matches!(
            interleave(&b("0"), &b("")),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_text_and_overlong() {
        assert!("012".parse::<BitStr>().is_err());
        assert!(BitStr::zeros(129).is_err());
        assert_eq!(BitStr::zeros(128).unwrap().len(), 128);
    }

    #[test]
    fn extensions_enumerate_in_order() {
        let e = b("1").extensions(3).unwrap();
        let shown: Vec<String> = e.iter().map(|s| s.to_string()).collect();
        assert_eq!(shown, ["100", "101", "110", "111"]);
    }

    proptest! {
        #[test]
        fn text_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..128)) {
            let s = BitStr::from_bits(bits.clone()).unwrap();
            prop_assert_eq!(s.to_string().parse::<BitStr>().unwrap(), s);
            prop_assert_eq!(s.iter().collect::<Vec<_>>(), bits);
        }

        #[test]
        fn split_inverts_interleave(pairs in proptest::collection::vec(any::<(bool, bool)>(), 0..60)) {
            let x0 = BitStr::from_bits(pairs.iter().map(|p| p.0)).unwrap();
            let x1 = BitStr::from_bits(pairs.iter().map(|p| p.1)).unwrap();
            let x = interleave(&x0, &x1).unwrap();
            prop_assert_eq!(split(&x), (x0, x1));
        }

        #[test]
        fn ord_matches_text_ord(a in "[01]{0,20}", c in "[01]{0,20}") {
            prop_assert_eq!(b(&a).cmp(&b(&c)), a.cmp(&c));
        }
    }
}
