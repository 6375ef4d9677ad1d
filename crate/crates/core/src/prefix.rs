//! Finite prefix sets and the clopen sets they generate.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::bits::BitStr;
use crate::error::{Error, Result};
use crate::rat::Rat;

/// A finite set of strings, read as the clopen set `[B]` of all sequences
/// extending one of its members. Iteration order is lexicographic.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrefixSet(BTreeSet<BitStr>);

impl PrefixSet {
    pub fn new() -> Self {
        PrefixSet(BTreeSet::new())
    }

    /// `{ε}`, the whole space.
    pub fn full() -> Self {
        PrefixSet::from_iter([BitStr::empty()])
    }

    pub fn parse<S: AsRef<str>>(items: &[S]) -> Result<Self> {
        items.iter().map(|s| s.as_ref().parse()).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn insert(&mut self, s: BitStr) -> bool {
        self.0.insert(s)
    }

    pub fn contains(&self, s: &BitStr) -> bool {
        self.0.contains(s)
    }

    pub fn iter(&self) -> impl Iterator<Item = &BitStr> + '_ {
        self.0.iter()
    }

    pub fn as_set(&self) -> &BTreeSet<BitStr> {
        &self.0
    }

    /// Length of the longest member (0 when empty).
    pub fn max_len(&self) -> usize {
        self.0.iter().map(BitStr::len).max().unwrap_or(0)
    }

    /// The members that have no proper prefix in the set.
    ///
    /// In lexicographic order every string lying between a prefix and one of
    /// its extensions also extends that prefix, so one scan suffices.
    pub fn minimize(&self) -> PrefixSet {
        let mut out = BTreeSet::new();
        let mut last: Option<BitStr> = None;
        for s in &self.0 {
            if let Some(l) = &last {
                if l.is_prefix_of(s) {
                    continue;
                }
            }
            out.insert(*s);
            last = Some(*s);
        }
        PrefixSet(out)
    }

    pub fn is_antichain(&self) -> bool {
        self.minimize().len() == self.len()
    }

    /// `μ([B]) = Σ_{σ ∈ B̂} 2^{-|σ|}`.
    pub fn measure(&self) -> Rat {
        let min = self.minimize();
        let depth = min.max_len();
        let mut num = BigUint::default();
        for s in min.iter() {
            num += BigUint::one() << (depth - s.len());
        }
        Rat::from_big(num, BigUint::one() << depth).expect("power of two is nonzero")
    }

    /// All strings of length `depth` lying in `[B]`.
    pub fn cylinder_members(&self, depth: usize) -> Result<BTreeSet<BitStr>> {
        let longest = self.max_len();
        if depth < longest {
            return Err(Error::DepthDeficit {
                needed: longest,
                got: depth,
            });
        }
        let mut out = BTreeSet::new();
        for s in self.minimize().iter() {
            out.extend(s.extensions(depth)?);
        }
        Ok(out)
    }

    /// Whether some member is a prefix of `x`, i.e. `[x] ⊆ [B]`.
    pub fn covers(&self, x: &BitStr) -> bool {
        (0..=x.len()).any(|n| self.0.contains(&x.restrict(n)))
    }

    /// Whether `[x] ∩ [B] ≠ ∅`.
    pub fn meets(&self, x: &BitStr) -> bool {
        self.covers(x) || self.0.range(*x..).take_while(|s| x.is_prefix_of(s)).next().is_some()
    }

    pub fn union(&self, other: &PrefixSet) -> PrefixSet {
        PrefixSet(self.0.union(&other.0).copied().collect())
    }

    pub fn extend_from(&mut self, other: &PrefixSet) {
        self.0.extend(other.0.iter().copied());
    }

    /// A prefix set for `[A] ∩ [B]` (minimal).
    pub fn intersect(&self, other: &PrefixSet) -> PrefixSet {
        let a = self.minimize();
        let b = other.minimize();
        let mut out = BTreeSet::new();
        for x in a.iter() {
            if b.covers(x) {
                out.insert(*x);
            } else {
                out.extend(b.0.range(*x..).take_while(|s| x.is_prefix_of(s)).copied());
            }
        }
        PrefixSet(out)
    }

    /// A minimal prefix set for the complement of `[B]`.
    pub fn complement(&self) -> PrefixSet {
        fn go(min: &PrefixSet, node: BitStr, out: &mut BTreeSet<BitStr>) {
            if min.covers(&node) {
                return;
            }
            let below = min.0.range(node..).take_while(|s| node.is_prefix_of(s)).next();
            if below.is_none() {
                out.insert(node);
                return;
            }
            go(min, node.child(false), out);
            go(min, node.child(true), out);
        }
        let min = self.minimize();
        let mut out = BTreeSet::new();
        go(&min, BitStr::empty(), &mut out);
        PrefixSet(out)
    }
}

impl FromIterator<BitStr> for PrefixSet {
    fn from_iter<I: IntoIterator<Item = BitStr>>(iter: I) -> Self {
        PrefixSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a PrefixSet {
    type Item = &'a BitStr;
    type IntoIter = std::collections::btree_set::Iter<'a, BitStr>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Reduce `B` to an antichain with the same cylinder union.
pub fn prefix_minimize(b: &PrefixSet) -> PrefixSet {
    b.minimize()
}

pub fn measure(b: &PrefixSet) -> Rat {
    b.measure()
}

pub fn cylinder_members(b: &PrefixSet, depth: usize) -> Result<BTreeSet<BitStr>> {
    b.cylinder_members(depth)
}

/// `max(a + b - r, 0)`: whenever `μ(A) ≤ a`, `μ(B) ≤ b` and `μ(A ∪ B) > r`,
/// this bounds `μ(A ∩ B)` from above.
pub fn incl_excl_bound(a: &Rat, b: &Rat, r: &Rat) -> Rat {
    (a + b).saturating_sub(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ps(items: &[&str]) -> PrefixSet {
        PrefixSet::parse(items).unwrap()
    }

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    #[test]
    fn minimize_examples() {
        assert_eq!(ps(&["00", "01", "0"]).minimize(), ps(&["0"]));
        assert_eq!(ps(&[]).minimize(), ps(&[]));
        assert_eq!(ps(&["00", "11"]).minimize(), ps(&["00", "11"]));
        assert_eq!(ps(&["0", "0110", "1", ""]).minimize(), ps(&[""]));
    }

    #[test]
    fn measure_examples() {
        assert_eq!(ps(&[""]).measure(), Rat::one());
        assert_eq!(ps(&["00", "01", "0"]).measure(), r("1/2"));
        assert_eq!(ps(&["00", "11"]).measure(), r("1/2"));
        assert_eq!(ps(&[]).measure(), Rat::zero());
    }

    #[test]
    fn cylinder_member_examples() {
        let got = ps(&["0"]).cylinder_members(2).unwrap();
        assert_eq!(PrefixSet(got), ps(&["00", "01"]));
        assert!(ps(&[]).cylinder_members(3).unwrap().is_empty());
        let got = ps(&["00", "11"]).cylinder_members(3).unwrap();
        assert_eq!(PrefixSet(got), ps(&["000", "001", "110", "111"]));
        assert_eq!(
            ps(&["0101"]).cylinder_members(2),
            Err(Error::DepthDeficit { needed: 4, got: 2 })
        );
    }

    #[test]
    fn incl_excl_examples() {
        assert_eq!(incl_excl_bound(&r("1/2"), &r("1/2"), &r("3/4")), r("1/4"));
        assert_eq!(incl_excl_bound(&r("1/4"), &r("1/4"), &r("1/2")), r("0"));
        assert_eq!(incl_excl_bound(&r("1/2"), &r("1/4"), &r("5/8")), r("1/8"));
        assert_eq!(incl_excl_bound(&r("0"), &r("0"), &r("1")), r("0"));
    }

    #[test]
    fn set_operations() {
        let a = ps(&["0", "10"]);
        let b = ps(&["01", "1"]);
        assert_eq!(a.intersect(&b), ps(&["01", "10"]));
        assert_eq!(a.complement(), ps(&["11"]));
        assert_eq!(ps(&[]).complement(), ps(&[""]));
        assert_eq!(ps(&[""]).complement(), ps(&[]));
        assert!(a.meets(&"".parse().unwrap()));
        assert!(!a.meets(&"11".parse().unwrap()));
        assert!(a.covers(&"011".parse().unwrap()));
    }

    fn arb_set(max_len: usize) -> impl Strategy<Value = PrefixSet> {
        proptest::collection::vec(proptest::collection::vec(any::<bool>(), 0..=max_len), 0..12)
            .prop_map(|v| v.into_iter().map(|b| BitStr::from_bits(b).unwrap()).collect())
    }

    proptest! {
        #[test]
        fn measure_equals_cylinder_count(b in arb_set(8)) {
            let members = b.cylinder_members(9).unwrap();
            prop_assert_eq!(b.measure(), Rat::dyadic(members.len() as u64, 9));
        }

        #[test]
        fn minimize_idempotent_and_measure_preserving(b in arb_set(8)) {
            let m = b.minimize();
            prop_assert!(m.is_antichain());
            prop_assert_eq!(m.minimize(), m.clone());
            prop_assert_eq!(m.measure(), b.measure());
            prop_assert_eq!(m.cylinder_members(8).unwrap(), b.cylinder_members(8).unwrap());
        }

        #[test]
        fn clopen_algebra_matches_enumeration(a in arb_set(6), b in arb_set(6)) {
            let ma = a.cylinder_members(6).unwrap();
            let mb = b.cylinder_members(6).unwrap();
            let inter: BTreeSet<_> = ma.intersection(&mb).copied().collect();
            prop_assert_eq!(a.intersect(&b).cylinder_members(6).unwrap(), inter);
            let all: BTreeSet<_> = BitStr::all_of_len(6).unwrap().into_iter().collect();
            let comp: BTreeSet<_> = all.difference(&ma).copied().collect();
            prop_assert_eq!(a.complement().cylinder_members(6).unwrap(), comp);
        }
    }
}
