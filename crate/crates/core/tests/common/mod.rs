//! Brute-force oracles shared by the integration tests. Sets are expanded
//! into explicit bit vectors over all strings of one length, so nothing here
//! relies on the library's clopen arithmetic.

#![allow(dead_code)]

use revrand::{BitStr, PrefixSet, Rat, UniformSeq};

/// Indicator of `[B]` over all strings of length `d`, indexed by value.
pub fn indicator(b: &PrefixSet, d: usize) -> Vec<bool> {
    let mut out = vec![false; 1 << d];
    for (idx, slot) in out.iter_mut().enumerate() {
        let x = BitStr::from_index(idx as u128, d).unwrap();
        let text = x.to_string();
        *slot = b.iter().any(|s| text.starts_with(&s.to_string()));
    }
    out
}

pub fn count(v: &[bool]) -> u64 {
    v.iter().filter(|&&b| b).count() as u64
}

pub fn and(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x && *y).collect()
}

pub fn or(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x || *y).collect()
}

pub fn density(v: &[bool], d: usize) -> Rat {
    Rat::dyadic(count(v), d)
}

/// A frozen family expanded at depth `d`: `sets[i][s]` is `U_{i,s}`.
pub struct Expanded {
    pub d: usize,
    pub sets: Vec<Vec<Vec<bool>>>,
    pub stages: usize,
}

impl Expanded {
    pub fn new(u: &UniformSeq, d: usize) -> Self {
        let sets: Vec<Vec<Vec<bool>>> = u
            .rows
            .iter()
            .map(|r| (0..r.num_stages()).map(|s| indicator(&r.union_to(s), d)).collect())
            .collect();
        let stages = sets.iter().map(Vec::len).max().unwrap();
        Expanded { d, sets, stages }
    }

    pub fn k(&self) -> usize {
        self.sets.len()
    }

    /// Row `i` at stage `s` (limit if `None`); rows past the end repeat the last.
    pub fn at(&self, i: usize, s: Option<usize>) -> &Vec<bool> {
        let r = &self.sets[i.min(self.k() - 1)];
        let s = s.map_or(r.len() - 1, |s| s.min(r.len() - 1));
        &r[s]
    }

    pub fn inter(&self, a: usize, b: usize, s: Option<usize>) -> Vec<bool> {
        let mut acc = self.at(a, s).clone();
        for i in a + 1..=b {
            acc = and(&acc, self.at(i, s));
        }
        acc
    }

    pub fn s_set(&self, bs: &[usize], s: Option<usize>) -> Vec<bool> {
        let mut acc = vec![false; 1 << self.d];
        for (j, &b) in bs.iter().enumerate() {
            acc = or(&acc, &self.inter(j, b, s));
        }
        acc
    }

    /// Clause (ii) at coordinate `k = bs.len() - 1`, checking rows up to `cap`.
    pub fn clause_ii(&self, bs: &[usize], qk: &Rat, cap: usize) -> bool {
        let b = *bs.last().unwrap();
        let s = self.s_set(bs, None);
        (b + 1..=cap.max(b + 1)).all(|i| density(&or(&s, self.at(i, None)), self.d) <= *qk)
    }

    /// Whether some `⟨i, s⟩` shows that `b` is too small at coordinate `prefix.len()`.
    pub fn witness_exists(&self, prefix: &[usize], b: usize, qk: &Rat, cap: usize) -> bool {
        let mut v = prefix.to_vec();
        v.push(b);
        (b + 1..=cap.max(b + 1)).any(|i| {
            (0..self.stages).any(|s| {
                let base = self.s_set(&v, Some(s));
                density(&or(&base, self.at(i, Some(s))), self.d) > *qk
            })
        })
    }
}

/// Every strictly increasing vector `0 < b_0 < … < b_{n-1} ≤ top`.
pub fn increasing_vectors(n: usize, top: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, lo: usize, top: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for b in lo..=top {
            cur.push(b);
            go(n, b + 1, top, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, 1, top, &mut Vec::new(), &mut out);
    out
}

/// The b-vectors of length `n` admitting witnesses for goodness.
pub fn good_vectors(e: &Expanded, bounds: &[Rat], n: usize, top: usize) -> Vec<Vec<usize>> {
    let cap = top + 1;
    increasing_vectors(n, top)
        .into_iter()
        .filter(|bs| {
            (0..n).all(|k| {
                let prev = if k == 0 { 0 } else { bs[k - 1] };
                let ii = e.clause_ii(&bs[..=k], &bounds[k], cap);
                let iii = bs[k] <= prev + 1 || e.witness_exists(&bs[..k], bs[k] - 1, &bounds[k], cap);
                ii && iii
            })
        })
        .collect()
}
