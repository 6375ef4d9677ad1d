//! The covering construction: from a uniform family with `μ(𝒰_i) ≤ q`, a Σ⁰₂
//! code `V` with `μ(V) ≤ p` and `⋂_{i≥N} 𝒰_i ⊆ V` for every `N`.
//!
//! Rows past the last represented one are taken equal to it, so good
//! sequences of every length up to the row count exist and the chosen
//! sequence is the one the represented data determines.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::family::Family;
use super::{MeasureVerdict, Sigma2Code, TreeCode};
use crate::bits::BitStr;
use crate::error::{Error, Result};
use crate::opensets::UniformSeq;
use crate::rat::Rat;

/// A pair `⟨i, s⟩`: row `i` at stage `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Witness {
    pub row: usize,
    pub stage: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoodEntry {
    pub b: usize,
    pub s: Option<Witness>,
}

/// `⟨b_0, s_0, …, b_{n-1}, s_{n-1}⟩` with the bounds `q_0 < … < q_{n-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodSeq {
    pub pairs: Vec<GoodEntry>,
    pub bounds: Vec<Rat>,
}

impl GoodSeq {
    pub fn bs(&self) -> Vec<usize> {
        self.pairs.iter().map(|e| e.b).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Clause {
    I,
    II,
    III,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GoodVerdict {
    Good,
    Fails { clause: Clause, k: usize },
}

/// `q_k = q + (k+1)(p−q)/(K+1)` for `k < K`.
pub fn ladder(q: &Rat, p: &Rat, k: usize) -> Result<Vec<Rat>> {
    let gap = p
        .checked_sub(q)
        .filter(|g| !g.is_zero())
        .ok_or_else(|| Error::input(format!("need p > q, got p = {p}, q = {q}")))?;
    let denom = Rat::integer(k as u64 + 1);
    Ok((0..k)
        .map(|j| q + &(&(&gap * &Rat::integer(j as u64 + 1)) / &denom))
        .collect())
}

/// Least `b > a` with `μ(𝒰_{a…b} ∪ 𝒰_i) ≤ r` for every `i > b`.
pub fn find_b(u: &UniformSeq, a: usize, q: &Rat, r: &Rat) -> Result<usize> {
    if r <= q {
        return Err(Error::input(format!("need r > q, got r = {r}, q = {q}")));
    }
    let fam = Family::new(u)?;
    fam.check_bound(q)?;
    let top = (a + 1).max(fam.k() - 1);
    (a + 1..=top)
        .find(|&b| {
            fam.first_violation(&fam.inter(a, b, None), b, r, None, usize::MAX)
                .is_none()
        })
        .ok_or_else(|| Error::insufficient(format!("no b in {}..={top} works for a = {a}", a + 1)))
}

fn extended(bs: &[usize], b: usize) -> Vec<usize> {
    let mut v = bs.to_vec();
    v.push(b);
    v
}

/// Clause (ii) at coordinate `k` for the prefix `bs` (whose last entry is `b_k`).
fn clause_ii_holds(fam: &Family, bs: &[usize], qk: &Rat) -> bool {
    let b = *bs.last().expect("nonempty prefix");
    fam.first_violation(&fam.s_set(bs, None), b, qk, None, usize::MAX)
        .is_none()
}

fn witness_holds(fam: &Family, prefix: &[usize], b: usize, w: &Witness, qk: &Rat) -> bool {
    if b == 0 || w.row < b {
        return false;
    }
    let s = Some(w.stage);
    let base = fam.s_set(&extended(prefix, b - 1), s);
    base.union(fam.at(w.row, s)).measure() > *qk
}

/// Least `⟨i, s⟩` (row first) showing that `b` fails clause (ii).
fn canonical_witness(fam: &Family, prefix: &[usize], b: usize, qk: &Rat) -> Option<Witness> {
    for (i, _) in fam.rows_above(b) {
        for stage in 0..fam.stages() {
            let w = Witness { row: i, stage };
            if witness_holds(fam, prefix, b + 1, &w, qk) {
                return Some(w);
            }
        }
    }
    None
}

fn good_sequence_in(fam: &Family, bounds: &[Rat]) -> Result<GoodSeq> {
    let mut bs: Vec<usize> = Vec::with_capacity(bounds.len());
    let mut pairs = Vec::with_capacity(bounds.len());
    for qk in bounds {
        let prev = bs.last().copied().unwrap_or(0);
        let top = (prev + 1).max(fam.k() - 1);
        let b = (prev + 1..=top)
            .find(|&b| clause_ii_holds(fam, &extended(&bs, b), qk))
            .ok_or_else(|| {
                Error::invariant("good-sequence-exists", format!("no b_{} up to {top}", bs.len()))
            })?;
        let s = if b > prev + 1 {
            let w = canonical_witness(fam, &bs, b - 1, qk).ok_or_else(|| {
                Error::invariant("good-sequence-witness", format!("b_{} = {b} has no witness", bs.len()))
            })?;
            Some(w)
        } else {
            None
        };
        pairs.push(GoodEntry { b, s });
        bs.push(b);
    }
    Ok(GoodSeq {
        pairs,
        bounds: bounds.to_vec(),
    })
}

/// The good sequence of length `bounds.len()` for the given bounds.
pub fn good_sequence(u: &UniformSeq, bounds: &[Rat]) -> Result<GoodSeq> {
    good_sequence_in(&Family::new(u)?, bounds)
}

fn check_clauses(fam: &Family, g: &GoodSeq, with_ii: bool) -> Result<GoodVerdict> {
    if g.bounds.len() != g.pairs.len() {
        return Err(Error::LengthMismatch {
            left: g.pairs.len(),
            right: g.bounds.len(),
        });
    }
    let bs = g.bs();
    let mut prev = 0;
    for (k, &b) in bs.iter().enumerate() {
        if b <= prev {
            return Ok(GoodVerdict::Fails { clause: Clause::I, k });
        }
        prev = b;
    }
    if with_ii {
        for k in 0..bs.len() {
            if !clause_ii_holds(fam, &bs[..=k], &g.bounds[k]) {
                return Ok(GoodVerdict::Fails { clause: Clause::II, k });
            }
        }
    }
    for (k, e) in g.pairs.iter().enumerate() {
        let prev = if k == 0 { 0 } else { bs[k - 1] };
        if e.b > prev + 1 {
            let ok = e
                .s
                .is_some_and(|w| witness_holds(fam, &bs[..k], e.b, &w, &g.bounds[k]));
            if !ok {
                return Ok(GoodVerdict::Fails { clause: Clause::III, k });
            }
        }
    }
    Ok(GoodVerdict::Good)
}

/// Checks clauses (i)–(iii) of goodness and names the first that fails.
pub fn good_check(g: &GoodSeq, u: &UniformSeq) -> Result<GoodVerdict> {
    check_clauses(&Family::new(u)?, g, true)
}

/// Index `⟨t, b_0, s_0, …⟩` of one tree of the cover.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleIndex {
    pub t: usize,
    pub entries: Vec<GoodEntry>,
}

impl TupleIndex {
    /// Sequence code: length first, then `t`, then each `b_k` and the
    /// Cantor code of `s_k` (0 for none). Increasing in every coordinate.
    pub fn code(&self) -> Vec<usize> {
        let mut v = vec![self.entries.len(), self.t];
        for e in &self.entries {
            v.push(e.b);
            v.push(match e.s {
                None => 0,
                Some(w) => 1 + (w.row + w.stage) * (w.row + w.stage + 1) / 2 + w.stage,
            });
        }
        v
    }
}

impl PartialOrd for TupleIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TupleIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.code().cmp(&other.code())
    }
}

/// Output of [`cover`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cover {
    pub code: Sigma2Code,
    pub indices: Vec<TupleIndex>,
    /// Witness level for each prefix of the tree sequence against `p`.
    pub witnesses: Vec<usize>,
    pub ladder: Vec<Rat>,
    pub spine: GoodSeq,
}

/// The level-`ℓ` gate: clause (ii) restricted to stage `ℓ` and effective
/// rows below `ℓ`. It only gets stronger with `ℓ` and equals (ii) once `ℓ`
/// passes both the row count and the last stage.
fn gate(fam: &Family, bs: &[usize], bounds: &[Rat], level: usize) -> bool {
    (0..bs.len()).all(|k| {
        let base = fam.s_set(&bs[..=k], Some(level));
        fam.first_violation(&base, bs[k], &bounds[k], Some(level), level)
            .is_none()
    })
}

/// Builds the cover `V` for `q < p`.
pub fn cover(u: &UniformSeq, q: &Rat, p: &Rat) -> Result<Cover> {
    let fam = Family::new(u)?;
    fam.check_bound(q)?;
    let k = fam.k();
    let bounds = ladder(q, p, k)?;
    let spine = good_sequence_in(&fam, &bounds)?;
    let depth = u.max_len().max(fam.stages()).max(k) + 1;

    let mut candidates: Vec<Vec<GoodEntry>> = Vec::new();
    for n in 1..=k {
        let head = &spine.pairs[..n - 1];
        let prefix: Vec<usize> = head.iter().map(|e| e.b).collect();
        let prev = prefix.last().copied().unwrap_or(0);
        let target = spine.pairs[n - 1];
        let mut options = vec![target];
        for v in prev + 1..target.b {
            let s = if v > prev + 1 {
                canonical_witness(&fam, &prefix, v - 1, &bounds[n - 1])
            } else {
                None
            };
            options.push(GoodEntry { b: v, s });
        }
        options.push(GoodEntry {
            b: target.b + 1,
            s: None,
        });
        for e in options {
            let mut v = head.to_vec();
            v.push(e);
            candidates.push(v);
        }
    }

    let mut built: Vec<(TupleIndex, TreeCode)> = Vec::new();
    for entries in candidates {
        let n = entries.len();
        let g = GoodSeq {
            pairs: entries.clone(),
            bounds: bounds[..n].to_vec(),
        };
        let passes_i_iii = check_clauses(&fam, &g, false)? == GoodVerdict::Good;
        let bs = g.bs();
        let cut = if passes_i_iii {
            (0..=depth).find(|&l| !gate(&fam, &bs, &bounds[..n], l))
        } else {
            Some(0)
        };
        for t in 0..fam.stages() {
            let tree = if passes_i_iii {
                let gens = fam.s_set(&bs, Some(t));
                TreeCode::comparable(&gens, usize::MAX, cut.unwrap_or(usize::MAX), depth)?
            } else {
                TreeCode::empty(depth)
            };
            built.push((
                TupleIndex {
                    t,
                    entries: entries.clone(),
                },
                tree,
            ));
        }
    }
    built.sort_by(|a, b| a.0.cmp(&b.0));
    let (indices, trees): (Vec<_>, Vec<_>) = built.into_iter().unzip();
    let code = Sigma2Code::new(trees)?;
    let witnesses = match code.measure_leq(p)? {
        MeasureVerdict::Holds(w) => w,
        MeasureVerdict::Fails { index } => {
            return Err(Error::invariant(
                "cover-measure",
                format!("trees 0..={index} have no level with density ≤ {p}"),
            ))
        }
    };
    Ok(Cover {
        code,
        indices,
        witnesses,
        ladder: bounds,
        spine,
    })
}

/// Strings of length `depth` whose cylinder lies in `⋂_{i≥N} 𝒰_i` but not
/// in the cover. Empty means containment holds at that depth.
pub fn cover_contains(u: &UniformSeq, c: &Cover, n: usize) -> Result<Vec<BitStr>> {
    let fam = Family::new(u)?;
    let d = c.code.depth();
    let inside = fam.inter(n, n.max(fam.k() - 1), None);
    let top = c.code.level_union(d)?;
    Ok(inside
        .cylinder_members(d)?
        .into_iter()
        .filter(|x| !top.contains(x))
        .collect())
}
