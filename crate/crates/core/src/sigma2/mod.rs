//! Σ⁰₂ codes: sequences of finite-depth trees, their level-density measure
//! predicate, and the tests built from them.
//!
//! A tree is stored up to a declared depth `D`. A sequence `Y` is in `[T]` at
//! that depth iff `Y↾D ∈ T`; a tree with no node at level `D` is read as
//! finite, so it contributes nothing to the coded set.

mod cover;
mod family;
mod thin;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bits::BitStr;
use crate::error::{Error, Result};
use crate::prefix::PrefixSet;
use crate::rat::Rat;

pub use cover::{
    cover, cover_contains, find_b, good_check, good_sequence, ladder, Clause, Cover, GoodEntry,
    GoodSeq, GoodVerdict, TupleIndex, Witness,
};
pub use thin::{thin_w2_to_sigma2, ThinIndex, Thinned};

/// A prefix-closed set of strings of length at most `depth`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTree", into = "RawTree")]
pub struct TreeCode {
    levels: Vec<BTreeSet<BitStr>>,
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct RawTree {
    nodes: Vec<BitStr>,
    depth: usize,
    #[serde(default = "yes")]
    frozen: bool,
}

fn yes() -> bool {
    true
}

impl TryFrom<RawTree> for TreeCode {
    type Error = Error;
    fn try_from(raw: RawTree) -> Result<Self> {
        TreeCode::new(raw.nodes, raw.depth, raw.frozen)
    }
}

impl From<TreeCode> for RawTree {
    fn from(t: TreeCode) -> Self {
        RawTree {
            nodes: t.nodes().copied().collect(),
            depth: t.depth(),
            frozen: t.frozen,
        }
    }
}

impl TreeCode {
    pub fn new(nodes: impl IntoIterator<Item = BitStr>, depth: usize, frozen: bool) -> Result<Self> {
        let mut levels = vec![BTreeSet::new(); depth + 1];
        for s in nodes {
            if s.len() > depth {
                return Err(Error::invariant(
                    "tree-depth",
                    format!("node {s} is longer than the declared depth {depth}"),
                ));
            }
            levels[s.len()].insert(s);
        }
        for n in 1..=depth {
            if let Some(s) = levels[n].iter().find(|s| !levels[n - 1].contains(&s.restrict(n - 1))) {
                return Err(Error::invariant(
                    "tree-prefix-closed",
                    format!("node {s} is present but its parent is not"),
                ));
            }
        }
        Ok(TreeCode { levels, frozen })
    }

    pub fn empty(depth: usize) -> Self {
        TreeCode {
            levels: vec![BTreeSet::new(); depth + 1],
            frozen: true,
        }
    }

    /// Every string of length at most `depth`.
    pub fn full(depth: usize) -> Result<Self> {
        let levels = (0..=depth)
            .map(|n| BitStr::all_of_len(n).map(|v| v.into_iter().collect()))
            .collect::<Result<_>>()?;
        Ok(TreeCode {
            levels,
            frozen: true,
        })
    }

    /// Prefixes of `gens` shorter than `prefix_cut`, together with the
    /// extensions of `gens` shorter than `ext_cut`, all capped at `depth`.
    pub(crate) fn comparable(
        gens: &PrefixSet,
        prefix_cut: usize,
        ext_cut: usize,
        depth: usize,
    ) -> Result<Self> {
        let mut levels = vec![BTreeSet::new(); depth + 1];
        let gens = gens.minimize();
        for g in gens.iter() {
            if g.len() > depth {
                return Err(Error::DepthDeficit {
                    needed: g.len(),
                    got: depth,
                });
            }
            for n in (0..=g.len()).take_while(|&n| n < prefix_cut) {
                levels[n].insert(g.restrict(n));
            }
        }
        for n in (0..=depth).take_while(|&n| n < ext_cut) {
            for g in gens.iter().filter(|g| g.len() <= n) {
                levels[n].extend(g.extensions(n)?);
            }
        }
        let t = TreeCode {
            levels,
            frozen: true,
        };
        debug_assert!(TreeCode::new(t.nodes().copied(), depth, true).is_ok());
        Ok(t)
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn is_empty(&self) -> bool {
        self.levels.iter().all(BTreeSet::is_empty)
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.levels.iter().map(BTreeSet::len).sum()
    }

    /// All nodes, shortest first and lexicographic within a level.
    pub fn nodes(&self) -> impl Iterator<Item = &BitStr> + '_ {
        self.levels.iter().flatten()
    }

    pub fn contains(&self, s: &BitStr) -> bool {
        self.levels.get(s.len()).is_some_and(|l| l.contains(s))
    }

    /// `T^n`, the nodes of length exactly `n`.
    pub fn level(&self, n: usize) -> Result<&BTreeSet<BitStr>> {
        static EMPTY: BTreeSet<BitStr> = BTreeSet::new();
        match self.levels.get(n) {
            Some(l) => Ok(l),
            None if self.is_empty() => Ok(&EMPTY),
            None => Err(Error::DepthDeficit {
                needed: n,
                got: self.depth(),
            }),
        }
    }

    /// Whether the tree has a node at its deepest level, i.e. is read as infinite.
    pub fn reaches_depth(&self) -> bool {
        !self.levels[self.depth()].is_empty()
    }
}

pub fn level(t: &TreeCode, n: usize) -> Result<&BTreeSet<BitStr>> {
    t.level(n)
}

/// A finite sequence of trees sharing one depth; codes `⋃_i [T_i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCode")]
pub struct Sigma2Code {
    trees: Vec<TreeCode>,
}

#[derive(Deserialize)]
struct RawCode {
    trees: Vec<TreeCode>,
}

impl TryFrom<RawCode> for Sigma2Code {
    type Error = Error;
    fn try_from(raw: RawCode) -> Result<Self> {
        Sigma2Code::new(raw.trees)
    }
}

/// Result of the level-density measure predicate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureVerdict {
    /// Least witnessing level for each prefix `T_0, …, T_i`.
    Holds(Vec<usize>),
    /// The first prefix index with no witnessing level.
    Fails { index: usize },
}

impl Sigma2Code {
    pub fn new(trees: Vec<TreeCode>) -> Result<Self> {
        if let Some(first) = trees.first() {
            if let Some((i, t)) = trees.iter().enumerate().find(|(_, t)| t.depth() != first.depth()) {
                return Err(Error::invariant(
                    "sigma2-common-depth",
                    format!("tree {i} has depth {} but tree 0 has depth {}", t.depth(), first.depth()),
                ));
            }
        }
        Ok(Sigma2Code { trees })
    }

    pub fn trees(&self) -> &[TreeCode] {
        &self.trees
    }

    pub fn depth(&self) -> usize {
        self.trees.first().map_or(0, TreeCode::depth)
    }

    pub fn is_frozen(&self) -> bool {
        self.trees.iter().all(TreeCode::is_frozen)
    }

    /// `⋃_i T_i^n`.
    pub fn level_union(&self, n: usize) -> Result<BTreeSet<BitStr>> {
        let mut out = BTreeSet::new();
        for t in &self.trees {
            out.extend(t.level(n)?.iter().copied());
        }
        Ok(out)
    }

    /// `Y ∈ 𝒲` for a sequence with prefix `y`; needs `|y| ≥ depth`.
    pub fn contains(&self, y: &BitStr) -> Result<bool> {
        let d = self.depth();
        if y.len() < d {
            return Err(Error::Inconclusive(format!(
                "prefix of length {} is shorter than the tree depth {d}",
                y.len()
            )));
        }
        let y = y.restrict(d);
        Ok(self.trees.iter().any(|t| t.contains(&y)))
    }

    /// `[x] ⊆ 𝒲`, decided at the represented depth.
    pub fn covers_cylinder(&self, x: &BitStr) -> Result<bool> {
        let d = self.depth();
        if x.len() >= d {
            return self.contains(x);
        }
        let top = self.level_union(d)?;
        let hits = top.range(*x..).take_while(|s| x.is_prefix_of(s)).count();
        Ok(hits as u128 == 1u128 << (d - x.len()))
    }

    /// For each `i` the least level `n ≥ 1` with `2^{-n}|⋃_{j≤i} T_j^n| ≤ q`.
    pub fn measure_leq(&self, q: &Rat) -> Result<MeasureVerdict> {
        if !self.is_frozen() {
            return Err(Error::NotFrozen);
        }
        let top = self.depth().max(1);
        let mut unions: Vec<BTreeSet<BitStr>> = vec![BTreeSet::new(); top + 1];
        let mut out = Vec::with_capacity(self.trees.len());
        for (i, t) in self.trees.iter().enumerate() {
            for (n, u) in unions.iter_mut().enumerate().skip(1) {
                u.extend(t.level(n)?.iter().copied());
            }
            let w = (1..=top).find(|&n| Rat::dyadic(unions[n].len() as u64, n) <= *q);
            match w {
                Some(n) => out.push(n),
                None => return Ok(MeasureVerdict::Fails { index: i }),
            }
        }
        Ok(MeasureVerdict::Holds(out))
    }
}

pub fn sigma2_measure_leq(w: &Sigma2Code, q: &Rat) -> Result<MeasureVerdict> {
    w.measure_leq(q)
}

/// A Σ⁰₂ test with a certified witness level for every `(row, index)` pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTest")]
pub struct Sigma2Test {
    rows: Vec<Sigma2Code>,
    witnesses: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawTest {
    rows: Vec<Sigma2Code>,
    witnesses: Vec<Vec<usize>>,
}

impl TryFrom<RawTest> for Sigma2Test {
    type Error = Error;
    fn try_from(raw: RawTest) -> Result<Self> {
        Sigma2Test::with_witnesses(raw.rows, raw.witnesses)
    }
}

impl Sigma2Test {
    /// Computes least witnesses for row `n` against `2^{-n}`. A row with no
    /// trees receives a single empty tree.
    pub fn certify(rows: Vec<Sigma2Code>) -> Result<Self> {
        let mut fixed = Vec::with_capacity(rows.len());
        let mut witnesses = Vec::with_capacity(rows.len());
        for (n, row) in rows.into_iter().enumerate() {
            let row = if row.trees.is_empty() {
                Sigma2Code::new(vec![TreeCode::empty(0)])?
            } else {
                row
            };
            match row.measure_leq(&Rat::pow2_neg(n))? {
                MeasureVerdict::Holds(w) => witnesses.push(w),
                MeasureVerdict::Fails { index } => {
                    return Err(Error::invariant(
                        "sigma2-test-measure",
                        format!("row {n}: no level witnesses the bound for trees 0..={index}"),
                    ))
                }
            }
            fixed.push(row);
        }
        Ok(Sigma2Test {
            rows: fixed,
            witnesses,
        })
    }

    /// Checks supplied witnesses instead of searching for them.
    pub fn with_witnesses(rows: Vec<Sigma2Code>, witnesses: Vec<Vec<usize>>) -> Result<Self> {
        if rows.len() != witnesses.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: witnesses.len(),
            });
        }
        for (n, (row, ws)) in rows.iter().zip(&witnesses).enumerate() {
            if row.trees.len() != ws.len() {
                return Err(Error::LengthMismatch {
                    left: row.trees.len(),
                    right: ws.len(),
                });
            }
            let bound = Rat::pow2_neg(n);
            let mut acc: std::collections::BTreeMap<usize, BTreeSet<BitStr>> = Default::default();
            for (i, (t, &w)) in row.trees.iter().zip(ws).enumerate() {
                for (&lvl, u) in acc.iter_mut() {
                    u.extend(t.level(lvl)?.iter().copied());
                }
                if let std::collections::btree_map::Entry::Vacant(e) = acc.entry(w) {
                    let mut u = BTreeSet::new();
                    for t in &row.trees[..=i] {
                        u.extend(t.level(w)?.iter().copied());
                    }
                    e.insert(u);
                }
                let density = Rat::dyadic(acc[&w].len() as u64, w);
                if density > bound {
                    return Err(Error::invariant(
                        "sigma2-test-measure",
                        format!("row {n} index {i}: level {w} has density {density} > {bound}"),
                    ));
                }
            }
        }
        Ok(Sigma2Test { rows, witnesses })
    }

    pub fn rows(&self) -> &[Sigma2Code] {
        &self.rows
    }

    pub fn witnesses(&self) -> &[Vec<usize>] {
        &self.witnesses
    }

    /// Whether every row contains the sequence with prefix `y`.
    pub fn captures(&self, y: &BitStr) -> Result<bool> {
        for row in &self.rows {
            if !row.contains(y)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Whether `[x]` lies inside every row.
    pub fn covers_cylinder(&self, x: &BitStr) -> Result<bool> {
        for row in &self.rows {
            if !row.covers_cylinder(x)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
