//! `h`-r.e. functions, Demuth tests with weak passing, and the split of a
//! pair of `O(2^n)`-Demuth tests into one Martin-Löf test on the join.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use crate::bits::{interleave, split};
use crate::bits::BitStr;
use crate::error::{Error, Result};
use crate::opensets::{captures, Capture, MLTestCode, OpenCode, UniformSeq};
use crate::prefix::PrefixSet;
use crate::rat::Rat;

/// `g(n, s)` for `s` below the row length; later stages repeat the last value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawHre", into = "RawHre")]
pub struct HREFn {
    rows: Vec<Vec<u64>>,
    h: Vec<u64>,
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct RawHre {
    rows: Vec<Vec<u64>>,
    h: Vec<u64>,
    #[serde(default = "yes")]
    frozen: bool,
}

fn yes() -> bool {
    true
}

impl TryFrom<RawHre> for HREFn {
    type Error = Error;
    fn try_from(r: RawHre) -> Result<Self> {
        HREFn::new(r.rows, r.h, r.frozen)
    }
}

impl From<HREFn> for RawHre {
    fn from(g: HREFn) -> Self {
        RawHre {
            rows: g.rows,
            h: g.h,
            frozen: g.frozen,
        }
    }
}

fn changes(row: &[u64]) -> impl Iterator<Item = usize> + '_ {
    (1..row.len()).filter(move |&s| row[s] != row[s - 1])
}

impl HREFn {
    pub fn new(rows: Vec<Vec<u64>>, h: Vec<u64>, frozen: bool) -> Result<Self> {
        if h.len() < rows.len() {
            return Err(Error::LengthMismatch {
                left: h.len(),
                right: rows.len(),
            });
        }
        if let Some(n) = rows.iter().position(Vec::is_empty) {
            return Err(Error::input(format!("row {n} has no stages")));
        }
        let g = HREFn { rows, h, frozen };
        for n in 0..g.rows.len() {
            change_count(&g, n)?;
        }
        Ok(g)
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn h(&self) -> &[u64] {
        &self.h
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn at(&self, n: usize, s: usize) -> u64 {
        let r = &self.rows[n];
        r[s.min(r.len() - 1)]
    }

    /// Stages `s > 0` with `g(n,s) ≠ g(n,s-1)`.
    pub fn change_stages(&self, n: usize) -> Vec<usize> {
        changes(&self.rows[n]).collect()
    }

    pub fn last_change(&self, n: usize) -> Option<usize> {
        changes(&self.rows[n]).last()
    }
}

/// Number of changes in row `n`, checked against `h(n)`.
pub fn change_count(g: &HREFn, n: usize) -> Result<usize> {
    let row = g
        .rows
        .get(n)
        .ok_or_else(|| Error::input(format!("no row {n}")))?;
    let count = changes(row).count();
    if count as u64 > g.h[n] {
        return Err(Error::invariant(
            "hre-change-bound",
            format!("row {n} changes {count} times, h({n}) = {}", g.h[n]),
        ));
    }
    Ok(count)
}

pub fn limit_index(g: &HREFn, n: usize) -> Result<u64> {
    if !g.frozen {
        return Err(Error::NotFrozen);
    }
    g.rows
        .get(n)
        .and_then(|r| r.last().copied())
        .ok_or_else(|| Error::input(format!("no row {n}")))
}

/// An `h`-Demuth test: row `n` of `g` names codes in `registry`, each with
/// measure at most `2^{-n}` at every stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDemuth", into = "RawDemuth")]
pub struct DemuthTestCode {
    g: HREFn,
    registry: BTreeMap<u64, OpenCode>,
    /// When present, `h(n) ≤ c·2^n` holds on every row.
    c: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct RawDemuth {
    #[serde(flatten)]
    g: HREFn,
    registry: BTreeMap<u64, OpenCode>,
    #[serde(default)]
    c: Option<u64>,
}

impl TryFrom<RawDemuth> for DemuthTestCode {
    type Error = Error;
    fn try_from(r: RawDemuth) -> Result<Self> {
        DemuthTestCode::new(r.g, r.registry, r.c)
    }
}

impl From<DemuthTestCode> for RawDemuth {
    fn from(t: DemuthTestCode) -> Self {
        RawDemuth {
            g: t.g,
            registry: t.registry,
            c: t.c,
        }
    }
}

impl DemuthTestCode {
    pub fn new(g: HREFn, registry: BTreeMap<u64, OpenCode>, c: Option<u64>) -> Result<Self> {
        for (n, row) in g.rows.iter().enumerate() {
            if let Some(c) = c {
                let cap = (c as u128) << n.min(64);
                if g.h[n] as u128 > cap {
                    return Err(Error::invariant(
                        "demuth-order-bound",
                        format!("h({n}) = {} exceeds c·2^{n} = {cap}", g.h[n]),
                    ));
                }
            }
            let bound = Rat::pow2_neg(n);
            for &e in row {
                let code = registry
                    .get(&e)
                    .ok_or_else(|| Error::invariant("demuth-index", format!("row {n} uses unregistered index {e}")))?;
                if let Some((s, m)) = code.stage_measures().into_iter().enumerate().find(|(_, m)| *m > bound) {
                    return Err(Error::invariant(
                        "demuth-measure-bound",
                        format!("index {e} in row {n} has measure {m} > {bound} at stage {s}"),
                    ));
                }
            }
        }
        Ok(DemuthTestCode { g, registry, c })
    }

    pub fn g(&self) -> &HREFn {
        &self.g
    }

    pub fn registry(&self) -> &BTreeMap<u64, OpenCode> {
        &self.registry
    }

    pub fn c(&self) -> Option<u64> {
        self.c
    }

    pub fn rows(&self) -> usize {
        self.g.rows.len()
    }

    /// `𝒰_{n,s}`, the code named by `g(n, s)`.
    pub fn code(&self, n: usize, s: usize) -> &OpenCode {
        &self.registry[&self.g.at(n, s)]
    }

    /// The limit components `𝒰_n` as a uniform sequence.
    pub fn limit_seq(&self) -> Result<UniformSeq> {
        (0..self.rows())
            .map(|n| Ok(self.registry[&limit_index(&self.g, n)?].clone()))
            .collect::<Result<Vec<_>>>()
            .map(UniformSeq::new)
    }

    /// The least `c` with `h(n) ≤ c·2^n` on every row, at least 1.
    pub fn order_constant(&self) -> u64 {
        self.c.unwrap_or_else(|| {
            (0..self.rows())
                .map(|n| {
                    let d = 1u64 << n.min(63);
                    self.g.h[n].div_ceil(d)
                })
                .max()
                .unwrap_or(1)
                .max(1)
        })
    }
}

/// Escapes at the first row whose limit component misses `x`.
pub fn weakly_passes(x: &BitStr, t: &DemuthTestCode) -> Result<Capture> {
    if !t.g.frozen {
        return Err(Error::NotFrozen);
    }
    captures(&t.limit_seq()?, x)
}

/// Gives every row at least one change: a row with none gets a fresh index
/// for the empty set at stage 0, its old value moving to stage 1. `h` and
/// `c` grow by one only when some dummy was added.
pub fn normalize_changes(t: &DemuthTestCode) -> DemuthTestCode {
    let dummy = t.registry.keys().next_back().map_or(0, |k| k + 1);
    let mut rows = t.g.rows.clone();
    let mut h = t.g.h.clone();
    let mut added = false;
    for (n, row) in rows.iter_mut().enumerate() {
        if changes(row).next().is_none() {
            row.insert(0, dummy);
            h[n] += 1;
            added = true;
        }
    }
    if !added {
        return t.clone();
    }
    let mut registry = t.registry.clone();
    registry.insert(dummy, OpenCode::empty());
    let g = HREFn::new(rows, h, t.g.frozen).expect("one extra change per row");
    DemuthTestCode::new(g, registry, t.c.map(|c| c + 1)).expect("empty set meets every bound")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// `O_i` unions over the change stages of `g₀`.
    Last0,
    /// `O_i` unions over the change stages of `g₁`.
    Last1,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BalancedTest {
    pub role: Role,
    pub c: u64,
    pub k: usize,
    /// `O_i` for every row both tests represent.
    pub o: Vec<OpenCode>,
    /// Number of sets in the union behind `O_i`.
    pub components: Vec<usize>,
    /// `V_n = ⋃_{i>n+k} O_i`.
    pub test: MLTestCode,
}

/// The test built from the change stages of `g₀`.
pub fn balanced_split_test(t0: &DemuthTestCode, t1: &DemuthTestCode) -> Result<MLTestCode> {
    Ok(balanced_split(t0, t1, Role::Last0)?.test)
}

/// Both tests normalized first; `c` is the larger order constant after
/// normalization and `k` is least with `2^k > c`.
pub fn balanced_split(t0: &DemuthTestCode, t1: &DemuthTestCode, role: Role) -> Result<BalancedTest> {
    let t0 = normalize_changes(t0);
    let t1 = normalize_changes(t1);
    let c = t0.order_constant().max(t1.order_constant());
    let k = (0..64).find(|&k| 1u128 << k > c as u128).expect("c fits in 64 bits");
    let rows = t0.rows().min(t1.rows());
    let driver = match role {
        Role::Last0 => &t0,
        Role::Last1 => &t1,
    };
    let stages = (0..rows)
        .map(|i| {
            let codes = [&t0, &t1]
                .iter()
                .flat_map(|t| t.g.rows[i].iter().map(|e| t.registry[e].num_stages()))
                .max()
                .unwrap_or(1);
            t0.g.rows[i].len().max(t1.g.rows[i].len()).max(codes)
        })
        .max()
        .unwrap_or(1);

    let mut o = Vec::with_capacity(rows);
    let mut components = Vec::with_capacity(rows);
    for i in 0..rows {
        let change = driver.g.change_stages(i);
        components.push(change.len());
        let joins = change
            .iter()
            .map(|&s| OpenCode::oplus(t0.code(i, s), t1.code(i, s)))
            .collect::<Result<Vec<_>>>()?;
        let code_stages = (0..stages)
            .map(|t| {
                let mut acc = PrefixSet::new();
                for (j, &s) in change.iter().enumerate() {
                    if s <= t {
                        acc.extend_from(&joins[j].union_to(t));
                    }
                }
                acc
            })
            .collect();
        o.push(OpenCode::new(code_stages, true, true)?);
    }
    for (i, n) in components.iter().enumerate() {
        let cap = (c as u128) << i.min(64);
        if *n as u128 > cap {
            return Err(Error::invariant(
                "balanced-components",
                format!("O_{i} is a union of {n} sets, more than c·2^{i} = {cap}"),
            ));
        }
    }
    let v: Vec<OpenCode> = (0..rows)
        .map(|n| {
            let st = (0..stages)
                .map(|t| {
                    let mut acc = PrefixSet::new();
                    for oi in o.iter().skip(n + k + 1) {
                        acc.extend_from(&oi.union_to(t));
                    }
                    acc
                })
                .collect();
            OpenCode::new(st, true, true)
        })
        .collect::<Result<_>>()?;
    for (n, row) in v.iter().enumerate() {
        let bound = Rat::pow2_neg(n);
        for (s, m) in row.stage_measures().into_iter().enumerate() {
            if m > bound {
                return Err(Error::invariant(
                    "balanced-measure",
                    format!("V_{n} has measure {m} > {bound} at stage {s}"),
                ));
            }
        }
    }
    Ok(BalancedTest {
        role,
        c,
        k,
        o,
        components,
        test: MLTestCode::new(UniformSeq::new(v))?,
    })
}

/// Rows `n` with `n + k + 1` below the represented row count, where `V_n`
/// is not empty for want of rows.
pub fn checkable_rows(b: &BalancedTest) -> usize {
    b.o.len().saturating_sub(b.k + 1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitReport {
    /// The role whose test contains `x₀ ⊕ x₁` on every checkable row.
    pub certified: Option<Role>,
    /// Per role, the checkable rows `V_n` containing the join.
    pub captured_rows: Vec<(Role, Vec<usize>)>,
    /// Rows `i` where the driver's last change is not before the other's.
    pub last_change_rows: Vec<(Role, Vec<usize>)>,
}

/// Builds both roles and reports which one captures the join of `x0` and
/// `x1` on all checkable rows.
pub fn certify_split(t0: &DemuthTestCode, t1: &DemuthTestCode, x0: &BitStr, x1: &BitStr) -> Result<SplitReport> {
    let x = interleave(x0, x1)?;
    let n0 = normalize_changes(t0);
    let n1 = normalize_changes(t1);
    let mut certified = None;
    let mut captured_rows = Vec::new();
    let mut last_change_rows = Vec::new();
    for role in [Role::Last0, Role::Last1] {
        let b = balanced_split(t0, t1, role)?;
        let rows = checkable_rows(&b);
        let hit: Vec<usize> = (0..rows)
            .filter(|&n| b.test.rows()[n].limit().meets(&x))
            .collect();
        if certified.is_none() && rows > 0 && hit.len() == rows {
            certified = Some(role);
        }
        captured_rows.push((role, hit));
        let (a, o) = match role {
            Role::Last0 => (&n0, &n1),
            Role::Last1 => (&n1, &n0),
        };
        let last: Vec<usize> = (0..n0.rows().min(n1.rows()))
            .filter(|&i| a.g.last_change(i).unwrap_or(0) >= o.g.last_change(i).unwrap_or(0))
            .collect();
        last_change_rows.push((role, last));
    }
    Ok(SplitReport {
        certified,
        captured_rows,
        last_change_rows,
    })
}
