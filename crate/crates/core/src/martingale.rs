//! Exact supermartingales over `2^{≤d}`, a registry of step-budgeted
//! partial functionals, and the construction of a sequence no registered
//! total supermartingale succeeds on.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitStr;
use crate::error::{Error, Result};
use crate::opensets::{MLTestCode, SchnorrTestCode};
use crate::prefix::PrefixSet;
use crate::rat::Rat;

/// Position of `s` in length-then-lexicographic order.
pub fn node_index(s: &BitStr) -> usize {
    (1usize << s.len()) - 1 + s.to_index() as usize
}

pub fn node_count(depth: usize) -> usize {
    (1usize << (depth + 1)) - 1
}

/// Inverse of [`node_index`].
pub fn node_at(i: usize) -> BitStr {
    let len = (usize::BITS - 1 - (i + 1).leading_zeros()) as usize;
    BitStr::from_index((i + 1 - (1 << len)) as u128, len).expect("short")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Supermartingale,
    Martingale,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Fairness {
    Martingale,
    Supermartingale,
    /// The first node, in length-then-lexicographic order, where
    /// `S(σ0) + S(σ1) > 2S(σ)`.
    Violation { node: BitStr },
}

impl Fairness {
    pub fn is_fair(&self) -> bool {
        !matches!(self, Fairness::Violation { .. })
    }
}

fn fairness(depth: usize, values: &[Rat]) -> Fairness {
    let two = Rat::integer(2);
    let mut equal = true;
    for i in 0..node_count(depth.saturating_sub(1)).min(values.len()) {
        if depth == 0 {
            break;
        }
        let kids = &values[2 * i + 1] + &values[2 * i + 2];
        let cap = &two * &values[i];
        if kids > cap {
            return Fairness::Violation { node: node_at(i) };
        }
        equal &= kids == cap;
    }
    if equal {
        Fairness::Martingale
    } else {
        Fairness::Supermartingale
    }
}

/// `is_supermartingale` over a raw value table.
pub fn check_fairness(depth: usize, values: &[Rat]) -> Fairness {
    fairness(depth, values)
}

/// A fair value table on every string of length at most `depth`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMart", into = "RawMart")]
pub struct Mart {
    depth: usize,
    values: Vec<Rat>,
    kind: Kind,
}

#[derive(Serialize, Deserialize)]
struct RawMart {
    depth: usize,
    #[serde(default)]
    kind: Option<Kind>,
    values: BTreeMap<BitStr, Rat>,
}

impl TryFrom<RawMart> for Mart {
    type Error = Error;
    fn try_from(raw: RawMart) -> Result<Self> {
        if raw.depth > 24 {
            return Err(Error::input(format!("depth {} is too large", raw.depth)));
        }
        let mut values = vec![None; node_count(raw.depth)];
        for (s, v) in raw.values {
            if s.len() > raw.depth {
                return Err(Error::input(format!("node {s} is deeper than {}", raw.depth)));
            }
            values[node_index(&s)] = Some(v);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::input(format!("no value at node {}", node_at(i)))))
            .collect::<Result<Vec<_>>>()?;
        let m = Mart::new(raw.depth, values)?;
        if raw.kind == Some(Kind::Martingale) && m.kind != Kind::Martingale {
            return Err(Error::invariant("martingale-equality", "declared a martingale but some node is strict"));
        }
        Ok(m)
    }
}

impl From<Mart> for RawMart {
    fn from(m: Mart) -> Self {
        RawMart {
            depth: m.depth,
            kind: Some(m.kind),
            values: m.values.into_iter().enumerate().map(|(i, v)| (node_at(i), v)).collect(),
        }
    }
}

impl Mart {
    /// Takes values in length-then-lexicographic order; rejects unfair tables.
    pub fn new(depth: usize, values: Vec<Rat>) -> Result<Self> {
        if values.len() != node_count(depth) {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: node_count(depth),
            });
        }
        let kind = match fairness(depth, &values) {
            Fairness::Martingale => Kind::Martingale,
            Fairness::Supermartingale => Kind::Supermartingale,
            Fairness::Violation { node } => {
                return Err(Error::invariant(
                    "supermartingale-fairness",
                    format!("S({node}0) + S({node}1) > 2S({node})"),
                ))
            }
        };
        Ok(Mart { depth, values, kind })
    }

    pub fn from_fn(depth: usize, f: impl Fn(&BitStr) -> Rat) -> Result<Self> {
        Mart::new(depth, (0..node_count(depth)).map(|i| f(&node_at(i))).collect())
    }

    pub fn constant(depth: usize, v: Rat) -> Self {
        Mart::new(depth, vec![v; node_count(depth)]).expect("constant tables are fair")
    }

    /// `2^n` along `bit^n`, 0 off it.
    pub fn doubling(depth: usize, bit: bool) -> Self {
        Mart::from_fn(depth, |s| {
            if s.iter().all(|b| b == bit) {
                Rat::pow2(s.len())
            } else {
                Rat::zero()
            }
        })
        .expect("doubling is fair")
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    pub fn get(&self, s: &BitStr) -> Option<&Rat> {
        if s.len() > self.depth {
            return None;
        }
        self.values.get(node_index(s))
    }

    /// Panicking lookup for strings known to be in range.
    pub fn at(&self, s: &BitStr) -> &Rat {
        &self.values[node_index(s)]
    }

    pub fn root(&self) -> &Rat {
        &self.values[0]
    }

    pub fn fairness(&self) -> Fairness {
        fairness(self.depth, &self.values)
    }
}

pub fn is_supermartingale(m: &Mart) -> Fairness {
    m.fairness()
}

/// `m(σa) = s(σa) + r(σa)`, where the side account `r` starts at 0 and each
/// child inherits its parent's account plus half the parent's deficit
/// `2s(σ) − s(σ0) − s(σ1)`.
pub fn martingale_from_supermartingale(s: &Mart) -> Mart {
    let mut values = s.values.clone();
    let mut account = vec![Rat::zero(); values.len()];
    let half = Rat::new(1, 2).expect("nonzero");
    for i in 0..node_count(s.depth.saturating_sub(1)) {
        if s.depth == 0 {
            break;
        }
        let kids = &s.values[2 * i + 1] + &s.values[2 * i + 2];
        let deficit = (&Rat::integer(2) * &s.values[i])
            .checked_sub(&kids)
            .expect("input is a supermartingale");
        let pass = &account[i] + &(&half * &deficit);
        for c in [2 * i + 1, 2 * i + 2] {
            account[c] = pass.clone();
            values[c] = &s.values[c] + &pass;
        }
    }
    let m = Mart::new(s.depth, values).expect("side account keeps fairness");
    debug_assert_eq!(m.kind, Kind::Martingale);
    m
}

/// Least `n ≤ |x|` with `m(x↾n) > k`.
pub fn success_check(m: &Mart, x: &BitStr, k: &Rat) -> Result<Option<usize>> {
    if x.len() > m.depth {
        return Err(Error::DepthDeficit {
            needed: x.len(),
            got: m.depth,
        });
    }
    Ok((0..=x.len()).find(|&n| m.at(&x.restrict(n)) > k))
}

/// Row `k ≤ depth` holds the minimal `σ` with `m(σ) ≥ 2^k m(ε)`; stage `ℓ`
/// of a row has the strings of length at most `ℓ`.
pub fn test_from_martingale(m: &Mart) -> Result<MLTestCode> {
    let root = m.root().clone();
    if root.is_zero() {
        return Err(Error::input("m(ε) must be positive"));
    }
    let rows = (0..=m.depth)
        .map(|k| {
            let threshold = &Rat::pow2(k) * &root;
            let mut found: Vec<PrefixSet> = Vec::with_capacity(m.depth + 1);
            let mut acc = PrefixSet::new();
            // covered[i]: some proper prefix of node i already crossed.
            let mut covered = vec![false; m.values.len()];
            for len in 0..=m.depth {
                let lo = (1usize << len) - 1;
                for i in lo..lo + (1 << len) {
                    if i > 0 && covered[(i - 1) / 2] {
                        covered[i] = true;
                    } else if m.values[i] >= threshold {
                        acc.insert(node_at(i));
                        covered[i] = true;
                    }
                }
                found.push(acc.clone());
            }
            crate::opensets::OpenCode::new(found, true, true).expect("stages grow")
        })
        .collect();
    MLTestCode::new(crate::opensets::UniformSeq::new(rows))
}

/// `M = Σ_n M_n` with `M_n(σ) = 2^{|σ|} μ(V_n ∩ [σ])`, so `M_n(ε) = μ(V_n)`
/// and `M_n = 1` inside `V_n`. All values are dyadic.
pub fn martingale_from_schnorr_test(t: &SchnorrTestCode) -> Result<Mart> {
    let rows: Vec<PrefixSet> = t.test().rows().iter().map(|r| r.limit()).collect();
    let depth = rows.iter().map(PrefixSet::max_len).max().unwrap_or(0);
    if depth > 20 {
        return Err(Error::input(format!("test strings of length {depth} are too long")));
    }
    let mut values = vec![Rat::zero(); node_count(depth)];
    let lo = (1usize << depth) - 1;
    for (leaf, v) in values.iter_mut().enumerate().skip(lo) {
        let x = node_at(leaf);
        *v = Rat::integer(rows.iter().filter(|r| r.covers(&x)).count() as u64);
    }
    let half = Rat::new(1, 2).expect("nonzero");
    for i in (0..lo).rev() {
        values[i] = &half * &(&values[2 * i + 1] + &values[2 * i + 2]);
    }
    Mart::new(depth, values)
}

/// `f(n)`: the least stage at which row `n` has a prefix of `y`. Rows past
/// the last repeat it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dominator {
    pub table: Vec<usize>,
}

impl Dominator {
    pub fn at(&self, n: usize) -> usize {
        self.table[n.min(self.table.len() - 1)]
    }
}

pub fn dominator_from_test(t: &MLTestCode, y: &BitStr) -> Result<Dominator> {
    if t.rows().is_empty() {
        return Err(Error::insufficient("the test has no rows"));
    }
    let table = t
        .rows()
        .iter()
        .enumerate()
        .map(|(n, row)| {
            (0..row.num_stages())
                .find(|&i| row.union_to(i).iter().any(|s| s.is_prefix_of(y)))
                .ok_or_else(|| Error::insufficient(format!("row {n} never meets a prefix of y")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dominator { table })
}

/// Step cost `base + per_len·|σ|` of a base functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cost {
    pub base: u64,
    #[serde(default)]
    pub per_len: u64,
}

impl Default for Cost {
    fn default() -> Self {
        Cost { base: 1, per_len: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    Constant { value: Rat },
    /// `2^n` along `bit^n`, 0 elsewhere.
    Doubling { bit: bool },
    /// Bets `fraction` of the capital on `bit` at every step, from 1.
    Bet { bit: bool, fraction: Rat },
    /// Diverges off the table.
    Table { values: BTreeMap<BitStr, Rat> },
    /// Value 1 below length `after`, divergent from there on.
    Diverge { after: usize },
    Padded { of: usize },
    Psi { of: usize },
    Gamma { of: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    #[serde(flatten)]
    pub functional: Functional,
    #[serde(default)]
    pub cost: Cost,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Eval {
    pub value: Rat,
    pub steps: u64,
}

/// The functionals `Φ_0, Φ_1, …`; wrappers and padded copies refer only to
/// earlier indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRegistry", into = "RawRegistry")]
pub struct FunctionalRegistry {
    entries: Vec<RegistryEntry>,
}

#[derive(Serialize, Deserialize)]
struct RawRegistry {
    entries: Vec<RegistryEntry>,
}

impl TryFrom<RawRegistry> for FunctionalRegistry {
    type Error = Error;
    fn try_from(raw: RawRegistry) -> Result<Self> {
        let mut r = FunctionalRegistry::default();
        for e in raw.entries {
            r.push(e)?;
        }
        Ok(r)
    }
}

impl From<FunctionalRegistry> for RawRegistry {
    fn from(r: FunctionalRegistry) -> Self {
        RawRegistry { entries: r.entries }
    }
}

impl FunctionalRegistry {
    pub fn new() -> Self {
        FunctionalRegistry::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn push(&mut self, entry: RegistryEntry) -> Result<usize> {
        let e = self.entries.len();
        match &entry.functional {
            Functional::Padded { of } | Functional::Psi { of } | Functional::Gamma { of } if *of >= e => {
                return Err(Error::input(format!("entry {e} refers to later index {of}")));
            }
            Functional::Bet { fraction, .. } if *fraction > Rat::one() => {
                return Err(Error::input(format!("bet fraction {fraction} exceeds 1")));
            }
            _ => {}
        }
        self.entries.push(entry);
        Ok(e)
    }

    pub fn push_base(&mut self, functional: Functional) -> usize {
        self.push(RegistryEntry {
            functional,
            cost: Cost::default(),
        })
        .expect("base functionals have no references")
    }

    /// A copy of `e` at a new, larger index; same values, same step counts.
    pub fn pad(&mut self, e: usize) -> Result<usize> {
        self.push(RegistryEntry {
            functional: Functional::Padded { of: e },
            cost: Cost::default(),
        })
    }

    /// Evaluation within `budget` steps; `None` means not halted yet.
    pub fn eval(&self, e: usize, s: &BitStr, budget: u64) -> Option<Eval> {
        self.eval_full(e, s).filter(|v| v.steps <= budget)
    }

    /// Unbudgeted evaluation; `None` means the computation never halts.
    /// Indices past the registry diverge everywhere.
    pub fn eval_full(&self, e: usize, s: &BitStr) -> Option<Eval> {
        let entry = self.entries.get(e)?;
        let steps = entry.cost.base + entry.cost.per_len * s.len() as u64;
        let value = match &entry.functional {
            Functional::Constant { value } => value.clone(),
            Functional::Doubling { bit } => {
                if s.iter().all(|b| b == *bit) {
                    Rat::pow2(s.len())
                } else {
                    Rat::zero()
                }
            }
            Functional::Bet { bit, fraction } => {
                let up = &Rat::one() + fraction;
                let down = Rat::one().checked_sub(fraction).expect("fraction ≤ 1");
                s.iter().fold(Rat::one(), |acc, b| &acc * if b == *bit { &up } else { &down })
            }
            Functional::Table { values } => values.get(s)?.clone(),
            Functional::Diverge { after } => {
                if s.len() >= *after {
                    return None;
                }
                Rat::one()
            }
            Functional::Padded { of } => return self.eval_full(*of, s),
            Functional::Psi { of } => return self.psi_full(*of, s),
            Functional::Gamma { of } => return self.gamma_full(*of, s),
        };
        Some(Eval { value, steps })
    }

    /// `Ψ` over `Φ_e`: defined at `σ` when every proper prefix `τ` has
    /// `Φ_e(τ), Φ_e(τ0), Φ_e(τ1)` defined and fair.
    fn psi_full(&self, e: usize, s: &BitStr) -> Option<Eval> {
        let root = self.eval_full(e, &BitStr::empty())?;
        let mut cur = root;
        let mut steps = cur.steps;
        for n in 0..s.len() {
            let t = s.restrict(n);
            let a = self.eval_full(e, &t.child(false))?;
            let b = self.eval_full(e, &t.child(true))?;
            if &a.value + &b.value > &Rat::integer(2) * &cur.value {
                return None;
            }
            steps += a.steps + b.steps;
            cur = if s.get(n) == Some(true) { b } else { a };
        }
        Some(Eval { value: cur.value, steps })
    }

    /// `Γ` over `Φ_e`, normalized at length `e`.
    fn gamma_full(&self, e: usize, s: &BitStr) -> Option<Eval> {
        if s.len() <= e {
            return Some(Eval { value: Rat::one(), steps: 1 });
        }
        let base = self.psi_full(e, &s.restrict(e))?;
        if base.value.is_zero() {
            return Some(Eval { value: Rat::zero(), steps: base.steps + 1 });
        }
        let top = self.psi_full(e, s)?;
        Some(Eval {
            value: &top.value / &base.value,
            steps: top.steps + 1,
        })
    }

    /// Table of `Φ_e` on `2^{≤depth}`, in node order.
    pub fn table(&self, e: usize, depth: usize) -> Vec<Option<Eval>> {
        match self.entries.get(e).map(|x| &x.functional) {
            None => vec![None; node_count(depth)],
            Some(Functional::Padded { of }) => self.table(*of, depth),
            Some(Functional::Psi { of }) => psi_table(&self.table(*of, depth), depth),
            Some(Functional::Gamma { of }) => gamma_table(&psi_table(&self.table(*of, depth), depth), *of, depth),
            Some(_) => (0..node_count(depth)).map(|i| self.eval_full(e, &node_at(i))).collect(),
        }
    }

    /// Appends `Ψ` over `Φ_e`.
    pub fn psi_wrap(&mut self, e: usize) -> Result<usize> {
        self.push(RegistryEntry {
            functional: Functional::Psi { of: e },
            cost: Cost::default(),
        })
    }

    /// Appends `Γ` over `Φ_e`.
    pub fn gamma_wrap(&mut self, e: usize) -> Result<usize> {
        self.push(RegistryEntry {
            functional: Functional::Gamma { of: e },
            cost: Cost::default(),
        })
    }
}

pub fn psi_wrap(e: usize, r: &mut FunctionalRegistry) -> Result<usize> {
    r.psi_wrap(e)
}

pub fn gamma_wrap(e: usize, r: &mut FunctionalRegistry) -> Result<usize> {
    r.gamma_wrap(e)
}

fn psi_table(phi: &[Option<Eval>], depth: usize) -> Vec<Option<Eval>> {
    let mut out: Vec<Option<Eval>> = vec![None; phi.len()];
    out[0] = phi[0].clone();
    for i in 0..node_count(depth.saturating_sub(1)) {
        if depth == 0 {
            break;
        }
        let (Some(p), Some(here), Some(a), Some(b)) = (&out[i], &phi[i], &phi[2 * i + 1], &phi[2 * i + 2]) else {
            continue;
        };
        if &a.value + &b.value > &Rat::integer(2) * &here.value {
            continue;
        }
        let steps = p.steps + a.steps + b.steps;
        out[2 * i + 1] = Some(Eval { value: a.value.clone(), steps });
        out[2 * i + 2] = Some(Eval { value: b.value.clone(), steps });
    }
    out
}

fn gamma_table(psi: &[Option<Eval>], e: usize, depth: usize) -> Vec<Option<Eval>> {
    (0..node_count(depth))
        .map(|i| {
            let s = node_at(i);
            if s.len() <= e {
                return Some(Eval { value: Rat::one(), steps: 1 });
            }
            let base = psi[node_index(&s.restrict(e))].as_ref()?;
            if base.value.is_zero() {
                return Some(Eval { value: Rat::zero(), steps: base.steps + 1 });
            }
            let top = psi[i].as_ref()?;
            Some(Eval {
                value: &top.value / &base.value,
                steps: top.steps + 1,
            })
        })
        .collect()
}

/// Per-index data behind one assembly.
#[derive(Clone, Debug)]
struct Part {
    phi: Vec<Option<Eval>>,
    gamma: Vec<Option<Eval>>,
    /// Largest `n ≤ depth` with the gate open at every level up to `n`.
    open_through: usize,
}

fn gate_part(r: &FunctionalRegistry, f: &Dominator, e: usize, depth: usize) -> Part {
    let phi = r.table(e, depth);
    let gamma = gamma_table(&psi_table(&phi, depth), e, depth);
    let mut worst: Option<u64> = Some(0);
    let mut open_through = depth;
    for n in 0..=depth {
        let lo = (1usize << n) - 1;
        for g in &gamma[lo..lo + (1 << n)] {
            worst = match (worst, g) {
                (Some(w), Some(g)) => Some(w.max(g.steps)),
                _ => None,
            };
        }
        if n <= e {
            continue;
        }
        let passes = worst.is_some_and(|w| w <= f.at(n) as u64 + e as u64);
        if !passes {
            open_through = n - 1;
            break;
        }
    }
    Part {
        phi,
        gamma,
        open_through,
    }
}

/// `Σ_{e ≥ max(cutoff+1, n)} 2^{-e}`, the indices past the cutoff whose
/// `S_e` is still 1 at length `n`.
fn tail(cutoff: usize, n: usize) -> Rat {
    geometric_from((cutoff + 1).max(n))
}

/// `Σ_{e ≥ from} 2^{-e} = 2^{1-from}`.
fn geometric_from(from: usize) -> Rat {
    if from == 0 {
        Rat::integer(2)
    } else {
        Rat::pow2_neg(from - 1)
    }
}

fn assemble(f: &Dominator, r: &FunctionalRegistry, depth: usize, cutoff: usize) -> Result<(Mart, Vec<Part>)> {
    if depth > 16 {
        return Err(Error::input(format!("depth {depth} is too large to assemble")));
    }
    let parts: Vec<Part> = (0..=cutoff).into_par_iter().map(|e| gate_part(r, f, e, depth)).collect();
    let values: Vec<Rat> = (0..node_count(depth))
        .into_par_iter()
        .map(|i| {
            let n = node_at(i).len();
            let mut sum = tail(cutoff, n);
            for (e, p) in parts.iter().enumerate() {
                let s_e = if n <= e {
                    Rat::one()
                } else if n <= p.open_through {
                    p.gamma[i].as_ref().expect("open gate means halted").value.clone()
                } else {
                    continue;
                };
                sum = &sum + &(&Rat::pow2_neg(e) * &s_e);
            }
            sum
        })
        .collect();
    Ok((Mart::new(depth, values)?, parts))
}

/// `S(σ) = Σ_{e ≤ cutoff} 2^{-e} S_e(σ)` plus the closed-form tail. `S_e`
/// is `Γ_e` while every level up to `|σ|` has all of `Γ_e` on `2^{≤level}`
/// halting within `f(level) + e` steps, and 0 once some level fails.
pub fn assemble_universal(f: &Dominator, r: &FunctionalRegistry, depth: usize, cutoff: usize) -> Result<Mart> {
    assemble(f, r, depth, cutoff).map(|x| x.0)
}

/// Always takes 0 when that does not increase the value.
pub fn leftmost_nonascending(s: &Mart) -> BitStr {
    let mut cur = BitStr::empty();
    for _ in 0..s.depth {
        let zero = cur.child(false);
        cur = if s.at(&zero) <= s.at(&cur) { zero } else { cur.child(true) };
    }
    cur
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub e: usize,
    /// Least integer above `max{P(σ) : |σ| ≤ e}`.
    #[serde(serialize_with = "as_decimal")]
    pub c: BigUint,
    /// `c·2^e`.
    #[serde(serialize_with = "as_decimal")]
    pub d_prime: BigUint,
}

fn as_decimal<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P#{} ≤ d′·S, d′ = {}", self.e, self.d_prime)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Pipeline {
    pub path: BitStr,
    pub dominator: Dominator,
    pub s: Mart,
    pub certificates: Vec<Certificate>,
}

/// Certifies index `e` when `Φ_e` is a total supermartingale on `2^{≤d}`
/// and its gate never closes, then checks `P ≤ d′·S` node by node and
/// `P ≤ d′·S(ε)` along `path`.
fn certify(e: usize, part: &Part, s: &Mart, path: &BitStr) -> Result<Option<Certificate>> {
    let depth = s.depth();
    if part.open_through < depth {
        return Ok(None);
    }
    let Some(p) = part.phi.iter().cloned().map(|v| v.map(|v| v.value)).collect::<Option<Vec<Rat>>>() else {
        return Ok(None);
    };
    if !fairness(depth, &p).is_fair() {
        return Ok(None);
    }
    let top = node_count(e.min(depth));
    let max = p[..top].iter().max().expect("root exists");
    let c = max.next_integer_above();
    let d_prime = &c << e;
    let dp = Rat::from_big(d_prime.clone(), BigUint::one())?;
    for (i, pv) in p.iter().enumerate() {
        if *pv > &dp * &s.values()[i] {
            return Err(Error::invariant(
                "domination",
                format!("P#{e}({}) = {pv} exceeds {dp}·S", node_at(i)),
            ));
        }
    }
    let bound = &dp * s.root();
    for n in 0..=path.len() {
        if p[node_index(&path.restrict(n))] > bound {
            return Err(Error::invariant("path-bound", format!("P#{e} exceeds d′·S(ε) at length {n}")));
        }
    }
    Ok(Some(Certificate { e, c, d_prime }))
}

/// Dominator from the test, assembly over every registry index, then the
/// leftmost non-ascending path with one certificate per dominated entry.
pub fn sr_to_cr_pipeline(y: &BitStr, t: &MLTestCode, r: &FunctionalRegistry, depth: usize) -> Result<Pipeline> {
    let dominator = dominator_from_test(t, y)?;
    let cutoff = r.len().saturating_sub(1);
    let (s, parts) = assemble(&dominator, r, depth, cutoff)?;
    let path = leftmost_nonascending(&s);
    let mut certificates = Vec::new();
    for (e, part) in parts.iter().enumerate().take(r.len()) {
        if let Some(c) = certify(e, part, &s, &path)? {
            certificates.push(c);
        }
    }
    Ok(Pipeline {
        path,
        dominator,
        s,
        certificates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opensets::{OpenCode, UniformSeq};

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    fn b(s: &str) -> BitStr {
        s.parse().unwrap()
    }

    #[test]
    fn node_order_round_trips() {
        for i in 0..63 {
            assert_eq!(node_index(&node_at(i)), i);
        }
        assert_eq!(node_at(0), BitStr::empty());
        assert_eq!(node_at(4), b("01"));
    }

    #[test]
    fn fairness_examples() {
        assert_eq!(Mart::constant(3, Rat::one()).fairness(), Fairness::Martingale);
        let m = Mart::new(1, vec![r("1"), r("2"), r("0")]).unwrap();
        assert_eq!(m.kind(), Kind::Martingale);
        assert_eq!(check_fairness(1, &[r("1"), r("2"), r("1")]), Fairness::Violation { node: BitStr::empty() });
        assert!(Mart::new(1, vec![r("1"), r("2"), r("1")]).is_err());
    }

    #[test]
    fn side_account_restores_equality() {
        let m = Mart::constant(2, Rat::one());
        assert_eq!(martingale_from_supermartingale(&m), m);
        let s = Mart::new(2, ["1", "1/2", "1", "1", "0", "1", "1"].iter().map(|x| r(x)).collect()).unwrap();
        let m = martingale_from_supermartingale(&s);
        assert_eq!(m.kind(), Kind::Martingale);
        assert_eq!(m.root(), s.root());
        for (a, b) in m.values().iter().zip(s.values()) {
            assert!(a >= b);
        }
    }

    #[test]
    fn success_examples() {
        let c = Mart::constant(8, Rat::one());
        assert_eq!(success_check(&c, &BitStr::zeros(8).unwrap(), &r("2")).unwrap(), None);
        let d = Mart::doubling(8, false);
        assert_eq!(success_check(&d, &BitStr::zeros(8).unwrap(), &r("100")).unwrap(), Some(7));
        assert_eq!(success_check(&d, &b("1"), &Rat::zero()).unwrap(), Some(0));
    }

    #[test]
    fn test_from_martingale_examples() {
        let t = test_from_martingale(&Mart::constant(4, Rat::one())).unwrap();
        assert!(t.rows()[1..].iter().all(|r| r.limit().is_empty()));
        let t = test_from_martingale(&Mart::doubling(5, false)).unwrap();
        for (k, row) in t.rows().iter().enumerate() {
            assert_eq!(row.limit(), PrefixSet::from_iter([BitStr::zeros(k).unwrap()]));
        }
    }

    #[test]
    fn schnorr_martingale_on_zeros() {
        let rows = (0..4)
            .map(|n| OpenCode::single(PrefixSet::from_iter([BitStr::zeros(n + 1).unwrap()])))
            .collect();
        let ml = MLTestCode::new(UniformSeq::new(rows)).unwrap();
        let t = SchnorrTestCode::from_frozen(ml).unwrap();
        let m = martingale_from_schnorr_test(&t).unwrap();
        assert_eq!(m.kind(), Kind::Martingale);
        assert_eq!(m.root(), &r("15/16"));
        assert_eq!(m.at(&BitStr::zeros(4).unwrap()), &r("4"));
        assert_eq!(m.at(&b("1")), &Rat::zero());
        let empty = SchnorrTestCode::from_frozen(MLTestCode::new(UniformSeq::new(vec![])).unwrap()).unwrap();
        assert_eq!(martingale_from_schnorr_test(&empty).unwrap(), Mart::constant(0, Rat::zero()));
    }

    #[test]
    fn dominator_examples() {
        let rows = (0..3)
            .map(|n| {
                let mut st = vec![PrefixSet::new(); n];
                st.push(PrefixSet::from_iter([BitStr::zeros(n + 1).unwrap()]));
                OpenCode::new(st, true, true).unwrap()
            })
            .collect();
        let t = MLTestCode::new(UniformSeq::new(rows)).unwrap();
        assert_eq!(dominator_from_test(&t, &b("000")).unwrap().table, vec![0, 1, 2]);
        assert!(matches!(dominator_from_test(&t, &b("1")), Err(Error::Insufficient(m)) if m.contains("row 0")));
        let ok = MLTestCode::new(UniformSeq::new(vec![OpenCode::single(PrefixSet::from_iter([b("")]))]));
        assert_eq!(dominator_from_test(&ok.unwrap(), &b("1")).unwrap().table, vec![0]);
    }

    #[test]
    fn psi_and_gamma_examples() {
        let mut reg = FunctionalRegistry::new();
        let dbl = reg.push_base(Functional::Doubling { bit: false });
        let unfair = reg.push_base(Functional::Constant { value: r("1") });
        let mut values = BTreeMap::new();
        values.insert(b(""), r("1"));
        values.insert(b("0"), r("2"));
        values.insert(b("1"), r("1"));
        let bad = reg.push_base(Functional::Table { values });
        let div = reg.push_base(Functional::Diverge { after: 1 });
        let p = reg.psi_wrap(dbl).unwrap();
        for i in 0..31 {
            let s = node_at(i);
            assert_eq!(reg.eval_full(p, &s).unwrap().value, reg.eval_full(dbl, &s).unwrap().value);
        }
        let _ = unfair;
        let pb = reg.psi_wrap(bad).unwrap();
        assert!(reg.eval_full(pb, &b("0")).is_none());
        assert!(reg.eval_full(pb, &b("")).is_some());
        let pd = reg.psi_wrap(div).unwrap();
        assert!(reg.eval_full(pd, &b("0")).is_none());
        assert!(reg.eval_full(pd, &b("01")).is_none());
        let g = reg.gamma_wrap(dbl).unwrap();
        assert_eq!(reg.eval_full(g, &b("1")).unwrap().value, Rat::zero());
        assert_eq!(reg.eval_full(g, &b("00")).unwrap().value, r("4"));
        let late = reg.push_base(Functional::Doubling { bit: false });
        let gl = reg.gamma_wrap(late).unwrap();
        assert_eq!(reg.eval_full(gl, &b("1")).unwrap().value, Rat::one());
        let mut reg2 = FunctionalRegistry::new();
        reg2.push_base(Functional::Constant { value: Rat::zero() });
        let g0 = reg2.gamma_wrap(0).unwrap();
        assert_eq!(reg2.eval_full(g0, &b("0110")).unwrap().value, Rat::zero());
        for e in 0..reg.len() {
            let t = reg.table(e, 4);
            for (i, v) in t.iter().enumerate() {
                assert_eq!(v, &reg.eval_full(e, &node_at(i)), "entry {e} node {}", node_at(i));
            }
        }
    }

    fn late_test(y: &BitStr, rows: usize, delay: usize) -> MLTestCode {
        let rows = (0..rows)
            .map(|n| {
                let mut st = vec![PrefixSet::new(); delay];
                st.push(PrefixSet::from_iter([y.restrict(n)]));
                OpenCode::new(st, true, true).unwrap()
            })
            .collect();
        MLTestCode::new(UniformSeq::new(rows)).unwrap()
    }

    #[test]
    fn pipeline_examples() {
        let y = BitStr::zeros(12).unwrap();
        let t = late_test(&y, 10, 60);
        let empty = sr_to_cr_pipeline(&y, &t, &FunctionalRegistry::new(), 8).unwrap();
        assert_eq!(empty.path, BitStr::zeros(8).unwrap());
        assert!(empty.certificates.is_empty());

        let mut reg = FunctionalRegistry::new();
        reg.push_base(Functional::Doubling { bit: false });
        let out = sr_to_cr_pipeline(&y, &t, &reg, 8).unwrap();
        assert_eq!(out.certificates.len(), 1);
        assert!(out.s.fairness().is_fair());
        assert_ne!(out.path, BitStr::zeros(8).unwrap());

        let mut slow = FunctionalRegistry::new();
        slow.push(RegistryEntry {
            functional: Functional::Doubling { bit: false },
            cost: Cost { base: 10_000, per_len: 0 },
        })
        .unwrap();
        let out = sr_to_cr_pipeline(&y, &t, &slow, 8).unwrap();
        assert_eq!(out.path, BitStr::zeros(8).unwrap());
        assert!(out.certificates.is_empty());
    }

    #[test]
    fn empty_registry_sum_is_geometric() {
        let f = Dominator { table: vec![0] };
        let s = assemble_universal(&f, &FunctionalRegistry::new(), 5, 0).unwrap();
        for i in 0..63 {
            let n = node_at(i).len();
            assert_eq!(s.values()[i], geometric_from(n));
        }
    }
}
