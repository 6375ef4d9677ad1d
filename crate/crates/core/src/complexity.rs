//! Plain complexity at finite budgets: a concrete universal machine, tables
//! of best-known program lengths, machines compiled from request sets, and
//! both directions of the link between Σ⁰₂ tests and compressibility.
//!
//! # The universal machine
//!
//! A program is `0^e 1 w`. The header selects a sub-machine:
//!
//! | `e` | sub-machine | output | steps |
//! |-----|-------------|--------|-------|
//! | 0 | identity | `w` | `|w| + 2` |
//! | 1 | zeros | `0^k`, `k` = value of `w` | `k + 3` |
//! | 2 | table | dictionary entry for `w` | entry cost `+ 3` |
//! | 3 | oracle | first `k` oracle bits, `k` = value of `w` | `k + 4` |
//!
//! Any other program diverges. So `C(σ) ≤ |σ| + 1`, and a table machine
//! `N` used as the dictionary gives `C(τ) ≤ C_N(τ) + 3`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitStr;
use crate::error::{Error, Result};
use crate::opensets::{OpenCode, UniformSeq};
use crate::prefix::PrefixSet;
use crate::rat::Rat;
use crate::sigma2::{cover, Sigma2Code, Sigma2Test, TreeCode};

/// Header length of the identity sub-machine.
pub const C0: usize = 1;
/// Header length of the table sub-machine.
pub const TABLE_HEADER: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Run {
    Halted { output: BitStr, steps: u64 },
    DivergedSoFar,
}

impl Run {
    pub fn output(&self) -> Option<&BitStr> {
        match self {
            Run::Halted { output, .. } => Some(output),
            Run::DivergedSoFar => None,
        }
    }
}

/// A plain machine simulated under a step budget.
pub trait PlainMachine: Sync {
    fn run(&self, prog: &BitStr, budget: u64) -> Run;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub output: BitStr,
    pub cost: u64,
}

/// A finite machine: one output and step cost per program.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct MachineTable {
    entries: BTreeMap<BitStr, Entry>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    entries: Vec<RawEntry>,
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    program: BitStr,
    output: BitStr,
    cost: u64,
}

impl TryFrom<RawTable> for MachineTable {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        let mut t = MachineTable::new();
        for e in raw.entries {
            t.insert(e.program, e.output, e.cost)?;
        }
        Ok(t)
    }
}

impl From<MachineTable> for RawTable {
    fn from(t: MachineTable) -> Self {
        RawTable {
            entries: t
                .entries
                .into_iter()
                .map(|(program, e)| RawEntry {
                    program,
                    output: e.output,
                    cost: e.cost,
                })
                .collect(),
        }
    }
}

impl MachineTable {
    pub fn new() -> Self {
        MachineTable::default()
    }

    /// Adds an entry; a program may be given only one output.
    pub fn insert(&mut self, program: BitStr, output: BitStr, cost: u64) -> Result<()> {
        if cost == 0 {
            return Err(Error::invariant("machine-cost", format!("program {program} has cost 0")));
        }
        if let Some(old) = self.entries.get(&program) {
            if old.output != output {
                return Err(Error::invariant(
                    "machine-functional",
                    format!("program {program} maps to both {} and {output}", old.output),
                ));
            }
            return Ok(());
        }
        self.entries.insert(program, Entry { output, cost });
        Ok(())
    }

    pub fn get(&self, program: &BitStr) -> Option<&Entry> {
        self.entries.get(program)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BitStr, &Entry)> + '_ {
        self.entries.iter()
    }

    pub fn max_program_len(&self) -> usize {
        self.entries.keys().map(BitStr::len).max().unwrap_or(0)
    }
}

impl PlainMachine for MachineTable {
    fn run(&self, prog: &BitStr, budget: u64) -> Run {
        match self.entries.get(prog) {
            Some(e) if e.cost <= budget => Run::Halted {
                output: e.output,
                steps: e.cost,
            },
            _ => Run::DivergedSoFar,
        }
    }
}

/// The universal machine described in the module docs, with its dictionary
/// and oracle supplied as data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniversalMachine {
    pub table: MachineTable,
    #[serde(default)]
    pub oracle: BitStr,
}

impl UniversalMachine {
    pub fn new(table: MachineTable, oracle: BitStr) -> Self {
        UniversalMachine { table, oracle }
    }

    /// The default dictionary: the 4-bit numeral of `k` prints `(01)^k`,
    /// and its 5-bit form prefixed by 1 prints `(110)^k`.
    pub fn bundled() -> Self {
        let mut table = MachineTable::new();
        for k in 0..16u128 {
            let prog = BitStr::from_index(k, 4).expect("4-bit numeral");
            let out = BitStr::from_bits((0..k).flat_map(|_| [false, true])).expect("short");
            table.insert(prog, out, 2 * k as u64 + 1).expect("fresh");
            let prog = BitStr::from_index(16 + k, 5).expect("5-bit numeral");
            let out = BitStr::from_bits((0..k).flat_map(|_| [true, true, false])).expect("short");
            table.insert(prog, out, 3 * k as u64 + 1).expect("fresh");
        }
        UniversalMachine::new(table, BitStr::empty())
    }

    /// The program `0^2 1 w` that runs dictionary program `w`.
    pub fn table_program(w: &BitStr) -> Result<BitStr> {
        BitStr::zeros(2)?.child(true).concat(w)
    }
}

fn numeral(w: &BitStr) -> Option<u64> {
    if w.len() > 20 {
        return None;
    }
    Some(w.to_index() as u64)
}

impl PlainMachine for UniversalMachine {
    fn run(&self, prog: &BitStr, budget: u64) -> Run {
        let Some(e) = prog.iter().position(|b| b) else {
            return Run::DivergedSoFar;
        };
        let payload = BitStr::from_bits(prog.iter().skip(e + 1)).expect("suffix");
        let header = e as u64 + 1;
        let (output, steps) = match e {
            0 => (payload, payload.len() as u64 + 1),
            1 => {
                let Some(k) = numeral(&payload) else { return Run::DivergedSoFar };
                if k > BitStr::MAX_LEN as u64 {
                    return Run::DivergedSoFar;
                }
                (BitStr::zeros(k as usize).expect("bounded"), k + 1)
            }
            2 => match self.table.get(&payload) {
                Some(entry) => (entry.output, entry.cost),
                None => return Run::DivergedSoFar,
            },
            3 => {
                let Some(k) = numeral(&payload) else { return Run::DivergedSoFar };
                if k as usize > self.oracle.len() {
                    return Run::DivergedSoFar;
                }
                (self.oracle.restrict(k as usize), k + 1)
            }
            _ => return Run::DivergedSoFar,
        };
        let steps = steps + header;
        if steps <= budget {
            Run::Halted { output, steps }
        } else {
            Run::DivergedSoFar
        }
    }
}

/// Runs a program on the bundled universal machine.
pub fn universal_run(prog: &BitStr, budget: u64) -> Run {
    UniversalMachine::bundled().run(prog, budget)
}

/// Best-known program lengths for all strings of length at most `max_len`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CTable {
    pub max_len: usize,
    pub budget: u64,
    /// Least program length found, with a shortest program (least in
    /// lexicographic order) witnessing it. Missing strings have no witness yet.
    pub values: BTreeMap<BitStr, (usize, BitStr)>,
}

impl CTable {
    pub fn value(&self, s: &BitStr) -> Option<usize> {
        self.values.get(s).map(|v| v.0)
    }

    /// `|{σ : value(σ) < k}|`.
    pub fn count_below(&self, k: usize) -> usize {
        self.values.values().filter(|v| v.0 < k).count()
    }

    /// Strings of length `i` with value below `i - slack`, ordered by value
    /// and then lexicographically.
    pub fn compressible(&self, i: usize, slack: usize) -> Vec<(usize, BitStr)> {
        let mut out: Vec<(usize, BitStr)> = self
            .values
            .iter()
            .filter(|(s, v)| s.len() == i && v.0 + slack < i)
            .map(|(s, v)| (v.0, *s))
            .collect();
        out.sort();
        out
    }
}

/// Enumerates every program of length at most `max_len + C0`.
pub fn c_table<M: PlainMachine>(machine: &M, max_len: usize, budget: u64) -> Result<CTable> {
    let top = max_len + C0;
    if top > 26 {
        return Err(Error::input(format!("program length {top} is too large to enumerate")));
    }
    let found: Vec<(BitStr, usize, BitStr)> = (0..=top)
        .into_par_iter()
        .flat_map_iter(|len| {
            (0..(1u128 << len)).filter_map(move |v| {
                let prog = BitStr::from_index(v, len).expect("fits");
                match machine.run(&prog, budget) {
                    Run::Halted { output, .. } if output.len() <= max_len => {
                        Some((output, len, prog))
                    }
                    _ => None,
                }
            })
        })
        .collect();
    let mut values: BTreeMap<BitStr, (usize, BitStr)> = BTreeMap::new();
    for (out, len, prog) in found {
        let cand = (len, prog);
        match values.get(&out) {
            Some(best) if *best <= cand => {}
            _ => {
                values.insert(out, cand);
            }
        }
    }
    Ok(CTable {
        max_len,
        budget,
        values,
    })
}

/// One request `ρ(p, n, τ)`, enumerated at `stage`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub p: u64,
    pub n: usize,
    pub tau: BitStr,
    pub stage: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestSet {
    pub items: Vec<Request>,
}

impl RequestSet {
    /// Distinct `τ` per `(p, n)`, in enumeration order.
    pub fn grouped(&self) -> BTreeMap<(u64, usize), Vec<BitStr>> {
        let mut items = self.items.clone();
        items.sort_by_key(|r| r.stage);
        let mut out: BTreeMap<(u64, usize), Vec<BitStr>> = BTreeMap::new();
        for r in items {
            let v = out.entry((r.p, r.n)).or_default();
            if !v.contains(&r.tau) {
                v.push(r.tau);
            }
        }
        out
    }

    /// `ρ(p, n, τ)` on the frozen data.
    pub fn holds(&self, p: u64, n: usize, tau: &BitStr) -> bool {
        self.items.iter().any(|r| r.p == p && r.n == n && r.tau == *tau)
    }

    /// The first `(p, n)` with more than `2^n` distinct requests.
    pub fn check_bound(&self) -> Result<()> {
        for ((p, n), taus) in self.grouped() {
            if n < 64 && taus.len() as u128 > 1u128 << n {
                return Err(Error::RequestBound {
                    p,
                    n,
                    count: taus.len(),
                });
            }
        }
        Ok(())
    }
}

/// A parameterized machine `M(p, σ)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamMachine {
    pub entries: BTreeMap<u64, BTreeMap<BitStr, BitStr>>,
}

impl ParamMachine {
    pub fn get(&self, p: u64, sigma: &BitStr) -> Option<&BitStr> {
        self.entries.get(&p)?.get(sigma)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Compiles requests into `M` with `ρ(p,n,τ) ↔ ∃σ ∈ 2^n M(p,σ) = τ`. Each
/// new `τ` for `(p, n)` takes the next unused `σ ∈ 2^n` in lexicographic order.
pub fn machine_from_requests(r: &RequestSet) -> Result<ParamMachine> {
    r.check_bound()?;
    let mut m = ParamMachine::default();
    for ((p, n), taus) in r.grouped() {
        let row = m.entries.entry(p).or_default();
        for (k, tau) in taus.into_iter().enumerate() {
            row.insert(BitStr::from_index(k as u128, n)?, tau);
        }
    }
    Ok(m)
}

/// `N(0^p 1 σ) = M(2^p, σ)`; parameters that are not powers of two are dropped.
/// Each entry costs its program length in steps.
pub fn prefix_wrap(m: &ParamMachine) -> Result<MachineTable> {
    let mut out = MachineTable::new();
    for (&param, row) in &m.entries {
        if !param.is_power_of_two() {
            continue;
        }
        let p = param.trailing_zeros() as usize;
        let head = BitStr::zeros(p)?.child(true);
        for (sigma, tau) in row {
            let prog = head.concat(sigma)?;
            out.insert(prog, *tau, prog.len() as u64)?;
        }
    }
    Ok(out)
}

/// Row `p` trees made cumulative: tree `i` becomes `⋃_{j≤i} T_{p,j}`.
fn cumulative_levels(row: &Sigma2Code) -> Vec<Vec<BTreeSet<BitStr>>> {
    let d = row.depth();
    let mut acc: Vec<BTreeSet<BitStr>> = vec![BTreeSet::new(); d + 1];
    let mut out = Vec::with_capacity(row.trees().len());
    for t in row.trees() {
        for (n, l) in acc.iter_mut().enumerate() {
            l.extend(t.level(n).expect("within depth").iter().copied());
        }
        out.push(acc.clone());
    }
    out
}

/// Least `p < m_0 < m_1 < …` with `|T_{p+1,i}^{m_i}| ≤ 2^{m_i − p}`, trees
/// taken cumulatively.
pub fn thresholds(test: &Sigma2Test, p: usize) -> Result<Vec<usize>> {
    let row = test
        .rows()
        .get(p + 1)
        .ok_or_else(|| Error::insufficient(format!("the test has no row {}", p + 1)))?;
    let levels = cumulative_levels(row);
    let d = row.depth();
    let mut out = Vec::with_capacity(levels.len());
    let mut last = p;
    for (i, lv) in levels.iter().enumerate() {
        let all_empty = lv.iter().all(BTreeSet::is_empty);
        let m = (last + 1..)
            .take_while(|&m| m <= d || all_empty)
            .find(|&m| {
                let size = lv.get(m).map_or(0, BTreeSet::len) as u128;
                m - p >= 127 || size <= 1u128 << (m - p)
            })
            .ok_or_else(|| {
                Error::insufficient(format!("no level in {}..={d} bounds tree {i} of row {}", last + 1, p + 1))
            })?;
        out.push(m);
        last = m;
    }
    Ok(out)
}

/// One certified line: `C_N(x↾m) ≤ bound < m − b − c` via `program`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReportLine {
    pub m: usize,
    pub bound: usize,
    pub target: usize,
    pub program: BitStr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompressionReport {
    pub b: usize,
    pub c: usize,
    pub c_measured: usize,
    pub p: usize,
    pub thresholds: Vec<usize>,
    pub i0: usize,
    pub lines: Vec<ReportLine>,
    pub machine: MachineTable,
}

impl fmt::Display for CompressionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "b={} c={} c_measured={} p={} i0={}",
            self.b, self.c, self.c_measured, self.p, self.i0
        )?;
        for l in &self.lines {
            writeln!(f, "m={} bound={} < {} program={}", l.m, l.bound, l.target, l.program)?;
        }
        Ok(())
    }
}

/// Compresses the prefixes of `x` using a test that captures it.
///
/// Requests are built for the single parameter `2^p` the argument needs,
/// and every line is checked twice: by arithmetic, and by running the
/// compiled machine through the universal machine's table sub-machine.
pub fn compress_from_sigma2(test: &Sigma2Test, x: &BitStr, b: usize) -> Result<CompressionReport> {
    let c = TABLE_HEADER;
    let p = (0..64)
        .find(|&p| (1usize << p) > b + c + p + 1)
        .expect("2^p outgrows p");
    let big = 1usize << p;
    let row = test.rows().get(big + 1).ok_or_else(|| {
        Error::Inconclusive(format!("the test needs row {} for b = {b}, it has {}", big + 1, test.rows().len()))
    })?;
    let d = row.depth();
    if big >= d {
        return Err(Error::Inconclusive(format!("2^p = {big} is not below the tree depth {d}")));
    }
    if x.len() < d {
        return Err(Error::Inconclusive(format!(
            "prefix of length {} is shorter than the tree depth {d}",
            x.len()
        )));
    }
    for (n, r) in test.rows().iter().enumerate() {
        if !r.contains(x)? {
            return Err(Error::Inconclusive(format!("row {n} does not contain the prefix")));
        }
    }
    let ms = thresholds(test, big)?;
    let levels = cumulative_levels(row);
    let xd = x.restrict(d);
    let i0 = levels
        .iter()
        .position(|lv| lv[d].contains(&xd))
        .expect("row contains the prefix");

    let mut requests = RequestSet::default();
    let mut stage = 0;
    for (i, lv) in levels.iter().enumerate() {
        let hi = ms.get(i + 1).copied().unwrap_or(d + 1).min(d + 1);
        for (level, found) in lv.iter().enumerate().take(hi).skip(ms[i]) {
            for tau in found {
                requests.items.push(Request {
                    p: big as u64,
                    n: level - big,
                    tau: *tau,
                    stage,
                });
            }
            stage += 1;
        }
    }
    let m_machine = machine_from_requests(&requests)?;
    let n_machine = prefix_wrap(&m_machine)?;
    let universal = UniversalMachine::new(n_machine.clone(), BitStr::empty());
    let head = BitStr::zeros(p)?.child(true);

    let mut lines = Vec::new();
    let mut c_measured = 0;
    for m in ms[i0]..=d {
        let n = m - big;
        let target = x.restrict(m);
        let sigma = m_machine
            .entries
            .get(&(big as u64))
            .and_then(|row| row.iter().find(|(s, t)| s.len() == n && **t == target))
            .map(|(s, _)| *s)
            .ok_or_else(|| Error::invariant("compress-request", format!("x↾{m} was never requested")))?;
        let program = head.concat(&sigma)?;
        let bound = p + 1 + n;
        if bound + b + c >= m {
            return Err(Error::invariant(
                "compress-inequality",
                format!("{bound} < {m} - {b} - {c} fails"),
            ));
        }
        let via_u = UniversalMachine::table_program(&program)?;
        match universal.run(&via_u, u64::MAX) {
            Run::Halted { output, .. } if output == target => {}
            _ => return Err(Error::invariant("compress-run", format!("program for x↾{m} does not print it"))),
        }
        c_measured = c_measured.max(via_u.len() - program.len());
        lines.push(ReportLine {
            m,
            bound,
            target: m - b - c,
            program,
        });
    }
    Ok(CompressionReport {
        b,
        c,
        c_measured,
        p,
        thresholds: ms,
        i0,
        lines,
        machine: n_machine,
    })
}

/// Row `i` (for `i ≤ max_len`) enumerates the strings of length `i` with
/// value below `i − b`; stage `ℓ` holds those with value at most `ℓ`.
pub fn tests_from_c(table: &CTable, b: usize) -> UniformSeq {
    let rows = (0..=table.max_len)
        .map(|i| {
            let found = table.compressible(i, b);
            if i <= b {
                return OpenCode::empty();
            }
            let stages = (0..i - b)
                .map(|l| found.iter().filter(|(v, _)| *v <= l).map(|(_, s)| *s).collect::<PrefixSet>())
                .collect();
            OpenCode::new(stages, true, true).expect("stages grow with the value bound")
        })
        .collect();
    UniformSeq::new(rows)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompressibleTest {
    pub test: Sigma2Test,
    /// The family `U_{b+1, i}` behind row `b`.
    pub families: Vec<UniformSeq>,
}

/// Row `b` is the cover of the slack-`(b+1)` family with `q = 2^{-(b+1)}`
/// and `p = 2^{-b}`, for `b < rows`.
pub fn sigma2test_from_compressible(table: &CTable, rows: usize) -> Result<CompressibleTest> {
    let mut out = Vec::with_capacity(rows);
    let mut families = Vec::with_capacity(rows);
    for b in 0..rows {
        let fam = tests_from_c(table, b + 1);
        let c = cover(&fam, &Rat::pow2_neg(b + 1), &Rat::pow2_neg(b))?;
        out.push(c.code);
        families.push(fam);
    }
    Ok(CompressibleTest {
        test: Sigma2Test::certify(out)?,
        families,
    })
}

/// A table machine giving each `0^i` (`i < 16`) the 4-bit program `bin(i)`.
pub fn zeros_machine() -> MachineTable {
    let mut t = MachineTable::new();
    for i in 0..16u128 {
        let prog = BitStr::from_index(i, 4).expect("4 bits");
        t.insert(prog, BitStr::zeros(i as usize).expect("short"), i as u64 + 1)
            .expect("fresh");
    }
    t
}

/// A test whose row `n` is the single tree of strings comparable with
/// `0^max(n, depth - 4)`, all trees of depth `depth`.
pub fn zeros_test(rows: usize, depth: usize) -> Result<Sigma2Test> {
    let rows = (0..rows)
        .map(|n| {
            let g = PrefixSet::from_iter([BitStr::zeros(n.max(depth.saturating_sub(4)))?]);
            Sigma2Code::new(vec![TreeCode::comparable(&g, usize::MAX, usize::MAX, depth)?])
        })
        .collect::<Result<Vec<_>>>()?;
    Sigma2Test::certify(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> BitStr {
        s.parse().unwrap()
    }

    #[test]
    fn universal_examples() {
        assert_eq!(universal_run(&b("101"), 100).output(), Some(&b("01")));
        assert_eq!(universal_run(&b(""), 100), Run::DivergedSoFar);
        assert_eq!(universal_run(&b("0000"), 100), Run::DivergedSoFar);
        assert_eq!(universal_run(&b("01101"), 100).output(), Some(&b("00000")));
        assert_eq!(universal_run(&b("101"), 3), Run::DivergedSoFar);
        let u = UniversalMachine::new(MachineTable::new(), b("1101"));
        assert_eq!(u.run(&b("000111"), 100).output(), Some(&b("110")));
        assert_eq!(u.run(&b("0001111"), 100), Run::DivergedSoFar);
    }

    #[test]
    fn runs_are_stable_in_budget() {
        let u = UniversalMachine::bundled();
        for len in 0..=9 {
            for prog in BitStr::all_of_len(len).unwrap() {
                let small = u.run(&prog, 12);
                if let Run::Halted { .. } = small {
                    assert_eq!(u.run(&prog, 1000), small);
                }
            }
        }
    }

    #[test]
    fn c_table_identity_bound_and_counting() {
        let t = c_table(&UniversalMachine::bundled(), 6, 1000).unwrap();
        for s in (0..=6).flat_map(|n| BitStr::all_of_len(n).unwrap()) {
            assert!(t.value(&s).unwrap() <= s.len() + C0);
        }
        for k in 0..=6 {
            assert!(t.count_below(k) < 1 << k);
        }
        let small = c_table(&UniversalMachine::bundled(), 6, 4).unwrap();
        assert!(small.value(&b("111")).is_none());
        for (s, v) in &small.values {
            assert!(t.value(s).unwrap() <= v.0);
        }
    }

    #[test]
    fn request_examples() {
        assert!(machine_from_requests(&RequestSet::default()).unwrap().is_empty());
        let r = RequestSet {
            items: vec![Request { p: 0, n: 1, tau: b("00"), stage: 0 }],
        };
        let m = machine_from_requests(&r).unwrap();
        let hits = [b("0"), b("1")].iter().filter(|s| m.get(0, s) == Some(&b("00"))).count();
        assert_eq!(hits, 1);
        let over = RequestSet {
            items: (0..3)
                .map(|k| Request { p: 2, n: 1, tau: BitStr::from_index(k, 2).unwrap(), stage: k as u64 })
                .collect(),
        };
        assert_eq!(
            machine_from_requests(&over),
            Err(Error::RequestBound { p: 2, n: 1, count: 3 })
        );
    }

    #[test]
    fn prefix_wrap_examples() {
        let mut m = ParamMachine::default();
        m.entries.entry(1).or_default().insert(b("0"), b("111"));
        m.entries.entry(4).or_default().insert(b("10"), b("0101"));
        m.entries.entry(3).or_default().insert(b("1"), b("1"));
        let n = prefix_wrap(&m).unwrap();
        assert_eq!(n.get(&b("10")).unwrap().output, b("111"));
        assert_eq!(n.get(&b("00110")).unwrap().output, b("0101"));
        assert_eq!(n.get(&b("00110")).unwrap().cost, 5);
        assert_eq!(n.len(), 2);
    }

    #[test]
    fn threshold_examples() {
        let empty = Sigma2Test::certify(vec![
            Sigma2Code::new(vec![TreeCode::empty(4)]).unwrap(),
            Sigma2Code::new(vec![TreeCode::empty(4), TreeCode::empty(4), TreeCode::empty(4)]).unwrap(),
        ])
        .unwrap();
        assert_eq!(thresholds(&empty, 0).unwrap(), vec![1, 2, 3]);
        let t = zeros_test(3, 6).unwrap();
        assert_eq!(thresholds(&t, 1).unwrap(), vec![2]);
        assert!(thresholds(&t, 2).is_err());
    }

    #[test]
    fn compress_zeros() {
        let t = zeros_test(18, 24).unwrap();
        let x = BitStr::zeros(24).unwrap();
        let r = compress_from_sigma2(&t, &x, 1).unwrap();
        assert_eq!(r.p, 4);
        assert!(!r.lines.is_empty());
        for l in &r.lines {
            assert_eq!(l.bound, r.p + 1 + (l.m - 16));
            assert!(l.bound < l.m - r.b - r.c);
            assert_eq!(l.program.len(), l.bound);
        }
        assert_eq!(r.c_measured, TABLE_HEADER);
        let short = zeros_test(10, 24).unwrap();
        assert!(matches!(compress_from_sigma2(&short, &x, 1), Err(Error::Inconclusive(_))));
    }

    #[test]
    fn tests_from_c_rows() {
        let t = c_table(&zeros_machine(), 8, 100).unwrap();
        let u = tests_from_c(&t, 8);
        assert!(u.rows.iter().all(|r| r.limit().is_empty()));
        let u = tests_from_c(&t, 1);
        for (i, row) in u.rows.iter().enumerate() {
            assert!(row.limit().measure() <= Rat::pow2_neg(1));
            if i >= 6 {
                assert_eq!(row.limit(), PrefixSet::from_iter([BitStr::zeros(i).unwrap()]));
            } else {
                assert!(row.limit().is_empty());
            }
        }
    }
}
