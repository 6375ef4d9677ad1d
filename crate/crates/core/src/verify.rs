//! Executable property suites, one per module, run at a configured depth
//! from a seed. Every failure carries the seed that reproduces it.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::{interleave, split, BitStr};
use crate::complexity::{c_table, machine_from_requests, Request, RequestSet, UniversalMachine};
use crate::demuth::{balanced_split, normalize_changes, Role};
use crate::gen;
use crate::martingale::{assemble_universal, test_from_martingale, Dominator};
use crate::opensets::{captures, Capture, MLTestCode, OpenCode, UniformSeq};
use crate::prefix::{incl_excl_bound, PrefixSet};
use crate::rat::Rat;
use crate::sigma2::{cover, cover_contains, good_check, thin_w2_to_sigma2, GoodVerdict};

pub const SUITES: [&str; 6] = ["core", "opensets", "sigma2", "complexity", "martingale", "demuth"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub check: &'static str,
    pub case: usize,
    pub seed: u64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub suite: String,
    pub cases: usize,
    pub failures: Vec<Failure>,
    pub millis: u128,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

type Check = fn(&mut gen::Rng8, usize) -> Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn strings(d: usize) -> Vec<BitStr> {
    BitStr::all_of_len(d).expect("small depth")
}

/// Paths of length `d` through `[B]`, by direct prefix comparison.
fn path_count(b: &PrefixSet, d: usize) -> u64 {
    strings(d)
        .iter()
        .filter(|x| b.iter().any(|s| s.is_prefix_of(x)))
        .count() as u64
}

fn core_measure(g: &mut gen::Rng8, d: usize) -> Result<(), String> {
    let b = gen::random_prefix_set(g, 12, d);
    let m = b.measure();
    let direct = Rat::dyadic(path_count(&b, d), d);
    ensure(m == direct, || format!("measure {m} vs {direct} paths for {b:?}"))
}

fn core_incl_excl(g: &mut gen::Rng8, d: usize) -> Result<(), String> {
    let a = gen::random_prefix_set(g, 6, d);
    let b = gen::random_prefix_set(g, 6, d);
    let (ma, mb) = (a.measure(), b.measure());
    let union = a.union(&b).measure();
    if union.is_zero() {
        return Ok(());
    }
    let r = &union * &Rat::new(g.gen_range(0..8), 8).expect("nonzero");
    let inter = a.intersect(&b).measure();
    let bound = incl_excl_bound(&ma, &mb, &r);
    ensure(inter <= bound, || format!("μ(A∩B) = {inter} > {bound}"))
}

fn core_interleave(g: &mut gen::Rng8, d: usize) -> Result<(), String> {
    let x = gen::random_string(g, 0, 2 * d);
    let (x0, x1) = split(&x);
    let x = x.restrict(2 * x1.len());
    let back = interleave(&x0.restrict(x1.len()), &x1).map_err(|e| e.to_string())?;
    ensure(back == x, || format!("split/interleave lost {x}"))
}

fn opensets_stages(g: &mut gen::Rng8, d: usize) -> Result<(), String> {
    let c = gen::random_code(g, 4, d, &Rat::one(), None);
    let ms = c.stage_measures();
    ensure(ms.windows(2).all(|w| w[0] <= w[1]), || format!("measures decrease: {ms:?}"))?;
    ensure(c.normalize_monotone() == c.normalize_monotone().normalize_monotone(), || "normalization not idempotent".into())
}

fn opensets_oplus(g: &mut gen::Rng8, d: usize) -> Result<(), String> {
    let h = (d / 2).max(1);
    let a = gen::random_code(g, 2, h, &Rat::one(), None);
    let b = gen::random_code(g, 2, h, &Rat::one(), None);
    let j = OpenCode::oplus(&a, &b).map_err(|e| e.to_string())?;
    let want = &a.limit().measure() * &b.limit().measure();
    let got = j.limit().measure();
    ensure(got == want, || format!("μ(A⊕B) = {got}, μ(A)μ(B) = {want}"))
}

fn opensets_capture(g: &mut gen::Rng8, d: usize) -> Result<(), String> {
    let rows: Vec<OpenCode> = (0..4)
        .map(|n| gen::random_code(g, 2, d, &Rat::pow2_neg(n), None))
        .collect();
    let seq = UniformSeq::new(rows);
    let t = MLTestCode::new(seq.clone()).map_err(|e| e.to_string())?;
    let top = seq.max_len();
    for x in strings(top) {
        let got = captures(t.seq(), &x).map_err(|e| e.to_string())?;
        let escaped = seq.rows.iter().position(|r| !r.limit().iter().any(|s| s.is_prefix_of(&x)));
        let want = escaped.map_or(Capture::CapturedSoFar, Capture::EscapedRow);
        ensure(got == want, || format!("capture of {x}: {got:?} vs {want:?}"))?;
    }
    Ok(())
}

fn sigma2_thin(g: &mut gen::Rng8, d: usize) -> Result<(), String> {
    let d = d.min(8);
    let rows = 2 + g.gen_range(0..5);
    let w2 = gen::random_w2(g, rows, d);
    let t = thin_w2_to_sigma2(&w2).map_err(|e| e.to_string())?;
    for x in strings(d) {
        let all = w2.seq().rows.iter().all(|r| r.limit().covers(&x));
        if all && !t.test.covers_cylinder(&x).map_err(|e| e.to_string())? {
            return Err(format!("{x} lies in every input row but not every output row"));
        }
    }
    Ok(())
}

fn sigma2_cover(g: &mut gen::Rng8, d: usize) -> Result<(), String> {
    let d = d.min(8);
    let q = Rat::new(1, 4).expect("nonzero");
    let p = Rat::new(1, 2).expect("nonzero");
    let k = 1 + g.gen_range(0..5);
    let u = gen::random_family(g, k, d, &q);
    let c = cover(&u, &q, &p).map_err(|e| e.to_string())?;
    ensure(good_check(&c.spine, &u).map_err(|e| e.to_string())? == GoodVerdict::Good, || "spine is not good".into())?;
    for n in 0..=u.len() {
        let missing = cover_contains(&u, &c, n).map_err(|e| e.to_string())?;
        ensure(missing.is_empty(), || format!("N = {n}: {} strings escape", missing.len()))?;
    }
    Ok(())
}

fn complexity_counting(_: &mut gen::Rng8, d: usize) -> Result<(), String> {
    let l = d.min(10);
    let t = c_table(&UniversalMachine::bundled(), l, 100_000).map_err(|e| e.to_string())?;
    for k in 0..=l {
        let n = t.count_below(k);
        ensure(n < 1 << k, || format!("{n} strings have value below {k}"))?;
    }
    Ok(())
}

fn complexity_requests(g: &mut gen::Rng8, _: usize) -> Result<(), String> {
    let mut r = RequestSet::default();
    for stage in 0..g.gen_range(0..30) {
        let (p, n) = (g.gen_range(0..=3), g.gen_range(1..=3));
        r.items.push(Request {
            p,
            n,
            tau: gen::random_string(g, 0, 4),
            stage,
        });
    }
    let Ok(m) = machine_from_requests(&r) else {
        return Ok(());
    };
    for q in &r.items {
        let hit = strings(q.n).iter().any(|s| m.get(q.p, s) == Some(&q.tau));
        ensure(hit, || format!("request ({}, {}, {}) unserved", q.p, q.n, q.tau))?;
    }
    for (p, row) in &m.entries {
        for (s, tau) in row {
            ensure(r.holds(*p, s.len(), tau), || format!("M({p}, {s}) = {tau} was not requested"))?;
        }
    }
    Ok(())
}

fn martingale_kolmogorov(g: &mut gen::Rng8, d: usize) -> Result<(), String> {
    let d = d.min(12);
    let m = gen::random_supermartingale(g, d, Rat::one());
    let t = test_from_martingale(&m).map_err(|e| e.to_string())?;
    for (k, row) in t.rows().iter().enumerate() {
        let mu = row.limit().measure();
        ensure(mu <= Rat::pow2_neg(k), || format!("row {k} has measure {mu}"))?;
    }
    Ok(())
}

fn martingale_assembly(g: &mut gen::Rng8, d: usize) -> Result<(), String> {
    let d = d.min(10);
    let r = gen::random_registry(g, 6, d);
    let f = Dominator {
        table: (0..=d).map(|_| g.gen_range(0..60)).collect(),
    };
    assemble_universal(&f, &r, d, r.len() - 1)
        .map(|_| ())
        .map_err(|e| e.to_string())
}

fn demuth_split(g: &mut gen::Rng8, d: usize) -> Result<(), String> {
    let h = (d / 2).clamp(2, 6);
    let x0 = gen::random_string(g, h, h);
    let x1 = gen::random_string(g, h, h);
    let rows = g.gen_range(2..=h + 1);
    let c = g.gen_range(1..=4);
    let (t0, t1) = gen::demuth_pair(g, rows, c, &x0, &x1);
    let x = interleave(&x0, &x1).map_err(|e| e.to_string())?;
    let (n0, n1) = (normalize_changes(&t0), normalize_changes(&t1));
    for role in [Role::Last0, Role::Last1] {
        let b = balanced_split(&t0, &t1, role).map_err(|e| e.to_string())?;
        let (a, o) = if role == Role::Last0 { (&n0, &n1) } else { (&n1, &n0) };
        for i in 0..rows {
            if a.g().last_change(i) >= o.g().last_change(i) {
                ensure(b.o[i].limit().meets(&x), || format!("{role:?}: join escapes O_{i}"))?;
            }
        }
    }
    Ok(())
}

fn checks(suite: &str) -> Vec<(&'static str, Check)> {
    match suite {
        "core" => vec![
            ("measure-oracle", core_measure as Check),
            ("incl-excl", core_incl_excl),
            ("interleave-roundtrip", core_interleave),
        ],
        "opensets" => vec![
            ("stage-monotone", opensets_stages as Check),
            ("oplus-product", opensets_oplus),
            ("capture-oracle", opensets_capture),
        ],
        "sigma2" => vec![("thin-keeps-captured", sigma2_thin as Check), ("cover-contains", sigma2_cover)],
        "complexity" => vec![("counting-bound", complexity_counting as Check), ("request-biconditional", complexity_requests)],
        "martingale" => vec![("kolmogorov", martingale_kolmogorov as Check), ("assembly-fair", martingale_assembly)],
        "demuth" => vec![("capture-transfer", demuth_split as Check)],
        _ => vec![],
    }
}

/// Runs `cases` seeded cases of every check in `suite`. Case `i` of the
/// check at position `j` uses seed `seed + 1000·j + i`.
pub fn run_suite(suite: &str, depth: usize, seed: u64, cases: usize) -> Option<Verdict> {
    let list = checks(suite);
    if list.is_empty() {
        return None;
    }
    let start = Instant::now();
    let jobs: Vec<(usize, usize)> = (0..list.len()).flat_map(|j| (0..cases).map(move |i| (j, i))).collect();
    let mut failures: Vec<Failure> = jobs
        .par_iter()
        .filter_map(|&(j, i)| {
            let (name, check) = list[j];
            let case_seed = seed.wrapping_add(1000 * j as u64 + i as u64);
            let mut g = gen::rng(case_seed);
            check(&mut g, depth).err().map(|detail| Failure {
                check: name,
                case: i,
                seed: case_seed,
                detail,
            })
        })
        .collect();
    failures.sort_by(|a, b| (a.check, a.case).cmp(&(b.check, b.case)));
    Some(Verdict {
        suite: suite.to_string(),
        cases: jobs.len(),
        failures,
        millis: start.elapsed().as_millis(),
    })
}

/// Re-runs one failing case.
pub fn rerun(suite: &str, check: &str, seed: u64, depth: usize) -> Option<Result<(), String>> {
    let (_, f) = checks(suite).into_iter().find(|(n, _)| *n == check)?;
    Some(f(&mut gen::rng(seed), depth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes_at_depth_six() {
        for s in SUITES {
            let v = run_suite(s, 6, 7, 3).unwrap();
            assert!(v.passed(), "{s}: {:?}", v.failures);
        }
        assert!(run_suite("nope", 6, 7, 3).is_none());
    }
}
