//! Seeded random instances for property checks and the `verify` command.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

use std::collections::BTreeMap;

use crate::bits::BitStr;
use crate::demuth::{DemuthTestCode, HREFn};
use crate::martingale::{node_at, Cost, Functional, FunctionalRegistry, Mart, RegistryEntry};
use crate::opensets::{OpenCode, UniformSeq, W2TestCode};
use crate::prefix::PrefixSet;
use crate::rat::Rat;

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_string(rng: &mut Rng8, min_len: usize, max_len: usize) -> BitStr {
    let n = rng.gen_range(min_len..=max_len);
    BitStr::from_bits((0..n).map(|_| rng.gen::<bool>())).expect("length within limit")
}

/// Up to `count` strings of length at most `max_len`.
pub fn random_prefix_set(rng: &mut Rng8, count: usize, max_len: usize) -> PrefixSet {
    let k = rng.gen_range(0..=count);
    (0..k).map(|_| random_string(rng, 0, max_len)).collect()
}

/// Strings drawn one at a time, kept only while the union stays within `cap`.
/// A shared `bias` prefix makes separate draws overlap often.
pub fn capped_set(
    rng: &mut Rng8,
    start: &PrefixSet,
    tries: usize,
    min_len: usize,
    max_len: usize,
    cap: &Rat,
    bias: Option<&BitStr>,
) -> PrefixSet {
    let mut out = start.clone();
    for _ in 0..tries {
        let mut s = random_string(rng, min_len, max_len);
        if let Some(b) = bias {
            if rng.gen_bool(0.6) && b.len() <= s.len() {
                let tail = BitStr::from_bits(s.iter().skip(b.len())).expect("shorter");
                s = b.concat(&tail).expect("same length");
            }
        }
        let mut next = out.clone();
        next.insert(s);
        if next.measure() <= *cap {
            out = next;
        }
    }
    out
}

/// A frozen monotone code whose every stage has measure at most `cap`.
pub fn random_code(
    rng: &mut Rng8,
    stages: usize,
    max_len: usize,
    cap: &Rat,
    bias: Option<&BitStr>,
) -> OpenCode {
    let mut acc = PrefixSet::new();
    let mut out = Vec::with_capacity(stages);
    for _ in 0..stages {
        acc = capped_set(rng, &acc, 3, 1, max_len, cap, bias);
        out.push(acc.clone());
    }
    OpenCode::new(out, true, true).expect("stages are nested")
}

/// `rows` codes, each with measure at most `q`, sharing a random bias prefix.
pub fn random_family(rng: &mut Rng8, rows: usize, max_len: usize, q: &Rat) -> UniformSeq {
    let bias = random_string(rng, 1, 3);
    let seq = (0..rows)
        .map(|_| {
            let stages = rng.gen_range(1..=3);
            random_code(rng, stages, max_len, q, Some(&bias))
        })
        .collect();
    UniformSeq::new(seq)
}

/// A weak 2-test whose row `m` has measure at most `2^{-max(m-lag, 0)}`,
/// with the matching modulus `N(k) = k + lag - 1`.
pub fn random_w2(rng: &mut Rng8, rows: usize, max_len: usize) -> W2TestCode {
    let lag = rng.gen_range(0..=2usize);
    let bias = random_string(rng, 1, 2);
    let seq: Vec<OpenCode> = (0..rows)
        .map(|m| {
            let stages = rng.gen_range(1..=3);
            let cap = Rat::pow2_neg(m.saturating_sub(lag));
            random_code(rng, stages, max_len, &cap, Some(&bias))
        })
        .collect();
    let count = rows.saturating_sub(lag);
    let modulus = (0..count).map(|k| (k + lag).saturating_sub(1)).collect();
    W2TestCode::new(UniformSeq::new(seq), modulus).expect("rows respect the modulus")
}

/// A supermartingale on `2^{≤depth}` with the given root value. Each node
/// keeps a fraction in `{6/8, 7/8, 1}` of its doubled capital and splits it
/// between the children in quarters.
pub fn random_supermartingale(rng: &mut Rng8, depth: usize, root: Rat) -> Mart {
    let n = (1usize << (depth + 1)) - 1;
    let mut values = vec![Rat::zero(); n];
    values[0] = root;
    for i in 0..n / 2 {
        let keep = Rat::new(rng.gen_range(6..=8), 8).expect("nonzero");
        let total = &(&Rat::integer(2) * &values[i]) * &keep;
        let left = &total * &Rat::new(rng.gen_range(0..=4), 4).expect("nonzero");
        let right = total.checked_sub(&left).expect("split within total");
        values[2 * i + 1] = left;
        values[2 * i + 2] = right;
    }
    Mart::new(depth, values).expect("construction is fair")
}

fn table_of(m: &Mart) -> BTreeMap<BitStr, Rat> {
    m.values().iter().enumerate().map(|(i, v)| (node_at(i), v.clone())).collect()
}

/// A mixed registry: total supermartingales, fairness violators, divergers
/// and entries too slow for any gate, in random order.
pub fn random_registry(rng: &mut Rng8, count: usize, depth: usize) -> FunctionalRegistry {
    let mut r = FunctionalRegistry::new();
    for _ in 0..count {
        let (functional, cost) = match rng.gen_range(0..7) {
            0 => (Functional::Table { values: table_of(&random_supermartingale(rng, depth, Rat::one())) }, Cost::default()),
            1 => (Functional::Doubling { bit: rng.gen() }, Cost::default()),
            2 => (
                Functional::Bet { bit: rng.gen(), fraction: Rat::new(rng.gen_range(1..=4), 4).expect("nonzero") },
                Cost::default(),
            ),
            3 => {
                let m = random_supermartingale(rng, depth, Rat::one());
                let mut values = table_of(&m);
                let victim = random_string(rng, 1, depth);
                let bumped = &values[&victim] + &Rat::integer(3);
                values.insert(victim, bumped);
                (Functional::Table { values }, Cost::default())
            }
            4 => (Functional::Diverge { after: rng.gen_range(0..=depth) }, Cost::default()),
            5 => (Functional::Doubling { bit: rng.gen() }, Cost { base: 1 << 20, per_len: 0 }),
            _ => (Functional::Constant { value: Rat::new(rng.gen_range(1..=3), 2).expect("nonzero") }, Cost::default()),
        };
        r.push(RegistryEntry { functional, cost }).expect("base entries only");
    }
    r
}

/// One side of a capturing Demuth pair: row `n` walks through `changes[n]`
/// fresh indices, the last naming a code that contains `x↾n`. Indices are
/// offset by `base` so two sides never share them.
fn demuth_side(rng: &mut Rng8, x: &BitStr, changes: &[usize], c: u64, base: u64) -> DemuthTestCode {
    let mut registry = BTreeMap::new();
    let mut rows = Vec::with_capacity(changes.len());
    let mut next = base;
    for (n, &k) in changes.iter().enumerate() {
        let cap = Rat::pow2_neg(n);
        let mut row = Vec::new();
        for j in 0..=k {
            let start = if j == k {
                PrefixSet::from_iter([x.restrict(n.min(x.len()))])
            } else {
                PrefixSet::new()
            };
            let set = capped_set(rng, &start, 2, (n + 1).min(x.len()), x.len(), &cap, None);
            registry.insert(next, OpenCode::single(set));
            let repeat = rng.gen_range(1..=2);
            row.extend(std::iter::repeat_n(next, repeat));
            next += 1;
        }
        rows.push(row);
    }
    let h = (0..changes.len()).map(|n| c << n).collect();
    let g = HREFn::new(rows, h, true).expect("changes within c·2^n");
    DemuthTestCode::new(g, registry, Some(c)).expect("codes are capped")
}

/// Two `c·2^n`-Demuth tests capturing `x0` and `x1` on all `rows` rows,
/// with random change counts in `1..=min(c, 3)`. Both strings need length
/// at least `rows - 1`.
pub fn demuth_pair(rng: &mut Rng8, rows: usize, c: u64, x0: &BitStr, x1: &BitStr) -> (DemuthTestCode, DemuthTestCode) {
    let top = c.clamp(1, 3) as usize;
    let c0: Vec<usize> = (0..rows).map(|_| rng.gen_range(1..=top)).collect();
    let c1: Vec<usize> = (0..rows).map(|_| rng.gen_range(1..=top)).collect();
    let t0 = demuth_side(rng, x0, &c0, c, 0);
    let t1 = demuth_side(rng, x1, &c1, c, 1000);
    (t0, t1)
}

/// The hand-built pair: `t0` captures `0^d` and changes twice per row, at
/// stages 1 and 2; `t1` captures `1^d` and changes once, at stage 1.
pub fn demuth_last_change_fixture(rows: usize, d: usize) -> (DemuthTestCode, DemuthTestCode) {
    let zeros = BitStr::zeros(d).expect("short");
    let ones = BitStr::repeat(true, d).expect("short");
    let side = |x: &BitStr, other: &BitStr, changes: usize, base: u64| {
        let mut registry = BTreeMap::new();
        let mut out = Vec::new();
        for n in 0..rows {
            let idx = base + 10 * n as u64;
            let decoy = PrefixSet::from_iter([other.restrict((n + 1).min(d))]);
            for j in 0..changes {
                registry.insert(idx + j as u64, OpenCode::single(decoy.clone()));
            }
            registry.insert(idx + changes as u64, OpenCode::single(PrefixSet::from_iter([x.restrict(n.min(d))])));
            let mut row: Vec<u64> = (0..=changes as u64).map(|j| idx + j).collect();
            row.push(idx + changes as u64);
            out.push(row);
        }
        let g = HREFn::new(out, vec![2; rows], true).expect("two changes at most");
        DemuthTestCode::new(g, registry, Some(2)).expect("codes are capped")
    };
    (side(&zeros, &ones, 2, 0), side(&ones, &zeros, 1, 500))
}
