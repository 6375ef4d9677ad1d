//! The `revrand` command line. Every verb reads JSON, writes its canonical
//! JSON artifact to `--out`, and prints a report in the chosen format.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error, 3 frozen
//! data insufficient.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bits::BitStr;
use crate::complexity::{
    c_table, compress_from_sigma2, sigma2test_from_compressible, zeros_machine, zeros_test, MachineTable,
    UniversalMachine,
};
use crate::demuth::{balanced_split, certify_split, checkable_rows, DemuthTestCode, Role};
use crate::error::{Error, Result};
use crate::martingale::{sr_to_cr_pipeline, FunctionalRegistry};
use crate::opensets::{MLTestCode, OpenCode, UniformSeq, W2TestCode};
use crate::prefix::PrefixSet;
use crate::rat::Rat;
use crate::sigma2::{cover, thin_w2_to_sigma2, MeasureVerdict, Sigma2Code, Sigma2Test};
use crate::{gen, verify};

pub const MAX_DEPTH: usize = 24;

#[derive(Parser, Debug)]
#[command(name = "revrand", version, about = "Finite-stage randomness tests, covers and constructions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

/// Shared settings.
#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    #[arg(long, default_value_t = 8)]
    pub depth: usize,
    #[arg(long, default_value_t = 4)]
    pub stages: usize,
    #[arg(long, default_value_t = 100_000)]
    pub budget: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact measure of every stage of an open-set code.
    Measure(RunConfig),
    /// Thin a weak 2-test into a Σ⁰₂ test.
    Thin(RunConfig),
    /// Σ⁰₂ cover of a uniform family.
    Cover {
        #[command(flatten)]
        cfg: RunConfig,
        #[arg(long, default_value = "1/4")]
        q: String,
        #[arg(long, default_value = "1/2")]
        p: String,
    },
    /// Best-known program lengths for strings up to `--depth`.
    Ctable(RunConfig),
    /// Compress prefixes captured by a Σ⁰₂ test.
    Compress {
        #[command(flatten)]
        cfg: RunConfig,
        #[arg(long, default_value_t = 1)]
        b: usize,
        /// The prefix to compress; defaults to zeros at the test's depth.
        #[arg(long)]
        x: Option<String>,
    },
    /// Σ⁰₂ test from the compressible strings of a table machine.
    Incompress {
        #[command(flatten)]
        cfg: RunConfig,
        #[arg(long, default_value_t = 3)]
        rows: usize,
    },
    /// Dominator, universal supermartingale and its leftmost non-ascending path.
    Sr2cr(RunConfig),
    /// Martin-Löf test on the join of two Demuth-captured halves.
    Balanced(RunConfig),
    /// Run property suites.
    Verify {
        #[command(flatten)]
        cfg: RunConfig,
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 10)]
        cases: usize,
    },
}

/// A report plus an optional artifact and exit status.
pub struct Outcome {
    pub text: String,
    pub json: Value,
    pub artifact: Option<Value>,
    pub code: i32,
}

impl Outcome {
    fn ok(text: String, json: Value, artifact: Option<Value>) -> Self {
        Outcome {
            text,
            json,
            artifact,
            code: 0,
        }
    }
}

fn check_config(cfg: &RunConfig) -> Result<()> {
    if cfg.depth > MAX_DEPTH {
        return Err(Error::input(format!("--depth {} exceeds {MAX_DEPTH}", cfg.depth)));
    }
    Ok(())
}

fn read_input<T: DeserializeOwned>(cfg: &RunConfig) -> Result<Option<T>> {
    let Some(path) = &cfg.input else { return Ok(None) };
    let text = fs::read_to_string(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    parse_json(&text).map(Some).map_err(|e| match e {
        Error::Input(m) => Error::input(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Parses JSON; syntax errors carry line and column, and invariant errors
/// raised while building the value keep their own variant.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::input(e.to_string()))?;
    serde_json::from_value(value).map_err(|e| classify(e.to_string()))
}

fn classify(msg: String) -> Error {
    if let Some(rest) = msg.strip_prefix("invariant `") {
        if let Some((name, detail)) = rest.split_once("` violated: ") {
            return Error::invariant(intern(name), detail.to_string());
        }
    }
    if msg.starts_with("code is not frozen") {
        return Error::NotFrozen;
    }
    Error::input(msg)
}

/// Invariant names are static strings; recover the known ones.
fn intern(name: &str) -> &'static str {
    const KNOWN: [&str; 24] = [
        "monotone-stages",
        "ml-measure-bound",
        "w2-modulus",
        "schnorr-exact-measure",
        "schnorr-pad-bound",
        "tree-depth",
        "tree-prefix-closed",
        "sigma2-common-depth",
        "sigma2-test-measure",
        "row-measure-bound",
        "cover-measure",
        "machine-cost",
        "machine-functional",
        "supermartingale-fairness",
        "martingale-equality",
        "hre-change-bound",
        "demuth-order-bound",
        "demuth-index",
        "demuth-measure-bound",
        "balanced-measure",
        "balanced-components",
        "domination",
        "path-bound",
        "compress-inequality",
    ];
    KNOWN.iter().find(|k| **k == name).copied().unwrap_or("input-invariant")
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn rat(s: &str) -> Result<Rat> {
    s.parse()
}

fn cmd_measure(cfg: &RunConfig) -> Result<Outcome> {
    let code: OpenCode = read_input(cfg)?.ok_or_else(|| Error::input("measure needs --in"))?;
    let ms = code.stage_measures();
    let limit = code.limit().measure();
    let mut text = String::new();
    for (s, m) in ms.iter().enumerate() {
        writeln!(text, "stage {s}: {m}").expect("string");
    }
    writeln!(text, "limit: {limit}").expect("string");
    let json = json!({ "stages": ms.iter().map(Rat::to_string).collect::<Vec<_>>(), "limit": limit.to_string() });
    Ok(Outcome::ok(text, json.clone(), Some(json)))
}

fn witness_lines(test: &Sigma2Test, text: &mut String) {
    for (n, w) in test.witnesses().iter().enumerate() {
        let max = w.iter().max().copied().unwrap_or(0);
        writeln!(text, "row {n}: {} witness levels, max {max}", w.len()).expect("string");
    }
}

fn cmd_thin(cfg: &RunConfig) -> Result<Outcome> {
    let w2: W2TestCode = read_input(cfg)?.ok_or_else(|| Error::input("thin needs --in"))?;
    let t = thin_w2_to_sigma2(&w2)?;
    let mut text = String::new();
    for (n, row) in t.test.rows().iter().enumerate() {
        writeln!(text, "row {n}: least m = {}, {} trees, depth {}", t.least_m[n], row.trees().len(), row.depth())
            .expect("string");
    }
    witness_lines(&t.test, &mut text);
    let json = json!({ "least_m": t.least_m, "witnesses": t.test.witnesses(), "indices": to_value(&t.indices) });
    Ok(Outcome::ok(text, json, Some(to_value(&t.test))))
}

fn cmd_cover(cfg: &RunConfig, q: &str, p: &str) -> Result<Outcome> {
    let u: UniformSeq = read_input(cfg)?.ok_or_else(|| Error::input("cover needs --in"))?;
    let (q, p) = (rat(q)?, rat(p)?);
    let c = cover(&u, &q, &p)?;
    let MeasureVerdict::Holds(levels) = c.code.measure_leq(&p)? else {
        return Err(Error::invariant("cover-measure", "cover exceeds p"));
    };
    let mut text = String::new();
    writeln!(text, "trees: {}, depth {}", c.code.trees().len(), c.code.depth()).expect("string");
    for (k, e) in c.spine.pairs.iter().enumerate() {
        let w = e.s.map_or("none".to_string(), |w| format!("<{}, {}>", w.row, w.stage));
        writeln!(text, "b_{k} = {}, witness {w}", e.b).expect("string");
    }
    writeln!(text, "witness levels {levels:?}").expect("string");
    let json = json!({
        "trees": c.code.trees().len(),
        "depth": c.code.depth(),
        "spine": c.spine.bs(),
        "ladder": c.ladder.iter().map(Rat::to_string).collect::<Vec<_>>(),
        "witness_levels": levels,
    });
    Ok(Outcome::ok(text, json, Some(to_value(&c.code))))
}

fn cmd_ctable(cfg: &RunConfig) -> Result<Outcome> {
    let table: Option<MachineTable> = read_input(cfg)?;
    let u = match table {
        Some(t) => UniversalMachine::new(t, BitStr::empty()),
        None => UniversalMachine::bundled(),
    };
    let t = c_table(&u, cfg.depth, cfg.budget)?;
    let mut text = String::new();
    let mut by_len: Vec<(&BitStr, &(usize, BitStr))> = t.values.iter().collect();
    by_len.sort_by_key(|(s, _)| (s.len(), **s));
    for (s, (v, prog)) in by_len {
        writeln!(text, "{} C={v} program={prog}", if s.is_empty() { "ε".to_string() } else { s.to_string() })
            .expect("string");
    }
    let mut counts = Vec::new();
    for k in 0..=cfg.depth {
        let n = t.count_below(k);
        counts.push(n);
        writeln!(text, "below {k}: {n} ≤ {}", (1u64 << k) - 1).expect("string");
    }
    let json = json!({ "max_len": t.max_len, "budget": t.budget, "known": t.values.len(), "count_below": counts });
    Ok(Outcome::ok(text, json, Some(to_value(&t))))
}

fn cmd_compress(cfg: &RunConfig, b: usize, x: Option<&str>) -> Result<Outcome> {
    let test: Sigma2Test = match read_input(cfg)? {
        Some(t) => t,
        None => zeros_test(18, 24)?,
    };
    let d = test.rows().first().map_or(0, Sigma2Code::depth);
    let x = match x {
        Some(s) => s.parse()?,
        None => BitStr::zeros(d)?,
    };
    let r = compress_from_sigma2(&test, &x, b)?;
    Ok(Outcome::ok(r.to_string(), to_value(&r.lines), Some(to_value(&r))))
}

fn cmd_incompress(cfg: &RunConfig, rows: usize) -> Result<Outcome> {
    let m: MachineTable = read_input(cfg)?.unwrap_or_else(zeros_machine);
    let l = cfg.depth.min(12);
    let t = c_table(&m, l, cfg.budget)?;
    let ct = sigma2test_from_compressible(&t, rows)?;
    let mut text = String::new();
    for (b, row) in ct.test.rows().iter().enumerate() {
        let d = row.depth();
        let zeros = row.contains(&BitStr::zeros(d)?)?;
        writeln!(text, "row {b}: {} trees, depth {d}, contains zeros: {zeros}", row.trees().len()).expect("string");
    }
    witness_lines(&ct.test, &mut text);
    let json = json!({ "rows": rows, "max_len": l, "witnesses": ct.test.witnesses() });
    Ok(Outcome::ok(text, json, Some(to_value(&ct.test))))
}

#[derive(Serialize, Deserialize)]
pub struct Sr2crInput {
    pub y: BitStr,
    pub test: MLTestCode,
    pub registry: FunctionalRegistry,
}

/// A test whose row `n` enumerates `y↾n` only at stage `delay`.
pub fn late_test(y: &BitStr, rows: usize, delay: usize) -> Result<MLTestCode> {
    let rows = (0..rows)
        .map(|n| {
            let mut st = vec![PrefixSet::new(); delay];
            st.push(PrefixSet::from_iter([y.restrict(n)]));
            OpenCode::new(st, true, true)
        })
        .collect::<Result<Vec<_>>>()?;
    MLTestCode::new(UniformSeq::new(rows))
}

fn need_seed(cfg: &RunConfig, verb: &str) -> Result<u64> {
    cfg.seed
        .ok_or_else(|| Error::input(format!("{verb} generates random data and needs --seed")))
}

fn cmd_sr2cr(cfg: &RunConfig) -> Result<Outcome> {
    let input = match read_input::<Sr2crInput>(cfg)? {
        Some(i) => i,
        None => {
            let seed = need_seed(cfg, "sr2cr without --in")?;
            let y = BitStr::zeros(cfg.depth)?;
            let mut g = gen::rng(seed);
            Sr2crInput {
                test: late_test(&y, cfg.depth + 1, 40 * cfg.stages)?,
                registry: gen::random_registry(&mut g, 16, cfg.depth),
                y,
            }
        }
    };
    if cfg.depth > 16 {
        return Err(Error::input("sr2cr assembles at most depth 16"));
    }
    let out = sr_to_cr_pipeline(&input.y, &input.test, &input.registry, cfg.depth)?;
    let mut text = String::new();
    writeln!(text, "path {}", out.path).expect("string");
    writeln!(text, "S(ε) = {}", out.s.root()).expect("string");
    writeln!(text, "dominator {:?}", out.dominator.table).expect("string");
    for c in &out.certificates {
        writeln!(text, "{c}").expect("string");
    }
    let json = json!({
        "path": out.path,
        "root": out.s.root(),
        "dominator": out.dominator.table,
        "certificates": to_value(&out.certificates),
    });
    Ok(Outcome::ok(text, json, Some(to_value(&out))))
}

#[derive(Serialize, Deserialize)]
pub struct BalancedInput {
    pub t0: DemuthTestCode,
    pub t1: DemuthTestCode,
    pub x0: BitStr,
    pub x1: BitStr,
}

fn cmd_balanced(cfg: &RunConfig) -> Result<Outcome> {
    let input = match read_input::<BalancedInput>(cfg)? {
        Some(i) => i,
        None => {
            let h = (cfg.depth / 2).clamp(1, 6);
            let (t0, t1) = gen::demuth_last_change_fixture(h.min(6), h);
            BalancedInput {
                t0,
                t1,
                x0: BitStr::zeros(h)?,
                x1: BitStr::repeat(true, h)?,
            }
        }
    };
    let report = certify_split(&input.t0, &input.t1, &input.x0, &input.x1)?;
    let role = report.certified.unwrap_or(Role::Last0);
    let b = balanced_split(&input.t0, &input.t1, role)?;
    let mut text = String::new();
    writeln!(text, "c = {}, k = {}, checkable rows {}", b.c, b.k, checkable_rows(&b)).expect("string");
    writeln!(text, "certified role: {:?}", report.certified).expect("string");
    for (n, row) in b.test.rows().iter().enumerate() {
        let ms: Vec<String> = row.stage_measures().iter().map(Rat::to_string).collect();
        writeln!(text, "V_{n}: stage measures [{}] ≤ {}", ms.join(", "), Rat::pow2_neg(n)).expect("string");
    }
    for (i, n) in b.components.iter().enumerate() {
        writeln!(text, "O_{i}: {n} components").expect("string");
    }
    let json = json!({ "c": b.c, "k": b.k, "report": to_value(&report), "components": b.components });
    Ok(Outcome::ok(text, json, Some(to_value(&b.test))))
}

fn cmd_verify(cfg: &RunConfig, suite: &str, cases: usize) -> Result<Outcome> {
    let mut text = String::new();
    let mut verdicts = Vec::new();
    let mut failed = false;
    if let Some(path) = &cfg.input {
        let raw = fs::read_to_string(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        let verdict = match parse_json::<MLTestCode>(&raw) {
            Ok(_) => "fixture: ok".to_string(),
            Err(Error::Invariant { invariant, detail }) => {
                failed = true;
                format!("fixture: FAIL {invariant}: {detail}")
            }
            Err(e) => return Err(e),
        };
        writeln!(text, "{verdict}").expect("string");
        verdicts.push(json!({ "fixture": verdict }));
        if cfg.seed.is_none() {
            let code = if failed { 1 } else { 0 };
            return Ok(Outcome {
                text,
                json: Value::Array(verdicts),
                artifact: None,
                code,
            });
        }
    }
    let seed = need_seed(cfg, "verify")?;
    let names: Vec<&str> = if suite == "all" {
        verify::SUITES.to_vec()
    } else {
        vec![suite]
    };
    for name in names {
        let v = verify::run_suite(name, cfg.depth, seed, cases)
            .ok_or_else(|| Error::input(format!("unknown suite {name}")))?;
        writeln!(
            text,
            "suite {}: {} cases, {} failures, {} ms",
            v.suite,
            v.cases,
            v.failures.len(),
            v.millis
        )
        .expect("string");
        for f in &v.failures {
            writeln!(text, "  FAIL {} case {} seed {}: {}", f.check, f.case, f.seed, f.detail).expect("string");
        }
        failed |= !v.passed();
        verdicts.push(to_value(&v));
    }
    Ok(Outcome {
        text,
        json: Value::Array(verdicts),
        artifact: None,
        code: if failed { 1 } else { 0 },
    })
}

pub fn execute(cmd: &Command) -> Result<Outcome> {
    let cfg = match cmd {
        Command::Measure(c) | Command::Thin(c) | Command::Ctable(c) | Command::Sr2cr(c) | Command::Balanced(c) => c,
        Command::Cover { cfg, .. }
        | Command::Compress { cfg, .. }
        | Command::Incompress { cfg, .. }
        | Command::Verify { cfg, .. } => cfg,
    };
    check_config(cfg)?;
    match cmd {
        Command::Measure(c) => cmd_measure(c),
        Command::Thin(c) => cmd_thin(c),
        Command::Cover { cfg, q, p } => cmd_cover(cfg, q, p),
        Command::Ctable(c) => cmd_ctable(c),
        Command::Compress { cfg, b, x } => cmd_compress(cfg, *b, x.as_deref()),
        Command::Incompress { cfg, rows } => cmd_incompress(cfg, *rows),
        Command::Sr2cr(c) => cmd_sr2cr(c),
        Command::Balanced(c) => cmd_balanced(c),
        Command::Verify { cfg, suite, cases } => cmd_verify(cfg, suite, *cases),
    }
}

fn config_of(cmd: &Command) -> &RunConfig {
    match cmd {
        Command::Measure(c) | Command::Thin(c) | Command::Ctable(c) | Command::Sr2cr(c) | Command::Balanced(c) => c,
        Command::Cover { cfg, .. }
        | Command::Compress { cfg, .. }
        | Command::Incompress { cfg, .. }
        | Command::Verify { cfg, .. } => cfg,
    }
}

/// Runs a parsed command, writing the artifact and report; returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    let cfg = config_of(&cli.command);
    match execute(&cli.command) {
        Ok(out) => {
            if let (Some(path), Some(artifact)) = (&cfg.out, &out.artifact) {
                let body = serde_json::to_string_pretty(artifact).expect("serializable") + "\n";
                if let Err(e) = fs::write(path, body) {
                    eprintln!("error: {}: {e}", path.display());
                    return 2;
                }
            }
            let report = match cfg.format {
                Format::Text => out.text,
                Format::Json => serde_json::to_string_pretty(&out.json).expect("serializable") + "\n",
            };
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(report.as_bytes());
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
