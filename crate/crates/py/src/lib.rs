//! Python bindings. Strings cross as `"0101"` text, rationals as `"p/q"`
//! text, and composite artifacts as the same JSON the CLI reads and writes.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::revrand as core;
use core::complexity::{self, UniversalMachine};
use core::martingale::{self, Mart};
use core::{cli, demuth, sigma2, verify, BitStr, Error, MLTestCode, Rat};

create_exception!(revrand, InputError, PyValueError);
create_exception!(revrand, InvariantError, PyValueError);
create_exception!(revrand, InsufficientError, PyRuntimeError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Invariant { .. } => InvariantError::new_err(e.to_string()),
        Error::Insufficient(_) | Error::Inconclusive(_) | Error::NotFrozen => InsufficientError::new_err(e.to_string()),
        _ => InputError::new_err(e.to_string()),
    }
}

fn bits(s: &str) -> PyResult<BitStr> {
    s.parse().map_err(py_err)
}

fn rat(s: &str) -> PyResult<Rat> {
    s.parse().map_err(py_err)
}

fn parse<T: serde::de::DeserializeOwned>(json: &str) -> PyResult<T> {
    cli::parse_json(json).map_err(py_err)
}

fn dump<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(&serde_json::to_value(v).expect("serializable")).expect("serializable")
}

/// A finite set of strings standing for the union of their cylinders.
#[pyclass(name = "PrefixSet", module = "revrand", frozen, from_py_object)]
#[derive(Clone)]
struct PyPrefixSet(core::PrefixSet);

#[pymethods]
impl PyPrefixSet {
    #[new]
    #[pyo3(signature = (items = Vec::new()))]
    fn new(items: Vec<String>) -> PyResult<Self> {
        core::PrefixSet::parse(&items).map(Self).map_err(py_err)
    }

    fn measure(&self) -> String {
        self.0.measure().to_string()
    }

    fn minimize(&self) -> Self {
        Self(self.0.minimize())
    }

    fn cylinder_members(&self, depth: usize) -> PyResult<Vec<String>> {
        let m = self.0.cylinder_members(depth).map_err(py_err)?;
        Ok(m.iter().map(BitStr::to_string).collect())
    }

    fn covers(&self, x: &str) -> PyResult<bool> {
        Ok(self.0.covers(&bits(x)?))
    }

    fn union(&self, other: &Self) -> Self {
        Self(self.0.union(&other.0))
    }

    fn intersect(&self, other: &Self) -> Self {
        Self(self.0.intersect(&other.0))
    }

    fn items(&self) -> Vec<String> {
        self.0.iter().map(BitStr::to_string).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("PrefixSet({:?})", self.items())
    }
}

/// Staged code for an effectively open set.
#[pyclass(name = "OpenCode", module = "revrand", frozen)]
struct PyOpenCode(core::OpenCode);

#[pymethods]
impl PyOpenCode {
    #[new]
    #[pyo3(signature = (stages, frozen = true))]
    fn new(stages: Vec<PyPrefixSet>, frozen: bool) -> PyResult<Self> {
        let stages = stages.into_iter().map(|s| s.0).collect();
        core::OpenCode::new(stages, frozen, true).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        parse(json).map(Self)
    }

    fn to_json(&self) -> String {
        dump(&self.0)
    }

    fn stage_measures(&self) -> Vec<String> {
        self.0.stage_measures().iter().map(Rat::to_string).collect()
    }

    fn limit(&self) -> PyPrefixSet {
        PyPrefixSet(self.0.limit())
    }

    fn num_stages(&self) -> usize {
        self.0.num_stages()
    }
}

/// `Some(n)` when `x` escapes row `n`, `None` when captured so far.
#[pyfunction]
fn ml_escape_row(test_json: &str, x: &str) -> PyResult<Option<usize>> {
    let t: MLTestCode = parse(test_json)?;
    match core::opensets::captures(t.seq(), &bits(x)?).map_err(py_err)? {
        core::Capture::EscapedRow(n) => Ok(Some(n)),
        _ => Ok(None),
    }
}

#[pyfunction]
fn incl_excl_bound(a: &str, b: &str, r: &str) -> PyResult<String> {
    Ok(core::prefix::incl_excl_bound(&rat(a)?, &rat(b)?, &rat(r)?).to_string())
}

#[pyfunction]
fn interleave(x0: &str, x1: &str) -> PyResult<String> {
    core::bits::interleave(&bits(x0)?, &bits(x1)?).map(|x| x.to_string()).map_err(py_err)
}

/// Thins a weak 2-test given as JSON; returns the Σ⁰₂ test as JSON.
#[pyfunction]
fn thin(w2_json: &str) -> PyResult<String> {
    let w2 = parse(w2_json)?;
    sigma2::thin_w2_to_sigma2(&w2).map(|t| dump(&t.test)).map_err(py_err)
}

/// Returns the cover's code as JSON and its good sequence.
#[pyfunction]
#[pyo3(signature = (family_json, q = "1/4", p = "1/2"))]
fn cover(family_json: &str, q: &str, p: &str) -> PyResult<(String, Vec<usize>)> {
    let u = parse(family_json)?;
    let c = sigma2::cover(&u, &rat(q)?, &rat(p)?).map_err(py_err)?;
    Ok((dump(&c.code), c.spine.bs()))
}

/// `{string: (value, program)}` for the bundled universal machine.
#[pyfunction]
#[pyo3(signature = (max_len, budget = 100_000))]
fn c_table(max_len: usize, budget: u64) -> PyResult<Vec<(String, usize, String)>> {
    let t = complexity::c_table(&UniversalMachine::bundled(), max_len, budget).map_err(py_err)?;
    Ok(t.values.iter().map(|(s, (v, p))| (s.to_string(), *v, p.to_string())).collect())
}

/// Compression report lines `(m, bound, target, program)`; the default
/// test captures zeros at depth 24.
#[pyfunction]
#[pyo3(signature = (b = 1, test_json = None, x = None))]
fn compress(b: usize, test_json: Option<&str>, x: Option<&str>) -> PyResult<Vec<(usize, usize, usize, String)>> {
    let test = match test_json {
        Some(j) => parse(j)?,
        None => complexity::zeros_test(18, 24).map_err(py_err)?,
    };
    let x = match x {
        Some(x) => bits(x)?,
        None => BitStr::zeros(24).map_err(py_err)?,
    };
    let r = complexity::compress_from_sigma2(&test, &x, b).map_err(py_err)?;
    Ok(r.lines.iter().map(|l| (l.m, l.bound, l.target, l.program.to_string())).collect())
}

/// A supermartingale stored on all strings up to its depth.
#[pyclass(name = "Martingale", module = "revrand", frozen)]
struct PyMart(Mart);

#[pymethods]
impl PyMart {
    #[new]
    fn new(depth: usize, values: Vec<String>) -> PyResult<Self> {
        let values = values.iter().map(|v| rat(v)).collect::<PyResult<Vec<_>>>()?;
        Mart::new(depth, values).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn random(seed: u64, depth: usize) -> Self {
        Self(core::gen::random_supermartingale(&mut core::gen::rng(seed), depth, Rat::one()))
    }

    fn at(&self, s: &str) -> PyResult<String> {
        let s = bits(s)?;
        self.0
            .get(&s)
            .map(Rat::to_string)
            .ok_or_else(|| InputError::new_err(format!("{s} is deeper than {}", self.0.depth())))
    }

    fn depth(&self) -> usize {
        self.0.depth()
    }

    fn is_fair(&self) -> bool {
        martingale::is_supermartingale(&self.0).is_fair()
    }

    /// Row measures of the associated Martin-Löf test.
    fn test_measures(&self) -> PyResult<Vec<String>> {
        let t = martingale::test_from_martingale(&self.0).map_err(py_err)?;
        Ok(t.rows().iter().map(|r| r.limit().measure().to_string()).collect())
    }

    fn leftmost_nonascending(&self) -> String {
        martingale::leftmost_nonascending(&self.0).to_string()
    }

    fn to_json(&self) -> String {
        dump(&self.0)
    }
}

/// Runs the dominated assembly on a `{y, test, registry}` bundle (or a
/// seeded default) and returns the pipeline as JSON.
#[pyfunction]
#[pyo3(signature = (depth, bundle_json = None, seed = None))]
fn sr2cr(depth: usize, bundle_json: Option<&str>, seed: Option<u64>) -> PyResult<String> {
    let input: cli::Sr2crInput = match (bundle_json, seed) {
        (Some(j), _) => parse(j)?,
        (None, Some(seed)) => {
            let y = BitStr::zeros(depth).map_err(py_err)?;
            let mut g = core::gen::rng(seed);
            cli::Sr2crInput {
                test: cli::late_test(&y, depth + 1, 160).map_err(py_err)?,
                registry: core::gen::random_registry(&mut g, 16, depth),
                y,
            }
        }
        (None, None) => return Err(InputError::new_err("need a bundle or a seed")),
    };
    martingale::sr_to_cr_pipeline(&input.y, &input.test, &input.registry, depth)
        .map(|p| dump(&p))
        .map_err(py_err)
}

/// Certifies the balanced split of a `{t0, t1, x0, x1}` bundle; returns
/// the report as JSON.
#[pyfunction]
fn balanced(bundle_json: &str) -> PyResult<String> {
    let b: cli::BalancedInput = parse(bundle_json)?;
    demuth::certify_split(&b.t0, &b.t1, &b.x0, &b.x1).map(|r| dump(&r)).map_err(py_err)
}

/// `(suite, cases, failures, millis)` per suite.
#[pyfunction]
#[pyo3(signature = (seed, suite = "all", depth = 8, cases = 10))]
fn run_verify(seed: u64, suite: &str, depth: usize, cases: usize) -> PyResult<Vec<(String, usize, usize, u128)>> {
    if depth > cli::MAX_DEPTH {
        return Err(InputError::new_err(format!("depth {depth} exceeds {}", cli::MAX_DEPTH)));
    }
    let names: Vec<&str> = if suite == "all" { verify::SUITES.to_vec() } else { vec![suite] };
    names
        .into_iter()
        .map(|s| {
            let v = verify::run_suite(s, depth, seed, cases).ok_or_else(|| InputError::new_err(format!("unknown suite {s}")))?;
            Ok((v.suite, v.cases, v.failures.len(), v.millis))
        })
        .collect()
}

#[pymodule]
fn revrand(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("InvariantError", py.get_type::<InvariantError>())?;
    m.add("InsufficientError", py.get_type::<InsufficientError>())?;
    m.add_class::<PyPrefixSet>()?;
    m.add_class::<PyOpenCode>()?;
    m.add_class::<PyMart>()?;
    m.add_function(wrap_pyfunction!(ml_escape_row, m)?)?;
    m.add_function(wrap_pyfunction!(incl_excl_bound, m)?)?;
    m.add_function(wrap_pyfunction!(interleave, m)?)?;
    m.add_function(wrap_pyfunction!(thin, m)?)?;
    m.add_function(wrap_pyfunction!(cover, m)?)?;
    m.add_function(wrap_pyfunction!(c_table, m)?)?;
    m.add_function(wrap_pyfunction!(compress, m)?)?;
    m.add_function(wrap_pyfunction!(sr2cr, m)?)?;
    m.add_function(wrap_pyfunction!(balanced, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    Ok(())
}
