//! Python bindings for `semvec`.
//!
//! Results with structure (reports, specs, ranking metrics) are returned as plain Python
//! dicts and lists; matrices are lists of rows. Library errors map to Python exceptions:
//! usage and config errors to `ValueError`, I/O to `OSError`, out-of-vocabulary words to
//! `KeyError`, numerical failures to `ArithmeticError`, and everything else to `ValueError`.

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyKeyError, PyOSError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use semvec::cooccur::CooccurrenceStats;
use semvec::corpus::{tokenize as core_tokenize, Dictionary, Weighting};
use semvec::factorize::analytic_factorize_dense;
use semvec::kgraph::{self, KgModel, KgTrainConfig, KnowledgeGraph, ModelKind, RankOptions, Split, TiePolicy};
use semvec::pmi::{enumerate_exact_distribution, estimate_probabilities, pmi_matrix as core_pmi, ExactSpec, MissingPolicy};
use semvec::semantics::{analogy_decomposition, verify_lemma1, verify_lemma2};
use semvec::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::OutOfVocabulary(_) => PyKeyError::new_err(e.to_string()),
        Error::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Rewrites nalgebra's `[data, rows, cols]` encoding into a flat list (vectors) or a list
/// of rows (matrices). Column-major data is transposed into rows.
fn unpack_linalg(v: &mut serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::Array(items) => {
            if let [Value::Array(data), Value::Number(r), c] = items.as_slice() {
                let r = r.as_u64().unwrap_or(0) as usize;
                let cols = match c {
                    Value::Null => Some(1),
                    Value::Number(n) => n.as_u64().map(|n| n as usize),
                    _ => None,
                };
                if let Some(cols) = cols {
                    if data.len() == r * cols && data.iter().all(Value::is_number) {
                        *v = if matches!(c, Value::Null) {
                            Value::Array(data.clone())
                        } else {
                            Value::Array((0..r).map(|i| Value::Array((0..cols).map(|j| data[j * r + i].clone()).collect())).collect())
                        };
                        return;
                    }
                }
            }
            items.iter_mut().for_each(unpack_linalg);
        }
        Value::Object(map) => map.values_mut().for_each(unpack_linalg),
        _ => {}
    }
}

/// Converts any serialisable value into Python objects through the `json` module.
fn to_object<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let mut value = serde_json::to_value(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    unpack_linalg(&mut value);
    let text = value.to_string();
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_object<T: serde::de::DeserializeOwned>(py: Python<'_>, v: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (v,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Lowercased whitespace tokens of `text`.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    core_tokenize(text).map(|t| t.into_owned()).collect()
}

fn counts(tokens: &[String], window: u32, weighting: &str, min_count: u64) -> Result<(Dictionary, CooccurrenceStats), Error> {
    let weighting: Weighting = weighting.parse()?;
    let dict = Dictionary::build(tokens.iter().map(String::as_str), min_count)?;
    let stream = dict.encode(tokens.iter().map(String::as_str));
    let stats = CooccurrenceStats::accumulate_tokens(&stream, dict.len(), window, weighting)?;
    Ok((dict, stats))
}

/// Windowed co-occurrence counts: `(vocabulary, [(target, context, weight), ...])`.
#[pyfunction]
#[pyo3(signature = (tokens, window=5, weighting="uniform", min_count=1))]
fn cooccurrence(tokens: Vec<String>, window: u32, weighting: &str, min_count: u64) -> PyResult<(Vec<String>, Vec<(u32, u32, f64)>)> {
    let (dict, stats) = counts(&tokens, window, weighting, min_count).map_err(to_py)?;
    Ok((dict.tokens().to_vec(), stats.entries()))
}

/// Dense shifted PMI matrix of a token list: `(vocabulary, rows)`; missing cells are `None`.
#[pyfunction]
#[pyo3(signature = (tokens, window=5, shift=1.0, weighting="uniform", min_count=1))]
fn pmi_matrix(
    tokens: Vec<String>,
    window: u32,
    shift: f64,
    weighting: &str,
    min_count: u64,
) -> PyResult<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    let (dict, stats) = counts(&tokens, window, weighting, min_count).map_err(to_py)?;
    let model = estimate_probabilities(&stats, &[], dict.tokens().to_vec()).map_err(to_py)?;
    let m = core_pmi(&model, shift, MissingPolicy::Undefined).map_err(to_py)?;
    let n = m.n();
    let dense = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
    Ok((dict.tokens().to_vec(), dense))
}

/// Random strictly positive exact distribution spec (a dict usable by `decompose`).
#[pyfunction]
#[pyo3(signature = (n, seed=0, alpha=1.0, symmetric=false))]
fn random_spec(py: Python<'_>, n: usize, seed: u64, alpha: f64, symmetric: bool) -> PyResult<Py<PyAny>> {
    let spec = ExactSpec::random(n, alpha, symmetric, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(to_py)?;
    to_object(py, &spec)
}

/// Checks a decomposition identity on an exact distribution and returns its report.
///
/// Give `target` and `words` for the single-word identity, `words` and `star` for the set
/// identity, or `analogy=[a, a*, b, b*]`.
#[pyfunction]
#[pyo3(signature = (spec, words=None, target=None, star=None, analogy=None))]
fn decompose(
    py: Python<'_>,
    spec: &Bound<'_, PyAny>,
    words: Option<Vec<String>>,
    target: Option<String>,
    star: Option<Vec<String>>,
    analogy: Option<Vec<String>>,
) -> PyResult<Py<PyAny>> {
    let spec: ExactSpec = from_object(py, spec)?;
    let model = enumerate_exact_distribution(&spec).map_err(to_py)?;
    let ids = |ws: &[String]| ws.iter().map(|w| model.word_id(w)).collect::<Result<Vec<u32>, Error>>();
    let report = match (analogy, target, star) {
        (Some(a), _, _) if a.len() == 4 => {
            let v = ids(&a).map_err(to_py)?;
            analogy_decomposition(&model, v[0], v[1], v[2], v[3])
        }
        (Some(_), _, _) => return Err(PyValueError::new_err("analogy needs four words")),
        (None, Some(t), _) => {
            let t = model.word_id(&t).map_err(to_py)?;
            verify_lemma1(&model, t, &ids(&words.unwrap_or_default()).map_err(to_py)?)
        }
        (None, None, Some(s)) => verify_lemma2(&model, &ids(&words.unwrap_or_default()).map_err(to_py)?, &ids(&s).map_err(to_py)?),
        (None, None, None) => return Err(PyValueError::new_err("give target, star or analogy")),
    }
    .map_err(to_py)?;
    to_object(py, &report)
}

/// Sampled surface-property report over a random base distribution of dimension `n`.
#[pyfunction]
#[pyo3(signature = (n, samples=100, seed=0))]
fn surface_check(py: Python<'_>, n: usize, samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let r = semvec::surface::check_properties(n, samples, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(to_py)?;
    to_object(py, &r)
}

fn matrix(rows_in: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows_in.len();
    let m = rows_in.first().map_or(0, Vec::len);
    if rows_in.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows_in[i][j]))
}

/// Rank-`d` eigen-factorization of a symmetric matrix: `(W, C)` as `d x n` row lists.
#[pyfunction]
fn analytic_factorize(p: Vec<Vec<f64>>, d: usize) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let p = matrix(p)?;
    let words = (0..p.nrows()).map(|i| i.to_string()).collect();
    let set = analytic_factorize_dense(&p, d, words).map_err(to_py)?;
    let c = set.c().ok_or_else(|| PyValueError::new_err("no context matrix"))?;
    Ok((rows(set.w()), rows(c)))
}

/// Hubert–Baker symmetry score of a square matrix; `None` when undefined.
#[pyfunction]
fn symmetry_score(m: Vec<Vec<f64>>) -> PyResult<Option<f64>> {
    Ok(kgraph::symmetry_score(&matrix(m)?))
}

/// Krackhardt hierarchy score of relation `r` over `(subject, relation, object)` triples.
#[pyfunction]
fn khs(py: Python<'_>, triples: Vec<(usize, usize, usize)>, r: usize) -> PyResult<Py<PyAny>> {
    to_object(py, &kgraph::khs(&triples, r).map_err(to_py)?)
}

/// Trains a knowledge-graph model on a dataset directory and saves it to `out`.
///
/// Returns the training report. `config` may override any training field.
#[pyfunction]
#[pyo3(signature = (data, model, out, config=None))]
fn kg_train(py: Python<'_>, data: PathBuf, model: &str, out: PathBuf, config: Option<&Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
    let kind: ModelKind = model.parse().map_err(to_py)?;
    let mut cfg_json = serde_json::to_value(KgTrainConfig { kind, ..KgTrainConfig::default() })
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    if let Some(c) = config {
        let over: serde_json::Map<String, serde_json::Value> = from_object(py, c)?;
        for (k, v) in over {
            cfg_json[k] = v;
        }
    }
    let cfg: KgTrainConfig = serde_json::from_value(cfg_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let (kg, _) = KnowledgeGraph::load_dir(&data).map_err(to_py)?;
    let (m, report) = py.detach(|| kgraph::train_kg(&kg, &cfg)).map_err(to_py)?;
    m.save(&out).map_err(to_py)?;
    to_object(py, &report)
}

/// Link-prediction metrics of a saved model on a dataset's test (or `valid`) split.
#[pyfunction]
#[pyo3(signature = (model, data, split="test", filtered=true, ties="pessimistic"))]
fn kg_rank(py: Python<'_>, model: PathBuf, data: PathBuf, split: &str, filtered: bool, ties: &str) -> PyResult<Py<PyAny>> {
    let split = match split {
        "test" => Split::Test,
        "valid" => Split::Valid,
        s => return Err(PyValueError::new_err(format!("split must be test or valid, got {s:?}"))),
    };
    let ties: TiePolicy = ties.parse().map_err(to_py)?;
    let m = KgModel::load(&model).map_err(to_py)?;
    let (kg, _) = KnowledgeGraph::load_dir(&data).map_err(to_py)?;
    let opts = RankOptions { ties, filtered, limit: None };
    let rep = py.detach(|| kgraph::rank_eval(&m, &kg, split, &opts)).map_err(to_py)?;
    to_object(py, &rep)
}

/// Runs a pipeline config and returns the stage summary.
#[pyfunction]
fn run_pipeline(py: Python<'_>, config: PathBuf) -> PyResult<Py<PyAny>> {
    let summary = py
        .detach(|| semvec::cli::pipeline::run_pipeline(&config, vec!["python".into(), "run_pipeline".into()]))
        .map_err(to_py)?;
    to_object(py, &summary)
}

/// Runs the command-line interface with `args` (excluding the program name); returns the exit code.
#[pyfunction]
fn cli(args: Vec<String>) -> i32 {
    semvec::cli::main_with(std::iter::once("semvec".to_string()).chain(args))
}

/// Python module `semvec`.
#[pymodule]
#[pyo3(name = "semvec")]
fn semvec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(cooccurrence, m)?)?;
    m.add_function(wrap_pyfunction!(pmi_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(random_spec, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(surface_check, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_factorize, m)?)?;
    m.add_function(wrap_pyfunction!(symmetry_score, m)?)?;
    m.add_function(wrap_pyfunction!(khs, m)?)?;
    m.add_function(wrap_pyfunction!(kg_train, m)?)?;
    m.add_function(wrap_pyfunction!(kg_rank, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
