//! Python bindings. Events travel as JSON strings or dicts; results come
//! back as plain Python objects.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use rulegraph::detector::{detect_stream, validate_ruleset, Ruleset};
use rulegraph::event::{flatten_event, TypeConfig};
use rulegraph::harness::generate::preset;
use rulegraph::harness::metrics::Metrics;
use rulegraph::harness::perturb::{perturb as perturb_lines, PerturbMode};
use rulegraph::hypergraph::RuleHypergraph;
use rulegraph::regex::{intersects, parse, sample_words, Matcher};
use rulegraph::similarity::{top_pairs, vertex_scores_with, LabelModel};
use rulegraph::synth::merge_regex;
use rulegraph::trainer::{train as train_rules, TrainConfig};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any().unbind(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any().unbind(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any().unbind()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

/// Accepts a JSON string or any object `json.dumps` can serialize.
fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = match obj.extract::<String>() {
        Ok(s) => s,
        Err(_) => obj
            .py()
            .import("json")?
            .call_method1("dumps", (obj,))?
            .extract()?,
    };
    serde_json::from_str(&text).map_err(err)
}

fn load_types(types: Option<&Bound<'_, PyAny>>) -> PyResult<TypeConfig> {
    match types {
        Some(t) if !t.is_none() => TypeConfig::from_json(&from_py(t)?).map_err(err),
        _ => Ok(TypeConfig::default()),
    }
}

/// A restricted regular expression: literal unions and bounded classes.
#[pyclass(name = "Pattern", module = "rulegraph_py", frozen)]
struct PyPattern {
    inner: rulegraph::regex::Pattern,
    matcher: Matcher,
}

#[pymethods]
impl PyPattern {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let inner = parse(text).map_err(err)?;
        let matcher = Matcher::new(&inner);
        Ok(PyPattern { inner, matcher })
    }

    #[staticmethod]
    fn literal(text: &str) -> Self {
        let inner = rulegraph::regex::Pattern::literal(text);
        let matcher = Matcher::new(&inner);
        PyPattern { inner, matcher }
    }

    fn render(&self) -> String {
        self.inner.render()
    }

    fn matches(&self, s: &str) -> bool {
        self.matcher.is_match(s)
    }

    fn intersects(&self, other: &PyPattern) -> bool {
        intersects(&self.inner, &other.inner)
    }

    /// Exact language size as a decimal string.
    fn word_count(&self) -> String {
        self.inner.word_count().to_string()
    }

    /// `(node_count, log_word_count, scalar)`.
    fn cost(&self) -> (u64, f64, f64) {
        let c = self.inner.cost();
        (c.node_count, c.log_word_count, c.scalar())
    }

    #[pyo3(signature = (n, seed = 0))]
    fn sample(&self, n: usize, seed: u64) -> Vec<String> {
        sample_words(&self.inner, n, seed)
    }

    fn __repr__(&self) -> String {
        format!("Pattern({:?})", self.inner.render())
    }

    fn __str__(&self) -> String {
        self.inner.render()
    }

    fn __eq__(&self, other: &PyPattern) -> bool {
        self.inner == other.inner
    }
}

/// Least-cost pattern covering `a` and `b` that intersects no negative, or
/// `None`.
#[pyfunction]
#[pyo3(signature = (a, b, negatives = Vec::new()))]
fn merge(a: &str, b: &str, negatives: Vec<String>) -> PyResult<Option<String>> {
    let a = parse(a).map_err(err)?;
    let b = parse(b).map_err(err)?;
    let negs = negatives.iter().map(|n| parse(n)).collect::<Result<Vec<_>, _>>().map_err(err)?;
    Ok(merge_regex(&a, &b, &negs).map(|p| p.render()))
}

/// A learned ruleset.
#[pyclass(name = "Ruleset", module = "rulegraph_py", frozen)]
struct PyRuleset {
    inner: Ruleset,
    types: TypeConfig,
}

impl PyRuleset {
    fn wrap(inner: Ruleset) -> PyResult<Self> {
        let types = inner.types().map_err(err)?;
        Ok(PyRuleset { inner, types })
    }
}

#[pymethods]
impl PyRuleset {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        PyRuleset::wrap(text.parse::<Ruleset>().map_err(err)?)
    }

    fn to_json(&self) -> String {
        self.inner.to_string_pretty()
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.to_json())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Overlapping rule id pairs; empty for a valid ruleset.
    fn validate(&self) -> Vec<(String, String)> {
        validate_ruleset(&self.inner)
    }

    /// Verdict for one event given as a dict or JSON string.
    fn match_event(&self, py: Python<'_>, event: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        let line = serde_json::to_string(&from_py(event)?).map_err(err)?;
        let r = self.inner.match_line(&line, &self.types);
        to_py(py, &serde_json::to_value(r).map_err(err)?)
    }

    /// Verdicts for JSONL lines, in order, plus summary counters.
    #[pyo3(signature = (lines, single_core = false))]
    fn detect(&self, py: Python<'_>, lines: Vec<String>, single_core: bool) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
        let (results, summary) = py.detach(|| detect_stream(&self.inner, &self.types, &lines, single_core));
        let results = serde_json::to_value(results).map_err(err)?;
        let summary = serde_json::to_value(summary).map_err(err)?;
        Ok((to_py(py, &results)?, to_py(py, &summary)?))
    }

    fn __repr__(&self) -> String {
        format!("Ruleset({} rules)", self.inner.len())
    }
}

/// Learns a ruleset from events (dicts or JSON strings). Returns the ruleset
/// and the training report.
#[pyfunction]
#[pyo3(signature = (events, types = None, threshold = None, iterations = None, decay = None, samples = None, seed = None))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    events: Vec<Bound<'_, PyAny>>,
    types: Option<&Bound<'_, PyAny>>,
    threshold: Option<f64>,
    iterations: Option<usize>,
    decay: Option<f64>,
    samples: Option<usize>,
    seed: Option<u64>,
) -> PyResult<(PyRuleset, Py<PyAny>)> {
    let types = load_types(types)?;
    let records = events
        .iter()
        .map(|e| flatten_event(&from_py(e)?, &types).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    let mut config = TrainConfig::default();
    if let Some(x) = threshold {
        config.sim.merge_threshold = x;
    }
    if let Some(x) = iterations {
        config.sim.iterations = x;
    }
    if let Some(x) = decay {
        config.sim.decay_factor = x;
    }
    if let Some(x) = samples {
        config.sim.sample_count = x;
    }
    if let Some(x) = seed {
        config.sim.seed = x;
    }
    let (rs, report) = py.detach(|| train_rules(&records, &types, &config)).map_err(err)?;
    let report = to_py(py, &serde_json::to_value(report).map_err(err)?)?;
    Ok((PyRuleset::wrap(rs)?, report))
}

/// `(train, test, types)` for a named corpus preset.
#[pyfunction]
#[pyo3(signature = (name, seed = 0))]
fn generate(py: Python<'_>, name: &str, seed: u64) -> PyResult<(Py<PyAny>, Py<PyAny>, Py<PyAny>)> {
    let c = py.detach(|| preset(name, seed)).map_err(err)?;
    Ok((
        to_py(py, &Value::Array(c.train))?,
        to_py(py, &Value::Array(c.test))?,
        to_py(py, &c.types)?,
    ))
}

/// Precision, recall and F1 from confusion counts.
#[pyfunction]
fn metrics(py: Python<'_>, tp: u64, fp: u64, fn_: u64, tn: u64) -> PyResult<Py<PyAny>> {
    to_py(py, &serde_json::to_value(Metrics::from_counts(tp, fp, fn_, tn)).map_err(err)?)
}

/// Drops, duplicates or shuffles a fraction of a list.
#[pyfunction]
#[pyo3(signature = (items, mode, level, seed = 0))]
fn perturb<'py>(items: Vec<Bound<'py, PyAny>>, mode: &str, level: f64, seed: u64) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let mode: PerturbMode = mode.parse().map_err(err)?;
    let idx: Vec<usize> = (0..items.len()).collect();
    let out = perturb_lines(&idx, mode, level, seed).map_err(err)?;
    Ok(out.into_iter().map(|i| items[i].clone()).collect())
}

/// The `top` most similar same-key/type entity pairs of a training set.
#[pyfunction]
#[pyo3(signature = (events, types = None, top = 20))]
fn similar_pairs(py: Python<'_>, events: Vec<Bound<'_, PyAny>>, types: Option<&Bound<'_, PyAny>>, top: usize) -> PyResult<Py<PyAny>> {
    let types = load_types(types)?;
    let records = events
        .iter()
        .map(|e| flatten_event(&from_py(e)?, &types).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    let g = RuleHypergraph::build_from_events(&records).map_err(err)?;
    let config = TrainConfig::default();
    let labels = LabelModel::new(config.sim.sample_count, config.sim.seed);
    let scores = vertex_scores_with(&g, &config.sim, &labels);
    to_py(py, &Value::Array(top_pairs(&g, &scores, top)))
}

#[pymodule]
fn rulegraph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPattern>()?;
    m.add_class::<PyRuleset>()?;
    m.add_function(wrap_pyfunction!(merge, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(perturb, m)?)?;
    m.add_function(wrap_pyfunction!(similar_pairs, m)?)?;
    Ok(())
}
