//! Python bindings. Structured results cross the boundary as JSON and come
//! out as plain dicts and lists.

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use shatter::color::{defective_color, edge_color, misra_gries, EdgeColorOptions};
use shatter::divide::{q_divide_graph, DivideParams, ThresholdMode};
use shatter::graph::gen::{d_regular, gnp_capped};
use shatter::graph::io::{load_edge_list, to_edge_list};
use shatter::graph::to_bipartite_split_instance;
use shatter::runner::{execute_on, Algorithm, Input, InputSpec, RunConfig};
use shatter::sim::SimMode;
use shatter::split::{k_split_graph, SplitParams};
use shatter::verify::{check_defective, check_split_graph};

fn err(e: shatter::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// `(palette, [(u, v, color)])`
type Coloring = (u32, Vec<(u32, u32, u32)>);

fn mode(congest: bool, n: usize) -> SimMode {
    if congest {
        SimMode::congest(n)
    } else {
        SimMode::local()
    }
}

/// Simple undirected graph on nodes `0..n`.
#[pyclass(name = "Graph", module = "shatter_py", frozen)]
struct PyGraph {
    inner: shatter::graph::Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(u32, u32)>) -> PyResult<Self> {
        let inner = shatter::graph::Graph::from_edges(n, edges).map_err(err)?;
        Ok(PyGraph { inner })
    }

    #[staticmethod]
    fn d_regular(n: usize, degree: usize, seed: u64) -> PyResult<Self> {
        Ok(PyGraph { inner: d_regular(n, degree, seed).map_err(err)? })
    }

    /// Erdős–Rényi graph with edges dropped until no degree exceeds `degree`.
    #[staticmethod]
    fn gnp(n: usize, degree: usize, seed: u64) -> PyResult<Self> {
        Ok(PyGraph { inner: gnp_capped(n, degree, seed).map_err(err)? })
    }

    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        Ok(PyGraph { inner: load_edge_list(text).map_err(err)? })
    }

    fn to_edge_list(&self) -> String {
        to_edge_list(&self.inner)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn max_degree(&self) -> usize {
        self.inner.max_degree()
    }

    fn degree(&self, v: u32) -> PyResult<usize> {
        self.check(v)?;
        Ok(self.inner.degree(v))
    }

    fn neighbors(&self, v: u32) -> PyResult<Vec<u32>> {
        self.check(v)?;
        Ok(self.inner.neighbors(v).to_vec())
    }

    fn edges(&self) -> Vec<(u32, u32)> {
        self.inner.edges().collect()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={}, max_degree={})", self.inner.n(), self.inner.m(), self.inner.max_degree())
    }
}

impl PyGraph {
    fn check(&self, v: u32) -> PyResult<()> {
        if (v as usize) < self.inner.n() {
            Ok(())
        } else {
            Err(PyIndexError::new_err(format!("node {v} out of range")))
        }
    }
}

/// Splits the nodes into `k` parts so every neighborhood is balanced up to
/// `eps·Δ/k`. Returns `{"parts", "stats", "rounds", "bits"}`.
#[pyfunction]
#[pyo3(signature = (graph, k, eps = 0.5, seed = 0, congest = false))]
fn split<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    k: u32,
    eps: f64,
    seed: u64,
    congest: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let g = &graph.inner;
    let out = py.detach(|| k_split_graph(g, &SplitParams::new(k, eps), mode(congest, g.n()), seed)).map_err(err)?;
    let value = serde_json::json!({
        "parts": out.parts,
        "stats": out.stats,
        "rounds": out.report.rounds,
        "bits": out.report.bits_total,
    });
    to_py(py, &value)
}

/// Slot of every node; `thresholds` is `"uniform"` or `"local"`.
#[pyfunction]
#[pyo3(signature = (graph, q, seed = 0, thresholds = "uniform", congest = false))]
fn q_divide(py: Python<'_>, graph: &PyGraph, q: u32, seed: u64, thresholds: &str, congest: bool) -> PyResult<Vec<u32>> {
    let mut params = DivideParams::new(q);
    params.thresholds = match thresholds {
        "uniform" => ThresholdMode::Uniform,
        "local" => ThresholdMode::Local,
        other => return Err(PyValueError::new_err(format!("unknown thresholds {other:?}"))),
    };
    let g = &graph.inner;
    let (schedule, _) = py.detach(|| q_divide_graph(g, &params, mode(congest, g.n()), seed)).map_err(err)?;
    Ok(schedule.slots)
}

#[pyfunction]
#[pyo3(signature = (graph, eps = 0.5, seed = 0, congest = false))]
fn color_edges(py: Python<'_>, graph: &PyGraph, eps: f64, seed: u64, congest: bool) -> PyResult<Coloring> {
    let g = &graph.inner;
    let out =
        py.detach(|| edge_color(g, eps, mode(congest, g.n()), seed, &EdgeColorOptions::default())).map_err(err)?;
    Ok((out.coloring.palette, out.coloring.colors))
}

/// Sequential `(Δ+1)`-edge coloring.
#[pyfunction]
fn misra_gries_color(graph: &PyGraph) -> Coloring {
    let c = misra_gries(&graph.inner);
    (c.palette, c.colors)
}

/// `k` colors with defect at most `(1+eps)·Δ/k`.
#[pyfunction]
#[pyo3(signature = (graph, k, eps = 0.5, seed = 0))]
fn color_defective(py: Python<'_>, graph: &PyGraph, k: u32, eps: f64, seed: u64) -> PyResult<Vec<u32>> {
    let g = &graph.inner;
    let (colors, _) = py.detach(|| defective_color(g, k, eps, SimMode::local(), seed)).map_err(err)?;
    Ok(colors)
}

#[pyfunction]
#[pyo3(signature = (graph, parts, k, eps = 0.5))]
fn check_split<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    parts: Vec<u32>,
    k: u32,
    eps: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &check_split_graph(&graph.inner, &parts, k, eps))
}

#[pyfunction]
fn check_defect<'py>(py: Python<'py>, graph: &PyGraph, colors: Vec<u32>, bound: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &check_defective(&graph.inner, &colors, bound))
}

/// Splitting instance of a graph: one event per node over its neighbors.
#[pyfunction]
fn bipartite_instance(graph: &PyGraph) -> String {
    shatter::graph::io::to_bipartite_text(&to_bipartite_split_instance(&graph.inner))
}

/// Text of a generated instance, e.g. `generate("dregular:100:4", 7)`.
#[pyfunction]
#[pyo3(signature = (spec, seed = 0))]
fn generate(spec: &str, seed: u64) -> PyResult<String> {
    let spec: InputSpec = spec.parse().map_err(err)?;
    Ok(Input::load(&spec, seed).map_err(err)?.to_text())
}

/// Runs one algorithm end to end and checks its output, like the `run`
/// subcommand. `source` is a `Graph`, a generator string, or a file path.
/// Keyword options override `RunConfig` fields (`k`, `q`, `eps`, `model`, ...).
/// Returns `{"artifact", "check", "report"}`.
#[pyfunction]
#[pyo3(signature = (algorithm, source, seed = 0, **options))]
fn run<'py>(
    py: Python<'py>,
    algorithm: &str,
    source: &Bound<'py, PyAny>,
    seed: u64,
    options: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let algo: Algorithm = algorithm.parse().map_err(err)?;
    let (spec, input) = if let Ok(g) = source.cast::<PyGraph>() {
        let spec = InputSpec::File { path: "<memory>".into() };
        (spec, Input::Graph(g.get().inner.clone()))
    } else {
        let text: String = source.extract()?;
        let spec = text.parse().unwrap_or(InputSpec::File { path: text.into() });
        let input = Input::load(&spec, seed).map_err(err)?;
        (spec, input)
    };
    let mut config = RunConfig::new(algo, spec, seed);
    if let Some(options) = options {
        let overrides: String = py.import("json")?.call_method1("dumps", (options,))?.extract()?;
        let overrides: serde_json::Value =
            serde_json::from_str(&overrides).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let mut merged = serde_json::to_value(&config).map_err(|e| PyValueError::new_err(e.to_string()))?;
        for (key, value) in overrides.as_object().into_iter().flatten() {
            if merged.get(key).is_none() {
                return Err(PyValueError::new_err(format!("unknown option {key:?}")));
            }
            merged[key] = value.clone();
        }
        config = serde_json::from_value(merged).map_err(|e| PyValueError::new_err(e.to_string()))?;
    }
    let out = py.detach(|| execute_on(&config, &input)).map_err(err)?;
    to_py(py, &out)
}

#[pymodule]
fn shatter_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(q_divide, m)?)?;
    m.add_function(wrap_pyfunction!(color_edges, m)?)?;
    m.add_function(wrap_pyfunction!(misra_gries_color, m)?)?;
    m.add_function(wrap_pyfunction!(color_defective, m)?)?;
    m.add_function(wrap_pyfunction!(check_split, m)?)?;
    m.add_function(wrap_pyfunction!(check_defect, m)?)?;
    m.add_function(wrap_pyfunction!(bipartite_instance, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("ALGORITHMS", Algorithm::ALL.map(Algorithm::name).to_vec())?;
    Ok(())
}
