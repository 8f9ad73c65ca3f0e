//! Python bindings: instances, embeddings, the anytime planner and the
//! simulator. Reports cross the boundary as plain dicts.

use std::time::Duration;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use sfe_core::milp::{check_embedding, TrafficSystemEmbedding};
use sfe_core::scenario::{generate, Family, ScenarioSpec};
use sfe_core::search::{ts_planner, Budget, HighsSolver, SearchConfig};
use sfe_core::sim::run_simulation;
use sfe_core::{fixtures, SfeInstance};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Instance", frozen)]
struct PyInstance {
    inner: SfeInstance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyInstance { inner: SfeInstance::from_json(text).map_err(value_err)? })
    }

    /// Generated scenario: family is "line-chain", "assembly-tree" or "grid-mesh".
    #[staticmethod]
    #[pyo3(signature = (family, machines, seed=0))]
    fn generate(family: &str, machines: usize, seed: u64) -> PyResult<Self> {
        let family: Family = family.parse().map_err(PyValueError::new_err)?;
        Ok(PyInstance { inner: generate(&ScenarioSpec::new(family, machines, seed)).map_err(value_err)? })
    }

    /// Two self-loop roads around one junction, one source and one sink.
    #[staticmethod]
    #[pyo3(signature = (agents=1))]
    fn toy(agents: usize) -> Self {
        PyInstance { inner: fixtures::two_loop_toy(agents) }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn with_agents(&self, agents: usize) -> Self {
        PyInstance { inner: self.inner.with_agents(agents) }
    }

    #[getter]
    fn agents(&self) -> usize {
        self.inner.agents
    }

    #[getter]
    fn num_machines(&self) -> usize {
        self.inner.num_machines()
    }

    #[getter]
    fn num_roads(&self) -> usize {
        self.inner.num_roads()
    }

    #[getter]
    fn num_junctions(&self) -> usize {
        self.inner.num_junctions()
    }

    #[getter]
    fn num_tokens(&self) -> usize {
        self.inner.num_tokens()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(machines={}, roads={}, junctions={}, agents={})",
            self.inner.num_machines(),
            self.inner.num_roads(),
            self.inner.num_junctions(),
            self.inner.agents
        )
    }
}

#[pyclass(name = "Embedding", frozen)]
struct PyEmbedding {
    inner: TrafficSystemEmbedding,
}

#[pymethods]
impl PyEmbedding {
    #[staticmethod]
    fn from_json(instance: &PyInstance, text: &str) -> PyResult<Self> {
        Ok(PyEmbedding { inner: TrafficSystemEmbedding::from_json(&instance.inner, text).map_err(value_err)? })
    }

    fn to_json(&self, instance: &PyInstance) -> String {
        self.inner.to_json(&instance.inner)
    }

    /// Finished products per timestep.
    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective_value()
    }

    /// Exact objective as `(numerator, denominator)`.
    #[getter]
    fn objective_fraction(&self) -> (i64, i64) {
        (*self.inner.objective.numer(), *self.inner.objective.denom())
    }

    #[getter]
    fn num_epochs(&self) -> usize {
        self.inner.hyper.num_epochs
    }

    #[getter]
    fn epoch_len(&self) -> usize {
        self.inner.hyper.epoch_len
    }

    #[getter]
    fn agents_used(&self) -> u32 {
        self.inner.agents_used()
    }

    /// Violated constraints, empty when the plan is feasible.
    fn check(&self, instance: &PyInstance) -> Vec<String> {
        check_embedding(&instance.inner, &self.inner).iter().map(ToString::to_string).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Embedding(N={}, L={}, objective={}, agents={})",
            self.inner.hyper.num_epochs,
            self.inner.hyper.epoch_len,
            self.inner.objective,
            self.inner.agents_used()
        )
    }
}

/// Validation messages for an instance document; empty when valid.
#[pyfunction]
fn validate(text: &str) -> PyResult<Vec<String>> {
    match SfeInstance::from_json(text) {
        Ok(_) => Ok(Vec::new()),
        Err(sfe_core::ModelError::Parse(e)) => Err(PyValueError::new_err(e)),
        Err(e) => Ok(e.violations().iter().map(ToString::to_string).collect()),
    }
}

/// Runs the anytime planner. Returns `(embedding or None, trace)`.
#[pyfunction]
#[pyo3(signature = (instance, budget=60.0, gamma=2, delta=1, max_n=None, attempts=None))]
fn solve<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    budget: f64,
    gamma: usize,
    delta: usize,
    max_n: Option<usize>,
    attempts: Option<usize>,
) -> PyResult<(Option<PyEmbedding>, Bound<'py, PyAny>)> {
    let budget = match attempts {
        Some(n) => Budget::Attempts(n),
        None => Budget::WallClock(Duration::try_from_secs_f64(budget).map_err(value_err)?),
    };
    let config = SearchConfig { budget, gamma, delta, max_n, ..SearchConfig::default() };
    config.validate().map_err(value_err)?;
    let inst = &instance.inner;
    let res = py.detach(|| ts_planner(inst, &config, &mut HighsSolver::default()));
    let trace = to_py(py, &res.trace)?;
    Ok((res.best.map(|inner| PyEmbedding { inner }), trace))
}

/// Runs the generator for `cycles` cycles and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (instance, embedding, cycles=3, seed=0))]
fn simulate<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    embedding: &PyEmbedding,
    cycles: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let (inst, emb) = (&instance.inner, &embedding.inner);
    let report = py.detach(|| run_simulation(inst, emb, cycles, seed));
    to_py(py, &report)
}

#[pymodule]
fn sfe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyEmbedding>()?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
