//! Python bindings: parse and write instances, run the solvers, verify answers, generate inputs.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use uaq_core::generators::{self, BipartiteGraph, BipartiteInstance, RandomSpec};
use uaq_core::io::{parse_instance, serialize_instance};
use uaq_core::{run_engine, ClassParams, Engine, EngineError, EngineOptions, RepConfig, Solution};

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A parsed authorization query instance.
#[pyclass(name = "Instance", frozen)]
struct PyInstance {
    inner: uaq_core::Instance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyInstance {
            inner: parse_instance(text).map_err(value_error)?,
        })
    }

    /// Canonical JSON form.
    fn to_json(&self) -> String {
        serialize_instance(&self.inner)
    }

    #[getter]
    fn roles(&self) -> Vec<String> {
        self.inner.role_labels().to_vec()
    }

    #[getter]
    fn kr(&self) -> usize {
        self.inner.kr()
    }

    #[getter]
    fn kp(&self) -> usize {
        self.inner.kp()
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.stats();
        let d = PyDict::new(py);
        d.set_item("k_hat", s.k_hat)?;
        d.set_item("r_hat", s.r_hat)?;
        d.set_item("n_roles", s.n_roles)?;
        d.set_item("n_perms", s.n_perms)?;
        d.set_item("n_constraints", s.n_constraints)?;
        Ok(d)
    }

    /// `(passes, summary)` for the K_{alpha,beta}-free class with constraint width at most `c`.
    fn check_class(&self, alpha: usize, beta: usize, c: usize) -> PyResult<(bool, String)> {
        let report = self
            .inner
            .check_class(&ClassParams::new(alpha, beta, c).map_err(value_error)?);
        Ok((report.passes(), report.summary()))
    }

    /// Violation messages for the role set; empty when it is a solution.
    fn verify(&self, roles: Vec<String>) -> PyResult<Vec<String>> {
        let ids = roles
            .iter()
            .map(|l| {
                self.inner
                    .role_id(l)
                    .ok_or_else(|| value_error(format!("unknown role `{l}`")))
            })
            .collect::<PyResult<Vec<_>>>()?;
        let verdict = self
            .inner
            .verify_solution(&Solution::new(ids))
            .map_err(value_error)?;
        Ok(verdict.violations.iter().map(ToString::to_string).collect())
    }

    fn __repr__(&self) -> String {
        let s = self.inner.stats();
        format!(
            "Instance(roles={}, permissions={}, kr={}, kp={})",
            s.n_roles,
            s.n_perms,
            self.inner.kr(),
            self.inner.kp()
        )
    }
}

/// Runs an engine. Returns a dict with `status`, `roles` (sorted labels or None), `leaves`,
/// `table_cells` and `wall_ms`. Refusals raise ValueError, internal failures RuntimeError.
#[pyfunction]
#[pyo3(signature = (instance, engine="fpt", alpha=None, beta=None, max_constraint=None, repfam="exact", seed=0, threads=1))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    engine: &str,
    alpha: Option<usize>,
    beta: Option<usize>,
    max_constraint: Option<usize>,
    repfam: &str,
    seed: u64,
    threads: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let inst = &instance.inner;
    let engine: Engine = engine.parse().map_err(PyValueError::new_err)?;
    let params = match (alpha, beta) {
        (Some(a), Some(b)) => {
            let widest = inst
                .constraints()
                .iter()
                .map(|c| c.roles.len())
                .max()
                .unwrap_or(0);
            Some(
                ClassParams::new(a, b, max_constraint.unwrap_or(widest.max(1)))
                    .map_err(value_error)?,
            )
        }
        (None, None) => None,
        _ => {
            return Err(PyValueError::new_err(
                "alpha and beta must be given together",
            ))
        }
    };
    let repfam = match repfam {
        "exact" => RepConfig::exact(),
        "truncated" => RepConfig::truncated(seed),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown repfam mode `{other}`"
            )))
        }
    };
    let opts = EngineOptions {
        params,
        repfam,
        threads: threads.max(1),
    };
    let run = py
        .detach(|| run_engine(inst, engine, &opts))
        .map_err(|e| match e {
            EngineError::Refused(m) => PyValueError::new_err(m),
            EngineError::Failed(m) => PyRuntimeError::new_err(m),
        })?;
    let doc = run.document(inst, engine);
    let d = PyDict::new(py);
    d.set_item(
        "status",
        if run.solution.is_some() {
            "sat"
        } else {
            "unsat"
        },
    )?;
    d.set_item("roles", doc.roles)?;
    d.set_item("leaves", run.leaves)?;
    d.set_item("table_cells", run.table_cells)?;
    d.set_item("wall_ms", run.wall_ms)?;
    Ok(d)
}

/// Builds an instance. `kind` is one of rbds1, rbds2 (graph `{"a","b","edges"}` plus `k`),
/// mcb-nosod, mcb-k22 (graph `{"a_blocks","b_blocks","edges"}`) or random (a generator spec).
#[pyfunction]
#[pyo3(signature = (kind, document, k=0))]
fn generate(kind: &str, document: &str, k: usize) -> PyResult<PyInstance> {
    let bipartite = || -> PyResult<BipartiteGraph> {
        let g: BipartiteGraph = serde_json::from_str(document).map_err(value_error)?;
        BipartiteGraph::new(g.a, g.b, g.edges).map_err(value_error)
    };
    let blocked = || -> PyResult<BipartiteInstance> {
        let g: BipartiteInstance = serde_json::from_str(document).map_err(value_error)?;
        g.validate().map_err(value_error)?;
        Ok(g)
    };
    let inner = match kind {
        "rbds1" => generators::gen_rbds_type1(&bipartite()?, k),
        "rbds2" => generators::gen_rbds_type2(&bipartite()?, k),
        "mcb-nosod" => generators::gen_mcb_nosod(&blocked()?),
        "mcb-k22" => generators::gen_mcb_k22(&blocked()?),
        "random" => {
            let spec: RandomSpec = serde_json::from_str(document).map_err(value_error)?;
            generators::gen_random(&spec).map(|g| g.instance)
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown generator `{other}`"
            )))
        }
    }
    .map_err(value_error)?;
    Ok(PyInstance { inner })
}

#[pymodule]
fn uaq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    Ok(())
}
