//! Python bindings: load a model, contract, explain, sample steady states and
//! run the cut-off check. Solutions cross the boundary as `dict[str, float]`.

use std::collections::BTreeMap;
use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use steadyscan::explain::{min_conflict_sets, ExplainOptions};
use steadyscan::interval::BoxUnion;
use steadyscan::iron::{cutoff_response, model_by_name};
use steadyscan::model::{Assignment, Provenance};
use steadyscan::ode::SimOptions;
use steadyscan::propagate::{propagate_fixpoint, DEFAULT_TOL};
use steadyscan::sampler::{sample_steady_states, SamplerOptions};
use steadyscan::stl::StlFormula;
use steadyscan::trace::Trace;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(frozen)]
struct Model {
    inner: steadyscan::model::Model,
}

#[pymethods]
impl Model {
    /// A model file path or a built-in name (`iron_v2`, `pre_revision`).
    #[staticmethod]
    fn load(source: &str) -> PyResult<Model> {
        let inner = if Path::new(source).exists() {
            let text = std::fs::read_to_string(source).map_err(value_err)?;
            steadyscan::model::Model::parse(&text).map_err(value_err)?
        } else {
            model_by_name(source).ok_or_else(|| value_err(format!("no model file or built-in model `{source}`")))?
        };
        Ok(Model { inner })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Model> {
        steadyscan::model::Model::parse(text).map(|inner| Model { inner }).map_err(value_err)
    }

    #[getter]
    fn unknowns(&self) -> Vec<String> {
        self.inner.unknown_names().to_vec()
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner.states().to_vec()
    }

    #[getter]
    fn constraint_ids(&self) -> Vec<String> {
        self.inner.constraints().iter().map(|c| c.id.clone()).collect()
    }

    /// Contracted domains, or `None` when propagation proves inconsistency.
    #[pyo3(signature = (tol = DEFAULT_TOL))]
    fn contract(&self, tol: f64) -> Option<BTreeMap<String, (f64, f64)>> {
        let b = propagate_fixpoint(self.inner.constraints(), &self.inner.domain_box(), tol);
        if b.dims().iter().any(|d| d.is_empty()) {
            return None;
        }
        Some(b.names().iter().zip(b.dims()).map(|(n, d)| (n.clone(), (d.lo(), d.hi()))).collect())
    }

    /// Smallest removal sets restoring consistency; empty when consistent.
    #[pyo3(signature = (max_sets = 16))]
    fn explain(&self, max_sets: usize) -> Vec<Vec<String>> {
        let opts = ExplainOptions {
            max_sets,
            ..ExplainOptions::default()
        };
        min_conflict_sets(self.inner.constraints(), &self.inner.domain_box(), &opts).minimal_sets
    }

    #[pyo3(signature = (seed, target = 100, jobs = 1, max_attempts = 1_000_000))]
    fn sample(&self, py: Python<'_>, seed: u64, target: usize, jobs: usize, max_attempts: u64) -> PyResult<Vec<BTreeMap<String, f64>>> {
        let m = &self.inner;
        let run = py.detach(|| {
            let b = propagate_fixpoint(m.constraints(), &m.domain_box(), DEFAULT_TOL);
            let opts = SamplerOptions {
                seed,
                target,
                jobs,
                max_attempts,
                ..SamplerOptions::default()
            };
            sample_steady_states(m, &BoxUnion::single(b), &opts)
        });
        let run = run.map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(run
            .solutions
            .iter()
            .map(|s| s.assignment.names().iter().cloned().zip(s.values()).collect())
            .collect())
    }

    /// Stability, spec verdict and the simulated trace for one solution.
    fn cutoff_response(&self, py: Python<'_>, solution: BTreeMap<String, f64>) -> PyResult<Py<PyAny>> {
        let mut a = Assignment::empty(self.inner.unknown_names().clone());
        for (n, v) in &solution {
            a.set_by_name(n, *v, Provenance::Sampled).map_err(value_err)?;
        }
        let m = &self.inner;
        let r = py
            .detach(|| cutoff_response(m, &a, &SimOptions::default()))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let out = pyo3::types::PyDict::new(py);
        out.set_item("stability", format!("{:?}", r.stability.class).to_lowercase())?;
        out.set_item("max_real_eigenvalue", r.stability.max_real)?;
        out.set_item("satisfied", r.verdict.satisfied)?;
        out.set_item("robustness", r.verdict.robustness)?;
        out.set_item("times", r.simulation.trace.times.clone())?;
        let signals = pyo3::types::PyDict::new(py);
        for (j, n) in r.simulation.trace.names.iter().enumerate() {
            signals.set_item(n, r.simulation.trace.column(j))?;
        }
        out.set_item("signals", signals)?;
        Ok(out.into_any().unbind())
    }
}

/// Robustness of an STL formula over sampled signals.
#[pyfunction]
fn robustness(formula: &str, times: Vec<f64>, signals: BTreeMap<String, Vec<f64>>) -> PyResult<f64> {
    let names: Vec<String> = signals.keys().cloned().collect();
    let rows = (0..times.len())
        .map(|k| signals.values().map(|col| col.get(k).copied().unwrap_or(f64::NAN)).collect())
        .collect();
    let trace = Trace::from_rows(names.clone(), times, rows).map_err(value_err)?;
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let f = StlFormula::parse(formula, &refs).map_err(value_err)?;
    f.robustness(&trace).map_err(value_err)
}

#[pymodule]
fn pysteadyscan(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(robustness, m)?)?;
    Ok(())
}
