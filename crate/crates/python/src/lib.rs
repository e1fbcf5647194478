//! Python bindings: observables, states, truncation, the truncated estimator,
//! variance reports, grouping and the finite-shot harness.

use cbs_core::cbs::{self as estimator, TruncationResult};
use cbs_core::grouping::{self, Relation};
use cbs_core::sampling::{self, ExperimentConfig};
use cbs_core::state;
use cbs_core::variance::{self, AllocationMode, VarianceReport};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(cbs, CbsError, PyException);

fn err(e: cbs_core::Error) -> PyErr {
    CbsError::new_err(format!("[{}] {e}", e.kind()))
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for cbs_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

fn relation(name: &str) -> PyResult<Relation> {
    name.parse().py()
}

#[pyclass(name = "Observable", module = "cbs", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyObservable(cbs_core::Observable);

#[pymethods]
impl PyObservable {
    /// Build from `(coefficient, "X0 Y2")` pairs; an empty string is the identity.
    #[new]
    fn new(n_qubits: usize, terms: Vec<(f64, String)>) -> PyResult<Self> {
        let pairs: Vec<(f64, &str)> = terms.iter().map(|(c, s)| (*c, s.as_str())).collect();
        cbs_core::Observable::from_pairs(n_qubits, &pairs).py().map(Self)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        cbs_core::Observable::from_json(text.as_bytes()).py().map(Self)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| err(e.into()))?;
        cbs_core::Observable::from_json(&bytes).py().map(Self)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.0.n_qubits()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn terms(&self) -> Vec<(f64, String)> {
        self.0.terms().iter().map(|t| (t.coeff, t.string.to_string())).collect()
    }

    /// `<m|O|n>` for basis labels `m`, `n`.
    fn transition(&self, m: u64, n: u64) -> PyResult<Complex64> {
        self.0.transition(m, n).py()
    }

    fn expectation(&self, psi: &PyStateVector) -> PyResult<f64> {
        state::expectation(&self.0, &psi.0).py()
    }

    fn __repr__(&self) -> String {
        format!("Observable(n_qubits={}, terms={})", self.0.n_qubits(), self.0.len())
    }
}

#[pyclass(name = "StateVector", module = "cbs", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyStateVector(cbs_core::StateVector);

#[pymethods]
impl PyStateVector {
    /// Normalizes the given amplitudes.
    #[new]
    fn new(n_qubits: usize, amplitudes: Vec<Complex64>) -> PyResult<Self> {
        cbs_core::StateVector::normalized(n_qubits, amplitudes).py().map(Self)
    }

    #[staticmethod]
    fn basis_state(n_qubits: usize, label: u64) -> PyResult<Self> {
        cbs_core::StateVector::basis_state(n_qubits, label).py().map(Self)
    }

    #[staticmethod]
    #[pyo3(signature = (n_qubits, seed, real = false))]
    fn random(n_qubits: usize, seed: u64, real: bool) -> PyResult<Self> {
        cbs_core::StateVector::random(n_qubits, seed, real).py().map(Self)
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.0.n_qubits()
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.0.amplitudes().to_vec()
    }

    /// Nonzero basis probabilities keyed by label.
    fn probabilities(&self) -> Vec<(u64, f64)> {
        state::basis_probabilities(&self.0).into_iter().collect()
    }

    fn __repr__(&self) -> String {
        format!("StateVector(n_qubits={})", self.0.n_qubits())
    }
}

#[pyclass(name = "Truncation", module = "cbs", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTruncation(TruncationResult);

#[pymethods]
impl PyTruncation {
    #[getter]
    fn r(&self) -> usize {
        self.0.r()
    }

    #[getter]
    fn labels(&self) -> Vec<u64> {
        self.0.labels.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights.clone()
    }

    #[getter]
    fn infidelity(&self) -> f64 {
        self.0.infidelity
    }

    fn truncated_state(&self, psi: &PyStateVector) -> PyResult<PyStateVector> {
        self.0.truncated_state(&psi.0).py().map(PyStateVector)
    }

    fn __repr__(&self) -> String {
        format!("Truncation(r={}, infidelity={:e})", self.0.r(), self.0.infidelity)
    }
}

#[pyclass(name = "GroundState", module = "cbs", frozen, get_all)]
struct PyGroundState {
    energy: f64,
    state: PyStateVector,
    residual: f64,
    degenerate: bool,
    first_excited: Option<f64>,
}

#[pyfunction]
#[pyo3(signature = (h, tol = 1e-10))]
fn ground_state(h: &PyObservable, tol: f64) -> PyResult<PyGroundState> {
    let gs = state::ground_state(&h.0, tol).py()?;
    Ok(PyGroundState {
        energy: gs.energy,
        state: PyStateVector(gs.state),
        residual: gs.residual,
        degenerate: gs.degenerate,
        first_excited: gs.first_excited,
    })
}

#[pyfunction]
#[pyo3(signature = (psi, epsilon = 1e-4, particle_number = None))]
fn truncate(psi: &PyStateVector, epsilon: f64, particle_number: Option<u32>) -> PyResult<PyTruncation> {
    let mut probs = state::basis_probabilities(&psi.0);
    if let Some(n) = particle_number {
        probs = estimator::symmetry_filter(&probs, n).py()?.probs;
    }
    estimator::truncate(&probs, epsilon).py().map(PyTruncation)
}

/// Truncated expectation value with exact interference probabilities.
#[pyfunction]
#[pyo3(signature = (h, psi, truncation, normalize = true))]
fn cbs_expectation(h: &PyObservable, psi: &PyStateVector, truncation: &PyTruncation, normalize: bool) -> PyResult<f64> {
    let intf = estimator::interference_set(&psi.0, &truncation.0).py()?;
    estimator::cbs_expectation(&h.0, &truncation.0, &intf, normalize).py()
}

fn report_dict<'py>(py: Python<'py>, report: &VarianceReport) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("mode", report.mode.to_string())?;
    out.set_item("c_v", report.c_v)?;
    out.set_item("total_variance", report.total_variance)?;
    let streams: Vec<(String, f64, u64)> = report.streams.iter().map(|s| (s.name.clone(), s.v, s.shots)).collect();
    out.set_item("streams", streams)?;
    Ok(out)
}

/// Variance report of the truncated estimator; `mode` is "exact" or "heuristic".
#[pyfunction]
#[pyo3(signature = (h, psi, truncation, mode = "exact", w = variance::DEFAULT_W, shots = 10_000))]
fn cbs_variance<'py>(
    py: Python<'py>,
    h: &PyObservable,
    psi: &PyStateVector,
    truncation: &PyTruncation,
    mode: &str,
    w: f64,
    shots: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let intf = estimator::interference_set(&psi.0, &truncation.0).py()?;
    let report = match mode {
        "exact" => variance::cbs_exact_report(&h.0, &truncation.0, &intf, shots),
        "heuristic" => variance::cbs_heuristic_report(&h.0, &truncation.0, &intf, w, shots),
        other => return Err(CbsError::new_err(format!("[domain] unknown mode '{other}'"))),
    }
    .py()?;
    report_dict(py, &report)
}

/// Variance report of the grouped estimator; `mode` is "exact" or "haar".
#[pyfunction]
#[pyo3(signature = (h, psi, relation = "qwc", mode = "exact", shots = 10_000))]
fn conventional_variance<'py>(
    py: Python<'py>,
    h: &PyObservable,
    psi: &PyStateVector,
    relation: &str,
    mode: &str,
    shots: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = match mode {
        "exact" => AllocationMode::Exact,
        "haar" => AllocationMode::Haar,
        other => return Err(CbsError::new_err(format!("[domain] unknown mode '{other}'"))),
    };
    let grouping = grouping::sorted_insertion(&h.0, self::relation(relation)?);
    let report = variance::conventional_variance(&h.0, &grouping, &psi.0, mode, shots).py()?;
    report_dict(py, &report)
}

#[pyfunction]
fn shots_to_target(c_v: f64, target_sd: f64) -> PyResult<u64> {
    variance::shots_to_target(c_v, target_sd).py()
}

#[pyfunction]
fn importance_sampling_variance(h: &PyObservable, psi: &PyStateVector) -> PyResult<f64> {
    variance::importance_sampling_variance(&h.0, &psi.0).py()
}

/// Groups of term indices; the identity term is left out.
#[pyfunction]
#[pyo3(signature = (h, relation = "qwc"))]
fn sorted_insertion(h: &PyObservable, relation: &str) -> PyResult<Vec<Vec<usize>>> {
    Ok(grouping::sorted_insertion(&h.0, self::relation(relation)?).groups)
}

/// Finite-shot emulation over `replicas` seeded replicas.
#[pyfunction]
#[pyo3(signature = (h, psi, l_f = 10_000, replicas = 100, seed = 0, epsilon_freq = 1e-4, heuristic = false, w = variance::DEFAULT_W, particle_number = None, normalize = true))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    h: &PyObservable,
    psi: &PyStateVector,
    l_f: u64,
    replicas: usize,
    seed: u64,
    epsilon_freq: f64,
    heuristic: bool,
    w: f64,
    particle_number: Option<u32>,
    normalize: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig {
        l_f,
        epsilon_freq,
        replicas_m: replicas,
        outer_m_prime: 1,
        base_seed: seed,
        allocation_mode: if heuristic { AllocationMode::HeuristicW } else { AllocationMode::Exact },
        w,
        particle_filter: particle_number,
        normalize,
    };
    let r = sampling::run_procedure_2(&h.0, &psi.0, &cfg).py()?;
    let out = PyDict::new(py);
    out.set_item("energies", r.energies())?;
    out.set_item("failures", r.failures)?;
    out.set_item("mean", r.mean)?;
    out.set_item("sd", r.sd)?;
    out.set_item("mean_shots", r.mean_shots)?;
    out.set_item("sigma_one", r.sigma_one)?;
    Ok(out)
}

#[pymodule]
fn cbs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CbsError", m.py().get_type::<CbsError>())?;
    m.add_class::<PyObservable>()?;
    m.add_class::<PyStateVector>()?;
    m.add_class::<PyTruncation>()?;
    m.add_class::<PyGroundState>()?;
    m.add_function(wrap_pyfunction!(ground_state, m)?)?;
    m.add_function(wrap_pyfunction!(truncate, m)?)?;
    m.add_function(wrap_pyfunction!(cbs_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(cbs_variance, m)?)?;
    m.add_function(wrap_pyfunction!(conventional_variance, m)?)?;
    m.add_function(wrap_pyfunction!(shots_to_target, m)?)?;
    m.add_function(wrap_pyfunction!(importance_sampling_variance, m)?)?;
    m.add_function(wrap_pyfunction!(sorted_insertion, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
