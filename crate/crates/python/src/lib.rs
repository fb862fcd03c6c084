use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use weakamp_core::amplifier::{self, GainOperator};
use weakamp_core::error::Error;
use weakamp_core::{cloning, fock, kerr};

create_exception!(weakamp, WeakampError, PyValueError);

fn err(e: Error) -> PyErr {
    WeakampError::new_err(e.to_string())
}

/// Truncated single-mode state in the photon-number basis.
#[pyclass(name = "FockVector", module = "weakamp", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyFockVector(fock::FockVector);

#[pymethods]
impl PyFockVector {
    #[new]
    fn new(amplitudes: Vec<Complex64>) -> PyResult<Self> {
        fock::FockVector::new(amplitudes).map(Self).map_err(err)
    }

    #[staticmethod]
    fn coherent(gamma: Complex64, truncation: usize) -> PyResult<Self> {
        fock::coherent(gamma, truncation).map(Self).map_err(err)
    }

    #[staticmethod]
    fn vacuum(truncation: usize) -> Self {
        Self(fock::FockVector::vacuum(truncation))
    }

    #[staticmethod]
    fn basis(n: usize, truncation: usize) -> PyResult<Self> {
        fock::FockVector::basis(n, truncation).map(Self).map_err(err)
    }

    #[staticmethod]
    fn squeezed_vacuum(r: f64, truncation: usize) -> PyResult<Self> {
        fock::squeezed_vacuum(r, truncation).map(Self).map_err(err)
    }

    #[getter]
    fn truncation(&self) -> usize {
        self.0.truncation()
    }

    #[getter]
    fn amplitudes(&self) -> Vec<Complex64> {
        self.0.amplitudes().to_vec()
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    fn norm_sqr(&self) -> f64 {
        self.0.norm_sqr()
    }

    fn normalized(&self) -> PyResult<Self> {
        self.0.normalized().map(Self).map_err(err)
    }

    fn photon_probabilities(&self) -> Vec<f64> {
        self.0.photon_probabilities()
    }

    fn mean_photon_number(&self) -> PyResult<f64> {
        self.0.mean_photon_number().map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.dim()
    }

    fn __repr__(&self) -> String {
        format!("FockVector(truncation={}, norm={:.6})", self.0.truncation(), self.0.norm())
    }
}

#[pyclass(name = "WeakValue", module = "weakamp", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PyWeakValue(weakamp_core::weak::WeakValue);

#[pymethods]
impl PyWeakValue {
    #[getter]
    fn value(&self) -> Complex64 {
        self.0.value()
    }

    #[getter]
    fn re(&self) -> f64 {
        self.0.re()
    }

    #[getter]
    fn im(&self) -> f64 {
        self.0.im()
    }

    fn gain(&self, kappa_t: f64) -> f64 {
        self.0.gain(kappa_t)
    }

    fn __repr__(&self) -> String {
        format!("WeakValue({} {:+}j)", self.0.re(), self.0.im())
    }
}

/// Protocol parameters. Defaults: alpha = 1e4, beta = 0.2, kappa_T = 4e-5.
#[pyclass(name = "ProtocolConfig", module = "weakamp", get_all, set_all, skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PyProtocolConfig {
    alpha: f64,
    beta: f64,
    kappa_t: f64,
    truncation: usize,
    p_min: f64,
    p_max: f64,
    p_step: f64,
    window_lo: f64,
    window_hi: f64,
}

impl From<kerr::ProtocolConfig> for PyProtocolConfig {
    fn from(c: kerr::ProtocolConfig) -> Self {
        Self {
            alpha: c.alpha,
            beta: c.beta,
            kappa_t: c.kappa_t,
            truncation: c.truncation,
            p_min: c.p_min,
            p_max: c.p_max,
            p_step: c.p_step,
            window_lo: c.window_lo,
            window_hi: c.window_hi,
        }
    }
}

impl PyProtocolConfig {
    fn core(&self) -> kerr::ProtocolConfig {
        kerr::ProtocolConfig {
            alpha: self.alpha,
            beta: self.beta,
            kappa_t: self.kappa_t,
            truncation: self.truncation,
            p_min: self.p_min,
            p_max: self.p_max,
            p_step: self.p_step,
            window_lo: self.window_lo,
            window_hi: self.window_hi,
        }
    }
}

#[pymethods]
impl PyProtocolConfig {
    #[new]
    #[pyo3(signature = (kappa_t = 4e-5, beta = 0.2))]
    fn new(kappa_t: f64, beta: f64) -> Self {
        kerr::ProtocolConfig::weak_model(kappa_t, beta).into()
    }

    #[staticmethod]
    fn fig2() -> Self {
        kerr::ProtocolConfig::fig2().into()
    }

    fn validate(&self) -> PyResult<()> {
        self.core().validate().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.core())
    }
}

#[pyclass(name = "OutcomeRecord", module = "weakamp", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PyOutcomeRecord {
    p: f64,
    n_w: PyWeakValue,
    gain: f64,
    density_weak: f64,
    density_exact: f64,
    fidelity: f64,
    weak_state: PyFockVector,
    exact_state: PyFockVector,
}

impl From<kerr::OutcomeRecord> for PyOutcomeRecord {
    fn from(r: kerr::OutcomeRecord) -> Self {
        Self {
            p: r.p,
            n_w: PyWeakValue(r.n_w),
            gain: r.gain,
            density_weak: r.density_weak,
            density_exact: r.density_exact,
            fidelity: r.fidelity,
            weak_state: PyFockVector(r.weak_state),
            exact_state: PyFockVector(r.exact_state),
        }
    }
}

#[pyclass(name = "CloneReport", module = "weakamp", frozen, get_all, skip_from_py_object)]
pub struct PyCloneReport {
    gain_used: f64,
    transmissivity_schedule: Vec<f64>,
    clone_fidelities: (f64, f64),
    joint_state_purity: f64,
}

impl From<cloning::CloneReport> for PyCloneReport {
    fn from(r: cloning::CloneReport) -> Self {
        Self {
            gain_used: r.gain_used,
            transmissivity_schedule: r.transmissivity_schedule,
            clone_fidelities: r.clone_fidelities,
            joint_state_purity: r.joint_state_purity,
        }
    }
}

#[pyfunction]
fn fidelity(u: PyRef<'_, PyFockVector>, v: PyRef<'_, PyFockVector>) -> PyResult<f64> {
    fock::fidelity(&u.0, &v.0).map_err(err)
}

#[pyfunction]
fn number_weak_value(alpha: f64, p: f64) -> PyWeakValue {
    PyWeakValue(kerr::number_weak_value(alpha, p))
}

#[pyfunction]
fn gain(cfg: PyRef<'_, PyProtocolConfig>, p: f64) -> f64 {
    kerr::gain(&cfg.core(), p)
}

#[pyfunction]
fn success_threshold(alpha: f64, kappa_t: f64) -> f64 {
    kerr::success_threshold(alpha, kappa_t)
}

#[pyfunction]
fn exact_probe_state(cfg: PyRef<'_, PyProtocolConfig>, p: f64) -> PyResult<PyFockVector> {
    kerr::exact_probe_state(&cfg.core(), p).map(PyFockVector).map_err(err)
}

#[pyfunction]
fn density_weak(cfg: PyRef<'_, PyProtocolConfig>, p: f64) -> f64 {
    kerr::density_weak(&cfg.core(), p)
}

#[pyfunction]
fn density_exact(cfg: PyRef<'_, PyProtocolConfig>, p: f64) -> PyResult<f64> {
    kerr::density_exact(&cfg.core(), p).map_err(err)
}

#[pyfunction]
fn outcome(cfg: PyRef<'_, PyProtocolConfig>, p: f64) -> PyResult<PyOutcomeRecord> {
    kerr::outcome(&cfg.core(), p).map(Into::into).map_err(err)
}

#[pyfunction]
fn sweep(py: Python<'_>, cfg: PyRef<'_, PyProtocolConfig>) -> PyResult<Vec<PyOutcomeRecord>> {
    let cfg = cfg.core();
    let records = py.detach(|| kerr::sweep(&cfg)).map_err(err)?;
    Ok(records.into_iter().map(Into::into).collect())
}

/// The sweep as CSV text, identical to the command-line output.
#[pyfunction]
fn sweep_csv(py: Python<'_>, cfg: PyRef<'_, PyProtocolConfig>) -> PyResult<String> {
    let cfg = cfg.core();
    let records = py.detach(|| kerr::sweep(&cfg)).map_err(err)?;
    let mut out = Vec::new();
    kerr::write_csv(&records, &mut out).expect("writing to memory");
    Ok(String::from_utf8(out).expect("ascii csv"))
}

/// `(weak, exact)` integrals of the outcome density over the success window.
#[pyfunction]
fn success_probability(py: Python<'_>, cfg: PyRef<'_, PyProtocolConfig>) -> PyResult<(f64, f64)> {
    let cfg = cfg.core();
    let ps = py.detach(|| kerr::success_probability(&cfg)).map_err(err)?;
    Ok((ps.weak, ps.exact))
}

#[pyfunction]
fn window_min_fidelity(py: Python<'_>, cfg: PyRef<'_, PyProtocolConfig>) -> PyResult<f64> {
    let cfg = cfg.core();
    py.detach(|| kerr::window_min_fidelity(&cfg)).map_err(err)
}

#[pyfunction]
fn weakness_residuals(cfg: PyRef<'_, PyProtocolConfig>, p: f64) -> PyResult<Vec<f64>> {
    kerr::protocol_weakness_residuals(&cfg.core(), p).map(|r| r.residuals).map_err(err)
}

/// Success probability of the maximal truncated amplifier on `state`.
#[pyfunction]
fn truncated_success_probability(truncation: usize, g: f64, state: PyRef<'_, PyFockVector>) -> PyResult<f64> {
    amplifier::truncated_amplifier(truncation, g)
        .and_then(|op| op.success_probability(&state.0))
        .map_err(err)
}

/// `(valid, max_violation)` of `Gamma^dag Gamma <= 1` for `c g^n`, `n <= n_check`.
#[pyfunction]
fn kraus_validity(g: f64, c: Complex64, n_check: usize) -> PyResult<(bool, f64)> {
    let op = GainOperator::new(g, c, None).map_err(err)?;
    let audit = amplifier::kraus_validity(&op, n_check);
    Ok((audit.valid, audit.max_violation))
}

#[pyfunction]
fn exact_success_probability(g: f64, alpha: f64, c: Complex64) -> f64 {
    amplifier::exact_success_probability(g, alpha, c)
}

#[pyfunction]
fn extract_clones(amplified: PyRef<'_, PyFockVector>, beta: f64, g: f64) -> PyResult<PyCloneReport> {
    cloning::extract_clones(&amplified.0, beta, g).map(Into::into).map_err(err)
}

#[pyfunction]
fn pipeline_clone_fidelity(cfg: PyRef<'_, PyProtocolConfig>, p: f64) -> PyResult<PyCloneReport> {
    cloning::pipeline_clone_fidelity(&cfg.core(), p).map(Into::into).map_err(err)
}

#[pymodule]
fn weakamp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WeakampError", m.py().get_type::<WeakampError>())?;
    m.add_class::<PyFockVector>()?;
    m.add_class::<PyWeakValue>()?;
    m.add_class::<PyProtocolConfig>()?;
    m.add_class::<PyOutcomeRecord>()?;
    m.add_class::<PyCloneReport>()?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(number_weak_value, m)?)?;
    m.add_function(wrap_pyfunction!(gain, m)?)?;
    m.add_function(wrap_pyfunction!(success_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(exact_probe_state, m)?)?;
    m.add_function(wrap_pyfunction!(density_weak, m)?)?;
    m.add_function(wrap_pyfunction!(density_exact, m)?)?;
    m.add_function(wrap_pyfunction!(outcome, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    m.add_function(wrap_pyfunction!(success_probability, m)?)?;
    m.add_function(wrap_pyfunction!(window_min_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(weakness_residuals, m)?)?;
    m.add_function(wrap_pyfunction!(truncated_success_probability, m)?)?;
    m.add_function(wrap_pyfunction!(kraus_validity, m)?)?;
    m.add_function(wrap_pyfunction!(exact_success_probability, m)?)?;
    m.add_function(wrap_pyfunction!(extract_clones, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline_clone_fidelity, m)?)?;
    Ok(())
}
