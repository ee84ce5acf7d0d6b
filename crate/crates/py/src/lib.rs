//! Python bindings. Parameter sets are classes that accept keyword
//! overrides of the defaults; structured results come back as dicts.

use pyo3::exceptions::{PyAttributeError, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use liqlab_core::analysis::{
    correlation_surface, empirical_sf, fit_geometric, fit_tail_exponent, flux_features, flux_regression, fss_pipeline,
    synthetic_stream, ChiCurve, FssConfig, PlantedScaling, RegressionConfig, SyntheticStreamParams,
};
use liqlab_core::santafe::{crisis_probability_map, init_equilibrium, run, SantaFeParams, SantaFeSim, StepOutcome};
use liqlab_core::spread::{escape_time_census, run_spread, SpreadModelParams};
use liqlab_core::stochastic::RngStream;
use liqlab_core::theory::{self, ChiMode, DriftSign};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_error)
}

/// `lambda` is a Python keyword.
fn field_name(name: &str) -> &str {
    if name == "lambda_" {
        "lambda"
    } else {
        name
    }
}

/// `base` with the entries of `updates` replacing fields of the same name.
fn merged<T: Serialize + DeserializeOwned>(base: &T, updates: Option<&Bound<'_, PyDict>>) -> PyResult<T> {
    let mut value = serde_json::to_value(base).map_err(value_error)?;
    if let Some(d) = updates {
        let patch: serde_json::Map<String, serde_json::Value> = from_py(d.as_any())?;
        let fields = value.as_object_mut().expect("parameter sets serialize as objects");
        for (k, v) in patch {
            let key = field_name(&k).to_string();
            if !fields.contains_key(&key) {
                return Err(PyTypeError::new_err(format!("unknown parameter `{k}`")));
            }
            fields.insert(key, v);
        }
    }
    serde_json::from_value(value).map_err(value_error)
}

fn get_field<'py, T: Serialize>(py: Python<'py>, inner: &T, name: &str) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(inner).map_err(value_error)?;
    match value.get(field_name(name)) {
        Some(v) => to_py(py, v),
        None => Err(PyAttributeError::new_err(format!("no parameter `{name}`"))),
    }
}

fn set_field<T: Serialize + DeserializeOwned>(inner: &mut T, name: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
    let d = PyDict::new(value.py());
    d.set_item(name, value)?;
    *inner = merged(inner, Some(&d))?;
    Ok(())
}

/// Santa Fe book parameters. `lambda_` is the limit-order rate.
#[pyclass(name = "SantaFeParams", module = "liqlab")]
struct PySantaFeParams {
    inner: SantaFeParams,
}

#[pymethods]
impl PySantaFeParams {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        Ok(Self {
            inner: merged(&SantaFeParams::default(), kwargs)?,
        })
    }

    fn __getattr__<'py>(&self, py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
        get_field(py, &self.inner, name)
    }

    fn __setattr__(&mut self, name: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        set_field(&mut self.inner, name, value)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("SantaFeParams({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

/// Spread-model parameters; `variant` is one of linear, stabilized,
/// quadratic or price_feedback.
#[pyclass(name = "SpreadParams", module = "liqlab")]
struct PySpreadParams {
    inner: SpreadModelParams,
}

#[pymethods]
impl PySpreadParams {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        Ok(Self {
            inner: merged(&SpreadModelParams::default(), kwargs)?,
        })
    }

    fn __getattr__<'py>(&self, py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
        get_field(py, &self.inner, name)
    }

    fn __setattr__(&mut self, name: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        set_field(&mut self.inner, name, value)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("SpreadParams({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

/// A Santa Fe book after burn-in, advanced one event at a time.
#[pyclass(name = "SantaFeSim", module = "liqlab")]
struct PySantaFeSim {
    sim: SantaFeSim,
    finished: bool,
}

#[pymethods]
impl PySantaFeSim {
    #[new]
    fn new(params: PyRef<'_, PySantaFeParams>) -> PyResult<Self> {
        let p = &params.inner;
        let (book, rng) = init_equilibrium(p, RngStream::new(p.seed, p.stream_id)).map_err(value_error)?;
        Ok(Self {
            sim: SantaFeSim::new(p, book, rng).map_err(value_error)?,
            finished: false,
        })
    }

    /// The next event as a dict, or `None` once the run has stopped.
    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyAny>>> {
        if self.finished {
            return Ok(None);
        }
        let (event, crisis) = match self.sim.step().map_err(value_error)? {
            StepOutcome::Event(e) => (e, false),
            StepOutcome::Crisis(e) => (e, true),
            StepOutcome::Horizon | StepOutcome::BudgetExhausted => {
                self.finished = true;
                return Ok(None);
            }
        };
        self.finished = crisis;
        let d = to_py(py, &event)?;
        d.set_item("crisis", crisis)?;
        Ok(Some(d))
    }

    /// Advance until time `t` or a stop; returns the number of events.
    fn run_until(&mut self, t: f64) -> PyResult<u64> {
        let mut n = 0;
        while !self.finished && self.sim.time() < t {
            match self.sim.step().map_err(value_error)? {
                StepOutcome::Event(_) => n += 1,
                StepOutcome::Crisis(_) => {
                    n += 1;
                    self.finished = true;
                }
                StepOutcome::Horizon | StepOutcome::BudgetExhausted => self.finished = true,
            }
        }
        Ok(n)
    }

    #[getter]
    fn time(&self) -> f64 {
        self.sim.time()
    }

    #[getter]
    fn finished(&self) -> bool {
        self.finished
    }

    #[getter]
    fn spread(&self) -> usize {
        self.sim.book().spread()
    }

    #[getter]
    fn best_bid(&self) -> usize {
        self.sim.book().best_bid()
    }

    #[getter]
    fn best_ask(&self) -> usize {
        self.sim.book().best_ask()
    }

    #[getter]
    fn mid(&self) -> f64 {
        self.sim.book().mid()
    }

    #[getter]
    fn in_crisis(&self) -> bool {
        self.sim.book().in_crisis()
    }

    fn queues(&self) -> Vec<u32> {
        self.sim.book().queues().to_vec()
    }

    /// Queue sizes at least `min_distance` ticks behind each best quote.
    fn deep_queues(&self, min_distance: usize) -> Vec<u32> {
        self.sim.book().deep_queues(min_distance)
    }
}

/// Burn in and run one Santa Fe replica.
#[pyfunction]
fn run_santafe<'py>(py: Python<'py>, params: PyRef<'_, PySantaFeParams>) -> PyResult<Bound<'py, PyAny>> {
    let p = params.inner.clone();
    let out = py.detach(|| run(&p)).map_err(value_error)?;
    to_py(py, &out)
}

/// Crisis probability on an `(alpha_k, beta)` grid, with the isotonic
/// violation score and the 1/2 crossovers per `beta`.
#[pyfunction]
fn crisis_map<'py>(
    py: Python<'py>,
    params: PyRef<'_, PySantaFeParams>,
    alpha_grid: Vec<f64>,
    beta_grid: Vec<f64>,
    replicas: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let p = params.inner.clone();
    let map = py
        .detach(|| crisis_probability_map(&p, &alpha_grid, &beta_grid, replicas, seed))
        .map_err(value_error)?;
    let d = to_py(py, &map)?;
    d.set_item("isotonic_violation_score", map.isotonic_violation_score())?;
    let crossovers: Vec<Option<f64>> = (0..map.beta_grid.len()).map(|j| map.crossover(j, 0.5)).collect();
    d.set_item("crossovers", crossovers)?;
    Ok(d)
}

#[pyfunction(name = "run_spread")]
fn run_spread_py<'py>(py: Python<'py>, params: PyRef<'_, PySpreadParams>) -> PyResult<Bound<'py, PyAny>> {
    let p = params.inner.clone();
    let path = py.detach(|| run_spread(&p)).map_err(value_error)?;
    let d = to_py(py, &path)?;
    d.set_item("p_open", path.time_fraction_at_least(2))?;
    Ok(d)
}

/// Escape times of the quadratic model, right-censored at `cap_time`.
#[pyfunction]
#[pyo3(signature = (params, replicas, cap_time, x_multiple = 5.0, seed = 0))]
fn escape_census<'py>(
    py: Python<'py>,
    params: PyRef<'_, PySpreadParams>,
    replicas: usize,
    cap_time: f64,
    x_multiple: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let p = params.inner.clone();
    let census = py
        .detach(|| escape_time_census(&p, replicas, x_multiple, cap_time, seed))
        .map_err(value_error)?;
    to_py(py, &census)
}

#[pyfunction]
fn linear_theory<'py>(py: Python<'py>, lambda0_plus: f64, lambda0_minus: f64, alpha: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &theory::linear_spread_theory(lambda0_plus, lambda0_minus, alpha).map_err(value_error)?)
}

/// Closed forms of the price-feedback model; `half_tick` selects the forms
/// for a mid price moving by half a tick per event.
#[pyfunction]
#[pyo3(signature = (lambda0_plus, lambda0_minus, alpha, half_tick = false))]
fn price_feedback_theory<'py>(
    py: Python<'py>,
    lambda0_plus: f64,
    lambda0_minus: f64,
    alpha: f64,
    half_tick: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let th = if half_tick {
        theory::price_feedback_theory_half_tick(lambda0_plus, lambda0_minus, alpha)
    } else {
        theory::price_feedback_theory(lambda0_plus, lambda0_minus, alpha)
    };
    to_py(py, &th.map_err(value_error)?)
}

#[pyfunction]
fn metastability_theory<'py>(
    py: Python<'py>,
    lambda0: f64,
    alpha: f64,
    beta: f64,
    epsilon: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &theory::metastability_theory(lambda0, alpha, beta, epsilon).map_err(value_error)?)
}

/// Probability that drifted Brownian motion started at 0 reaches `-n` before `t`.
#[pyfunction]
fn first_passage_prob(n: f64, t: f64, v: f64, d: f64) -> PyResult<f64> {
    theory::first_passage_prob(n, t, v, d).map_err(value_error)
}

/// Susceptibility of the linear spread model with barrier `n`.
#[pyfunction]
#[pyo3(signature = (alpha, t, n, lambda0_plus = 0.5, lambda0_minus = 1.0, linearized = false))]
fn chi_theory(alpha: f64, t: f64, n: f64, lambda0_plus: f64, lambda0_minus: f64, linearized: bool) -> PyResult<f64> {
    let mode = if linearized { ChiMode::CriticalLinearized } else { ChiMode::Exact };
    theory::chi_theory(alpha, t, n, lambda0_plus, lambda0_minus, mode, DriftSign::AsPrinted).map_err(value_error)
}

/// Variance of `min(tau, horizon)`; `None` marks a replica without crisis.
#[pyfunction]
fn susceptibility(crisis_times: Vec<Option<f64>>, horizon: f64) -> PyResult<f64> {
    liqlab_core::analysis::susceptibility(&crisis_times, horizon).map_err(value_error)
}

/// Planted scaling curves as a list of `{t, n, alpha, chi}` dicts.
#[pyfunction]
fn planted_chi_curves<'py>(py: Python<'py>, ts: Vec<f64>, ns: Vec<f64>, alphas: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &PlantedScaling::default().curves(&ts, &ns, &alphas))
}

/// Scaling fit of susceptibility curves given as `{t, n, alpha, chi}` dicts.
#[pyfunction]
fn fss<'py>(py: Python<'py>, curves: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let curves: Vec<ChiCurve> = from_py(curves)?;
    let fit = py
        .detach(|| fss_pipeline(&curves, &FssConfig::default()))
        .map_err(value_error)?;
    to_py(py, &fit)
}

/// Generate a planted synthetic event stream and regress it at the planted
/// rates. Keyword arguments override the generator defaults; `betas` and
/// `beta_primes` add a correlation surface.
#[pyfunction]
#[pyo3(signature = (betas = None, beta_primes = None, **kwargs))]
fn planted_flux_regression<'py>(
    py: Python<'py>,
    betas: Option<Vec<f64>>,
    beta_primes: Option<Vec<f64>>,
    kwargs: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let p: SyntheticStreamParams = merged(&SyntheticStreamParams::default(), kwargs)?;
    let result = py
        .detach(|| -> liqlab_core::Result<_> {
            let events = synthetic_stream(&p)?;
            let features = flux_features(&events, p.beta, p.beta_prime, None)?;
            let mut result = flux_regression(&features, &RegressionConfig::default())?;
            if let (Some(b), Some(bp)) = (&betas, &beta_primes) {
                result.surface = Some(correlation_surface(&events, b, bp)?);
            }
            Ok(result)
        })
        .map_err(value_error)?;
    to_py(py, &result)
}

/// Survival function `P[X >= x]` on the sample support.
#[pyfunction]
#[pyo3(signature = (samples, weights = None))]
fn survival_function<'py>(py: Python<'py>, samples: Vec<f64>, weights: Option<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
    let ccdf = empirical_sf(&samples, weights.as_deref()).map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("support", ccdf.support().to_vec())?;
    d.set_item("sf", ccdf.survival().to_vec())?;
    Ok(d.into_any())
}

#[pyfunction]
#[pyo3(signature = (samples, tail_fraction = 0.1, weights = None))]
fn fit_tail<'py>(
    py: Python<'py>,
    samples: Vec<f64>,
    tail_fraction: f64,
    weights: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let ccdf = empirical_sf(&samples, weights.as_deref()).map_err(value_error)?;
    to_py(py, &fit_tail_exponent(&ccdf, tail_fraction).map_err(value_error)?)
}

#[pyfunction(name = "fit_geometric")]
#[pyo3(signature = (samples, min_support = 2.0, weights = None))]
fn fit_geometric_py<'py>(
    py: Python<'py>,
    samples: Vec<f64>,
    min_support: f64,
    weights: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let ccdf = empirical_sf(&samples, weights.as_deref()).map_err(value_error)?;
    to_py(py, &fit_geometric(&ccdf, min_support).map_err(value_error)?)
}

#[pymodule]
fn liqlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySantaFeParams>()?;
    m.add_class::<PySpreadParams>()?;
    m.add_class::<PySantaFeSim>()?;
    m.add_function(wrap_pyfunction!(run_santafe, m)?)?;
    m.add_function(wrap_pyfunction!(crisis_map, m)?)?;
    m.add_function(wrap_pyfunction!(run_spread_py, m)?)?;
    m.add_function(wrap_pyfunction!(escape_census, m)?)?;
    m.add_function(wrap_pyfunction!(linear_theory, m)?)?;
    m.add_function(wrap_pyfunction!(price_feedback_theory, m)?)?;
    m.add_function(wrap_pyfunction!(metastability_theory, m)?)?;
    m.add_function(wrap_pyfunction!(first_passage_prob, m)?)?;
    m.add_function(wrap_pyfunction!(chi_theory, m)?)?;
    m.add_function(wrap_pyfunction!(susceptibility, m)?)?;
    m.add_function(wrap_pyfunction!(planted_chi_curves, m)?)?;
    m.add_function(wrap_pyfunction!(fss, m)?)?;
    m.add_function(wrap_pyfunction!(planted_flux_regression, m)?)?;
    m.add_function(wrap_pyfunction!(survival_function, m)?)?;
    m.add_function(wrap_pyfunction!(fit_tail, m)?)?;
    m.add_function(wrap_pyfunction!(fit_geometric_py, m)?)?;
    Ok(())
}
