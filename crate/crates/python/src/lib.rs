//! Python bindings for `fockfilter`.
//!
//! Validation failures raise `ValueError`; failures during evaluation (such as
//! condition domain errors) raise `RuntimeError`.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fockfilter::scenario::{Scenario, ScenarioError};
use fockfilter::{
    ConditionError, DetectorModel, FilterError, Heralded, MeasurementOutcome, MixedState, StateError,
    TwoModeState,
};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn filter_error(e: FilterError) -> PyErr {
    match e {
        FilterError::Condition(ConditionError::Domain { .. }) => PyRuntimeError::new_err(e.to_string()),
        other => value_error(other),
    }
}

fn outcome(s: i64, delta: i64) -> PyResult<MeasurementOutcome> {
    MeasurementOutcome::new(s, delta).map_err(value_error)
}

#[pyclass(name = "TwoModeState", module = "pyfockfilter", frozen, from_py_object)]
#[derive(Clone)]
struct PyTwoModeState {
    inner: TwoModeState,
}

#[pymethods]
impl PyTwoModeState {
    /// Builds a state from `{(n, m): amplitude}`; duplicates are summed.
    #[new]
    fn new(amplitudes: BTreeMap<(u32, u32), f64>) -> Self {
        Self {
            inner: TwoModeState::from_amplitudes(amplitudes),
        }
    }

    #[staticmethod]
    fn fock(n: u32, m: u32) -> Self {
        Self {
            inner: TwoModeState::fock(n, m),
        }
    }

    #[staticmethod]
    fn uniform_fixed_sum(total: u32) -> Self {
        Self {
            inner: TwoModeState::uniform_fixed_sum(total),
        }
    }

    #[staticmethod]
    fn uniform_range(lo: u32, hi: u32) -> PyResult<Self> {
        Ok(Self {
            inner: TwoModeState::uniform_range(lo, hi).map_err(value_error)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: TwoModeState::from_json(text).map_err(value_error)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn amplitudes(&self) -> BTreeMap<(u32, u32), f64> {
        self.inner.iter().collect()
    }

    fn amplitude(&self, n: u32, m: u32) -> f64 {
        self.inner.amplitude(n, m)
    }

    fn norm_sqr(&self) -> f64 {
        self.inner.norm_sqr()
    }

    fn normalized(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.normalized().map_err(value_error)?,
        })
    }

    /// `{(S, Δ): probability}` with `Δ = n - m`.
    fn marginal_sum_diff(&self) -> PyResult<BTreeMap<(u32, i32), f64>> {
        Ok(self.inner.marginal_sum_diff().map_err(value_error)?.iter().collect())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("TwoModeState({} terms, max total {})", self.inner.len(), self.inner.max_total())
    }
}

#[pyclass(name = "MixedState", module = "pyfockfilter", frozen)]
struct PyMixedState {
    inner: MixedState,
}

#[pymethods]
impl PyMixedState {
    #[new]
    fn new(terms: Vec<(f64, PyTwoModeState)>) -> PyResult<Self> {
        let terms = terms.into_iter().map(|(w, s)| (w, s.inner)).collect();
        Ok(Self {
            inner: MixedState::new(terms).map_err(value_error)?,
        })
    }

    fn terms(&self) -> Vec<(f64, PyTwoModeState)> {
        self.inner
            .terms()
            .iter()
            .map(|(w, s)| (*w, PyTwoModeState { inner: s.clone() }))
            .collect()
    }

    fn purity(&self) -> PyResult<f64> {
        fockfilter::purity(&self.inner).map_err(value_error)
    }

    fn sum_diff_distribution(&self) -> BTreeMap<(u32, i32), f64> {
        self.inner.sum_diff_distribution().iter().collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "DetectorModel", module = "pyfockfilter", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDetectorModel {
    inner: DetectorModel,
}

#[pymethods]
impl PyDetectorModel {
    #[staticmethod]
    fn ideal() -> Self {
        Self {
            inner: DetectorModel::Ideal,
        }
    }

    #[staticmethod]
    fn binomial(eta: f64) -> PyResult<Self> {
        Ok(Self {
            inner: DetectorModel::binomial(eta).map_err(value_error)?,
        })
    }

    #[staticmethod]
    fn gaussian(sigma: f64) -> PyResult<Self> {
        Ok(Self {
            inner: DetectorModel::gaussian(sigma).map_err(value_error)?,
        })
    }

    /// `{K': d_K(K')}`.
    fn response(&self, true_count: u32) -> BTreeMap<u32, f64> {
        fockfilter::response(&self.inner, true_count).iter().collect()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "FilterSettings", module = "pyfockfilter", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFilterSettings {
    inner: fockfilter::FilterSettings,
}

#[pymethods]
impl PyFilterSettings {
    #[new]
    #[pyo3(signature = (reflectivity, condition=None, params=None, shutter_threshold=0.5, clamp=false))]
    fn new(
        reflectivity: f64,
        condition: Option<&str>,
        params: Option<BTreeMap<String, f64>>,
        shutter_threshold: f64,
        clamp: bool,
    ) -> PyResult<Self> {
        let mut settings = fockfilter::FilterSettings::new(reflectivity)
            .and_then(|s| s.with_shutter_threshold(shutter_threshold))
            .map_err(value_error)?;
        if let Some(text) = condition {
            let parsed = fockfilter::Condition::parse(text).map_err(value_error)?;
            settings = settings
                .with_condition(parsed, params.unwrap_or_default())
                .map_err(value_error)?;
        }
        if clamp {
            settings = settings.with_eval_mode(fockfilter::EvalMode::Clamp);
        }
        Ok(Self { inner: settings })
    }

    #[getter]
    fn reflectivity(&self) -> f64 {
        self.inner.reflectivity()
    }

    #[getter]
    fn shutter_threshold(&self) -> f64 {
        self.inner.shutter_threshold()
    }

    fn accepts(&self, k: u32, l: u32) -> PyResult<bool> {
        self.inner.accepts(k, l).map_err(|e| filter_error(e.into()))
    }
}

/// `{Δ: p(Δ)}` for the Fock input `|(S+Δ_i)/2, (S-Δ_i)/2⟩`.
#[pyfunction]
fn hom_distribution(total: u32, diff: i32) -> PyResult<BTreeMap<i32, f64>> {
    Ok(fockfilter::hom_distribution(total, diff)
        .map_err(value_error)?
        .iter()
        .collect())
}

/// `P(|Δ| ≥ threshold)` for a distribution returned by `hom_distribution`.
#[pyfunction]
fn threshold_probability(distribution: BTreeMap<i32, f64>, threshold: u32) -> f64 {
    distribution
        .into_iter()
        .filter(|(d, _)| d.unsigned_abs() >= threshold)
        .map(|(_, p)| p)
        .sum()
}

/// `{(K, L): amplitude}` of `U_BS |n, m⟩`.
#[pyfunction]
fn bs_transform(n: u32, m: u32) -> BTreeMap<(u32, u32), f64> {
    fockfilter::bs_transform(n, m).amplitudes
}

/// `(probability, state)`, or `None` for an impossible outcome.
#[pyfunction]
fn conditional_state(
    state: &PyTwoModeState,
    settings: &PyFilterSettings,
    s: i64,
    delta: i64,
) -> PyResult<Option<(f64, PyTwoModeState)>> {
    let heralded =
        fockfilter::conditional_state(&state.inner, &settings.inner, outcome(s, delta)?).map_err(filter_error)?;
    Ok(match heralded {
        Heralded::Observed { probability, value } => Some((probability, PyTwoModeState { inner: value })),
        Heralded::Impossible => None,
    })
}

/// `(probability, {(S_t, Δ_t): p})`, or `None` for an impossible outcome.
#[pyfunction]
fn conditional_distribution(
    state: &PyTwoModeState,
    settings: &PyFilterSettings,
    s: i64,
    delta: i64,
) -> PyResult<Option<(f64, BTreeMap<(u32, i32), f64>)>> {
    let heralded = fockfilter::conditional_distribution(&state.inner, &settings.inner, outcome(s, delta)?)
        .map_err(filter_error)?;
    Ok(match heralded {
        Heralded::Observed { probability, value } => Some((probability, value.iter().collect())),
        Heralded::Impossible => None,
    })
}

/// `(outcome probability, pass probability)`; both zero for an impossible outcome.
#[pyfunction]
fn shutter_probability(state: &PyTwoModeState, settings: &PyFilterSettings, s: i64, delta: i64) -> PyResult<(f64, f64)> {
    let heralded = fockfilter::shutter_probability(&state.inner, &settings.inner, outcome(s, delta)?)
        .map_err(filter_error)?;
    Ok((heralded.probability(), heralded.value().copied().unwrap_or(0.0)))
}

/// `(probability, mixed state)` heralded by a noisy report, or `None`.
#[pyfunction]
fn noisy_filtered_state(
    state: &PyTwoModeState,
    settings: &PyFilterSettings,
    s: i64,
    delta: i64,
    model: &PyDetectorModel,
) -> PyResult<Option<(f64, PyMixedState)>> {
    let heralded =
        fockfilter::noisy_filtered_state(&state.inner, &settings.inner, outcome(s, delta)?, &model.inner)
            .map_err(filter_error)?;
    Ok(match heralded {
        Heralded::Observed { probability, value } => Some((probability, PyMixedState { inner: value })),
        Heralded::Impossible => None,
    })
}

/// Probability that a mixed transmitted state meets the settings' condition.
#[pyfunction]
fn condition_probability(state: &PyMixedState, settings: &PyFilterSettings) -> PyResult<f64> {
    fockfilter::filter::condition_probability(&state.inner, &settings.inner).map_err(filter_error)
}

#[pyfunction]
fn purity(state: &PyMixedState) -> PyResult<f64> {
    fockfilter::purity(&state.inner).map_err(|e: StateError| value_error(e))
}

/// Runs a TOML scenario and returns the rendered table.
#[pyfunction]
fn run_scenario(toml_text: &str) -> PyResult<String> {
    let result = Scenario::from_toml(toml_text).and_then(|s| s.plan()).and_then(|p| p.render());
    result.map_err(|e: ScenarioError| {
        if e.is_validation() {
            value_error(e)
        } else {
            PyRuntimeError::new_err(e.to_string())
        }
    })
}

#[pymodule]
fn pyfockfilter(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTwoModeState>()?;
    m.add_class::<PyMixedState>()?;
    m.add_class::<PyDetectorModel>()?;
    m.add_class::<PyFilterSettings>()?;
    m.add_function(wrap_pyfunction!(hom_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_probability, m)?)?;
    m.add_function(wrap_pyfunction!(bs_transform, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_state, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(shutter_probability, m)?)?;
    m.add_function(wrap_pyfunction!(noisy_filtered_state, m)?)?;
    m.add_function(wrap_pyfunction!(condition_probability, m)?)?;
    m.add_function(wrap_pyfunction!(purity, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
