//! Imperfect photodetection.
//!
//! A detector that truly receives `K` photons reports `K'` with probability
//! `d_K(K')`. Both detectors behind the balanced splitter act independently.
//! Given a reported outcome, the transmitted beam is left in a Bayes-weighted
//! mixture of the ideal conditional states of every compatible true outcome.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::{Distribution, Heralded};
use crate::filter::{project_on_outcome, FilterError, FilterSettings, MeasurementOutcome};
use crate::fock::{MixedState, StateError, TwoModeState};
use crate::numerics::{binomial, LogMagnitude};
use num_bigint::BigInt;

/// Candidate true outcomes whose prior bound falls below this fraction of the
/// total bound are skipped; so are computed weights below it.
const TRUNCATION: f64 = 1e-14;

/// Half-width of the Gaussian response window, in standard deviations.
const GAUSSIAN_WINDOW: f64 = 8.0;

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("detector efficiency {0} out of (0, 1]")]
    InvalidEfficiency(f64),
    #[error("detector blur sigma {0} must be positive and finite")]
    InvalidSigma(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum DetectorModel {
    Ideal,
    /// Independent per-photon survival with probability `eta`.
    Binomial { eta: f64 },
    /// Gaussian blur of standard deviation `sigma`, evaluated at integer counts
    /// and renormalized over `K' ≥ 0`.
    Gaussian { sigma: f64 },
}

impl DetectorModel {
    pub fn binomial(eta: f64) -> Result<Self, DetectorError> {
        let model = DetectorModel::Binomial { eta };
        model.validate()?;
        Ok(model)
    }

    pub fn gaussian(sigma: f64) -> Result<Self, DetectorError> {
        let model = DetectorModel::Gaussian { sigma };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        match *self {
            DetectorModel::Ideal => Ok(()),
            DetectorModel::Binomial { eta } if eta > 0.0 && eta <= 1.0 => Ok(()),
            DetectorModel::Binomial { eta } => Err(DetectorError::InvalidEfficiency(eta)),
            DetectorModel::Gaussian { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            DetectorModel::Gaussian { sigma } => Err(DetectorError::InvalidSigma(sigma)),
        }
    }

    fn window(&self) -> u32 {
        match *self {
            DetectorModel::Gaussian { sigma } => (GAUSSIAN_WINDOW * sigma).floor() as u32,
            _ => 0,
        }
    }

    /// `d_K(K')`.
    pub fn likelihood(&self, true_count: u32, reported: u32) -> f64 {
        match *self {
            DetectorModel::Ideal => f64::from(u8::from(true_count == reported)),
            DetectorModel::Binomial { eta } => binomial_likelihood(eta, true_count, reported),
            DetectorModel::Gaussian { sigma } => {
                let window = self.window();
                if true_count.abs_diff(reported) > window {
                    return 0.0;
                }
                let weight = |j: u32| {
                    let x = f64::from(true_count) - f64::from(j);
                    (-x * x / (2.0 * sigma * sigma)).exp()
                };
                let lo = true_count.saturating_sub(window);
                let norm: f64 = (lo..=true_count + window).map(weight).sum();
                weight(reported) / norm
            }
        }
    }

    /// True counts that can produce `reported`, for counts up to `max_true`.
    fn compatible_true_counts(&self, reported: u32, max_true: u32) -> std::ops::RangeInclusive<u32> {
        match *self {
            DetectorModel::Ideal => reported..=reported.min(max_true),
            DetectorModel::Binomial { eta } if eta >= 1.0 => reported..=reported.min(max_true),
            DetectorModel::Binomial { .. } => reported..=max_true,
            DetectorModel::Gaussian { .. } => {
                let w = self.window();
                reported.saturating_sub(w)..=(reported + w).min(max_true)
            }
        }
    }
}

fn binomial_likelihood(eta: f64, true_count: u32, reported: u32) -> f64 {
    if reported > true_count {
        return 0.0;
    }
    if eta >= 1.0 {
        return f64::from(u8::from(reported == true_count));
    }
    let coefficient = LogMagnitude::from_bigint(&BigInt::from(binomial(
        true_count.into(),
        reported.into(),
    )));
    let lost = true_count - reported;
    coefficient
        .scale_log(f64::from(reported) * eta.ln() + f64::from(lost) * (1.0 - eta).ln())
        .to_f64()
}

/// Distribution of the reported count for a true count `K`.
pub fn response(model: &DetectorModel, true_count: u32) -> Distribution<u32> {
    let range = match *model {
        DetectorModel::Ideal => true_count..=true_count,
        DetectorModel::Binomial { .. } => 0..=true_count,
        DetectorModel::Gaussian { .. } => {
            let w = model.window();
            true_count.saturating_sub(w)..=true_count + w
        }
    };
    range
        .map(|k| (k, model.likelihood(true_count, k)))
        .filter(|&(_, p)| p > 0.0)
        .collect()
}

/// Distribution of the reported `(S', Δ')` for a true outcome, as the product
/// of the two independent detector responses.
pub fn joint_response(model: &DetectorModel, true_outcome: MeasurementOutcome) -> Distribution<(u32, i32)> {
    let first = response(model, true_outcome.k());
    let second = response(model, true_outcome.l());
    let mut dist = Distribution::new();
    for (k, pk) in first.iter() {
        for (l, pl) in second.iter() {
            let reported = MeasurementOutcome::from_counts(k, l);
            dist.add((reported.sum(), reported.diff()), pk * pl);
        }
    }
    dist
}

/// Prior `P(S_r = S)` of the reflected photon number, which does not depend on
/// the detector difference. Used to bound candidate weights before projecting.
fn reflected_total_prior(input: &TwoModeState, reflectivity: f64) -> Vec<f64> {
    let max = input.max_total() as usize;
    let mut shells = vec![0.0; max + 1];
    for ((n, m), a) in input.iter() {
        shells[(n + m) as usize] += a * a;
    }
    let (ln_r, ln_t) = (reflectivity.ln(), (1.0 - reflectivity).ln());
    (0..=max)
        .map(|s| {
            shells
                .iter()
                .enumerate()
                .skip(s)
                .filter(|(_, &p)| p > 0.0)
                .map(|(shell, &p)| {
                    let log = crate::numerics::log_binomial(shell as u64, s as u64)
                        + s as f64 * ln_r
                        + (shell - s) as f64 * ln_t;
                    p * log.exp()
                })
                .sum()
        })
        .collect()
}

/// The transmitted mixed state `ρ'_t` heralded by a reported outcome, before
/// the shutter. Each term is the ideal conditional state of one true outcome,
/// weighted by `d(true → reported) · P(true | input)`. The returned
/// probability is the marginal probability of the report.
pub fn noisy_filtered_state(
    input: &TwoModeState,
    settings: &FilterSettings,
    reported: MeasurementOutcome,
    model: &DetectorModel,
) -> Result<Heralded<MixedState>, FilterError> {
    Ok(noisy_filtered_components(input, settings, reported, model)?
        .map(|(mixture, _)| mixture))
}

/// As [`noisy_filtered_state`], also returning the true outcome behind each
/// mixture term.
pub fn noisy_filtered_components(
    input: &TwoModeState,
    settings: &FilterSettings,
    reported: MeasurementOutcome,
    model: &DetectorModel,
) -> Result<Heralded<(MixedState, Vec<MeasurementOutcome>)>, FilterError> {
    input.ensure_normalized()?;
    model
        .validate()
        .map_err(|e| FilterError::State(StateError::Format(e.to_string())))?;

    let max_total = input.max_total();
    let prior = reflected_total_prior(input, settings.reflectivity());

    let mut candidates = Vec::new();
    for k in model.compatible_true_counts(reported.k(), max_total) {
        let dk = model.likelihood(k, reported.k());
        if dk == 0.0 {
            continue;
        }
        for l in model.compatible_true_counts(reported.l(), max_total - k) {
            let bound = dk * model.likelihood(l, reported.l()) * prior[(k + l) as usize];
            if bound > 0.0 {
                candidates.push((MeasurementOutcome::from_counts(k, l), bound));
            }
        }
    }
    let bound_total: f64 = candidates.iter().map(|(_, b)| b).sum();
    candidates.retain(|(_, b)| *b >= TRUNCATION * bound_total);

    let computed: Vec<(f64, TwoModeState, MeasurementOutcome)> = candidates
        .par_iter()
        .filter_map(|&(outcome, _)| {
            let projected = project_on_outcome(input, settings.reflectivity(), outcome);
            let p = projected.norm_sqr();
            if !(p > 0.0) {
                return None;
            }
            let d = model.likelihood(outcome.k(), reported.k()) * model.likelihood(outcome.l(), reported.l());
            Some((d * p, projected.scaled(1.0 / p.sqrt()).phase_fixed(), outcome))
        })
        .collect();

    let marginal: f64 = computed.iter().map(|(w, _, _)| w).sum();
    if !(marginal > 0.0) {
        return Ok(Heralded::Impossible);
    }
    let (terms, outcomes): (Vec<_>, Vec<_>) = computed
        .into_iter()
        .filter(|(w, _, _)| *w >= TRUNCATION * marginal)
        .map(|(w, s, o)| ((w, s), o))
        .unzip();
    Ok(Heralded::Observed {
        probability: marginal,
        value: (MixedState::from_unnormalized(terms)?, outcomes),
    })
}

/// Purity `Tr ρ² = Σ_ij w_i w_j ⟨ψ_i|ψ_j⟩²`.
pub fn purity(state: &MixedState) -> Result<f64, StateError> {
    if !state.weights_normalized() {
        let total = state.terms().iter().map(|(w, _)| w).sum();
        return Err(StateError::InvalidWeights(total));
    }
    // one normalized component is a pure state; skip the rounding of ⟨ψ|ψ⟩²
    if state.terms().len() == 1 {
        return Ok(1.0);
    }
    struct Term {
        weight: f64,
        lo: u32,
        hi: u32,
        amps: Vec<((u32, u32), f64)>,
    }
    let terms: Vec<Term> = state
        .terms()
        .iter()
        .map(|(w, s)| {
            let totals: Vec<u32> = s.iter().map(|((n, m), _)| n + m).collect();
            Term {
                weight: *w,
                lo: totals.iter().copied().min().unwrap_or(0),
                hi: totals.iter().copied().max().unwrap_or(0),
                amps: s.iter().collect(),
            }
        })
        .collect();

    fn overlap(a: &[((u32, u32), f64)], b: &[((u32, u32), f64)]) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    let gamma: f64 = (0..terms.len())
        .into_par_iter()
        .map(|i| {
            let a = &terms[i];
            let mut row = a.weight * a.weight * overlap(&a.amps, &a.amps).powi(2);
            for b in &terms[i + 1..] {
                if b.lo > a.hi || a.lo > b.hi {
                    continue;
                }
                row += 2.0 * a.weight * b.weight * overlap(&a.amps, &b.amps).powi(2);
            }
            row
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    Ok(gamma.min(1.0))
}
