//! The heralded feed-forward filter.
//!
//! Each input mode meets a tapping beam splitter of reflectivity `r`
//! (`|n⟩ → Σ_v c_v^(n) |v⟩_r |n-v⟩_t` with `c_v^(n) = sqrt(C(n,v) r^v t^(n-v))`).
//! The reflected pair `(v, w)` interferes on a balanced splitter, using the same
//! convention as [`crate::interference`], and is counted as `(K, L)`. The
//! detector outcome is reported as `S = K + L`, `Δ = L - K`. Projecting on the
//! outcome leaves the transmitted beam in
//!
//! ```text
//! ψ_t(n-v, m-w) += ξ_nm · c_v^(n) c_w^(m) · ⟨K, L| U_BS |v, w⟩,   v + w = S
//! ```
//!
//! A filtering condition `C(S_t, |Δ_t|)` then selects transmitted components
//! before the shutter.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::condition::{Condition, ConditionError, EvalMode, Params};
use crate::distribution::{Distribution, Heralded};
use crate::fock::{MixedState, StateError, SumDiff, TwoModeState};
use crate::interference::bs_log_amplitude;
use crate::numerics::{log_binomial, signed_binomial_convolution, LogMagnitude};

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error("reflectivity {0} out of (0, 1)")]
    InvalidReflectivity(f64),
    #[error("shutter threshold {0} out of [0, 1]")]
    InvalidShutterThreshold(f64),
    #[error("measured photon number {measured} exceeds input photon number {input}")]
    SumExceedsInput { measured: u32, input: u32 },
}

/// Detector outcome behind the balanced splitter: `S = K + L`, `Δ = L - K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeasurementOutcome {
    label: SumDiff,
}

impl MeasurementOutcome {
    pub fn new(sum: i64, diff: i64) -> Result<Self, StateError> {
        Ok(Self {
            label: SumDiff::new(sum, diff)?,
        })
    }

    pub fn from_counts(k: u32, l: u32) -> Self {
        Self {
            label: SumDiff {
                sum: k + l,
                diff: l as i32 - k as i32,
            },
        }
    }

    pub fn sum(self) -> u32 {
        self.label.sum
    }

    pub fn diff(self) -> i32 {
        self.label.diff
    }

    /// Photons counted in the first detector, `(S - Δ)/2`.
    pub fn k(self) -> u32 {
        ((self.label.sum as i64 - self.label.diff as i64) / 2) as u32
    }

    /// Photons counted in the second detector, `(S + Δ)/2`.
    pub fn l(self) -> u32 {
        ((self.label.sum as i64 + self.label.diff as i64) / 2) as u32
    }

    /// Every outcome with total `sum`, ordered by increasing `Δ`.
    pub fn all_with_sum(sum: u32) -> impl Iterator<Item = MeasurementOutcome> {
        (0..=sum).rev().map(move |k| MeasurementOutcome::from_counts(k, sum - k))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterSettings {
    reflectivity: f64,
    condition: Condition,
    params: Params,
    shutter_threshold: f64,
    eval_mode: EvalMode,
}

impl FilterSettings {
    /// Always-open condition, shutter threshold 0.5.
    pub fn new(reflectivity: f64) -> Result<Self, FilterError> {
        if !(reflectivity > 0.0 && reflectivity < 1.0) {
            return Err(FilterError::InvalidReflectivity(reflectivity));
        }
        Ok(Self {
            reflectivity,
            condition: Condition::always_open(),
            params: Params::new(),
            shutter_threshold: 0.5,
            eval_mode: EvalMode::Strict,
        })
    }

    pub fn with_condition(mut self, condition: Condition, params: Params) -> Result<Self, FilterError> {
        condition.check_bound(&params)?;
        self.condition = condition;
        self.params = params;
        Ok(self)
    }

    pub fn with_shutter_threshold(mut self, threshold: f64) -> Result<Self, FilterError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(FilterError::InvalidShutterThreshold(threshold));
        }
        self.shutter_threshold = threshold;
        Ok(self)
    }

    pub fn with_eval_mode(mut self, mode: EvalMode) -> Self {
        self.eval_mode = mode;
        self
    }

    pub fn reflectivity(&self) -> f64 {
        self.reflectivity
    }

    pub fn transmissivity(&self) -> f64 {
        1.0 - self.reflectivity
    }

    pub fn condition(&self) -> &Condition {
        &self.condition
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn shutter_threshold(&self) -> f64 {
        self.shutter_threshold
    }

    /// Whether the analysis box opens the shutter for a given pass probability.
    pub fn shutter_opens(&self, pass_probability: f64) -> bool {
        pass_probability >= self.shutter_threshold
    }

    /// `C(S_t, |Δ_t|)` for the transmitted component `|k, l⟩`.
    pub fn accepts(&self, k: u32, l: u32) -> Result<bool, ConditionError> {
        if self.condition.is_always_open() {
            return Ok(true);
        }
        self.condition
            .evaluate_with(k + l, k as i32 - l as i32, &self.params, self.eval_mode)
    }

    fn mask(&self, state: &TwoModeState) -> Result<TwoModeState, ConditionError> {
        if self.condition.is_always_open() {
            return Ok(state.clone());
        }
        let mut kept = Vec::with_capacity(state.len());
        for ((k, l), a) in state.iter() {
            if self.accepts(k, l)? {
                kept.push(((k, l), a));
            }
        }
        Ok(TwoModeState::from_amplitudes(kept))
    }
}

/// Pure or mixed filter input.
#[derive(Clone, Copy, Debug)]
pub enum FilterInput<'a> {
    Pure(&'a TwoModeState),
    Mixed(&'a MixedState),
}

impl<'a> From<&'a TwoModeState> for FilterInput<'a> {
    fn from(state: &'a TwoModeState) -> Self {
        FilterInput::Pure(state)
    }
}

impl<'a> From<&'a MixedState> for FilterInput<'a> {
    fn from(state: &'a MixedState) -> Self {
        FilterInput::Mixed(state)
    }
}

impl<'a> FilterInput<'a> {
    fn terms(self) -> Result<Vec<(f64, &'a TwoModeState)>, StateError> {
        match self {
            FilterInput::Pure(state) => {
                state.ensure_normalized()?;
                Ok(vec![(1.0, state)])
            }
            FilterInput::Mixed(mixed) => {
                if !mixed.weights_normalized() {
                    let total = mixed.terms().iter().map(|(w, _)| w).sum();
                    return Err(StateError::InvalidWeights(total));
                }
                Ok(mixed.terms().iter().map(|(w, s)| (*w, s)).collect())
            }
        }
    }
}

/// Unnormalized transmitted state `⟨K, L|_d ψ_dt⟩`; its squared norm is the
/// outcome probability.
pub(crate) fn project_on_outcome(
    input: &TwoModeState,
    reflectivity: f64,
    outcome: MeasurementOutcome,
) -> TwoModeState {
    let s = u64::from(outcome.sum());
    let k = u64::from(outcome.k());
    if u64::from(input.max_total()) < s {
        return TwoModeState::default();
    }
    let ln_r = reflectivity.ln();
    let ln_t = (1.0 - reflectivity).ln();

    // ⟨K, L| U_BS |v, S-v⟩ for every split of the reflected photons
    let interference: Vec<LogMagnitude> = (0..=s)
        .map(|v| {
            let sum = signed_binomial_convolution(v, s - v, k as i64);
            bs_log_amplitude(v, s - v, k, &sum)
        })
        .collect();

    let mut transmitted = BTreeMap::<(u32, u32), f64>::new();
    for ((n, m), xi) in input.iter() {
        let (n64, m64) = (u64::from(n), u64::from(m));
        if n64 + m64 < s {
            continue;
        }
        for v in s.saturating_sub(m64)..=n64.min(s) {
            let w = s - v;
            let bs = interference[v as usize];
            if bs.is_zero() {
                continue;
            }
            let log_tap = 0.5
                * (log_binomial(n64, v)
                    + log_binomial(m64, w)
                    + s as f64 * ln_r
                    + (n64 + m64 - s) as f64 * ln_t);
            let amp = xi * bs.scale_log(log_tap).to_f64();
            *transmitted
                .entry(((n64 - v) as u32, (m64 - w) as u32))
                .or_insert(0.0) += amp;
        }
    }
    TwoModeState::from_amplitudes(transmitted)
}

/// Probability of `outcome` and the normalized, phase-fixed transmitted state.
pub fn conditional_state(
    input: &TwoModeState,
    settings: &FilterSettings,
    outcome: MeasurementOutcome,
) -> Result<Heralded<TwoModeState>, FilterError> {
    input.ensure_normalized()?;
    let projected = project_on_outcome(input, settings.reflectivity, outcome);
    Ok(herald(projected))
}

fn herald(projected: TwoModeState) -> Heralded<TwoModeState> {
    let probability = projected.norm_sqr();
    if !(probability > 0.0) {
        return Heralded::Impossible;
    }
    Heralded::Observed {
        probability,
        value: projected.scaled(1.0 / probability.sqrt()).phase_fixed(),
    }
}

/// Transmitted photon-number statistics `p^{S,Δ}(S_t, Δ_t)` before the shutter.
///
/// For mixed inputs this is the posterior-weighted sum over mixture terms.
pub fn conditional_distribution<'a>(
    input: impl Into<FilterInput<'a>>,
    settings: &FilterSettings,
    outcome: MeasurementOutcome,
) -> Result<Heralded<Distribution<(u32, i32)>>, FilterError> {
    let terms = input.into().terms()?;
    let mut dist = Distribution::new();
    let mut total = 0.0;
    for (weight, state) in terms {
        let projected = project_on_outcome(state, settings.reflectivity, outcome);
        for (key, p) in projected.sum_diff_probabilities().iter() {
            dist.add(key, weight * p);
        }
        total += weight * projected.norm_sqr();
    }
    if !(total > 0.0) {
        return Ok(Heralded::Impossible);
    }
    Ok(Heralded::Observed {
        probability: total,
        value: dist.normalized(),
    })
}

/// Kraus action of the filter, including the condition-gated shutter.
///
/// Components violating the condition are removed before renormalization. The
/// returned probability is that of observing `outcome` and passing the
/// condition. A pure input gives a single-term mixture; mixture terms are
/// filtered independently with Bayes-updated weights.
pub fn apply_kraus<'a>(
    input: impl Into<FilterInput<'a>>,
    settings: &FilterSettings,
    outcome: MeasurementOutcome,
) -> Result<Heralded<MixedState>, FilterError> {
    let terms = input.into().terms()?;
    let mut filtered = Vec::with_capacity(terms.len());
    for (weight, state) in terms {
        let projected = project_on_outcome(state, settings.reflectivity, outcome);
        let kept = settings.mask(&projected)?;
        let p = kept.norm_sqr();
        if p > 0.0 {
            filtered.push((weight * p, kept.scaled(1.0 / p.sqrt()).phase_fixed()));
        }
    }
    let total: f64 = filtered.iter().map(|(w, _)| w).sum();
    if !(total > 0.0) {
        return Ok(Heralded::Impossible);
    }
    Ok(Heralded::Observed {
        probability: total,
        value: MixedState::from_unnormalized(filtered)?,
    })
}

/// Probability that the transmitted state satisfies the condition, given the
/// outcome. `Impossible` when the outcome itself has probability zero.
pub fn shutter_probability<'a>(
    input: impl Into<FilterInput<'a>>,
    settings: &FilterSettings,
    outcome: MeasurementOutcome,
) -> Result<Heralded<f64>, FilterError> {
    let terms = input.into().terms()?;
    let mut outcome_mass = 0.0;
    let mut passing_mass = 0.0;
    for (weight, state) in terms {
        let projected = project_on_outcome(state, settings.reflectivity, outcome);
        outcome_mass += weight * projected.norm_sqr();
        passing_mass += weight * settings.mask(&projected)?.norm_sqr();
    }
    if !(outcome_mass > 0.0) {
        return Ok(Heralded::Impossible);
    }
    Ok(Heralded::Observed {
        probability: outcome_mass,
        value: (passing_mass / outcome_mass).clamp(0.0, 1.0),
    })
}

/// Probability that a (pre-shutter) mixed transmitted state satisfies the
/// settings' condition: `Σ_j w_j ‖C ψ_j‖²`.
pub fn condition_probability(state: &MixedState, settings: &FilterSettings) -> Result<f64, FilterError> {
    let mut total = 0.0;
    for (weight, term) in state.terms() {
        total += weight * settings.mask(term)?.norm_sqr();
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Closed-form amplitudes `f(Δ_r)` of a Fock input `|S_i, Δ_i⟩` projected on an
/// outcome, indexed by the difference `Δ_r` carried by the reflected sample.
#[derive(Clone, Debug, PartialEq)]
pub struct FCoefficients {
    pub input: SumDiff,
    pub outcome: MeasurementOutcome,
    values: BTreeMap<i32, f64>,
}

impl FCoefficients {
    pub fn get(&self, delta_r: i32) -> f64 {
        self.values.get(&delta_r).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.values.iter().map(|(&d, &f)| (d, f))
    }

    /// Inclusive `(Δ_r^min, Δ_r^max)`.
    pub fn support(&self) -> (i32, i32) {
        let s = self.outcome.sum() as i32;
        let lo = (-s).max(s - self.input.sum as i32 + self.input.diff);
        let hi = s.min(self.input.sum as i32 - s + self.input.diff);
        (lo, hi)
    }

    /// `Σ f²`, the probability of the outcome for this Fock input.
    pub fn norm_sqr(&self) -> f64 {
        self.values.values().map(|f| f * f).sum()
    }

    /// Unnormalized `Σ f(Δ_r) |S_i - S, Δ_i - Δ_r⟩` in `(k, l)` counts.
    pub fn transmitted(&self) -> TwoModeState {
        let s_t = (self.input.sum - self.outcome.sum()) as i64;
        TwoModeState::from_amplitudes(self.iter().map(|(delta_r, f)| {
            let label = SumDiff::new(s_t, i64::from(self.input.diff - delta_r))
                .expect("support bounds keep transmitted labels valid");
            (label.counts(), f)
        }))
    }

    /// Normalized, phase-fixed transmitted state, optionally gated by the
    /// settings' condition mapped through `Δ_t = Δ_i - Δ_r`.
    pub fn reconstruct(&self, settings: Option<&FilterSettings>) -> Result<Heralded<TwoModeState>, FilterError> {
        let transmitted = self.transmitted();
        let transmitted = match settings {
            Some(settings) => settings.mask(&transmitted)?,
            None => transmitted,
        };
        Ok(herald(transmitted))
    }
}

pub fn f_coefficients(
    total: u32,
    diff: i32,
    settings: &FilterSettings,
    outcome: MeasurementOutcome,
) -> Result<FCoefficients, FilterError> {
    let input = SumDiff::new(total.into(), diff.into())?;
    if outcome.sum() > total {
        return Err(FilterError::SumExceedsInput {
            measured: outcome.sum(),
            input: total,
        });
    }
    let (n, m) = input.counts();
    let (n, m) = (u64::from(n), u64::from(m));
    let s = u64::from(outcome.sum());
    let k = u64::from(outcome.k());
    let ln_r = settings.reflectivity.ln();
    let ln_t = settings.transmissivity().ln();

    let mut coefficients = FCoefficients {
        input,
        outcome,
        values: BTreeMap::new(),
    };
    let (lo, hi) = coefficients.support();
    for delta_r in (lo..=hi).step_by(2) {
        let v = ((s as i64 + i64::from(delta_r)) / 2) as u64;
        let w = s - v;
        // c_v^(n) c_w^(m)
        let log_c = 0.5
            * (log_binomial(n, v) + v as f64 * ln_r + (n - v) as f64 * ln_t
                + log_binomial(m, w)
                + w as f64 * ln_r
                + (m - w) as f64 * ln_t);
        let bracket = signed_binomial_convolution(v, w, k as i64);
        let f = bs_log_amplitude(v, w, k, &bracket).scale_log(log_c).to_f64();
        coefficients.values.insert(delta_r, f);
    }
    Ok(coefficients)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(r: f64) -> FilterSettings {
        FilterSettings::new(r).unwrap()
    }

    fn outcome(s: i64, d: i64) -> MeasurementOutcome {
        MeasurementOutcome::new(s, d).unwrap()
    }

    fn assert_same_up_to_sign(a: &TwoModeState, b: &TwoModeState, tol: f64) {
        let sign = if a.inner(b) < 0.0 { -1.0 } else { 1.0 };
        let keys: std::collections::BTreeSet<_> = a.iter().chain(b.iter()).map(|(k, _)| k).collect();
        for (n, m) in keys {
            let diff = a.amplitude(n, m) - sign * b.amplitude(n, m);
            assert!(diff.abs() < tol, "|{n},{m}⟩: {} vs {}", a.amplitude(n, m), b.amplitude(n, m));
        }
    }

    #[test]
    fn settings_validation() {
        assert!(FilterSettings::new(0.0).is_err());
        assert!(FilterSettings::new(1.0).is_err());
        assert!(FilterSettings::new(f64::NAN).is_err());
        let c = Condition::parse("adt > a*st").unwrap();
        assert!(settings(0.1).with_condition(c.clone(), Params::new()).is_err());
        let p: Params = [("a".to_string(), 0.5)].into();
        assert!(settings(0.1).with_condition(c, p).is_ok());
        assert!(settings(0.1).with_shutter_threshold(1.5).is_err());
    }

    #[test]
    fn outcome_labels() {
        let o = outcome(20, 0);
        assert_eq!((o.k(), o.l()), (10, 10));
        let o = outcome(20, 20);
        assert_eq!((o.k(), o.l()), (0, 20));
        assert!(MeasurementOutcome::new(3, 0).is_err());
        let all: Vec<i32> = MeasurementOutcome::all_with_sum(2).map(|o| o.diff()).collect();
        assert_eq!(all, vec![-2, 0, 2]);
    }

    #[test]
    fn vacuum_passes_untouched() {
        let vac = TwoModeState::fock(0, 0);
        match conditional_state(&vac, &settings(0.3), outcome(0, 0)).unwrap() {
            Heralded::Observed { probability, value } => {
                assert!((probability - 1.0).abs() < 1e-15);
                assert_eq!(value, vac);
            }
            Heralded::Impossible => panic!("vacuum outcome must be possible"),
        }
        assert!(conditional_state(&vac, &settings(0.3), outcome(1, 1)).unwrap().is_impossible());
    }

    #[test]
    fn single_photon_tap() {
        let input = TwoModeState::fock(1, 0);
        let s = settings(0.1);
        for d in [-1, 1] {
            let h = conditional_state(&input, &s, outcome(1, d)).unwrap();
            assert!((h.probability() - 0.05).abs() < 1e-15);
            assert_eq!(h.value().unwrap(), &TwoModeState::fock(0, 0));
        }
        let h = conditional_state(&input, &s, outcome(0, 0)).unwrap();
        assert!((h.probability() - 0.9).abs() < 1e-15);
        assert_eq!(h.value().unwrap(), &TwoModeState::fock(1, 0));
    }

    #[test]
    fn rejects_unnormalized_input() {
        let input = TwoModeState::from_amplitudes([((1, 0), 1.0), ((0, 1), 1.0)]);
        assert!(conditional_state(&input, &settings(0.1), outcome(0, 0)).is_err());
    }

    #[test]
    fn fock_inputs_land_on_one_line() {
        let s = settings(0.1);
        for n in 0..=6u32 {
            let input = TwoModeState::fock(n, n);
            for total in 0..=2 * n {
                for o in MeasurementOutcome::all_with_sum(total) {
                    if let Heralded::Observed { value, .. } = conditional_distribution(&input, &s, o).unwrap() {
                        assert!((value.total() - 1.0).abs() < 1e-10);
                        for ((s_t, _), _) in value.iter() {
                            assert_eq!(s_t, 2 * n - total);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn outcome_completeness() {
        let inputs = [
            TwoModeState::fock(3, 5),
            TwoModeState::uniform_fixed_sum(12),
            TwoModeState::uniform_range(2, 9).unwrap(),
            TwoModeState::from_amplitudes([((4, 1), 0.6), ((0, 7), -0.8)]),
        ];
        for input in &inputs {
            for r in [0.1, 0.5, 0.83] {
                let s = settings(r);
                let total: f64 = (0..=input.max_total())
                    .flat_map(MeasurementOutcome::all_with_sum)
                    .map(|o| conditional_state(input, &s, o).unwrap().probability())
                    .sum();
                assert!((total - 1.0).abs() < 1e-10, "r={r} total={total}");
            }
        }
    }

    #[test]
    fn symmetric_inputs_stay_symmetric() {
        let s = settings(0.1);
        let inputs = [
            TwoModeState::uniform_fixed_sum(10),
            TwoModeState::uniform_range(3, 9).unwrap(),
            TwoModeState::from_amplitudes([((4, 2), 0.5), ((2, 4), 0.5), ((3, 3), -0.5), ((1, 0), 0.5), ((0, 1), 0.5)])
                .normalized()
                .unwrap(),
        ];
        for input in &inputs {
            for total in [0u32, 2, 4] {
                let h = conditional_distribution(input, &s, outcome(total.into(), 0)).unwrap();
                let dist = h.value().unwrap();
                for ((s_t, d_t), p) in dist.iter() {
                    assert!((p - dist.get((s_t, -d_t))).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn kraus_on_fock_matches_projection() {
        let s = settings(0.1);
        let input = TwoModeState::fock(4, 2);
        let o = outcome(2, 0);
        let direct = conditional_state(&input, &s, o).unwrap();
        let kraus = apply_kraus(&input, &s, o).unwrap();
        assert!((direct.probability() - kraus.probability()).abs() < 1e-15);
        let mixed = kraus.value().unwrap();
        assert_eq!(mixed.len(), 1);
        assert_eq!(&mixed.terms()[0].1, direct.value().unwrap());
    }

    #[test]
    fn kraus_on_mixture_projects_incoherently() {
        let s = settings(0.1);
        let a = TwoModeState::fock(3, 3);
        let b = TwoModeState::fock(5, 5);
        let mix = MixedState::new(vec![(0.5, a.clone()), (0.5, b.clone())]).unwrap();
        let o = outcome(2, 0);
        let h = apply_kraus(&mix, &s, o).unwrap();
        let out = h.value().unwrap();
        assert_eq!(out.len(), 2);
        let pa = conditional_state(&a, &s, o).unwrap().probability();
        let pb = conditional_state(&b, &s, o).unwrap().probability();
        assert!((h.probability() - 0.5 * (pa + pb)).abs() < 1e-15);
        assert!((out.terms()[0].0 - pa / (pa + pb)).abs() < 1e-12);
        let lines: Vec<u32> = out.terms().iter().map(|(_, st)| st.max_total()).collect();
        assert_eq!(lines, vec![4, 8]);
    }

    #[test]
    fn kraus_condition_masks_components() {
        let c = Condition::parse("adt >= 4").unwrap();
        let s = settings(0.1).with_condition(c, Params::new()).unwrap();
        let input = TwoModeState::uniform_range(4, 10).unwrap();
        let o = outcome(2, 0);
        let h = apply_kraus(&input, &s, o).unwrap();
        let state = &h.value().unwrap().terms()[0].1;
        assert!(state.is_normalized());
        for ((k, l), _) in state.iter() {
            assert!(k.abs_diff(l) >= 4);
        }
        let pass = shutter_probability(&input, &s, o).unwrap();
        let open = conditional_state(&input, &settings(0.1), o).unwrap();
        assert!((h.probability() - pass.value().unwrap() * open.probability()).abs() < 1e-14);
    }

    #[test]
    fn shutter_trivial_condition() {
        let s = settings(0.1);
        let input = TwoModeState::uniform_fixed_sum(8);
        let h = shutter_probability(&input, &s, outcome(2, 2)).unwrap();
        assert!((h.value().unwrap() - 1.0).abs() < 1e-15);
        assert!(shutter_probability(&input, &s, outcome(10, 0)).unwrap().is_impossible());
    }

    #[test]
    fn condition_domain_errors_surface() {
        let c = Condition::parse("adt > st + sqrt(b^2 - st^2) - b").unwrap();
        let p: Params = [("b".to_string(), 3.0)].into();
        let s = settings(0.1).with_condition(c, p).unwrap();
        let input = TwoModeState::uniform_fixed_sum(8);
        assert!(matches!(
            shutter_probability(&input, &s, outcome(2, 0)),
            Err(FilterError::Condition(ConditionError::Domain(_)))
        ));
        let clamped = s.with_eval_mode(EvalMode::Clamp);
        assert!(shutter_probability(&input, &clamped, outcome(2, 0)).is_ok());
    }

    #[test]
    fn f_coefficient_examples() {
        let s = settings(0.1);
        let f = f_coefficients(1, 1, &s, outcome(1, 1)).unwrap();
        assert_eq!(f.iter().count(), 1);
        let state = f.reconstruct(None).unwrap();
        assert_eq!(state.value().unwrap(), &TwoModeState::fock(0, 0));

        let f = f_coefficients(200, 0, &s, outcome(20, 0)).unwrap();
        assert_eq!(f.support(), (-20, 20));
        assert!(f.iter().all(|(d, _)| d % 2 == 0 && (-20..=20).contains(&d)));

        assert!(matches!(
            f_coefficients(4, 0, &s, outcome(6, 0)),
            Err(FilterError::SumExceedsInput { .. })
        ));
    }

    #[test]
    fn f_coefficients_match_projection_exhaustively() {
        for r in [0.1, 0.5] {
            let s = settings(r);
            for total in 0..=12u32 {
                for k in 0..=total {
                    let diff = total as i32 - 2 * k as i32;
                    let (n, m) = SumDiff::new(total.into(), diff.into()).unwrap().counts();
                    let input = TwoModeState::fock(n, m);
                    for measured in 0..=total {
                        for o in MeasurementOutcome::all_with_sum(measured) {
                            let f = f_coefficients(total, diff, &s, o).unwrap();
                            let direct = conditional_state(&input, &s, o).unwrap();
                            assert!((f.norm_sqr() - direct.probability()).abs() < 1e-12);
                            match (f.reconstruct(None).unwrap(), direct) {
                                (Heralded::Impossible, Heralded::Impossible) => {}
                                (Heralded::Observed { value: a, .. }, Heralded::Observed { value: b, .. }) => {
                                    assert_same_up_to_sign(&a, &b, 1e-10)
                                }
                                (a, b) => panic!("mismatch {a:?} vs {b:?}"),
                            }
                        }
                    }
                }
            }
        }
    }


    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn small_input() -> impl Strategy<Value = TwoModeState> {
            prop_oneof![
                (0u32..8, 0u32..8).prop_map(|(n, m)| TwoModeState::fock(n, m)),
                (0u32..14).prop_map(TwoModeState::uniform_fixed_sum),
                (0u32..14).prop_flat_map(|hi| (0..=hi, Just(hi)))
                    .prop_map(|(lo, hi)| TwoModeState::uniform_range(lo, hi).unwrap()),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn outcomes_are_complete(input in small_input(), r in 0.01f64..0.99) {
                let settings = FilterSettings::new(r).unwrap();
                let total: f64 = (0..=input.max_total())
                    .flat_map(MeasurementOutcome::all_with_sum)
                    .map(|o| conditional_state(&input, &settings, o).unwrap().probability())
                    .sum();
                prop_assert!((total - 1.0).abs() < 1e-10);
            }

            #[test]
            fn conditional_states_are_normalized(input in small_input(), r in 0.01f64..0.99, s in 0u32..14, pick in 0u32..100) {
                let settings = FilterSettings::new(r).unwrap();
                let o = MeasurementOutcome::from_counts(pick % (s + 1), s - pick % (s + 1));
                if let Some(state) = conditional_state(&input, &settings, o).unwrap().value() {
                    prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-10);
                }
            }

            #[test]
            fn pass_fraction_is_a_probability(input in small_input(), r in 0.01f64..0.99, cut in 0i32..12) {
                let settings = FilterSettings::new(r)
                    .unwrap()
                    .with_condition(Condition::parse(&format!("adt >= {cut}")).unwrap(), Params::new())
                    .unwrap();
                for o in MeasurementOutcome::all_with_sum(2) {
                    if let Some(p) = shutter_probability(&input, &settings, o).unwrap().value() {
                        prop_assert!((0.0..=1.0).contains(p));
                    }
                }
            }
        }
    }
}
