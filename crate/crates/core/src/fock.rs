//! Pure and mixed two-mode photon-number states.
//!
//! Amplitudes are real. States are stored sparsely, keyed by the photon counts
//! `(n, m)` in the H and V modes, with no explicitly stored zeros.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::Distribution;
use crate::NORM_TOLERANCE;

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("state has no nonzero amplitude")]
    Empty,
    #[error("amplitude for |{n},{m}⟩ is not finite")]
    NonFinite { n: u32, m: u32 },
    #[error("invalid (S, Δ) label ({sum}, {diff}): need |Δ| ≤ S and S + Δ even")]
    InvalidLabel { sum: i64, diff: i64 },
    #[error("invalid photon-number range [{lo}, {hi}]")]
    InvalidRange { lo: u32, hi: u32 },
    #[error("mixture weights must be positive and sum to 1 (got sum {0})")]
    InvalidWeights(f64),
    #[error("failed to read state file: {0}")]
    Io(String),
    #[error("malformed state document: {0}")]
    Format(String),
}

/// A photon-number pair relabelled as total `S = n + m` and difference `Δ = n - m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SumDiff {
    pub sum: u32,
    pub diff: i32,
}

impl SumDiff {
    pub fn new(sum: i64, diff: i64) -> Result<Self, StateError> {
        if sum < 0 || diff.abs() > sum || (sum + diff) % 2 != 0 || sum > u32::MAX as i64 {
            return Err(StateError::InvalidLabel { sum, diff });
        }
        Ok(Self {
            sum: sum as u32,
            diff: diff as i32,
        })
    }

    pub fn from_counts(n: u32, m: u32) -> Self {
        Self {
            sum: n + m,
            diff: n as i32 - m as i32,
        }
    }

    /// `(n, m) = ((S + Δ)/2, (S - Δ)/2)`.
    pub fn counts(self) -> (u32, u32) {
        let s = self.sum as i64;
        let d = self.diff as i64;
        (((s + d) / 2) as u32, ((s - d) / 2) as u32)
    }
}

/// Sparse real superposition `Σ ξ_{nm} |n, m⟩`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TwoModeState {
    amplitudes: BTreeMap<(u32, u32), f64>,
}

#[derive(Serialize, Deserialize)]
struct StateDocument {
    terms: Vec<StateTerm>,
}

#[derive(Serialize, Deserialize)]
struct StateTerm {
    n: u32,
    m: u32,
    amp: f64,
}

impl TwoModeState {
    /// Builds a state from `(n, m, amplitude)` triples. Repeated keys are summed
    /// and exact zeros dropped; no normalization is applied.
    pub fn from_amplitudes(terms: impl IntoIterator<Item = ((u32, u32), f64)>) -> Self {
        let mut amplitudes = BTreeMap::new();
        for (key, amp) in terms {
            *amplitudes.entry(key).or_insert(0.0) += amp;
        }
        amplitudes.retain(|_, a| *a != 0.0);
        Self { amplitudes }
    }

    pub fn fock(n: u32, m: u32) -> Self {
        Self::from_amplitudes([((n, m), 1.0)])
    }

    /// `(S+1)^(-1/2) Σ_N |S - N, N⟩`: fixed total, uniform population difference.
    pub fn uniform_fixed_sum(total: u32) -> Self {
        let amp = 1.0 / f64::from(total + 1).sqrt();
        Self::from_amplitudes((0..=total).map(|k| ((total - k, k), amp)))
    }

    /// Uniform over both the total photon number in `[lo, hi]` and, within each
    /// shell, the population difference.
    pub fn uniform_range(lo: u32, hi: u32) -> Result<Self, StateError> {
        if lo > hi {
            return Err(StateError::InvalidRange { lo, hi });
        }
        let shells = f64::from(hi - lo + 1);
        Ok(Self::from_amplitudes((lo..=hi).flat_map(|total| {
            let amp = 1.0 / (shells * f64::from(total + 1)).sqrt();
            (0..=total).map(move |k| ((total - k, k), amp))
        })))
    }

    pub fn amplitude(&self, n: u32, m: u32) -> f64 {
        self.amplitudes.get(&(n, m)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.amplitudes.iter().map(|(&k, &a)| (k, a))
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a * a).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn ensure_normalized(&self) -> Result<(), StateError> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(StateError::NotNormalized(self.norm_sqr()))
        }
    }

    pub fn normalized(&self) -> Result<Self, StateError> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(StateError::Empty);
        }
        if !norm.is_finite() {
            let (&(n, m), _) = self
                .amplitudes
                .iter()
                .find(|(_, a)| !a.is_finite())
                .expect("non-finite norm implies a non-finite amplitude");
            return Err(StateError::NonFinite { n, m });
        }
        Ok(self.scaled(1.0 / norm))
    }

    pub(crate) fn scaled(&self, factor: f64) -> Self {
        Self::from_amplitudes(self.iter().map(|(k, a)| (k, a * factor)))
    }

    /// Largest total photon number in the support.
    pub fn max_total(&self) -> u32 {
        self.amplitudes.keys().map(|&(n, m)| n + m).max().unwrap_or(0)
    }

    /// Real inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &TwoModeState) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .amplitudes
            .iter()
            .filter_map(|(k, a)| large.amplitudes.get(k).map(|b| a * b))
            .sum()
    }

    /// Fixes the global sign so the largest-magnitude amplitude is positive.
    /// Near-ties (within 1e-9 relative) resolve to the smallest `(n, m)` key.
    pub fn phase_fixed(&self) -> Self {
        let max = self.amplitudes.values().fold(0.0f64, |acc, a| acc.max(a.abs()));
        let pivot = self
            .amplitudes
            .values()
            .find(|a| a.abs() >= max * (1.0 - 1e-9))
            .copied()
            .unwrap_or(1.0);
        if pivot < 0.0 {
            self.scaled(-1.0)
        } else {
            self.clone()
        }
    }

    /// Probabilities `|ξ_{nm}|²` re-indexed by `(S, Δ) = (n + m, n - m)`.
    pub fn marginal_sum_diff(&self) -> Result<Distribution<(u32, i32)>, StateError> {
        self.ensure_normalized()?;
        Ok(self.sum_diff_probabilities())
    }

    pub(crate) fn sum_diff_probabilities(&self) -> Distribution<(u32, i32)> {
        self.iter()
            .map(|((n, m), a)| {
                let label = SumDiff::from_counts(n, m);
                ((label.sum, label.diff), a * a)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let doc = StateDocument {
            terms: self
                .iter()
                .map(|((n, m), amp)| StateTerm { n, m, amp })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("state documents always serialize")
    }

    /// Parses `{"terms": [{"n":…, "m":…, "amp":…}]}`. The result is not normalized.
    pub fn from_json(text: &str) -> Result<Self, StateError> {
        let doc: StateDocument =
            serde_json::from_str(text).map_err(|e| StateError::Format(e.to_string()))?;
        if let Some(term) = doc.terms.iter().find(|t| !t.amp.is_finite()) {
            return Err(StateError::NonFinite {
                n: term.n,
                m: term.m,
            });
        }
        Ok(Self::from_amplitudes(
            doc.terms.into_iter().map(|t| ((t.n, t.m), t.amp)),
        ))
    }

    pub fn read_json(path: &Path) -> Result<Self, StateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| StateError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// A weighted incoherent mixture `Σ_j w_j |ψ_j⟩⟨ψ_j|`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    terms: Vec<(f64, TwoModeState)>,
}

impl MixedState {
    /// Validates that weights are positive and sum to one and that every term
    /// is a normalized state.
    pub fn new(terms: Vec<(f64, TwoModeState)>) -> Result<Self, StateError> {
        let total: f64 = terms.iter().map(|(w, _)| w).sum();
        if terms.is_empty()
            || terms.iter().any(|(w, _)| !(*w > 0.0))
            || (total - 1.0).abs() > NORM_TOLERANCE
        {
            return Err(StateError::InvalidWeights(total));
        }
        for (_, state) in &terms {
            state.ensure_normalized()?;
        }
        Ok(Self { terms })
    }

    /// Renormalizes positive weights (dropping zero ones) before validating.
    pub fn from_unnormalized(terms: Vec<(f64, TwoModeState)>) -> Result<Self, StateError> {
        let total: f64 = terms.iter().map(|(w, _)| w).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(StateError::InvalidWeights(total));
        }
        Self::new(
            terms
                .into_iter()
                .filter(|(w, _)| *w > 0.0)
                .map(|(w, s)| (w / total, s))
                .collect(),
        )
    }

    pub fn pure(state: TwoModeState) -> Result<Self, StateError> {
        Self::new(vec![(1.0, state)])
    }

    pub fn terms(&self) -> &[(f64, TwoModeState)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn weights_normalized(&self) -> bool {
        let total: f64 = self.terms.iter().map(|(w, _)| w).sum();
        (total - 1.0).abs() <= NORM_TOLERANCE && self.terms.iter().all(|(w, _)| *w > 0.0)
    }

    /// Photon-number statistics `Σ_j w_j |ξ^{(j)}_{nm}|²` keyed by `(S, Δ)`.
    pub fn sum_diff_distribution(&self) -> Distribution<(u32, i32)> {
        let mut dist = Distribution::new();
        for (w, state) in &self.terms {
            for (key, p) in state.sum_diff_probabilities().iter() {
                dist.add(key, w * p);
            }
        }
        dist
    }

    pub fn max_total(&self) -> u32 {
        self.terms.iter().map(|(_, s)| s.max_total()).max().unwrap_or(0)
    }
}
