//! Brute-force dense reference for small photon numbers.
//!
//! Builds the four-mode state `(t_H, t_V, c, d)` after the tapping splitter and
//! the balanced splitter by applying transformed creation operators one photon
//! at a time to the vacuum:
//!
//! ```text
//! a_H† → √t t_H† + √(r/2) (c† + d†)
//! a_V† → √t t_V† + √(r/2) (d† - c†)
//! ```
//!
//! Nothing here reuses the closed-form combinatorics of [`crate::filter`] or
//! [`crate::interference`]; it exists so those can be checked against it.

use std::collections::BTreeMap;

use crate::fock::{StateError, TwoModeState};

/// Complexity guard on the truncation.
pub const MAX_PHOTONS: u32 = 14;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseFourModeVector {
    s_max: usize,
    amps: Vec<f64>,
}

impl DenseFourModeVector {
    pub fn vacuum(s_max: u32) -> Result<Self, StateError> {
        if s_max > MAX_PHOTONS {
            return Err(StateError::InvalidRange {
                lo: 0,
                hi: s_max,
            });
        }
        let dim = (s_max as usize + 1).pow(4);
        let mut amps = vec![0.0; dim];
        amps[0] = 1.0;
        Ok(Self {
            s_max: s_max as usize,
            amps,
        })
    }

    fn zeros_like(&self) -> Self {
        Self {
            s_max: self.s_max,
            amps: vec![0.0; self.amps.len()],
        }
    }

    fn index(&self, modes: [usize; 4]) -> usize {
        let d = self.s_max + 1;
        ((modes[0] * d + modes[1]) * d + modes[2]) * d + modes[3]
    }

    /// Amplitude of `|t_H, t_V, K, L⟩`.
    pub fn amplitude(&self, modes: [u32; 4]) -> f64 {
        if modes.iter().any(|&n| n as usize > self.s_max) {
            return 0.0;
        }
        self.amps[self.index(modes.map(|n| n as usize))]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum()
    }

    fn occupied(&self) -> impl Iterator<Item = ([usize; 4], f64)> + '_ {
        let d = self.s_max + 1;
        self.amps.iter().enumerate().filter(|(_, a)| **a != 0.0).map(move |(i, &a)| {
            ([i / (d * d * d), (i / (d * d)) % d, (i / d) % d, i % d], a)
        })
    }

    /// Applies `Σ_j c_j a_j†` (a linear combination of mode creation operators).
    fn create(&self, coefficients: [f64; 4]) -> Self {
        let mut out = self.zeros_like();
        for (modes, a) in self.occupied() {
            for (mode, &c) in coefficients.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let mut raised = modes;
                raised[mode] += 1;
                assert!(
                    raised.iter().sum::<usize>() <= self.s_max,
                    "photon number exceeds oracle truncation"
                );
                let idx = out.index(raised);
                out.amps[idx] += c * a * (raised[mode] as f64).sqrt();
            }
        }
        out
    }

    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += scale * b;
        }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// The full four-mode state for a two-mode input.
pub fn dense_filter_state(input: &TwoModeState, r: f64, s_max: u32) -> Result<DenseFourModeVector, StateError> {
    if input.max_total() > s_max {
        return Err(StateError::InvalidRange {
            lo: input.max_total(),
            hi: s_max,
        });
    }
    let t = (1.0 - r).sqrt();
    let h = (r / 2.0).sqrt();
    let create_h = [t, 0.0, h, h];
    let create_v = [0.0, t, -h, h];

    let vacuum = DenseFourModeVector::vacuum(s_max)?;
    let mut total = vacuum.zeros_like();
    for ((n, m), xi) in input.iter() {
        let mut v = vacuum.clone();
        for _ in 0..n {
            v = v.create(create_h);
        }
        for _ in 0..m {
            v = v.create(create_v);
        }
        total.add_scaled(&v, xi / (factorial(n) * factorial(m)).sqrt());
    }
    Ok(total)
}

/// Every detector outcome `(K, L)` with its probability and the normalized,
/// phase-fixed transmitted state.
pub fn oracle_filter(
    input: &TwoModeState,
    r: f64,
    s_max: u32,
) -> Result<BTreeMap<(u32, u32), (f64, TwoModeState)>, StateError> {
    let dense = dense_filter_state(input, r, s_max)?;
    let mut grouped: BTreeMap<(u32, u32), Vec<((u32, u32), f64)>> = BTreeMap::new();
    for (modes, a) in dense.occupied() {
        let [th, tv, k, l] = modes.map(|n| n as u32);
        grouped.entry((k, l)).or_default().push(((th, tv), a));
    }
    let mut out = BTreeMap::new();
    for (outcome, terms) in grouped {
        let raw = TwoModeState::from_amplitudes(terms);
        let p = raw.norm_sqr();
        if p > 0.0 {
            out.insert(outcome, (p, raw.normalized()?.phase_fixed()));
        }
    }
    Ok(out)
}

/// Dense balanced-splitter output for `|n, m⟩`: amplitude of each `(K, L)`.
pub fn oracle_beam_splitter(n: u32, m: u32) -> BTreeMap<(u32, u32), f64> {
    // two-mode Fock amplitudes, built photon by photon
    let mut state: BTreeMap<(u32, u32), f64> = BTreeMap::from([((0, 0), 1.0)]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut apply = |ck: f64, cl: f64| {
        let mut next: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (&(k, l), &a) in &state {
            *next.entry((k + 1, l)).or_default() += ck * a * f64::from(k + 1).sqrt();
            *next.entry((k, l + 1)).or_default() += cl * a * f64::from(l + 1).sqrt();
        }
        state = next;
    };
    for _ in 0..n {
        apply(h, h);
    }
    for _ in 0..m {
        apply(-h, h);
    }
    let scale = 1.0 / (factorial(n) * factorial(m)).sqrt();
    state.into_iter().map(|(key, a)| (key, a * scale)).collect()
}

/// Dense HOM distribution over `Δ = L - K`.
pub fn oracle_hom_distribution(n: u32, m: u32) -> BTreeMap<i32, f64> {
    let mut dist = BTreeMap::new();
    for ((k, l), a) in oracle_beam_splitter(n, m) {
        *dist.entry(l as i32 - k as i32).or_default() += a * a;
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_input() {
        let out = oracle_filter(&TwoModeState::fock(0, 0), 0.1, 2).unwrap();
        assert_eq!(out.len(), 1);
        let (p, state) = &out[&(0, 0)];
        assert!((p - 1.0).abs() < 1e-15);
        assert_eq!(state.amplitude(0, 0), 1.0);
    }

    #[test]
    fn single_photon_tap() {
        let out = oracle_filter(&TwoModeState::fock(1, 0), 0.1, 2).unwrap();
        let reflected: f64 = out.iter().filter(|((k, l), _)| k + l == 1).map(|(_, (p, _))| p).sum();
        assert!((reflected - 0.1).abs() < 1e-14);
    }

    #[test]
    fn two_photons_half_tap() {
        // |1,1⟩ at r = 1/2: hand expansion of (t_H + (c+d)/√2)(t_V + (d-c)/√2)/2
        let out = oracle_filter(&TwoModeState::fock(1, 1), 0.5, 2).unwrap();
        let p = |k, l| out.get(&(k, l)).map_or(0.0, |(p, _)| *p);
        assert!((p(0, 0) - 0.25).abs() < 1e-14);
        assert!((p(1, 0) - 0.25).abs() < 1e-14);
        assert!((p(0, 1) - 0.25).abs() < 1e-14);
        assert!((p(2, 0) - 0.125).abs() < 1e-14);
        assert!((p(0, 2) - 0.125).abs() < 1e-14);
        assert_eq!(p(1, 1), 0.0);
        let total: f64 = out.values().map(|(p, _)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn completeness_and_norm() {
        let input = TwoModeState::uniform_range(0, 6).unwrap();
        let dense = dense_filter_state(&input, 0.3, 6).unwrap();
        assert!((dense.norm_sqr() - 1.0).abs() < 1e-12);
        let total: f64 = oracle_filter(&input, 0.3, 6).unwrap().values().map(|(p, _)| p).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_truncation_violations() {
        assert!(oracle_filter(&TwoModeState::fock(3, 3), 0.1, 5).is_err());
        assert!(DenseFourModeVector::vacuum(15).is_err());
    }

    #[test]
    fn beam_splitter_hong_ou_mandel() {
        let amps = oracle_beam_splitter(1, 1);
        assert!(amps.get(&(1, 1)).copied().unwrap_or(0.0).abs() < 1e-15);
        let dist = oracle_hom_distribution(1, 1);
        assert!((dist[&2] - 0.5).abs() < 1e-15);
        assert!((dist[&-2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn noisy_mixture_matches_oracle_bayes_sum() {
        use crate::detectors::{noisy_filtered_components, DetectorModel};
        use crate::filter::{FilterSettings, MeasurementOutcome};

        let input = TwoModeState::uniform_range(3, 8).unwrap();
        let r = 0.3;
        let table = oracle_filter(&input, r, 8).unwrap();
        let settings = FilterSettings::new(r).unwrap();
        for model in [DetectorModel::Binomial { eta: 0.7 }, DetectorModel::Gaussian { sigma: 0.6 }] {
            for (kr, lr) in [(1, 1), (2, 0), (0, 3), (2, 2)] {
                let mut expected: Vec<((u32, u32), f64, &TwoModeState)> = table
                    .iter()
                    .map(|(&(k, l), (p, state))| ((k, l), model.likelihood(k, kr) * model.likelihood(l, lr) * p, state))
                    .filter(|(_, w, _)| *w > 0.0)
                    .collect();
                let marginal: f64 = expected.iter().map(|(_, w, _)| w).sum();
                expected.retain(|(_, w, _)| *w >= 1e-14 * marginal);

                let reported = MeasurementOutcome::from_counts(kr, lr);
                let heralded = noisy_filtered_components(&input, &settings, reported, &model).unwrap();
                assert!((heralded.probability() - marginal).abs() < 1e-12);
                let (mixture, outcomes) = heralded.into_value().unwrap();
                assert_eq!(outcomes.len(), expected.len(), "{model:?} ({kr},{lr})");
                for ((w, state), o) in mixture.terms().iter().zip(&outcomes) {
                    let (_, ew, estate) = expected.iter().find(|(key, _, _)| *key == (o.k(), o.l())).unwrap();
                    assert!((w - ew / marginal).abs() < 1e-12);
                    for ((n, m), a) in estate.iter() {
                        assert!((state.amplitude(n, m) - a).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn purity_matches_dense_density_matrix() {
        use crate::detectors::{noisy_filtered_state, purity, DetectorModel};
        use crate::filter::{FilterSettings, MeasurementOutcome};

        let input = TwoModeState::uniform_fixed_sum(10);
        let settings = FilterSettings::new(0.2).unwrap();
        let reported = MeasurementOutcome::from_counts(1, 1);
        for model in [DetectorModel::Binomial { eta: 0.6 }, DetectorModel::Gaussian { sigma: 1.0 }] {
            let mixture = noisy_filtered_state(&input, &settings, reported, &model).unwrap().into_value().unwrap();
            let mut rho: BTreeMap<((u32, u32), (u32, u32)), f64> = BTreeMap::new();
            for (w, state) in mixture.terms() {
                for (a, x) in state.iter() {
                    for (b, y) in state.iter() {
                        *rho.entry((a, b)).or_default() += w * x * y;
                    }
                }
            }
            let trace_rho_sq: f64 = rho.values().map(|v| v * v).sum();
            let gamma = purity(&mixture).unwrap();
            assert!((gamma - trace_rho_sq).abs() < 1e-12, "{model:?}: {gamma} vs {trace_rho_sq}");
            assert!(gamma < 1.0);
        }
    }
}
