//! Balanced beam splitter acting on two-mode Fock states and the resulting
//! multiphoton Hong-Ou-Mandel output statistics.
//!
//! Mode convention: `a† → (c† + d†)/√2`, `b† → (d† - c†)/√2`, with `K` photons
//! counted in `c` and `L` in `d`. The amplitude of `|K, L⟩` for input `|n, m⟩`
//! is then
//!
//! ```text
//! sqrt(K! L! / (n! m! 2^(n+m))) · Σ_{p+q=K} C(n,p) C(m,q) (-1)^q
//! ```
//!
//! The alternating sum is evaluated exactly by
//! [`signed_binomial_convolution`]. Output population difference is
//! `Δ = L - K`, input difference is `Δ_i = n - m`.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use crate::distribution::Distribution;
use crate::fock::{StateError, SumDiff};
use crate::numerics::{log_factorial, signed_binomial_convolution, ExactInteger, LogMagnitude};

/// `U_BS |n, m⟩` expanded in the output Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BsAmplitudeTable {
    pub input: (u32, u32),
    /// Output `(K, L)` with `K + L = n + m` mapped to its real amplitude.
    pub amplitudes: BTreeMap<(u32, u32), f64>,
    /// The exact alternating sum behind each amplitude, keyed by `K`.
    pub sums: BTreeMap<u32, ExactInteger>,
}

impl BsAmplitudeTable {
    pub fn amplitude(&self, k: u32, l: u32) -> f64 {
        self.amplitudes.get(&(k, l)).copied().unwrap_or(0.0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a * a).sum()
    }
}

/// Log-space amplitude `⟨K, L| U_BS |v, w⟩` with `K + L = v + w`.
pub(crate) fn bs_log_amplitude(v: u64, w: u64, k: u64, sum: &ExactInteger) -> LogMagnitude {
    let total = v + w;
    let l = total - k;
    let log_scale = 0.5
        * (log_factorial(k) + log_factorial(l)
            - log_factorial(v)
            - log_factorial(w)
            - total as f64 * LN_2);
    sum.to_log_magnitude().scale_log(log_scale)
}

pub fn bs_transform(n: u32, m: u32) -> BsAmplitudeTable {
    let total = u64::from(n) + u64::from(m);
    let mut amplitudes = BTreeMap::new();
    let mut sums = BTreeMap::new();
    for k in 0..=total {
        let sum = signed_binomial_convolution(n.into(), m.into(), k as i64);
        if !sum.is_zero() {
            let amp = bs_log_amplitude(n.into(), m.into(), k, &sum).to_f64();
            amplitudes.insert((k as u32, (total - k) as u32), amp);
        }
        sums.insert(k as u32, sum);
    }
    BsAmplitudeTable {
        input: (n, m),
        amplitudes,
        sums,
    }
}

/// Output population-difference distribution `p^{S_i, Δ_i}(Δ)` for the Fock
/// input `|(S_i+Δ_i)/2, (S_i-Δ_i)/2⟩`.
///
/// Every `Δ` of the parity of `S_i` in `[-S_i, S_i]` is present, including
/// those with zero probability.
pub fn hom_distribution(total: u32, diff: i32) -> Result<Distribution<i32>, StateError> {
    let label = SumDiff::new(total.into(), diff.into())?;
    let (n, m) = label.counts();
    let (n, m, s) = (u64::from(n), u64::from(m), u64::from(total));
    let log_norm = -(log_factorial(n) + log_factorial(m) + s as f64 * LN_2);

    let mut dist = Distribution::new();
    for k in 0..=s {
        let l = s - k;
        let sum = signed_binomial_convolution(n, m, k as i64);
        let p = if sum.is_zero() {
            0.0
        } else {
            let lm = sum.to_log_magnitude();
            (2.0 * lm.log_value + log_factorial(k) + log_factorial(l) + log_norm).exp()
        };
        dist.insert(l as i32 - k as i32, p);
    }
    Ok(dist)
}

/// `P(|Δ| ≥ threshold)`.
pub fn threshold_probability(dist: &Distribution<i32>, threshold: u32) -> f64 {
    dist.mass_where(|delta| delta.unsigned_abs() >= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{binomial, reflected_binomial_convolution};
    use num_bigint::BigInt;
    use num_traits::One;

    fn exact_factorial(n: u64) -> BigInt {
        (1..=n).fold(BigInt::one(), |acc, k| acc * k)
    }

    #[test]
    fn vacuum_is_fixed() {
        let table = bs_transform(0, 0);
        assert_eq!(table.amplitudes.len(), 1);
        assert_eq!(table.amplitude(0, 0), 1.0);
    }

    #[test]
    fn two_photon_cases() {
        let table = bs_transform(1, 1);
        assert_eq!(table.amplitude(1, 1), 0.0);
        assert!(!table.amplitudes.contains_key(&(1, 1)));
        assert!((table.amplitude(2, 0).powi(2) - 0.5).abs() < 1e-15);
        assert!((table.amplitude(0, 2).powi(2) - 0.5).abs() < 1e-15);

        let table = bs_transform(2, 0);
        assert!((table.amplitude(1, 1).powi(2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_unitarity() {
        // Σ_K K! L! A_K² = n! m! 2^(n+m)
        for n in 0..=25u64 {
            for m in 0..=25u64 {
                let table = bs_transform(n as u32, m as u32);
                let lhs: BigInt = table
                    .sums
                    .iter()
                    .map(|(&k, a)| {
                        let k = u64::from(k);
                        exact_factorial(k) * exact_factorial(n + m - k) * a.as_bigint() * a.as_bigint()
                    })
                    .sum();
                let rhs = exact_factorial(n) * exact_factorial(m) * (BigInt::one() << (n + m));
                assert_eq!(lhs, rhs, "n={n} m={m}");
                assert!((table.norm_sqr() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conventions_give_equal_probabilities() {
        for n in 0..=15u64 {
            for m in 0..=15u64 {
                for k in 0..=(n + m) as i64 {
                    let a = signed_binomial_convolution(n, m, k).into_bigint();
                    let b = reflected_binomial_convolution(n, m, k).into_bigint();
                    assert_eq!(&a * &a, &b * &b);
                }
            }
        }
    }

    #[test]
    fn hom_two_photon_distributions() {
        let d = hom_distribution(2, 0).unwrap();
        assert_eq!(d.len(), 3);
        assert!((d.get(2) - 0.5).abs() < 1e-12);
        assert!((d.get(-2) - 0.5).abs() < 1e-12);
        assert_eq!(d.get(0), 0.0);

        let d = hom_distribution(2, 2).unwrap();
        assert!((d.get(0) - 0.5).abs() < 1e-12);
        assert!((d.get(2) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn hom_rejects_invalid_labels() {
        assert!(hom_distribution(3, 0).is_err());
        assert!(hom_distribution(2, 4).is_err());
    }

    #[test]
    fn hom_from_vacuum_port_is_binomial() {
        // |S, 0⟩ splits binomially: p(Δ) = C(S, K) / 2^S
        let s = 40u32;
        let d = hom_distribution(s, s as i32).unwrap();
        for k in 0..=s {
            let delta = s as i32 - 2 * k as i32;
            let expected = binomial(s.into(), k.into()).to_string().parse::<f64>().unwrap()
                / 2f64.powi(s as i32);
            assert!((d.get(delta) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn threshold_examples() {
        let d = hom_distribution(2, 0).unwrap();
        assert!((threshold_probability(&d, 0) - 1.0).abs() < 1e-12);
        assert!((threshold_probability(&d, 2) - 1.0).abs() < 1e-12);
        assert_eq!(threshold_probability(&d, 3), 0.0);
    }

    #[test]
    fn hom_symmetry_and_bistochasticity() {
        for s in 0..=30u32 {
            let dists: Vec<(i32, Distribution<i32>)> = (0..=s)
                .map(|k| {
                    let di = s as i32 - 2 * k as i32;
                    (di, hom_distribution(s, di).unwrap())
                })
                .collect();
            for (di, dist) in &dists {
                assert!((dist.total() - 1.0).abs() < 1e-10);
                for (delta, p) in dist.iter() {
                    assert!((p - dist.get(-delta)).abs() <= 1e-14, "symmetry S={s} Δi={di} Δ={delta}");
                    assert_eq!((delta - s as i32).rem_euclid(2), 0);
                    let swapped = &dists.iter().find(|(d, _)| *d == delta).unwrap().1;
                    assert!((p - swapped.get(*di)).abs() < 1e-12, "bistochastic S={s}");
                }
            }
        }
    }


    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn fock_label() -> impl Strategy<Value = (u32, i32)> {
            (0u32..60).prop_flat_map(|s| (Just(s), 0..=s)).prop_map(|(s, k)| (s, s as i32 - 2 * k as i32))
        }

        proptest! {
            #[test]
            fn normalized_and_symmetric((s, d) in fock_label()) {
                let dist = hom_distribution(s, d).unwrap();
                prop_assert!((dist.total() - 1.0).abs() < 1e-10);
                for (delta, p) in dist.iter() {
                    prop_assert!((p - dist.get(-delta)).abs() <= 1e-12);
                    prop_assert_eq!((delta - s as i32).rem_euclid(2), 0);
                }
            }

            #[test]
            fn bistochastic((s, d) in fock_label(), pick in 0u32..1000) {
                let target = s as i32 - 2 * (pick % (s + 1)) as i32;
                let forward = hom_distribution(s, d).unwrap().get(target);
                let backward = hom_distribution(s, target).unwrap().get(d);
                prop_assert!((forward - backward).abs() <= 1e-12);
            }

            #[test]
            fn twin_fock_has_no_odd_counts(n in 0u32..40) {
                let dist = hom_distribution(2 * n, 0).unwrap();
                for (delta, p) in dist.iter() {
                    let k = (2 * n as i32 - delta) / 2;
                    if k % 2 == 1 {
                        prop_assert_eq!(p, 0.0);
                    }
                }
            }

            #[test]
            fn threshold_is_monotone((s, d) in fock_label(), t in 0u32..60) {
                let dist = hom_distribution(s, d).unwrap();
                prop_assert!(threshold_probability(&dist, t + 1) <= threshold_probability(&dist, t) + 1e-15);
            }
        }
    }
}
