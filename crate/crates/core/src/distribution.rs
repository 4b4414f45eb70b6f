use std::collections::BTreeMap;

/// A probability table keyed by integer outcome labels.
///
/// Keys are kept ordered so iteration and serialization are deterministic.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Distribution<K: Ord> {
    entries: BTreeMap<K, f64>,
}

impl<K: Ord + Copy> Distribution<K> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Adds `probability` to the mass stored at `key`.
    pub fn add(&mut self, key: K, probability: f64) {
        *self.entries.entry(key).or_insert(0.0) += probability;
    }

    pub fn insert(&mut self, key: K, probability: f64) {
        self.entries.insert(key, probability);
    }

    /// Probability at `key`, zero when the key is outside the support.
    pub fn get(&self, key: K) -> f64 {
        self.entries.get(&key).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (K, f64)> + '_ {
        self.entries.iter().map(|(&k, &p)| (k, p))
    }

    /// Total probability of keys accepted by `predicate`.
    pub fn mass_where(&self, mut predicate: impl FnMut(K) -> bool) -> f64 {
        self.iter().filter(|&(k, _)| predicate(k)).map(|(_, p)| p).sum()
    }

    /// Divides every entry by the total mass. No-op on an all-zero table.
    pub fn normalized(mut self) -> Self {
        let total = self.total();
        if total > 0.0 {
            self.entries.values_mut().for_each(|p| *p /= total);
        }
        self
    }

    /// Total-variation distance to `other`.
    pub fn total_variation(&self, other: &Self) -> f64 {
        let mut keys: Vec<K> = self.entries.keys().copied().collect();
        keys.extend(other.entries.keys().copied());
        keys.sort();
        keys.dedup();
        0.5 * keys
            .into_iter()
            .map(|k| (self.get(k) - other.get(k)).abs())
            .sum::<f64>()
    }
}

impl<K: Ord + Copy> FromIterator<(K, f64)> for Distribution<K> {
    fn from_iter<I: IntoIterator<Item = (K, f64)>>(iter: I) -> Self {
        let mut dist = Distribution::new();
        for (k, p) in iter {
            dist.add(k, p);
        }
        dist
    }
}

/// Result of conditioning on a measurement outcome.
///
/// `Impossible` is kept distinct from an observed outcome whose value happens
/// to carry no mass: it means the heralding event has probability zero.
#[derive(Clone, Debug, PartialEq)]
pub enum Heralded<T> {
    Observed { probability: f64, value: T },
    Impossible,
}

impl<T> Heralded<T> {
    pub fn probability(&self) -> f64 {
        match self {
            Heralded::Observed { probability, .. } => *probability,
            Heralded::Impossible => 0.0,
        }
    }

    pub fn is_impossible(&self) -> bool {
        matches!(self, Heralded::Impossible)
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Heralded::Observed { value, .. } => Some(value),
            Heralded::Impossible => None,
        }
    }

    pub fn into_value(self) -> Option<T> {
        match self {
            Heralded::Observed { value, .. } => Some(value),
            Heralded::Impossible => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Heralded<U> {
        match self {
            Heralded::Observed { probability, value } => Heralded::Observed {
                probability,
                value: f(value),
            },
            Heralded::Impossible => Heralded::Impossible,
        }
    }
}
