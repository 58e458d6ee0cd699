//! Finite discrete distributions.

use crate::error::Error;

/// Absolute tolerance for a row of probabilities to count as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A probability distribution over a finite, canonically ordered support.
///
/// The support may contain zero-probability outcomes; totality over a
/// declared alphabet is checked by the scenario layer, not here.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    support: Vec<T>,
    probs: Vec<f64>,
}

impl<T: Ord + Clone + std::fmt::Display> Distribution<T> {
    /// Build a distribution from (outcome, probability) pairs.
    ///
    /// Sorts the support into canonical (lexicographic) order and rejects
    /// duplicates, negative mass, and rows that do not sum to 1 within
    /// [`NORMALIZATION_TOL`].
    pub fn new(pairs: Vec<(T, f64)>, path: &str) -> Result<Self, Error> {
        let mut pairs = pairs;
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::BadDistribution {
                    path: path.to_string(),
                    reason: format!("duplicate outcome {}", w[0].0),
                });
            }
        }
        if pairs.is_empty() {
            return Err(Error::BadDistribution {
                path: path.to_string(),
                reason: "empty support".into(),
            });
        }
        let mut sum = 0.0;
        for (outcome, p) in &pairs {
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::BadDistribution {
                    path: path.to_string(),
                    reason: format!("probability of {outcome} is {p}"),
                });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::BadDistribution {
                path: path.to_string(),
                reason: format!("probabilities sum to {sum}"),
            });
        }
        let (support, probs) = pairs.into_iter().unzip();
        Ok(Self { support, probs })
    }

    pub fn support(&self) -> &[T] {
        &self.support
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.support.iter().zip(self.probs.iter().copied())
    }

    /// Probability of `outcome`; 0 when the outcome is outside the support.
    pub fn prob(&self, outcome: &T) -> f64 {
        match self.support.binary_search(outcome) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    /// Restriction to `allowed`: keep matching outcomes and renormalize.
    ///
    /// Errors with [`Error::DeadEnd`] when the allowed set carries zero mass.
    pub fn restricted(
        &self,
        allowed: &std::collections::BTreeSet<T>,
        state_key: &str,
    ) -> Result<Self, Error> {
        let kept: Vec<(T, f64)> = self
            .iter()
            .filter(|(o, _)| allowed.contains(o))
            .map(|(o, p)| (o.clone(), p))
            .collect();
        let z: f64 = kept.iter().map(|(_, p)| p).sum();
        if z <= 0.0 {
            let names: Vec<String> = allowed.iter().map(|a| a.to_string()).collect();
            return Err(Error::DeadEnd {
                allowed: format!("{{{}}}", names.join(", ")),
                key: state_key.to_string(),
            });
        }
        let (support, probs) = kept.into_iter().map(|(o, p)| (o, p / z)).unzip();
        Ok(Self { support, probs })
    }

    /// Draw an outcome using a uniform variate in `[0, 1)`.
    ///
    /// Zero-probability outcomes are never returned.
    pub fn sample(&self, unit: f64) -> &T {
        let mut acc = 0.0;
        let mut last_positive = None;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                acc += p;
                last_positive = Some(i);
                if unit < acc {
                    return &self.support[i];
                }
            }
        }
        // Rounding can leave acc marginally below 1; fall back to the last
        // positive-mass outcome.
        &self.support[last_positive.expect("distribution has positive mass")]
    }

    /// Map outcomes while keeping probabilities, re-accumulating duplicates.
    pub fn map_outcomes<U: Ord + Clone + std::fmt::Display>(
        &self,
        f: impl Fn(&T) -> U,
    ) -> Distribution<U> {
        let mut acc: std::collections::BTreeMap<U, f64> = std::collections::BTreeMap::new();
        for (o, p) in self.iter() {
            *acc.entry(f(o)).or_insert(0.0) += p;
        }
        let (support, probs) = acc.into_iter().unzip();
        Distribution { support, probs }
    }

    /// Weighted mixture of distributions. Weights must sum to 1; the result
    /// support is the union of the component supports.
    pub fn mixture(components: &[(f64, &Distribution<T>)]) -> Distribution<T> {
        let mut acc: std::collections::BTreeMap<T, f64> = std::collections::BTreeMap::new();
        for (w, d) in components {
            for (o, p) in d.iter() {
                *acc.entry(o.clone()).or_insert(0.0) += w * p;
            }
        }
        let (support, probs) = acc.into_iter().unzip();
        Distribution { support, probs }
    }
}
