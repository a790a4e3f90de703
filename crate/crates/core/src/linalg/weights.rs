//! Bootstrap resampling weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::LinalgError;
use crate::Real;

/// Integer resampling weights: entry i counts how many times training
/// sample i appears in a bootstrap draw. Entries always sum to exactly n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightVector {
    counts: Vec<u64>,
}

impl WeightVector {
    /// The all-ones vector w₀ (the original, unresampled weighting).
    pub fn ones(n: usize) -> Self {
        WeightVector { counts: vec![1; n] }
    }

    pub fn from_counts(counts: Vec<u64>) -> Result<Self, LinalgError> {
        let n = counts.len() as u64;
        let total: u64 = counts.iter().sum();
        if total != n {
            return Err(LinalgError::WeightSum {
                expected: n,
                actual: total,
            });
        }
        Ok(WeightVector { counts })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Weights as reals.
    pub fn to_reals<F: Real>(&self) -> Vec<F> {
        self.counts
            .iter()
            .map(|&c| F::from_u64(c).unwrap())
            .collect()
    }

    /// w − w₀ as reals.
    pub fn delta_from_ones<F: Real>(&self) -> Vec<F> {
        self.counts
            .iter()
            .map(|&c| F::from_u64(c).unwrap() - F::one())
            .collect()
    }
}

/// Draw w ~ Multinomial(n, uniform over n cells): n independent trials,
/// each landing in one of the n cells with probability 1/n. Each entry has
/// marginal expectation 1.
pub fn multinomial_sample<R: Rng>(n: usize, rng: &mut R) -> Result<WeightVector, LinalgError> {
    if n == 0 {
        return Err(LinalgError::EmptyMultinomial);
    }
    let mut counts = vec![0u64; n];
    for _ in 0..n {
        let cell = rng.random_range(0..n);
        counts[cell] += 1;
    }
    Ok(WeightVector { counts })
}
