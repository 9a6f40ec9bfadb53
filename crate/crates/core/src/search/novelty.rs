use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SearchError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoveltyParams {
    /// Neighbours averaged by the sparseness measure.
    pub k: usize,
    /// Novelty above which a candidate is always archived.
    pub add_threshold: f64,
    pub capacity: usize,
    /// Chance of archiving a candidate that did not clear the threshold.
    pub random_admission: f64,
}

impl Default for NoveltyParams {
    fn default() -> Self {
        NoveltyParams {
            k: 15,
            add_threshold: 0.3,
            capacity: 1000,
            random_admission: 0.01,
        }
    }
}

impl NoveltyParams {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.k == 0 {
            return Err(SearchError::InvalidParam {
                name: "novelty.k",
                reason: "must be at least 1".into(),
            });
        }
        if self.capacity == 0 {
            return Err(SearchError::InvalidParam {
                name: "novelty.capacity",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.add_threshold >= 0.0 && self.add_threshold.is_finite()) {
            return Err(SearchError::InvalidParam {
                name: "novelty.add_threshold",
                reason: "must be finite and non-negative".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.random_admission) {
            return Err(SearchError::InvalidParam {
                name: "novelty.random_admission",
                reason: "must lie in [0, 1]".into(),
            });
        }
        Ok(())
    }
}

/// FIFO archive of normalized genomes.
#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyArchive {
    dim: usize,
    params: NoveltyParams,
    members: VecDeque<Vec<f64>>,
}

impl NoveltyArchive {
    pub fn new(dim: usize, params: NoveltyParams) -> NoveltyArchive {
        NoveltyArchive {
            dim,
            params,
            members: VecDeque::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> impl Iterator<Item = &[f64]> {
        self.members.iter().map(Vec::as_slice)
    }

    pub fn params(&self) -> &NoveltyParams {
        &self.params
    }

    fn check_dim(&self, candidate: &[f64]) -> Result<(), SearchError> {
        if candidate.len() != self.dim {
            return Err(SearchError::DimensionMismatch {
                expected: self.dim,
                actual: candidate.len(),
            });
        }
        Ok(())
    }

    /// Mean Euclidean distance to the `min(k, len)` nearest members.
    ///
    /// An empty archive scores `sqrt(dim)`, the diameter of the unit hypercube.
    pub fn novelty_score(&self, candidate: &[f64]) -> Result<f64, SearchError> {
        self.check_dim(candidate)?;
        if self.members.is_empty() {
            return Ok((self.dim as f64).sqrt());
        }
        let mut distances: Vec<f64> = self.members.iter().map(|m| euclidean(m, candidate)).collect();
        // Full sort so the summation order does not depend on archive order.
        distances.sort_unstable_by(f64::total_cmp);
        let k = self.params.k.min(distances.len());
        Ok(distances[..k].iter().sum::<f64>() / k as f64)
    }

    /// Archives `candidate` when it is novel enough or wins the random-admission draw.
    ///
    /// Exactly one uniform draw is consumed per call. Returns whether the
    /// candidate was admitted; the oldest member is evicted at capacity.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        candidate: &[f64],
        novelty_raw: f64,
        rng: &mut R,
    ) -> Result<bool, SearchError> {
        self.check_dim(candidate)?;
        let draw: f64 = rng.random();
        let admit = novelty_raw > self.params.add_threshold || draw < self.params.random_admission;
        if admit {
            if self.members.len() == self.params.capacity {
                self.members.pop_front();
            }
            self.members.push_back(candidate.to_vec());
        }
        Ok(admit)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
