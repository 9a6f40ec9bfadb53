//! Run-time search: weighted failure/novelty fitness, the novelty archive,
//! a generational GA and a (1+1) EA.

mod fitness;
mod ga;
mod novelty;

use thiserror::Error;

pub use fitness::{fitness, tc_fail_score, FailScore, FitnessReport, FitnessWeights};
pub use ga::{init_population, mutate_all, next_generation, one_plus_one_step, random_genome, SearchParams};
pub use novelty::{NoveltyArchive, NoveltyParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("{name} must be finite and non-negative, got {value}")]
    InvalidWeight { name: &'static str, value: f64 },
    #[error("fitness weights must not both be zero")]
    ZeroWeights,
    #[error("{name} out of range: {value}")]
    InvalidScore { name: &'static str, value: f64 },
    #[error("dimension mismatch: archive has {expected}, candidate has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("population of {population} with {reports} reports, expected {expected}")]
    SizeMismatch {
        expected: usize,
        population: usize,
        reports: usize,
    },
    #[error("{name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
}
