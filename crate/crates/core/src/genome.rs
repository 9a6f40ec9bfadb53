//! Genomes: one candidate input per catalog template.

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, TEMPLATE_COUNT};

thread_local! {
    static LIVE_GENOMES: Cell<i64> = const { Cell::new(0) };
}

/// Number of [`Genome`] values currently alive on this thread.
///
/// Used to check the memory footprint of the search loop; a campaign runs on
/// a single thread so the count is exact for it.
pub fn live_genomes() -> i64 {
    LIVE_GENOMES.with(Cell::get)
}

#[derive(Debug)]
struct LiveToken;

impl LiveToken {
    fn new() -> LiveToken {
        LIVE_GENOMES.with(|c| c.set(c.get() + 1));
        LiveToken
    }
}

impl Default for LiveToken {
    fn default() -> Self {
        LiveToken::new()
    }
}

impl Clone for LiveToken {
    fn clone(&self) -> Self {
        LiveToken::new()
    }
}

impl Drop for LiveToken {
    fn drop(&mut self) {
        LIVE_GENOMES.with(|c| c.set(c.get() - 1));
    }
}

impl PartialEq for LiveToken {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenomeError {
    #[error("genome must have {TEMPLATE_COUNT} genes, got {0}")]
    WrongLength(usize),
    #[error("gene {0} is not finite")]
    NonFinite(usize),
}

/// Fixed-length real vector; gene `i` is the candidate input for template `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Genome {
    genes: Vec<f64>,
    token: LiveToken,
}

impl Genome {
    pub fn new(genes: Vec<f64>) -> Result<Genome, GenomeError> {
        if genes.len() != TEMPLATE_COUNT {
            return Err(GenomeError::WrongLength(genes.len()));
        }
        if let Some(i) = genes.iter().position(|g| !g.is_finite()) {
            return Err(GenomeError::NonFinite(i));
        }
        Ok(Genome {
            genes,
            token: LiveToken::new(),
        })
    }

    pub fn genes(&self) -> &[f64] {
        &self.genes
    }

    pub(crate) fn genes_mut(&mut self) -> &mut [f64] {
        &mut self.genes
    }

    /// True when every gene lies inside its template's generation range.
    pub fn within_generation_ranges(&self, catalog: &Catalog) -> bool {
        self.genes
            .iter()
            .zip(catalog.templates())
            .all(|(&g, t)| g >= t.generation_floor() && g <= t.generation_ceiling())
    }
}

impl TryFrom<Vec<f64>> for Genome {
    type Error = GenomeError;

    fn try_from(genes: Vec<f64>) -> Result<Self, Self::Error> {
        Genome::new(genes)
    }
}

impl From<Genome> for Vec<f64> {
    fn from(g: Genome) -> Self {
        g.genes
    }
}

/// A genome mapped onto the unit hypercube.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    /// Set when at least one gene fell outside its generation range and was clamped.
    pub clamped: bool,
}

/// Maps each gene affinely from its generation range onto `[0, 1]`.
pub fn normalize_genome(genome: &Genome, catalog: &Catalog) -> Normalized {
    let mut clamped = false;
    let values = genome
        .genes
        .iter()
        .zip(catalog.templates())
        .map(|(&g, t)| {
            let x = (g - t.generation_floor()) / t.generation_width();
            if !(0.0..=1.0).contains(&x) {
                clamped = true;
            }
            x.clamp(0.0, 1.0)
        })
        .collect();
    Normalized { values, clamped }
}
