use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FitnessReport, SearchError};
use crate::catalog::Catalog;
use crate::genome::Genome;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchParams {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub per_gene_mutation_rate: f64,
    /// Mutation standard deviation as a fraction of each gene's generation range.
    pub mutation_sigma_frac: f64,
    pub elitism_count: usize,
    pub rng_seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            population_size: 20,
            generations: 50,
            tournament_size: 3,
            crossover_rate: 0.9,
            per_gene_mutation_rate: 0.15,
            mutation_sigma_frac: 0.1,
            elitism_count: 1,
            rng_seed: 0,
        }
    }
}

impl SearchParams {
    /// Checks the invariants shared by every search mode.
    pub fn validate(&self) -> Result<(), SearchError> {
        let invalid = |name, reason: &str| SearchError::InvalidParam {
            name,
            reason: reason.to_string(),
        };
        if self.population_size == 0 {
            return Err(invalid("search.population_size", "must be at least 1"));
        }
        if self.generations == 0 {
            return Err(invalid("search.generations", "must be at least 1"));
        }
        if self.tournament_size == 0 {
            return Err(invalid("search.tournament_size", "must be at least 1"));
        }
        for (name, v) in [
            ("search.crossover_rate", self.crossover_rate),
            ("search.per_gene_mutation_rate", self.per_gene_mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, "must lie in [0, 1]"));
            }
        }
        if !(self.mutation_sigma_frac >= 0.0 && self.mutation_sigma_frac.is_finite()) {
            return Err(invalid(
                "search.mutation_sigma_frac",
                "must be finite and non-negative",
            ));
        }
        if self.elitism_count > self.population_size {
            return Err(invalid("search.elitism_count", "cannot exceed population_size"));
        }
        Ok(())
    }

    /// Additional constraint for the generational GA.
    pub fn validate_generational(&self) -> Result<(), SearchError> {
        self.validate()?;
        if self.population_size < 2 {
            return Err(SearchError::InvalidParam {
                name: "search.population_size",
                reason: "generational mode needs at least 2 individuals".into(),
            });
        }
        Ok(())
    }
}

/// One genome drawn uniformly over every generation range.
pub fn random_genome<R: Rng + ?Sized>(catalog: &Catalog, rng: &mut R) -> Genome {
    let genes = catalog
        .templates()
        .iter()
        .map(|t| rng.random_range(t.generation_floor()..=t.generation_ceiling()))
        .collect();
    Genome::new(genes).expect("catalog ranges are finite")
}

pub fn init_population<R: Rng + ?Sized>(
    params: &SearchParams,
    catalog: &Catalog,
    rng: &mut R,
) -> Vec<Genome> {
    (0..params.population_size)
        .map(|_| random_genome(catalog, rng))
        .collect()
}

/// Indices sorted by descending ff; ties keep population order.
fn rank_by_ff(reports: &[FitnessReport]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..reports.len()).collect();
    idx.sort_by(|&a, &b| reports[b].ff.total_cmp(&reports[a].ff));
    idx
}

fn tournament<R: Rng + ?Sized>(reports: &[FitnessReport], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..reports.len());
    for _ in 1..size {
        let challenger = rng.random_range(0..reports.len());
        if reports[challenger].ff > reports[best].ff {
            best = challenger;
        }
    }
    best
}

fn gaussian_step<R: Rng + ?Sized>(value: f64, sigma: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return value;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    (value + normal.sample(rng)).clamp(lo, hi)
}

/// Breeds the next population: elites carried over unchanged, the rest by
/// tournament selection, uniform crossover and per-gene Gaussian mutation.
pub fn next_generation<R: Rng + ?Sized>(
    population: &[Genome],
    reports: &[FitnessReport],
    params: &SearchParams,
    catalog: &Catalog,
    rng: &mut R,
) -> Result<Vec<Genome>, SearchError> {
    if population.len() != params.population_size || reports.len() != params.population_size {
        return Err(SearchError::SizeMismatch {
            expected: params.population_size,
            population: population.len(),
            reports: reports.len(),
        });
    }
    let mut next: Vec<Genome> = rank_by_ff(reports)
        .into_iter()
        .take(params.elitism_count)
        .map(|i| population[i].clone())
        .collect();

    while next.len() < params.population_size {
        let first = tournament(reports, params.tournament_size, rng);
        let second = tournament(reports, params.tournament_size, rng);
        let mut child = population[first].clone();
        if rng.random::<f64>() < params.crossover_rate {
            let other = population[second].genes();
            for (gene, &theirs) in child.genes_mut().iter_mut().zip(other) {
                if rng.random::<bool>() {
                    *gene = theirs;
                }
            }
        }
        for (gene, t) in child.genes_mut().iter_mut().zip(catalog.templates()) {
            if rng.random::<f64>() < params.per_gene_mutation_rate {
                let sigma = params.mutation_sigma_frac * t.generation_width();
                *gene = gaussian_step(*gene, sigma, t.generation_floor(), t.generation_ceiling(), rng);
            }
        }
        next.push(child);
    }
    Ok(next)
}

/// A child of `parent` with every gene Gaussian-mutated and clamped to its generation range.
pub fn mutate_all<R: Rng + ?Sized>(
    parent: &Genome,
    sigma_frac: f64,
    catalog: &Catalog,
    rng: &mut R,
) -> Genome {
    let mut child = parent.clone();
    for (gene, t) in child.genes_mut().iter_mut().zip(catalog.templates()) {
        *gene = gaussian_step(
            *gene,
            sigma_frac * t.generation_width(),
            t.generation_floor(),
            t.generation_ceiling(),
            rng,
        );
    }
    child
}

/// (1+1) replacement: the child survives when it is at least as fit as the parent.
pub fn one_plus_one_step(
    parent: Genome,
    parent_ff: f64,
    child_report: &FitnessReport,
    child: Genome,
) -> (Genome, f64) {
    if child_report.ff >= parent_ff {
        (child, child_report.ff)
    } else {
        (parent, parent_ff)
    }
}
