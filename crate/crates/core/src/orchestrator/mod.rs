//! The testing agent: polls the agent under test, gates dispatch on its
//! status and the batch budget, ships each individual's test batch, collates
//! the verdicts against the oracle and drives the search.

mod energy;
mod gate;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use energy::{EnergyCosts, EnergyEvent, EnergyLedger};
pub use gate::{safety_gate, select_relevant_templates, BatchBudget, GateDecision, BUDGET_WINDOW};

use crate::agent::{Agent, AgentError, Scenario};
use crate::catalog::{encode_batch, Catalog, Outcome, Verdict, TEMPLATE_COUNT};
use crate::config::{CampaignConfig, ConfigError, SearchMode};
use crate::genome::{live_genomes, normalize_genome, Genome};
use crate::search::{
    fitness, init_population, mutate_all, next_generation, one_plus_one_step, random_genome, tc_fail_score,
    FitnessReport, FitnessWeights, NoveltyArchive, SearchError,
};
use crate::wire::payload::{decode_result, decode_status, encode_test_batch, StatusReport};
use crate::wire::{Direction, Frame, FrameType, Inbox, Link, LinkStats, SendOutcome, SimTime};

/// Stream id of the archive-admission RNG; the search RNG uses stream 0.
const ARCHIVE_STREAM: u64 = 1;
/// Re-polls allowed when an environment tick passes during a status exchange.
const MAX_STALE_REPOLLS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] AgentError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("unknown energy event {0:?}")]
    UnknownEnergyEvent(String),
    #[error("campaign aborted in generation {generation}: {reason}")]
    Aborted { generation: u64, reason: String },
    #[error("run log write failed: {0}")]
    Storage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CollateError {
    #[error("sent {sent} tests but the result holds {received}")]
    CountMismatch { sent: usize, received: usize },
    #[error("result entry {index} is for template {received}, expected {sent}")]
    IdMismatch { index: usize, sent: u8, received: u8 },
}

/// Pairs each agent outcome with the oracle verdict on the same value, in batch order.
pub fn collate_results(
    sent: &[(u8, f64)],
    results: &[(u8, Outcome)],
    catalog: &Catalog,
) -> Result<Vec<(Verdict, Verdict)>, CollateError> {
    if sent.len() != results.len() {
        return Err(CollateError::CountMismatch {
            sent: sent.len(),
            received: results.len(),
        });
    }
    sent.iter()
        .zip(results)
        .enumerate()
        .map(|(index, (&(id, value), &(rid, outcome)))| {
            if id != rid {
                return Err(CollateError::IdMismatch {
                    index,
                    sent: id,
                    received: rid,
                });
            }
            let agent = Verdict {
                template_id: id,
                value,
                outcome,
            };
            Ok((catalog.evaluate(id, value), agent))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictPair {
    pub template_id: u8,
    pub value: f64,
    pub oracle: Outcome,
    pub agent: Outcome,
}

impl VerdictPair {
    pub fn disagrees(&self) -> bool {
        self.oracle != self.agent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualRecord {
    pub genes: Vec<f64>,
    pub verdicts: Vec<VerdictPair>,
    pub fail_frac: f64,
    pub novelty_raw: f64,
    pub ff: f64,
    /// The batch or its result never made it across the link.
    #[serde(default)]
    pub lost: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol_error: Option<String>,
}

impl IndividualRecord {
    pub fn disagreements(&self) -> usize {
        self.verdicts.iter().filter(|v| v.disagrees()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u64,
    pub individuals: Vec<IndividualRecord>,
    pub active_templates: Vec<u8>,
    pub archive_size: usize,
    /// Link counters for this generation only.
    pub frames_sent: u64,
    pub retransmits: u64,
    pub lost: u64,
    pub checksum_failures: u64,
    pub status_polls: u64,
    pub deferrals: u64,
    /// Cumulative since the start of the campaign.
    pub energy: EnergyLedger,
    pub virtual_time_ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
    /// Peak number of live genomes created by the campaign during this generation.
    pub genomes_in_memory: i64,
}

impl GenerationRecord {
    pub fn disagreements(&self) -> usize {
        self.individuals.iter().map(IndividualRecord::disagreements).sum()
    }

    pub fn best_ff(&self) -> Option<f64> {
        self.individuals.iter().map(|i| i.ff).reduce(f64::max)
    }
}

/// Receives each generation record as soon as it is complete.
pub trait RecordSink {
    fn record(&mut self, record: &GenerationRecord) -> std::io::Result<()>;
}

impl RecordSink for Vec<GenerationRecord> {
    fn record(&mut self, record: &GenerationRecord) -> std::io::Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Completed,
    FirstDisagreement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub generations_run: u64,
    pub evaluations: u64,
    pub first_disagreement_generation: Option<u64>,
    pub disagreements: u64,
    pub best_ff: Option<f64>,
    pub stop_reason: Option<StopReason>,
    pub energy: EnergyLedger,
    pub virtual_time_ns: u64,
    pub link: LinkStats,
}

struct Evaluation {
    verdicts: Vec<VerdictPair>,
    fail_frac: f64,
    lost: bool,
    protocol_error: Option<String>,
}

enum Dispatch {
    Results(Vec<(u8, f64)>, Vec<(u8, Outcome)>),
    Lost,
    Protocol(String),
}

/// One campaign against one agent over one link, in lockstep virtual time.
pub struct Campaign {
    config: CampaignConfig,
    scenario: Scenario,
    catalog: Catalog,
    weights: FitnessWeights,
    link: Link,
    agent: Agent,
    archive: NoveltyArchive,
    rng: ChaCha8Rng,
    archive_rng: ChaCha8Rng,
    budget: BatchBudget,
    energy: EnergyLedger,
    last_status: Option<StatusReport>,
    seq: u8,
    tick_ns: u64,
    wall_start: Option<Instant>,
    summary: CampaignSummary,
    // Per-generation tallies.
    status_polls: u64,
    deferrals: u64,
    genome_baseline: i64,
    genome_peak: i64,
}

impl Campaign {
    pub fn new(config: CampaignConfig, scenario: Scenario) -> Result<Campaign, CampaignError> {
        config.validate()?;
        let catalog = Catalog::with_energy_cap(config.energy_cap_uj);
        let agent = Agent::new(&scenario, &catalog)?;
        let weights = match config.mode {
            SearchMode::RandomSearch => FitnessWeights::new(1.0, 0.0)?,
            _ => config.weights,
        };
        let rng = ChaCha8Rng::seed_from_u64(config.search.rng_seed);
        let mut archive_rng = rng.clone();
        archive_rng.set_stream(ARCHIVE_STREAM);
        Ok(Campaign {
            link: Link::new(config.link, config.faults),
            archive: NoveltyArchive::new(TEMPLATE_COUNT, config.novelty),
            budget: BatchBudget::new(config.budget_per_minute),
            tick_ns: scenario.environment.tick_ns(),
            summary: CampaignSummary {
                generations_run: 0,
                evaluations: 0,
                first_disagreement_generation: None,
                disagreements: 0,
                best_ff: None,
                stop_reason: None,
                energy: EnergyLedger::default(),
                virtual_time_ns: 0,
                link: LinkStats::default(),
            },
            config,
            scenario,
            catalog,
            weights,
            agent,
            rng,
            archive_rng,
            energy: EnergyLedger::default(),
            last_status: None,
            seq: 0,
            wall_start: None,
            status_polls: 0,
            deferrals: 0,
            genome_baseline: 0,
            genome_peak: 0,
        })
    }

    /// Adds elapsed wall-clock time to every record. Off by default so that
    /// logs of identical runs are byte-identical.
    pub fn record_wall_time(&mut self, on: bool) {
        self.wall_start = on.then(Instant::now);
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// Weights actually used for ff; random search ignores novelty.
    pub fn effective_weights(&self) -> FitnessWeights {
        self.weights
    }

    pub fn link(&self) -> &Link {
        &self.link
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn summary(&self) -> &CampaignSummary {
        &self.summary
    }

    fn next_seq(&mut self) -> u8 {
        let s = self.seq;
        self.seq = self.seq.wrapping_add(1);
        s
    }

    fn tick_of(&self, t: SimTime) -> u64 {
        t.0 / self.tick_ns
    }

    fn sample_genomes(&mut self) {
        self.genome_peak = self.genome_peak.max(live_genomes() - self.genome_baseline);
    }

    /// Charges the bytes moved and tests evaluated since the snapshots.
    fn account_exchange(&mut self, before: &LinkStats, evaluated_before: u64) {
        let costs = self.config.energy;
        let delta = self.link.stats().since(before);
        self.energy
            .account(EnergyEvent::TxByte, delta.tester_tx_bytes, &costs);
        self.energy
            .account(EnergyEvent::RxByte, delta.tester_rx_bytes, &costs);
        let evaluated = self.agent.tests_evaluated() - evaluated_before;
        self.energy.account(EnergyEvent::EvalTest, evaluated, &costs);
    }

    /// Sends `frame` to the agent and carries its application reply back.
    fn exchange(&mut self, frame: &Frame) -> Option<Frame> {
        let SendOutcome::Delivered {
            reply: Some(reply), ..
        } = self
            .link
            .reliable_send(Direction::ToAgent, frame, &mut self.agent)
        else {
            return None;
        };
        let mut inbox = Inbox::default();
        self.link
            .reliable_send(Direction::ToTester, &reply, &mut inbox)
            .is_delivered()
            .then(|| inbox.frames.pop())
            .flatten()
    }

    /// Requests a STATUS report; keeps the previous one if the exchange fails.
    fn poll_status(&mut self) {
        let before = *self.link.stats();
        let evaluated = self.agent.tests_evaluated();
        self.status_polls += 1;
        let seq = self.next_seq();
        let request = Frame::new(FrameType::Status, seq, Vec::new()).expect("empty payload");
        if let Some(reply) = self.exchange(&request) {
            if reply.kind() == FrameType::Status {
                if let Ok(status) = decode_status(reply.payload()) {
                    self.last_status = Some(status);
                }
            }
        }
        self.account_exchange(&before, evaluated);
    }

    /// Blocks in virtual time until the gate opens for one dispatch.
    fn await_gate(&mut self, generation: u64) -> Result<(), CampaignError> {
        let start = self.link.now();
        let limit_ns = SimTime::from_ms(self.config.max_defer_ms).0;
        let mut stale_repolls = 0;
        loop {
            let now = self.link.now();
            if now.0 - start.0 > limit_ns {
                return Err(CampaignError::Aborted {
                    generation,
                    reason: format!(
                        "safety gate stayed closed for more than {} ms",
                        self.config.max_defer_ms
                    ),
                });
            }
            if !self.budget.available(now) {
                self.deferrals += 1;
                let slot = self.budget.next_slot(now);
                self.link.advance_to(slot);
                continue;
            }
            let tick = self.tick_of(now);
            self.poll_status();
            let now = self.link.now();
            if self.tick_of(now) != tick && stale_repolls < MAX_STALE_REPOLLS {
                // The environment may have moved on while we were asking.
                stale_repolls += 1;
                continue;
            }
            let decision = safety_gate(self.last_status.as_ref(), self.budget.available(now));
            if decision.allows() {
                return Ok(());
            }
            self.deferrals += 1;
            if decision != GateDecision::DeferBudget {
                self.link
                    .advance_to(SimTime((self.tick_of(now) + 1) * self.tick_ns));
            }
        }
    }

    fn dispatch_batch(&mut self, genome: &Genome, active: &BTreeSet<u8>) -> Dispatch {
        // Values travel as f32; the oracle must judge the value the agent saw.
        let sent: Vec<(u8, f64)> = encode_batch(genome, active)
            .into_iter()
            .map(|(id, v)| (id, f64::from(v as f32)))
            .collect();
        let payload = encode_test_batch(&sent).expect("at most twenty tests");
        let seq = self.next_seq();
        let frame = Frame::new(FrameType::TestBatch, seq, payload).expect("batch fits in a frame");
        let before = *self.link.stats();
        let evaluated = self.agent.tests_evaluated();
        self.budget.record(self.link.now());
        let reply = self.exchange(&frame);
        self.account_exchange(&before, evaluated);
        match reply {
            None => Dispatch::Lost,
            Some(r) if r.kind() != FrameType::Result => {
                Dispatch::Protocol(format!("expected RESULT, got {:?}", r.kind()))
            }
            Some(r) => match decode_result(r.payload()) {
                Ok(results) => Dispatch::Results(sent, results),
                Err(e) => Dispatch::Protocol(e.to_string()),
            },
        }
    }

    fn evaluate(&mut self, genome: &Genome, active: &BTreeSet<u8>) -> Evaluation {
        let (verdicts, lost, protocol_error) = match self.dispatch_batch(genome, active) {
            Dispatch::Lost => (Vec::new(), true, None),
            Dispatch::Protocol(e) => (Vec::new(), false, Some(e)),
            Dispatch::Results(sent, results) => match collate_results(&sent, &results, &self.catalog) {
                Ok(pairs) => (
                    pairs
                        .into_iter()
                        .map(|(oracle, agent)| VerdictPair {
                            template_id: oracle.template_id,
                            value: oracle.value,
                            oracle: oracle.outcome,
                            agent: agent.outcome,
                        })
                        .collect(),
                    false,
                    None,
                ),
                Err(e) => (Vec::new(), false, Some(e.to_string())),
            },
        };
        let outcomes: Vec<(Outcome, Outcome)> = verdicts.iter().map(|v| (v.oracle, v.agent)).collect();
        Evaluation {
            fail_frac: tc_fail_score(&outcomes).fraction,
            verdicts,
            lost,
            protocol_error,
        }
    }

    /// Dispatches each genome, scores novelty against the archive as it stood
    /// at the start of the generation, then archives the genomes in order.
    fn evaluate_all(
        &mut self,
        generation: u64,
        genomes: &[&Genome],
        active: &mut Vec<u8>,
    ) -> Result<(Vec<IndividualRecord>, Vec<FitnessReport>), CampaignError> {
        let mut evaluations = Vec::with_capacity(genomes.len());
        let mut active_set = BTreeSet::new();
        for (i, genome) in genomes.iter().enumerate() {
            self.await_gate(generation)?;
            if i == 0 {
                active_set = select_relevant_templates(self.last_status.as_ref(), &self.catalog);
                *active = active_set.iter().copied().collect();
            }
            evaluations.push(self.evaluate(genome, &active_set));
        }
        let normalized: Vec<Vec<f64>> = genomes
            .iter()
            .map(|g| normalize_genome(g, &self.catalog).values)
            .collect();
        let mut individuals = Vec::with_capacity(genomes.len());
        let mut reports = Vec::with_capacity(genomes.len());
        for ((genome, eval), norm) in genomes.iter().zip(evaluations).zip(&normalized) {
            let novelty_raw = self.archive.novelty_score(norm)?;
            let report = fitness(eval.fail_frac, novelty_raw, &self.weights, TEMPLATE_COUNT)?;
            individuals.push(IndividualRecord {
                genes: genome.genes().to_vec(),
                verdicts: eval.verdicts,
                fail_frac: report.fail_frac,
                novelty_raw: report.novelty_raw,
                ff: report.ff,
                lost: eval.lost,
                protocol_error: eval.protocol_error,
            });
            reports.push(report);
        }
        for (norm, report) in normalized.iter().zip(&reports) {
            self.archive
                .update(norm, report.novelty_raw, &mut self.archive_rng)?;
        }
        Ok((individuals, reports))
    }

    fn begin_generation(&mut self) -> LinkStats {
        self.status_polls = 0;
        self.deferrals = 0;
        self.genome_peak = 0;
        self.sample_genomes();
        *self.link.stats()
    }

    fn finish_generation(
        &mut self,
        generation: u64,
        link_before: &LinkStats,
        individuals: Vec<IndividualRecord>,
        active_templates: Vec<u8>,
        sink: &mut dyn RecordSink,
    ) -> Result<GenerationRecord, CampaignError> {
        self.sample_genomes();
        self.energy
            .account(EnergyEvent::GaGeneration, 1, &self.config.energy);
        let delta = self.link.stats().since(link_before);
        let record = GenerationRecord {
            generation,
            individuals,
            active_templates,
            archive_size: self.archive.len(),
            frames_sent: delta.frames_sent,
            retransmits: delta.retransmits,
            lost: delta.lost,
            checksum_failures: delta.checksum_failures,
            status_polls: self.status_polls,
            deferrals: self.deferrals,
            energy: self.energy,
            virtual_time_ns: self.link.now().0,
            wall_time_ms: self.wall_start.map(|t| t.elapsed().as_secs_f64() * 1e3),
            genomes_in_memory: self.genome_peak,
        };
        let s = &mut self.summary;
        s.generations_run += 1;
        s.evaluations += record.individuals.len() as u64;
        let found = record.disagreements() as u64;
        s.disagreements += found;
        if found > 0 && s.first_disagreement_generation.is_none() {
            s.first_disagreement_generation = Some(generation);
        }
        if let Some(best) = record.best_ff() {
            s.best_ff = Some(s.best_ff.map_or(best, |b| b.max(best)));
        }
        s.energy = self.energy;
        s.virtual_time_ns = record.virtual_time_ns;
        s.link = *self.link.stats();
        sink.record(&record)
            .map_err(|e| CampaignError::Storage(e.to_string()))?;
        Ok(record)
    }

    fn should_stop(&self, record: &GenerationRecord) -> bool {
        self.config.stop_on_first_disagreement && record.disagreements() > 0
    }

    fn unreachable(generation: u64, lost: usize) -> CampaignError {
        CampaignError::Aborted {
            generation,
            reason: format!("agent unreachable: all {lost} dispatches of the generation were lost"),
        }
    }

    /// Runs the configured search to completion, streaming records into `sink`.
    pub fn run(&mut self, sink: &mut dyn RecordSink) -> Result<CampaignSummary, CampaignError> {
        self.genome_baseline = live_genomes();
        match self.config.mode {
            SearchMode::GenerationalGa | SearchMode::RandomSearch => self.run_population(sink)?,
            SearchMode::OnePlusOne => self.run_one_plus_one(sink)?,
        }
        Ok(self.summary.clone())
    }

    fn run_population(&mut self, sink: &mut dyn RecordSink) -> Result<(), CampaignError> {
        let params = self.config.search;
        let random = self.config.mode == SearchMode::RandomSearch;
        let mut population = init_population(&params, &self.catalog, &mut self.rng);
        for g in 0..params.generations as u64 {
            let link_before = self.begin_generation();
            if random && g > 0 {
                population = init_population(&params, &self.catalog, &mut self.rng);
            }
            self.sample_genomes();
            let mut active = Vec::new();
            let refs: Vec<&Genome> = population.iter().collect();
            let (individuals, reports) = self.evaluate_all(g, &refs, &mut active)?;
            let all_lost = individuals.iter().all(|i| i.lost);
            let stop_found =
                self.config.stop_on_first_disagreement && individuals.iter().any(|i| i.disagreements() > 0);
            let last = g + 1 == params.generations as u64;
            if !random && !last && !stop_found && !all_lost {
                let next = next_generation(&population, &reports, &params, &self.catalog, &mut self.rng)?;
                self.sample_genomes();
                population = next;
            }
            let n = individuals.len();
            let record = self.finish_generation(g, &link_before, individuals, active, sink)?;
            if all_lost {
                return Err(Self::unreachable(g, n));
            }
            if self.should_stop(&record) {
                self.summary.stop_reason = Some(StopReason::FirstDisagreement);
                return Ok(());
            }
        }
        self.summary.stop_reason = Some(StopReason::Completed);
        Ok(())
    }

    /// `search.generations` counts evaluations, the first being the initial parent.
    ///
    /// The archive grows between steps, so the parent's novelty is rescored
    /// against the same archive as the child before the two are compared.
    /// Aborts once `search.population_size` consecutive dispatches are lost.
    fn run_one_plus_one(&mut self, sink: &mut dyn RecordSink) -> Result<(), CampaignError> {
        let params = self.config.search;
        // Surviving genome and its failure fraction.
        let mut parent: Option<(Genome, f64)> = None;
        let mut consecutive_lost = 0usize;
        for g in 0..params.generations as u64 {
            let link_before = self.begin_generation();
            let candidate = match &parent {
                None => random_genome(&self.catalog, &mut self.rng),
                Some((p, _)) => mutate_all(p, params.mutation_sigma_frac, &self.catalog, &mut self.rng),
            };
            self.sample_genomes();
            let parent_ff = match &parent {
                Some((p, fail_frac)) => {
                    let norm = normalize_genome(p, &self.catalog).values;
                    let novelty = self.archive.novelty_score(&norm)?;
                    Some(fitness(*fail_frac, novelty, &self.weights, TEMPLATE_COUNT)?.ff)
                }
                None => None,
            };
            let mut active = Vec::new();
            let (individuals, reports) = self.evaluate_all(g, &[&candidate], &mut active)?;
            let report = reports[0];
            parent = Some(match (parent.take(), parent_ff) {
                (Some((p, fail_frac)), Some(ff)) => {
                    let (survivor, _) = one_plus_one_step(p, ff, &report, candidate);
                    // Ties go to the child, so equal genes mean the child won.
                    let fail_frac = if survivor.genes() == individuals[0].genes.as_slice() {
                        report.fail_frac
                    } else {
                        fail_frac
                    };
                    (survivor, fail_frac)
                }
                _ => (candidate, report.fail_frac),
            });
            consecutive_lost = if individuals[0].lost {
                consecutive_lost + 1
            } else {
                0
            };
            let record = self.finish_generation(g, &link_before, individuals, active, sink)?;
            if consecutive_lost >= params.population_size {
                return Err(CampaignError::Aborted {
                    generation: g,
                    reason: format!("agent unreachable: {consecutive_lost} consecutive dispatches lost"),
                });
            }
            if self.should_stop(&record) {
                self.summary.stop_reason = Some(StopReason::FirstDisagreement);
                return Ok(());
            }
        }
        self.summary.stop_reason = Some(StopReason::Completed);
        Ok(())
    }
}

/// Resolves the scenario named by `config` and runs the campaign.
pub fn run_campaign(
    config: &CampaignConfig,
    scenario_dir: &std::path::Path,
    sink: &mut dyn RecordSink,
) -> Result<CampaignSummary, CampaignError> {
    let scenario = Scenario::resolve(&config.scenario, scenario_dir)?;
    Campaign::new(config.clone(), scenario)?.run(sink)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collate_pairs_in_order() {
        let c = Catalog::standard();
        let pairs = collate_results(&[(0, 25.0)], &[(0, Outcome::Pass)], &c).unwrap();
        assert_eq!(pairs[0].0.outcome, Outcome::Pass);
        assert_eq!(pairs[0].1.outcome, Outcome::Pass);

        let pairs = collate_results(&[(0, 87.0)], &[(0, Outcome::Pass)], &c).unwrap();
        let outcomes: Vec<_> = pairs.iter().map(|(o, a)| (o.outcome, a.outcome)).collect();
        assert_eq!(tc_fail_score(&outcomes).fraction, 1.0);
    }

    #[test]
    fn collate_rejects_misaligned_results() {
        let c = Catalog::standard();
        assert_eq!(
            collate_results(
                &[(0, 1.0), (1, 2.0)],
                &[(0, Outcome::Pass), (2, Outcome::Pass)],
                &c
            ),
            Err(CollateError::IdMismatch {
                index: 1,
                sent: 1,
                received: 2
            })
        );
        assert!(matches!(
            collate_results(&[(0, 1.0)], &[], &c),
            Err(CollateError::CountMismatch { .. })
        ));
    }

    fn small(mode: SearchMode, generations: usize) -> CampaignConfig {
        let mut c = CampaignConfig {
            mode,
            ..CampaignConfig::default()
        };
        c.search.population_size = 4;
        c.search.generations = generations;
        c
    }

    #[test]
    fn fault_free_run_finds_nothing() {
        let mut records = Vec::new();
        let summary = Campaign::new(small(SearchMode::GenerationalGa, 5), Scenario::default())
            .unwrap()
            .run(&mut records)
            .unwrap();
        assert_eq!(records.len(), 5);
        assert_eq!(summary.first_disagreement_generation, None);
        assert!(records
            .iter()
            .flat_map(|r| &r.individuals)
            .all(|i| i.fail_frac == 0.0));
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.generation, i as u64);
            assert_eq!(r.individuals.len(), 4);
            assert_eq!(r.active_templates.len(), 20);
        }
    }

    #[test]
    fn dead_link_aborts() {
        let mut c = small(SearchMode::GenerationalGa, 3);
        c.faults.drop_frame_prob = 1.0;
        let mut records = Vec::new();
        let err = Campaign::new(c, Scenario::default())
            .unwrap()
            .run(&mut records)
            .unwrap_err();
        assert!(matches!(err, CampaignError::Aborted { generation: 0, .. }));
        assert_eq!(records.len(), 1);
        assert!(records[0]
            .individuals
            .iter()
            .all(|i| i.lost && i.fail_frac == 0.0));
    }

    #[test]
    fn one_plus_one_counts_evaluations() {
        let mut records = Vec::new();
        Campaign::new(small(SearchMode::OnePlusOne, 6), Scenario::default())
            .unwrap()
            .run(&mut records)
            .unwrap();
        assert_eq!(records.len(), 6);
        assert!(records.iter().all(|r| r.individuals.len() == 1));
        assert_eq!(records[0].genomes_in_memory, 1);
        assert!(records[1..].iter().all(|r| r.genomes_in_memory == 2));
    }

    #[test]
    fn random_search_ignores_novelty() {
        let mut records = Vec::new();
        let mut campaign = Campaign::new(small(SearchMode::RandomSearch, 3), Scenario::default()).unwrap();
        campaign.run(&mut records).unwrap();
        assert_eq!(campaign.effective_weights().alpha_novelty(), 0.0);
        assert!(records
            .iter()
            .flat_map(|r| &r.individuals)
            .all(|i| i.ff == i.fail_frac));
    }

    #[test]
    fn energy_is_charged_per_generation_and_exchange() {
        let mut records = Vec::new();
        let c = small(SearchMode::GenerationalGa, 2);
        let costs = c.energy;
        Campaign::new(c, Scenario::default())
            .unwrap()
            .run(&mut records)
            .unwrap();
        let e = records[1].energy;
        assert_eq!(e.ga_generation, 2);
        assert_eq!(e.eval_test, 2 * 4 * 20);
        assert_eq!(e.total_uj, e.recompute_total(&costs));
        assert!(records[0].energy.total_uj < e.total_uj);
    }
}
