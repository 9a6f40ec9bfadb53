//! Run logs: JSON lines, a header first, then one record per generation and
//! optionally a closing line with the campaign outcome.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Scenario;
use crate::catalog::TEMPLATE_COUNT;
use crate::config::CampaignConfig;
use crate::orchestrator::{Campaign, CampaignSummary, GenerationRecord, RecordSink};
use crate::search::{fitness, FitnessWeights};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub search: u64,
    pub faults: u64,
    pub environment: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunHeader {
    pub format: u32,
    pub config: CampaignConfig,
    /// The resolved scenario, so the log is self-contained.
    pub scenario: Scenario,
    pub seeds: Seeds,
    pub catalog_sha256: String,
    pub effective_weights: FitnessWeights,
}

impl RunHeader {
    pub fn for_campaign(campaign: &Campaign) -> RunHeader {
        let config = campaign.config().clone();
        RunHeader {
            format: FORMAT_VERSION,
            seeds: Seeds {
                search: config.search.rng_seed,
                faults: config.faults.rng_seed,
                environment: campaign.scenario().environment.seed,
            },
            config,
            scenario: campaign.scenario().clone(),
            catalog_sha256: campaign.catalog().fingerprint(),
            effective_weights: campaign.effective_weights(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEnd {
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub summary: CampaignSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LogLine {
    Header(Box<RunHeader>),
    Generation(Box<GenerationRecord>),
    End(RunEnd),
}

#[derive(Debug, Error)]
pub enum RunLogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Appends log lines to `W`, flushing after each so a crash loses at most the
/// line being written.
pub struct RunLogWriter<W: Write> {
    out: W,
    records: usize,
}

impl<W: Write> RunLogWriter<W> {
    pub fn new(mut out: W, header: &RunHeader) -> io::Result<RunLogWriter<W>> {
        write_line(&mut out, &LogLine::Header(Box::new(header.clone())))?;
        Ok(RunLogWriter { out, records: 0 })
    }

    pub fn append(&mut self, record: &GenerationRecord) -> io::Result<()> {
        write_line(&mut self.out, &LogLine::Generation(Box::new(record.clone())))?;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn finish(mut self, end: RunEnd) -> io::Result<W> {
        write_line(&mut self.out, &LogLine::End(end))?;
        Ok(self.out)
    }
}

fn write_line<W: Write>(out: &mut W, line: &LogLine) -> io::Result<()> {
    let mut text = serde_json::to_string(line).map_err(io::Error::other)?;
    text.push('\n');
    out.write_all(text.as_bytes())?;
    out.flush()
}

impl<W: Write> RecordSink for RunLogWriter<W> {
    fn record(&mut self, record: &GenerationRecord) -> io::Result<()> {
        self.append(record)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub header: Option<RunHeader>,
    pub records: Vec<GenerationRecord>,
    pub end: Option<RunEnd>,
    pub warnings: Vec<String>,
}

/// Parses a run log. An unterminated, unparsable final line is taken to be a
/// write cut short and is dropped with a warning; any other bad line is an error.
pub fn read_log(text: &str) -> Result<RunLog, RunLogError> {
    let mut log = RunLog::default();
    if text.is_empty() {
        log.warnings.push("empty log".into());
        return Ok(log);
    }
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (i, raw) in lines.iter().enumerate() {
        let line_no = i + 1;
        let terminated = raw.ends_with('\n');
        let body = raw.trim_end_matches(['\n', '\r']);
        let parsed = serde_json::from_str::<LogLine>(body);
        let line = match parsed {
            Ok(line) => line,
            Err(_) if !terminated && i + 1 == lines.len() => {
                log.warnings
                    .push(format!("line {line_no}: truncated final line dropped"));
                break;
            }
            Err(e) => {
                return Err(RunLogError::Malformed {
                    line: line_no,
                    reason: e.to_string(),
                })
            }
        };
        let malformed = |reason: &str| RunLogError::Malformed {
            line: line_no,
            reason: reason.to_string(),
        };
        match line {
            LogLine::Header(h) if i == 0 => log.header = Some(*h),
            LogLine::Header(_) => return Err(malformed("header after the first line")),
            _ if log.header.is_none() => return Err(malformed("first line is not a header")),
            _ if log.end.is_some() => return Err(malformed("line after the end marker")),
            LogLine::Generation(r) => log.records.push(*r),
            LogLine::End(e) => log.end = Some(e),
        }
    }
    if log.header.is_none() {
        log.warnings.push("no header".into());
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub generations: usize,
    pub evaluations: usize,
    pub best_ff: Vec<f64>,
    pub first_disagreement_generation: Option<u64>,
    pub total_disagreements: u64,
    pub archive_sizes: Vec<usize>,
    pub frames_sent: u64,
    pub retransmits: u64,
    pub lost_frames: u64,
    pub lost_batches: u64,
    pub checksum_failures: u64,
    pub status_polls: u64,
    pub deferrals: u64,
    pub total_energy_uj: u64,
    /// Every record's ledger total equals its counts times the configured costs.
    pub energy_consistent: Option<bool>,
    /// Every ff recomputes exactly from fail_frac, novelty_raw and the weights.
    pub ff_consistent: Option<bool>,
    pub max_genomes_in_memory: i64,
    pub status: Option<RunStatus>,
    pub abort_reason: Option<String>,
    pub warnings: Vec<String>,
}

/// Recomputes ff for every individual; false on the first mismatch.
pub fn ff_consistent(records: &[GenerationRecord], weights: &FitnessWeights) -> bool {
    records
        .iter()
        .flat_map(|r| &r.individuals)
        .all(|i| fitness(i.fail_frac, i.novelty_raw, weights, TEMPLATE_COUNT).is_ok_and(|f| f.ff == i.ff))
}

pub fn summarize(log: &RunLog) -> Report {
    let records = &log.records;
    let mut warnings = log.warnings.clone();
    if records.is_empty() {
        warnings.push("log holds no generation records".into());
    }
    let sum = |f: fn(&GenerationRecord) -> u64| records.iter().map(f).sum::<u64>();
    let individuals = || records.iter().flat_map(|r| &r.individuals);
    Report {
        generations: records.len(),
        evaluations: individuals().count(),
        best_ff: records.iter().filter_map(GenerationRecord::best_ff).collect(),
        first_disagreement_generation: records
            .iter()
            .find(|r| r.disagreements() > 0)
            .map(|r| r.generation),
        total_disagreements: sum(|r| r.disagreements() as u64),
        archive_sizes: records.iter().map(|r| r.archive_size).collect(),
        frames_sent: sum(|r| r.frames_sent),
        retransmits: sum(|r| r.retransmits),
        lost_frames: sum(|r| r.lost),
        lost_batches: individuals().filter(|i| i.lost).count() as u64,
        checksum_failures: sum(|r| r.checksum_failures),
        status_polls: sum(|r| r.status_polls),
        deferrals: sum(|r| r.deferrals),
        total_energy_uj: records.last().map_or(0, |r| r.energy.total_uj),
        energy_consistent: log.header.as_ref().map(|h| {
            records
                .iter()
                .all(|r| r.energy.recompute_total(&h.config.energy) == r.energy.total_uj)
        }),
        ff_consistent: log
            .header
            .as_ref()
            .map(|h| ff_consistent(records, &h.effective_weights)),
        max_genomes_in_memory: records.iter().map(|r| r.genomes_in_memory).max().unwrap_or(0),
        status: log.end.as_ref().map(|e| e.status),
        abort_reason: log.end.as_ref().and_then(|e| e.reason.clone()),
        warnings,
    }
}

fn yes_no(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "yes",
        Some(false) => "NO",
        None => "unknown (no header)",
    }
}

/// Plain-text rendering of a [`Report`].
pub fn render_report(report: &Report) -> String {
    let mut out = String::new();
    let w = &mut out;
    for warning in &report.warnings {
        let _ = writeln!(w, "warning: {warning}");
    }
    let _ = writeln!(w, "generations:          {}", report.generations);
    let _ = writeln!(w, "evaluations:          {}", report.evaluations);
    let first = report
        .first_disagreement_generation
        .map_or("none".to_string(), |g| g.to_string());
    let _ = writeln!(w, "first disagreement:   {first}");
    let _ = writeln!(w, "total disagreements:  {}", report.total_disagreements);
    let _ = writeln!(
        w,
        "frames sent:          {} ({} retransmits, {} lost, {} checksum failures)",
        report.frames_sent, report.retransmits, report.lost_frames, report.checksum_failures
    );
    let _ = writeln!(w, "lost batches:         {}", report.lost_batches);
    let _ = writeln!(w, "status polls:         {}", report.status_polls);
    let _ = writeln!(w, "gate deferrals:       {}", report.deferrals);
    let _ = writeln!(w, "total energy:         {} uJ", report.total_energy_uj);
    let _ = writeln!(w, "energy consistent:    {}", yes_no(report.energy_consistent));
    let _ = writeln!(w, "ff consistent:        {}", yes_no(report.ff_consistent));
    let _ = writeln!(w, "peak genomes held:    {}", report.max_genomes_in_memory);
    if let Some(status) = report.status {
        let status = match status {
            RunStatus::Completed => "completed",
            RunStatus::Aborted => "aborted",
        };
        let _ = writeln!(w, "run status:           {status}");
    }
    if let Some(reason) = &report.abort_reason {
        let _ = writeln!(w, "abort reason:         {reason}");
    }
    let _ = writeln!(w, "\ngeneration  best_ff             archive");
    for (g, (ff, size)) in report.best_ff.iter().zip(&report.archive_sizes).enumerate() {
        let _ = writeln!(w, "{g:>10}  {ff:<18.16}  {size}");
    }
    out
}
