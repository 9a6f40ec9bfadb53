use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use greenroom::agent::Scenario;
use greenroom::catalog::Catalog;
use greenroom::config::{parse_config, CampaignConfig, SearchMode};
use greenroom::orchestrator::{Campaign, CampaignError};
use greenroom::runlog::{read_log, render_report, summarize, RunEnd, RunHeader, RunLogWriter, RunStatus};
use greenroom::wire::Transcript;

const EXIT_CONFIG: u8 = 1;
const EXIT_ABORT: u8 = 2;

/// Run-time search-based testing against a simulated sensor agent.
#[derive(Parser)]
#[command(name = "greenroom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write run.jsonl and transcript.txt into --out.
    Run {
        /// TOML campaign config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides search.rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides search.generations (evaluations in one-plus-one mode).
        #[arg(long)]
        generations: Option<usize>,
        /// generational-ga, one-plus-one or random-search.
        #[arg(long)]
        mode: Option<SearchMode>,
        #[arg(long)]
        out: PathBuf,
        /// Record elapsed wall-clock time in each generation record.
        #[arg(long)]
        wall_time: bool,
    },
    /// Summarize a run log.
    Report {
        log: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print the test case templates.
    Catalog {
        /// One JSON object per template.
        #[arg(long)]
        json: bool,
    },
    /// Decode a frame transcript.
    Transcript { file: PathBuf },
}

/// Failure classes, mapped onto exit codes.
enum Failure {
    Config(anyhow::Error),
    Abort(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            generations,
            mode,
            out,
            wall_time,
        } => run(config.as_deref(), seed, generations, mode, &out, wall_time),
        Command::Report { log, json } => report(&log, json).map_err(Failure::from),
        Command::Catalog { json } => {
            catalog(json);
            Ok(())
        }
        Command::Transcript { file } => transcript(&file).map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Abort(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ABORT)
        }
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<(CampaignConfig, PathBuf)> {
    let Some(path) = path else {
        return Ok((CampaignConfig::default(), PathBuf::from(".")));
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    let base = path
        .parent()
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    Ok((config, base))
}

fn run(
    config_path: Option<&Path>,
    seed: Option<u64>,
    generations: Option<usize>,
    mode: Option<SearchMode>,
    out: &Path,
    wall_time: bool,
) -> Result<(), Failure> {
    let (mut config, base) = load_config(config_path)?;
    if let Some(seed) = seed {
        config.search.rng_seed = seed;
    }
    if let Some(g) = generations {
        config.search.generations = g;
    }
    if let Some(m) = mode {
        config.mode = m;
    }
    config.validate().context("command-line override")?;
    let scenario = Scenario::resolve(&config.scenario, &base).context("resolving scenario")?;
    let mut campaign = Campaign::new(config, scenario).context("setting up campaign")?;
    campaign.record_wall_time(wall_time);

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let log_path = out.join("run.jsonl");
    let file = File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let header = RunHeader::for_campaign(&campaign);
    let mut writer = RunLogWriter::new(BufWriter::new(file), &header)
        .with_context(|| format!("writing {}", log_path.display()))?;

    let result = campaign.run(&mut writer);

    let transcript_path = out.join("transcript.txt");
    fs::write(&transcript_path, campaign.link().transcript().render())
        .with_context(|| format!("writing {}", transcript_path.display()))
        .map_err(Failure::Abort)?;
    let (status, reason) = match &result {
        Ok(_) => (RunStatus::Completed, None),
        Err(e) => (RunStatus::Aborted, Some(e.to_string())),
    };
    let end = RunEnd {
        status,
        reason,
        summary: campaign.summary().clone(),
    };
    let end_written = writer.finish(end);

    match result {
        Ok(summary) => {
            end_written
                .with_context(|| format!("writing {}", log_path.display()))
                .map_err(Failure::Abort)?;
            let first = summary
                .first_disagreement_generation
                .map_or("none".to_string(), |g| g.to_string());
            println!(
                "{} generations, {} evaluations, first disagreement: {first}, energy {} uJ",
                summary.generations_run, summary.evaluations, summary.energy.total_uj
            );
            println!("log: {}", log_path.display());
            println!("transcript: {}", transcript_path.display());
            Ok(())
        }
        Err(e @ (CampaignError::Aborted { .. } | CampaignError::Storage(_))) => {
            Err(Failure::Abort(anyhow::Error::new(e)))
        }
        Err(e) => Err(Failure::Config(anyhow::Error::new(e))),
    }
}

fn report(path: &Path, json: bool) -> anyhow::Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let log = read_log(&text).with_context(|| format!("parsing {}", path.display()))?;
    let report = summarize(&log);
    if json {
        emit(&(serde_json::to_string_pretty(&report)? + "\n"));
    } else {
        emit(&render_report(&report));
    }
    Ok(())
}

fn catalog(json: bool) {
    let catalog = Catalog::standard();
    let mut out = String::new();
    if json {
        for line in catalog.dump_lines() {
            let _ = writeln!(out, "{line}");
        }
        emit(&out);
        return;
    }
    let _ = writeln!(
        out,
        "{:>2}  {:<28} {:<14} {:>14} {:>14}  kind",
        "id", "name", "channel", "min", "max"
    );
    for t in catalog.templates() {
        let channel = t.channel.map_or("-".to_string(), |c| c.to_string());
        let _ = writeln!(
            out,
            "{:>2}  {:<28} {:<14} {:>14} {:>14}  {:?}",
            t.id, t.name, channel, t.input_min, t.input_max, t.kind
        );
    }
    let _ = writeln!(out, "sha256 {}", catalog.fingerprint());
    emit(&out);
}

/// Writes to stdout, treating a closed pipe as the reader having seen enough.
fn emit(text: &str) {
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush());
}

fn transcript(path: &Path) -> anyhow::Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let transcript =
        Transcript::parse(&text).map_err(|(line, e)| anyhow::anyhow!("{}:{line}: {e}", path.display()))?;
    let mut out = String::new();
    for entry in transcript.entries() {
        let decoded = entry.frame().map_or("undecodable".to_string(), |f| {
            format!(
                "{:<10} seq={:<3} len={:<3}",
                format!("{:?}", f.kind()),
                f.seq(),
                f.payload().len()
            )
        });
        let _ = writeln!(
            out,
            "{} {} {}  {}",
            entry.at,
            entry.direction.tag(),
            decoded,
            spaced_hex(&entry.bytes)
        );
    }
    emit(&out);
    Ok(())
}

fn spaced_hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<Vec<_>>()
        .join(" ")
}
