//! Command-line front end: model validation, baseline building, monitoring
//! sweeps, diagnosis, and simulation campaigns.
//!
//! Exit codes: 0 healthy (no errors, no diagnosis), 1 diagnosis produced
//! (suspects found), 2 error.

use std::collections::BTreeMap;
use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use probemon::behavioral::diagnose;
use probemon::model::{DetectorModel, ProbeId, Severity};
use probemon::monitor::{
    build_baseline, extract_features, monitor_sweep, BaselineArchive, EventBatch, MonitorConfig,
    ProbeState,
};
use probemon::report::{DiagnosisReport, REPORT_SCHEMA};
use probemon::simulator::{run_campaign, Campaign};
use probemon::structural::suspect_report;

#[derive(Parser)]
#[command(name = "probemon", version, about = "Multi-level sensor-array fault monitor and diagnoser")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Chi-square significance level.
    #[arg(long, global = true, env = "PROBEMON_ALPHA")]
    alpha: Option<f64>,
    /// Histogram bins per probe.
    #[arg(long, global = true, env = "PROBEMON_BINS")]
    bins: Option<usize>,
    /// Nominal events per batch.
    #[arg(long, global = true, env = "PROBEMON_SAMPLE_SIZE")]
    sample_size: Option<usize>,
    /// Seed override for simulation baselines.
    #[arg(long, global = true, env = "PROBEMON_SEED")]
    seed: Option<u64>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "json", env = "PROBEMON_FORMAT")]
    format: Format,
    /// Write output to a file instead of standard output.
    #[arg(long, global = true, env = "PROBEMON_OUT")]
    out: Option<PathBuf>,
    /// Timestamp string to embed in reports (omitted when unset, keeping
    /// seeded runs byte-reproducible).
    #[arg(long, global = true, env = "PROBEMON_TIMESTAMP")]
    timestamp: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Load a model file and report diagnostics.
    Validate { model: PathBuf },
    /// Build a baseline archive from fault-free batches.
    Baseline {
        model: PathBuf,
        /// Two or more fault-free batch files.
        #[arg(required = true)]
        batches: Vec<PathBuf>,
    },
    /// Run the chi-square sweep and print verdicts only.
    Monitor {
        model: PathBuf,
        archive: PathBuf,
        batch: PathBuf,
    },
    /// Run the full three-level pipeline and emit a diagnosis report.
    Diagnose {
        model: PathBuf,
        archive: PathBuf,
        batch: PathBuf,
    },
    /// Run a simulation campaign and write per-trial reports plus aggregate
    /// metrics.
    Simulate {
        campaign: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn config_from(opts: &GlobalOpts) -> MonitorConfig {
    let mut config = MonitorConfig::default();
    if let Some(a) = opts.alpha {
        config.alpha = a;
    }
    if let Some(b) = opts.bins {
        config.bins = b;
    }
    if let Some(n) = opts.sample_size {
        config.sample_size = n;
    }
    config
}

fn read(path: &Path) -> Result<String, Box<dyn Error>> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn emit(opts: &GlobalOpts, text: &str) -> Result<(), Box<dyn Error>> {
    match &opts.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_batch(path: &Path, model: &DetectorModel) -> Result<EventBatch, Box<dyn Error>> {
    let mut batch = EventBatch::parse(&read(path)?)?;
    for p in batch.probe_ids() {
        if !model.has_probe(p) {
            return Err(format!("{}: probe {p} not in model", path.display()).into());
        }
    }
    // A probe that never fired is absent from the file entirely; align the
    // batch to the model so silent channels are judged, not skipped.
    let n = batch.event_count;
    for p in model.probe_ids() {
        batch.readings.entry(p.clone()).or_insert_with(|| vec![None; n]);
    }
    Ok(batch)
}

fn run(cli: &Cli) -> Result<u8, Box<dyn Error>> {
    let opts = &cli.opts;
    match &cli.command {
        Command::Validate { model } => {
            let model = DetectorModel::load(&read(model)?)?;
            let diags = model.validate();
            for d in &diags {
                let tag = match d.severity {
                    Severity::Warning => "warning",
                    Severity::Error => "error",
                };
                eprintln!("{tag}: {}", d.message);
            }
            if diags.iter().any(|d| d.severity == Severity::Error) {
                return Ok(2);
            }
            println!(
                "ok: {} components, {} probes, {} warnings",
                model.component_count(),
                model.probe_count(),
                diags.len()
            );
            Ok(0)
        }
        Command::Baseline { model, batches } => {
            let model = DetectorModel::load(&read(model)?)?;
            let parsed: Vec<EventBatch> = batches
                .iter()
                .map(|p| load_batch(p, &model))
                .collect::<Result<_, _>>()?;
            let mut config = config_from(opts);
            config.baseline_samples = parsed.len();
            if let Some(first) = parsed.first() {
                config.sample_size = first.event_count;
            }
            let archive = build_baseline(&parsed, &config)?;
            let out = opts
                .out
                .as_ref()
                .ok_or("baseline requires --out <archive-path>")?;
            fs::write(out, archive.to_json())?;
            eprintln!(
                "wrote baseline for {} probes to {}",
                archive.probes.len(),
                out.display()
            );
            Ok(0)
        }
        Command::Monitor {
            model,
            archive,
            batch,
        } => {
            let model = DetectorModel::load(&read(model)?)?;
            let archive = BaselineArchive::from_json(&read(archive)?)?;
            let batch = load_batch(batch, &model)?;
            let config = config_from(opts);
            let verdicts = monitor_sweep(&batch, &archive, &config)?;
            let bad = verdicts.iter().filter(|v| v.state == ProbeState::Bad).count();
            match opts.format {
                Format::Json => {
                    let json = serde_json::to_string_pretty(&verdicts)?;
                    emit(opts, &format!("{json}\n"))?;
                }
                Format::Table => {
                    let mut text = String::new();
                    for v in &verdicts {
                        let state = if v.state == ProbeState::Bad { "BAD" } else { "OK" };
                        text.push_str(&format!(
                            "{:<20} {:<4} {:>12.3} {:>5}\n",
                            v.probe, state, v.statistic, v.dof
                        ));
                    }
                    emit(opts, &text)?;
                }
            }
            Ok(if bad > 0 { 1 } else { 0 })
        }
        Command::Diagnose {
            model,
            archive,
            batch,
        } => {
            let model = DetectorModel::load(&read(model)?)?;
            let archive = BaselineArchive::from_json(&read(archive)?)?;
            let batch = load_batch(batch, &model)?;
            let config = config_from(opts);
            let verdicts = monitor_sweep(&batch, &archive, &config)?;
            let suspects = suspect_report(&model, &verdicts)?;
            let beliefs = if suspects.is_empty() {
                Vec::new()
            } else {
                let features: BTreeMap<ProbeId, _> = batch
                    .readings
                    .iter()
                    .map(|(p, col)| {
                        let range = archive.probes.get(p).map(|b| b.range());
                        (p.clone(), extract_features(col, range))
                    })
                    .collect();
                diagnose(&suspects, &model, &features, &archive)?
            };
            let found = !suspects.is_empty();
            let report = DiagnosisReport {
                schema: REPORT_SCHEMA.into(),
                timestamp: opts.timestamp.clone(),
                config,
                verdicts,
                suspects,
                beliefs,
                ground_truth: None,
                metrics: None,
            };
            match opts.format {
                Format::Json => emit(opts, &format!("{}\n", report.to_json()))?,
                Format::Table => emit(opts, &report.to_table())?,
            }
            Ok(if found { 1 } else { 0 })
        }
        Command::Simulate { campaign, out_dir } => {
            let mut campaign: Campaign = serde_json::from_str(&read(campaign)?)
                .map_err(|e| format!("invalid campaign: {e}"))?;
            if let Some(seed) = opts.seed {
                campaign.baseline_seed = seed;
            }
            if let Some(a) = opts.alpha {
                campaign.config.alpha = a;
            }
            if let Some(b) = opts.bins {
                campaign.config.bins = b;
            }
            if let Some(n) = opts.sample_size {
                campaign.config.sample_size = n;
            }
            let (results, summary) = run_campaign(&campaign)?;
            fs::create_dir_all(out_dir)?;
            for (i, trial) in results.iter().enumerate() {
                let report = DiagnosisReport {
                    schema: REPORT_SCHEMA.into(),
                    timestamp: opts.timestamp.clone(),
                    config: campaign.config,
                    verdicts: trial.verdicts.clone(),
                    suspects: trial.suspects.clone(),
                    beliefs: trial.beliefs.clone(),
                    ground_truth: trial.ground_truth.clone(),
                    metrics: Some(trial.metrics.clone()),
                };
                fs::write(out_dir.join(format!("trial_{i:04}.json")), report.to_json())?;
            }
            let aggregate = serde_json::to_string_pretty(&summary)?;
            fs::write(out_dir.join("aggregate.json"), &aggregate)?;
            match opts.format {
                Format::Json => println!("{aggregate}"),
                Format::Table => {
                    println!(
                        "trials={} alerted={} containment={:.3} median_suspects={:.1} top1={:.3}",
                        summary.trials,
                        summary.alerted_trials,
                        summary.containment_rate,
                        summary.median_suspect_size,
                        summary.class_top1_rate
                    );
                }
            }
            Ok(0)
        }
    }
}
