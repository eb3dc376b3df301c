//! The `islanding` command line.
//!
//! Every command writes into an output directory and leaves a `run.json`
//! manifest there (command, arguments, effective configuration, seeds,
//! input and output paths, tool version, wall time). Apart from wall-time
//! fields, every output is a pure function of the inputs and seeds.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 missing input,
//! 4 numeric failure, 1 anything else.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate_variant, run_seeds, snr_sweep, MetricsReport, RunSummary, Variant};
use crate::model::{train_model, Checkpoint, ModelFamily, DENOISER_TRAIN_SNR_DB};
use crate::signal::io::{read_dataset, write_dataset};
use crate::signal::{build_dataset, Dataset, Snr};
use crate::unet::UNet;

pub const MANIFEST_FILE: &str = "run.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug, Parser)]
#[command(
    name = "islanding",
    version,
    about = "Islanding detection: data generation, training, evaluation and noise sweeps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Base seed; overrides every seed in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate scenarios and write the labelled feature windows.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train a wavenet, lstm or unet model on a generated dataset.
    Train {
        /// wavenet, lstm or unet
        model: String,
        /// Dataset directory written by `generate`.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Test-split metrics and curves for a classifier checkpoint.
    Evaluate {
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// U-Net checkpoint applied before classification.
        #[arg(long)]
        denoiser: Option<PathBuf>,
        /// Noise level in dB, or `clean`.
        #[arg(long, default_value = "clean")]
        snr: String,
        /// Noise realisations, with seeds `seed..seed+runs`.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Balanced accuracy of each classifier across noise levels.
    Sweep {
        /// Classifier checkpoints; each gives one row.
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// U-Net checkpoint; adds a denoised row for every wavenet.
        #[arg(long)]
        denoiser: Option<PathBuf>,
        /// Comma-separated dB levels (default from config: 20,15,10,5).
        #[arg(long)]
        snr: Option<String>,
        #[arg(long)]
        runs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// ROC and precision-recall points plus the training loss history.
    ExportCurves {
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        denoiser: Option<PathBuf>,
        #[arg(long, default_value = "clean")]
        snr: String,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Sweep { .. } => "sweep",
            Command::ExportCurves { .. } => "export-curves",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Generate { common }
            | Command::Train { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Sweep { common, .. }
            | Command::ExportCurves { common, .. } => common,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub config: RunConfig,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: BTreeMap<String, String>,
    /// Non-reproducible measurements.
    pub timings: BTreeMap<String, f64>,
    pub wall_time_s: f64,
}

impl RunManifest {
    fn new(command: &str, args: &[String], config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: args.to_vec(),
            config: config.clone(),
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timings: BTreeMap::new(),
            wall_time_s: 0.0,
        }
    }
}

/// Output directory plus the manifest that will describe it.
struct Run {
    out: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        fs::write(&path, contents)?;
        self.manifest.outputs.insert(name.replace('.', "_"), name.into());
        Ok(path)
    }

    fn input(&mut self, name: &str, path: &Path) {
        self.manifest.inputs.insert(name.into(), path.to_path_buf());
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.wall_time_s = self.started.elapsed().as_secs_f64();
        fs::write(
            self.out.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&self.manifest)? + "\n",
        )?;
        Ok(())
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig { .. } => 2,
        Error::MissingInput(_) => 3,
        Error::NonFinite(_) => 4,
        _ => 1,
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(path)
}

fn load_denoiser(path: Option<&Path>) -> Result<Option<UNet>> {
    path.map(|p| Checkpoint::load(p)?.denoiser()).transpose()
}

fn parse_levels(text: &str) -> Result<Vec<Snr>> {
    let levels = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Snr>>>()?;
    if levels.is_empty() {
        return Err(Error::config("snr", "no noise levels given"));
    }
    Ok(levels)
}

fn snr_seed_value(snr: Snr) -> String {
    match snr {
        Snr::Clean => "clean".into(),
        Snr::Db(v) => v.to_string(),
    }
}

/// Runs one command and returns the text it prints on success.
pub fn run(cli: Cli, args: &[String]) -> Result<String> {
    let common = cli.command.common();
    let mut config = RunConfig::resolve(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.override_seed(seed);
    }
    fs::create_dir_all(&common.out)?;
    let mut run = Run {
        out: common.out.clone(),
        manifest: RunManifest::new(cli.command.name(), args, &config),
        started: Instant::now(),
    };
    if let Some(path) = &common.config {
        run.input("config", path);
    }
    let printed = match &cli.command {
        Command::Generate { .. } => generate(&mut run, &config)?,
        Command::Train { model, data, .. } => train(&mut run, &config, model, data)?,
        Command::Evaluate {
            checkpoint,
            data,
            denoiser,
            snr,
            runs,
            ..
        } => evaluate(&mut run, &config, checkpoint, data, denoiser.as_deref(), snr, *runs)?,
        Command::Sweep {
            checkpoints,
            data,
            denoiser,
            snr,
            runs,
            ..
        } => sweep(
            &mut run,
            &config,
            checkpoints,
            data,
            denoiser.as_deref(),
            snr.as_deref(),
            *runs,
        )?,
        Command::ExportCurves {
            checkpoint,
            data,
            denoiser,
            snr,
            ..
        } => export_curves(&mut run, &config, checkpoint, data, denoiser.as_deref(), snr)?,
    };
    run.finish()?;
    Ok(printed)
}

fn generate(run: &mut Run, config: &RunConfig) -> Result<String> {
    run.manifest.seeds.insert("dataset".into(), config.seed);
    let ds = build_dataset(&config.dataset, config.seed)?;
    write_dataset(&ds, &run.out)?;
    for name in [crate::signal::io::MANIFEST_FILE, crate::signal::io::WINDOWS_FILE] {
        run.manifest.outputs.insert(name.replace('.', "_"), name.into());
    }
    let (pos, neg) = ds.class_counts(&(0..ds.len()).collect::<Vec<_>>());
    Ok(format!(
        "{} total, {pos} islanding, {neg} non-islanding\nsplit: {} train, {} validation, {} test\nwrote {}\n",
        ds.len(),
        ds.split.train.len(),
        ds.split.validation.len(),
        ds.split.test.len(),
        run.out.display()
    ))
}

fn train(run: &mut Run, config: &RunConfig, model: &str, data: &Path) -> Result<String> {
    let family: ModelFamily = model.parse()?;
    run.input("data", data);
    let ds = load_dataset(data)?;
    let train = config.train_config(family);
    run.manifest.seeds.insert("train".into(), train.seed);
    run.manifest.seeds.insert("dataset".into(), ds.metadata.seed);
    let mut ck = train_model(&ds, &config.model_config(family), train)?;
    ck.manifest = Some(MANIFEST_FILE.into());
    let history = ck.history.to_csv();
    ck.save(&run.out.join(CHECKPOINT_FILE))?;
    run.manifest.outputs.insert("checkpoint".into(), CHECKPOINT_FILE.into());
    run.write(HISTORY_FILE, &history)?;
    let total: f64 = ck.history.epochs.iter().map(|e| e.wall_time_s).sum();
    run.manifest.timings.insert("training_s".into(), total);
    let mut text = format!(
        "{family}: {} lr {}, batch {}, {} loss{}\n",
        train.optimizer,
        train.learning_rate,
        train.batch_size,
        match train.loss {
            crate::train::LossKind::Bce => "bce",
            crate::train::LossKind::Mae => "mae",
        },
        if family == ModelFamily::Unet {
            format!(", trained at {DENOISER_TRAIN_SNR_DB} dB")
        } else {
            String::new()
        }
    );
    text += &format!(
        "stopped at epoch {} (best epoch {}, validation loss {:.6})\nwrote {}\n",
        ck.history.stopping_epoch,
        ck.history.best_epoch,
        ck.history.best_validation_loss().unwrap_or(f64::NAN),
        run.out.join(CHECKPOINT_FILE).display()
    );
    Ok(text)
}

fn variant_for(checkpoint: &Path, denoiser: Option<&Path>) -> Result<Variant> {
    let ck = Checkpoint::load(checkpoint)?;
    let classifier = ck.classifier()?;
    let unet = load_denoiser(denoiser)?;
    let label = match &unet {
        Some(_) => format!("{}+unet", ck.family),
        None => ck.family.to_string(),
    };
    Ok(Variant::new(label, classifier, unet))
}

fn evaluate(
    run: &mut Run,
    config: &RunConfig,
    checkpoint: &Path,
    data: &Path,
    denoiser: Option<&Path>,
    snr: &str,
    runs: usize,
) -> Result<String> {
    if runs == 0 {
        return Err(Error::config("runs", "must be at least 1"));
    }
    let snr: Snr = snr.parse()?;
    run.input("checkpoint", checkpoint);
    run.input("data", data);
    if let Some(d) = denoiser {
        run.input("denoiser", d);
    }
    let variant = variant_for(checkpoint, denoiser)?;
    let ds = load_dataset(data)?;
    let seeds = run_seeds(config.seed, runs);
    run.manifest.seeds.insert("first_noise_seed".into(), config.seed);
    let reports = seeds
        .iter()
        .map(|&s| evaluate_variant(&variant, &ds, snr, s))
        .collect::<Result<Vec<MetricsReport>>>()?;
    let summary = RunSummary::from_reports(&reports)?;

    let mut metrics = format!(
        "model = {}\nsnr_db = {}\nsamples = {}\npositives = {}\n",
        variant.label,
        snr_seed_value(snr),
        reports[0].samples,
        reports[0].positives
    );
    metrics += &summary.to_text();
    run.write("metrics.txt", &metrics)?;
    let mut per_run = String::from("seed,tp,fp,tn,fn,accuracy,balanced_accuracy,precision,recall,f1,roc_auc,pr_auc\n");
    for r in &reports {
        let (c, m) = (&r.confusion, &r.metrics);
        per_run += &format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.seeds[0],
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            m.accuracy,
            m.balanced_accuracy,
            m.precision,
            m.recall,
            m.f1,
            r.roc.auc,
            r.pr.auc
        );
    }
    run.write("runs.csv", &per_run)?;
    run.write("report.txt", &reports[0].to_text())?;
    run.write("roc.csv", &reports[0].roc_csv())?;
    run.write("pr.csv", &reports[0].pr_csv())?;

    let window = &ds.windows[ds.split.test[0]];
    let latency = variant.latency(window, 200)?;
    let latency_ms = latency.as_secs_f64() * 1e3;
    run.manifest
        .timings
        .insert("single_window_latency_ms".into(), latency_ms);

    let mut text = format!(
        "{} on {} test windows, snr {}\n",
        variant.label,
        reports[0].samples,
        snr_seed_value(snr)
    );
    for name in [
        "accuracy",
        "balanced_accuracy",
        "precision",
        "recall",
        "f1",
        "roc_auc",
        "pr_auc",
    ] {
        let s = summary.get(name).expect("summary metric");
        text += &format!("{name:<18} {}\n", s.cell(4));
    }
    let stages = if variant.denoiser.is_some() {
        "denoise + classify"
    } else {
        "classify"
    };
    text += &format!(
        "latency            {latency_ms:.3} ms per window ({stages})\nwrote {}\n",
        run.out.display()
    );
    Ok(text)
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    run: &mut Run,
    config: &RunConfig,
    checkpoints: &[PathBuf],
    data: &Path,
    denoiser: Option<&Path>,
    snr: Option<&str>,
    runs: Option<usize>,
) -> Result<String> {
    let levels = match snr {
        Some(text) => parse_levels(text)?,
        None => config.sweep.snrs.iter().map(|&v| Snr::db(v)).collect::<Result<_>>()?,
    };
    let runs = runs.unwrap_or(config.sweep.runs);
    if runs == 0 {
        return Err(Error::config("runs", "must be at least 1"));
    }
    run.input("data", data);
    let unet = load_denoiser(denoiser)?;
    if let Some(d) = denoiser {
        run.input("denoiser", d);
    }
    let mut raw = Vec::new();
    let mut denoised = Vec::new();
    for (i, path) in checkpoints.iter().enumerate() {
        run.input(&format!("checkpoint{i}"), path);
        let ck = Checkpoint::load(path)?;
        let classifier = ck.classifier()?;
        if let (Some(u), ModelFamily::Wavenet) = (&unet, ck.family) {
            denoised.push(Variant::new(
                format!("{}+unet", ck.family),
                classifier.clone(),
                Some(u.clone()),
            ));
        }
        raw.push(Variant::new(ck.family.to_string(), classifier, None));
    }
    raw.extend(denoised);
    let ds = load_dataset(data)?;
    run.manifest.seeds.insert("first_noise_seed".into(), config.seed);
    let table = snr_sweep(&raw, &ds, &levels, &run_seeds(config.seed, runs))?;
    let csv = table.to_csv();
    run.write("sweep.csv", &csv)?;
    run.write("sweep_runs.csv", &table.to_long_csv())?;
    Ok(format!("{csv}wrote {}\n", run.out.display()))
}

fn export_curves(
    run: &mut Run,
    config: &RunConfig,
    checkpoint: &Path,
    data: &Path,
    denoiser: Option<&Path>,
    snr: &str,
) -> Result<String> {
    let snr: Snr = snr.parse()?;
    run.input("checkpoint", checkpoint);
    run.input("data", data);
    let history = Checkpoint::load(checkpoint)?.history;
    let variant = variant_for(checkpoint, denoiser)?;
    let ds = load_dataset(data)?;
    run.manifest.seeds.insert("noise_seed".into(), config.seed);
    let report = evaluate_variant(&variant, &ds, snr, config.seed)?;
    run.write("roc.csv", &report.roc_csv())?;
    run.write("pr.csv", &report.pr_csv())?;
    let auc = format!(
        "roc_auc = {}\npr_auc = {}\npr_baseline = {}\n",
        report.roc.auc, report.pr.auc, report.pr.baseline
    );
    run.write("auc.txt", &auc)?;
    let mut loss = String::from("epoch,train_loss,validation_loss\n");
    for e in &history.epochs {
        loss += &format!("{},{},{}\n", e.epoch, e.train_loss, e.validation_loss);
    }
    run.write("loss.csv", &loss)?;
    Ok(format!(
        "{}: {} roc points (auc {:.4}), {} pr points (auc {:.4}, no-skill {:.4}), {} loss rows\nwrote {}\n",
        variant.label,
        report.roc.points.len(),
        report.roc.auc,
        report.pr.points.len(),
        report.pr.auc,
        report.pr.baseline,
        history.epochs.len(),
        run.out.display()
    ))
}

/// Parses `std::env::args`, runs the command, prints and maps errors to exit
/// codes.
pub fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli, &args[1..]) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
