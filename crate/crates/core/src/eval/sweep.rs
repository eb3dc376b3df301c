use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::confusion::{confusion, metrics};
use super::report::{aggregate, MetricsReport, Summary, THRESHOLD};
use crate::error::{Error, Result};
use crate::model::Classifier;
use crate::seed::stream;
use crate::signal::{inject_noise_batch, Dataset, FeatureWindow, Snr};
use crate::tensor::Tensor;
use crate::train::gather_rows;
use crate::unet::UNet;

pub const DEFAULT_SNRS: [f64; 4] = [20.0, 15.0, 10.0, 5.0];
pub const DEFAULT_RUNS: usize = 5;

/// A classifier, optionally behind a denoiser.
#[derive(Debug, Clone)]
pub struct Variant {
    pub label: String,
    pub classifier: Classifier,
    pub denoiser: Option<UNet>,
}

impl Variant {
    pub fn new(label: impl Into<String>, classifier: Classifier, denoiser: Option<UNet>) -> Self {
        Self {
            label: label.into(),
            classifier,
            denoiser,
        }
    }

    /// Probability for one raw window.
    pub fn predict_window(&self, window: &FeatureWindow) -> Result<f64> {
        match &self.denoiser {
            None => self.classifier.predict(window),
            Some(unet) => self.classifier.predict(&unet.denoise_window(window)?),
        }
    }

    /// Median wall time of [`Variant::predict_window`] over `reps` calls.
    pub fn latency(&self, window: &FeatureWindow, reps: usize) -> Result<Duration> {
        let mut times = Vec::with_capacity(reps.max(1));
        for _ in 0..reps.max(1) {
            let start = Instant::now();
            std::hint::black_box(self.predict_window(window)?);
            times.push(start.elapsed());
        }
        times.sort();
        Ok(times[times.len() / 2])
    }

    /// Probabilities for raw windows `[B, T, C]`: denoise (if any), then
    /// classify.
    pub fn scores(&self, raw: &Tensor) -> Result<Vec<f64>> {
        match &self.denoiser {
            None => self.classifier.predict_batch(raw),
            Some(unet) => self.classifier.predict_batch(&denoise_chunked(unet, raw)?),
        }
    }
}

fn denoise_chunked(unet: &UNet, raw: &Tensor) -> Result<Tensor> {
    let n = raw.dim(0);
    let mut values = Vec::with_capacity(raw.len());
    let idx: Vec<usize> = (0..n).collect();
    for part in idx.chunks(256) {
        values.extend(unet.denoise(&gather_rows(raw, part)?)?.into_data());
    }
    Tensor::new(raw.shape().to_vec(), values)
}

/// Test windows with evaluation noise for one run. Window `i` always gets
/// the same noise for a given `(snr, run_seed)`.
pub fn noisy_test_split(dataset: &Dataset, snr: Snr, run_seed: u64) -> Result<Tensor> {
    let test = &dataset.split.test;
    if test.is_empty() {
        return Err(Error::EmptyInput("test split".into()));
    }
    inject_noise_batch(&dataset.tensor(test)?, snr, run_seed, stream::EVAL_NOISE, test)
}

/// Full report for one variant on the test split at one noise level.
pub fn evaluate_variant(variant: &Variant, dataset: &Dataset, snr: Snr, run_seed: u64) -> Result<MetricsReport> {
    let x = noisy_test_split(dataset, snr, run_seed)?;
    let labels = dataset.labels(&dataset.split.test);
    MetricsReport::from_scores(&variant.scores(&x)?, &labels, vec![run_seed])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub summary: Summary,
    /// Balanced accuracy per run seed.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub cells: Vec<SweepCell>,
}

/// Balanced accuracy, one row per variant and one column per noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub levels: Vec<String>,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

fn level_name(snr: Snr) -> String {
    match snr {
        Snr::Clean => "clean".into(),
        Snr::Db(v) => format!("{v} dB"),
    }
}

/// Noise seeds `first..first + runs`.
pub fn run_seeds(first: u64, runs: usize) -> Vec<u64> {
    (first..first + runs as u64).collect()
}

/// One run per noise seed on fixed checkpoints. Each run's noisy test set
/// is shared by every variant.
pub fn snr_sweep(variants: &[Variant], dataset: &Dataset, levels: &[Snr], seeds: &[u64]) -> Result<SweepTable> {
    if variants.is_empty() || levels.is_empty() {
        return Err(Error::EmptyInput("sweep variants or noise levels".into()));
    }
    if seeds.is_empty() {
        return Err(Error::config("runs", "must be at least 1"));
    }
    let labels = dataset.labels(&dataset.split.test);
    let mut values = vec![vec![Vec::with_capacity(seeds.len()); levels.len()]; variants.len()];
    for (l, &snr) in levels.iter().enumerate() {
        for &seed in seeds {
            let x = noisy_test_split(dataset, snr, seed)?;
            for (v, variant) in variants.iter().enumerate() {
                let c = confusion(&variant.scores(&x)?, &labels, THRESHOLD)?;
                values[v][l].push(metrics(&c).balanced_accuracy);
            }
        }
    }
    let rows = variants
        .iter()
        .zip(values)
        .map(|(variant, per_level)| {
            let cells = per_level
                .into_iter()
                .map(|values| {
                    Ok(SweepCell {
                        summary: aggregate(&values)?,
                        values,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(SweepRow {
                label: variant.label.clone(),
                cells,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        levels: levels.iter().map(|&s| level_name(s)).collect(),
        seeds: seeds.to_vec(),
        rows,
    })
}

impl SweepTable {
    pub fn row(&self, label: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn column(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }

    /// Header `model,<level>,...`, cells `mean ± std`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("model,{}\n", self.levels.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.cells.iter().map(|c| c.summary.cell(4)).collect();
            let _ = writeln!(out, "{},{}", row.label, cells.join(","));
        }
        out
    }

    /// One line per `(model, level, seed)`.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from("model,level,seed,balanced_accuracy\n");
        for row in &self.rows {
            for (level, cell) in self.levels.iter().zip(&row.cells) {
                for (seed, v) in self.seeds.iter().zip(&cell.values) {
                    let _ = writeln!(out, "{},{level},{seed},{v}", row.label);
                }
            }
        }
        out
    }
}
