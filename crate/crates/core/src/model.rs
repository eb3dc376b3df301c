//! Model families, the checkpoint file and the dataset-level training entry
//! points.
//!
//! A checkpoint is a single JSON document:
//!
//! ```text
//! {
//!   "format": "islanding-checkpoint", "version": 1,
//!   "family": "wavenet" | "lstm" | "unet",
//!   "config": { ...architecture fields... },
//!   "scaler": { "mean": [..], "std": [..] },
//!   "params": { "<name>": { "shape": [..], "data": [..] }, ... },
//!   "optimizer": { "kind", "learning_rate", "step", "first_moment", "second_moment" },
//!   "history": { "epochs": [{ "epoch", "train_loss", "validation_loss" }], "stopping_epoch", "best_epoch" },
//!   "train_config": { ... },
//!   "dataset_seed": u64,
//!   "noise_snr_db": f64 | null,
//!   "manifest": "<run manifest file name>" | null
//! }
//! ```
//!
//! Wall-clock times are never written, so identical runs give identical
//! files.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{Lstm, LstmConfig};
use crate::params::{FeatureScaler, Params};
use crate::seed::stream;
use crate::signal::{inject_noise_batch, Dataset, FeatureWindow, Snr};
use crate::tensor::Tensor;
use crate::train::{fit, EpochData, OptimizerState, StaticData, TrainConfig, TrainHistory};
use crate::unet::{UNet, UNetConfig};
use crate::wavenet::{WaveNet, WaveNetConfig};

pub const CHECKPOINT_FORMAT: &str = "islanding-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Training SNR of the denoiser.
pub const DENOISER_TRAIN_SNR_DB: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Wavenet,
    Lstm,
    Unet,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::Wavenet, ModelFamily::Lstm, ModelFamily::Unet];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Wavenet => "wavenet",
            ModelFamily::Lstm => "lstm",
            ModelFamily::Unet => "unet",
        }
    }

    pub fn default_train_config(self) -> TrainConfig {
        match self {
            ModelFamily::Wavenet => TrainConfig::wavenet(),
            ModelFamily::Lstm => TrainConfig::lstm(),
            ModelFamily::Unet => TrainConfig::unet(),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("model", format!("unknown model `{s}` (expected wavenet, lstm or unet)")))
    }
}

/// Architecture of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelConfig {
    Wavenet(WaveNetConfig),
    Lstm(LstmConfig),
    Unet(UNetConfig),
}

impl ModelConfig {
    pub fn default_for(family: ModelFamily) -> Self {
        match family {
            ModelFamily::Wavenet => ModelConfig::Wavenet(WaveNetConfig::default()),
            ModelFamily::Lstm => ModelConfig::Lstm(LstmConfig::default()),
            ModelFamily::Unet => ModelConfig::Unet(UNetConfig::default()),
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            ModelConfig::Wavenet(_) => ModelFamily::Wavenet,
            ModelConfig::Lstm(_) => ModelFamily::Lstm,
            ModelConfig::Unet(_) => ModelFamily::Unet,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub family: ModelFamily,
    pub config: serde_json::Value,
    pub scaler: FeatureScaler,
    pub params: Params,
    pub optimizer: Option<OptimizerState>,
    pub history: TrainHistory,
    pub train_config: Option<TrainConfig>,
    pub dataset_seed: Option<u64>,
    pub noise_snr_db: Option<f64>,
    pub manifest: Option<String>,
}

impl Checkpoint {
    fn new(config: &ModelConfig, scaler: FeatureScaler, params: Params) -> Result<Self> {
        Ok(Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            family: config.family(),
            config: serde_json::to_value(config)?,
            scaler,
            params,
            optimizer: None,
            history: TrainHistory::default(),
            train_config: None,
            dataset_seed: None,
            noise_snr_db: None,
            manifest: None,
        })
    }

    pub fn from_wavenet(net: &WaveNet) -> Result<Self> {
        Self::new(
            &ModelConfig::Wavenet(net.config.clone()),
            net.scaler.clone(),
            net.params.clone(),
        )
    }

    pub fn from_lstm(net: &Lstm) -> Result<Self> {
        Self::new(
            &ModelConfig::Lstm(net.config.clone()),
            net.scaler.clone(),
            net.params.clone(),
        )
    }

    pub fn from_unet(net: &UNet) -> Result<Self> {
        Self::new(
            &ModelConfig::Unet(net.config.clone()),
            net.scaler.clone(),
            net.params.clone(),
        )
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let bad = |e: serde_json::Error| Error::CheckpointMismatch(format!("{} config: {e}", self.family));
        Ok(match self.family {
            ModelFamily::Wavenet => ModelConfig::Wavenet(serde_json::from_value(self.config.clone()).map_err(bad)?),
            ModelFamily::Lstm => ModelConfig::Lstm(serde_json::from_value(self.config.clone()).map_err(bad)?),
            ModelFamily::Unet => ModelConfig::Unet(serde_json::from_value(self.config.clone()).map_err(bad)?),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("not a checkpoint (format `{}`)", ck.format),
            });
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("unsupported checkpoint version {}", ck.version),
            });
        }
        Ok(ck)
    }

    /// Rebuilds a classifier; denoiser checkpoints are rejected.
    pub fn classifier(&self) -> Result<Classifier> {
        match self.model_config()? {
            ModelConfig::Wavenet(c) => Ok(Classifier::Wavenet(WaveNet::from_parts(
                c,
                self.params.clone(),
                self.scaler.clone(),
            )?)),
            ModelConfig::Lstm(c) => Ok(Classifier::Lstm(Lstm::from_parts(
                c,
                self.params.clone(),
                self.scaler.clone(),
            )?)),
            ModelConfig::Unet(_) => Err(Error::CheckpointMismatch(
                "expected a classifier checkpoint (wavenet or lstm), got unet".into(),
            )),
        }
    }

    pub fn denoiser(&self) -> Result<UNet> {
        match self.model_config()? {
            ModelConfig::Unet(c) => UNet::from_parts(c, self.params.clone(), self.scaler.clone()),
            _ => Err(Error::CheckpointMismatch(format!(
                "expected a unet checkpoint, got {}",
                self.family
            ))),
        }
    }
}

/// A trained islanding classifier of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Wavenet(WaveNet),
    Lstm(Lstm),
}

impl Classifier {
    pub fn family(&self) -> ModelFamily {
        match self {
            Classifier::Wavenet(_) => ModelFamily::Wavenet,
            Classifier::Lstm(_) => ModelFamily::Lstm,
        }
    }

    /// Probabilities for raw windows `[B, T, C]`, in chunks to bound memory.
    pub fn predict_batch(&self, raw: &Tensor) -> Result<Vec<f64>> {
        let (b, t, c) = raw.as_sequence_batch()?;
        let raw = raw.clone().reshape(&[b, t, c])?;
        let mut out = Vec::with_capacity(b);
        let idx: Vec<usize> = (0..b).collect();
        for part in idx.chunks(256) {
            let x = crate::train::gather_rows(&raw, part)?;
            out.extend(match self {
                Classifier::Wavenet(m) => m.predict_batch(&x)?,
                Classifier::Lstm(m) => m.predict_batch(&x)?,
            });
        }
        Ok(out)
    }

    pub fn predict(&self, window: &FeatureWindow) -> Result<f64> {
        match self {
            Classifier::Wavenet(m) => m.predict(window),
            Classifier::Lstm(m) => m.predict(window),
        }
    }
}

fn split_tensors(dataset: &Dataset, indices: &[usize], what: &str) -> Result<(Tensor, Tensor)> {
    if indices.is_empty() {
        return Err(Error::EmptyInput(format!("{what} split")));
    }
    let x = dataset.tensor(indices)?;
    let y = Tensor::new(vec![indices.len()], dataset.labels(indices))?;
    Ok((x, y))
}

fn finish(
    mut ck: Checkpoint,
    optimizer: OptimizerState,
    history: TrainHistory,
    config: &TrainConfig,
    dataset: &Dataset,
) -> Checkpoint {
    ck.optimizer = Some(optimizer);
    ck.history = history;
    ck.train_config = Some(config.clone());
    ck.dataset_seed = Some(dataset.metadata.seed);
    ck
}

/// Trains a classifier on the train split with validation-based early
/// stopping. The feature scaler is fitted on the train split and stored in
/// the checkpoint.
pub fn train_classifier(dataset: &Dataset, config: &ModelConfig, train: &TrainConfig) -> Result<Checkpoint> {
    let (train_x, train_y) = split_tensors(dataset, &dataset.split.train, "training")?;
    let (val_x, val_y) = split_tensors(dataset, &dataset.split.validation, "validation")?;
    let scaler = FeatureScaler::fit(&train_x)?;
    let mut data = StaticData {
        train: (scaler.transform(&train_x)?, train_y),
        validation: (scaler.transform(&val_x)?, val_y),
    };
    match config {
        ModelConfig::Wavenet(c) => {
            let mut net = WaveNet::new(c.clone(), train.seed)?;
            net.scaler = scaler;
            let (history, opt) = fit(&mut net, &mut data, train)?;
            Ok(finish(Checkpoint::from_wavenet(&net)?, opt, history, train, dataset))
        }
        ModelConfig::Lstm(c) => {
            let mut net = Lstm::new(c.clone(), train.seed)?;
            net.scaler = scaler;
            let (history, opt) = fit(&mut net, &mut data, train)?;
            Ok(finish(Checkpoint::from_lstm(&net)?, opt, history, train, dataset))
        }
        ModelConfig::Unet(_) => Err(Error::config("model", "unet is a denoiser; use train_denoiser")),
    }
}

/// Noisy/clean pairs; training noise is redrawn every epoch.
struct DenoiserData {
    train_clean: Tensor,
    train_ids: Vec<usize>,
    validation: (Tensor, Tensor),
    scaler: FeatureScaler,
    snr: Snr,
    seed: u64,
}

impl EpochData for DenoiserData {
    fn train(&mut self, epoch: usize) -> Result<(Tensor, Tensor)> {
        let noise_seed = crate::seed::derive_seed(self.seed, stream::TRAIN_NOISE, epoch as u64);
        let noisy = inject_noise_batch(
            &self.train_clean,
            self.snr,
            noise_seed,
            stream::TRAIN_NOISE,
            &self.train_ids,
        )?;
        Ok((
            self.scaler.transform(&noisy)?,
            self.scaler.transform(&self.train_clean)?,
        ))
    }

    fn validation(&mut self) -> Result<(Tensor, Tensor)> {
        Ok(self.validation.clone())
    }
}

/// Trains the U-Net on `(inject_noise(w, snr), w)` pairs from the train
/// split; the loss is computed on scaled features.
pub fn train_denoiser(dataset: &Dataset, config: &UNetConfig, snr_db: f64, train: &TrainConfig) -> Result<Checkpoint> {
    let snr = Snr::db(snr_db)?;
    let (train_clean, _) = split_tensors(dataset, &dataset.split.train, "training")?;
    let (val_clean, _) = split_tensors(dataset, &dataset.split.validation, "validation")?;
    let scaler = FeatureScaler::fit(&train_clean)?;
    let val_seed = crate::seed::derive_seed(train.seed, stream::TRAIN_NOISE, 0);
    let val_noisy = inject_noise_batch(
        &val_clean,
        snr,
        val_seed,
        stream::TRAIN_NOISE,
        &dataset.split.validation,
    )?;
    let mut data = DenoiserData {
        train_clean,
        train_ids: dataset.split.train.clone(),
        validation: (scaler.transform(&val_noisy)?, scaler.transform(&val_clean)?),
        scaler: scaler.clone(),
        snr,
        seed: train.seed,
    };
    let mut net = UNet::new(config.clone(), train.seed)?;
    net.scaler = scaler;
    let (history, opt) = fit(&mut net, &mut data, train)?;
    let mut ck = finish(Checkpoint::from_unet(&net)?, opt, history, train, dataset);
    ck.noise_snr_db = Some(snr_db);
    Ok(ck)
}

/// Dispatches on the family: classifiers via [`train_classifier`], the
/// U-Net via [`train_denoiser`] at the 15 dB training level.
pub fn train_model(dataset: &Dataset, config: &ModelConfig, train: &TrainConfig) -> Result<Checkpoint> {
    match config {
        ModelConfig::Unet(c) => train_denoiser(dataset, c, DENOISER_TRAIN_SNR_DB, train),
        other => train_classifier(dataset, other, train),
    }
}
