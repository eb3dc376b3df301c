//! Run configuration: built-in defaults, overridden by a TOML file,
//! overridden by command-line flags.
//!
//! ```toml
//! seed = 0
//!
//! [dataset]            # scenario grid; [dataset.signal] for the signal model
//! islanding_windows = 2211
//!
//! [wavenet]            # architecture
//! dilations = [1, 2, 4, 8, 16]
//! [lstm]
//! [unet]
//!
//! [train.wavenet]      # optimizer, learning_rate, batch_size, max_epochs, patience, seed, loss
//! max_epochs = 100
//! [train.lstm]
//! [train.unet]
//!
//! [sweep]
//! snrs = [20, 15, 10, 5]
//! runs = 5
//! ```
//!
//! Every section is optional and only the keys present override the
//! defaults. Unknown keys and ill-typed values are rejected with the full
//! key path. `[train.*].seed` defaults to the top-level `seed`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::eval::{DEFAULT_RUNS, DEFAULT_SNRS};
use crate::lstm::LstmConfig;
use crate::model::{ModelConfig, ModelFamily};
use crate::signal::GridSpec;
use crate::train::TrainConfig;
use crate::unet::UNetConfig;
use crate::wavenet::WaveNetConfig;

const SECTIONS: [&str; 7] = ["seed", "dataset", "wavenet", "lstm", "unet", "train", "sweep"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSections {
    pub wavenet: TrainConfig,
    pub lstm: TrainConfig,
    pub unet: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub snrs: Vec<f64>,
    pub runs: usize,
}

/// The effective configuration of a run, echoed into its manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: GridSpec,
    pub wavenet: WaveNetConfig,
    pub lstm: LstmConfig,
    pub unet: UNetConfig,
    pub train: TrainSections,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: GridSpec::default(),
            wavenet: WaveNetConfig::default(),
            lstm: LstmConfig::default(),
            unet: UNetConfig::default(),
            train: TrainSections {
                wavenet: TrainConfig::wavenet(),
                lstm: TrainConfig::lstm(),
                unet: TrainConfig::unet(),
            },
            sweep: SweepConfig {
                snrs: DEFAULT_SNRS.to_vec(),
                runs: DEFAULT_RUNS,
            },
        }
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

fn prefixed(section: &str, err: Error) -> Error {
    match err {
        Error::InvalidConfig { key, message } => Error::InvalidConfig {
            key: format!("{section}.{key}"),
            message,
        },
        other => other,
    }
}

/// `base` with the keys of `patch` replaced; errors carry `section.path`.
fn overlay<T: Serialize + DeserializeOwned>(base: &T, patch: Option<Value>, section: &str) -> Result<T> {
    let Some(patch) = patch else {
        return Ok(serde_json::from_value(serde_json::to_value(base)?)?);
    };
    let mut value = serde_json::to_value(base)?;
    merge(&mut value, patch);
    serde_path_to_error::deserialize::<_, T>(value).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." {
            section.to_string()
        } else {
            format!("{section}.{path}")
        };
        Error::config(key, e.into_inner().to_string())
    })
}

fn take_table(root: &mut serde_json::Map<String, Value>, key: &str) -> Result<Option<Value>> {
    match root.remove(key) {
        None => Ok(None),
        Some(v @ Value::Object(_)) => Ok(Some(v)),
        Some(_) => Err(Error::config(key, "expected a table")),
    }
}

impl RunConfig {
    /// Parses TOML text on top of the defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))?;
        let mut root = match serde_json::to_value(table)? {
            Value::Object(m) => m,
            _ => unreachable!("a TOML document is a table"),
        };
        if let Some(key) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(Error::config(key.clone(), "unknown key"));
        }
        let defaults = RunConfig::default();
        let seed = match root.remove("seed") {
            None => defaults.seed,
            Some(v) => v
                .as_u64()
                .ok_or_else(|| Error::config("seed", "expected a non-negative integer"))?,
        };
        let dataset = overlay(&defaults.dataset, take_table(&mut root, "dataset")?, "dataset")?;
        let wavenet = overlay(&defaults.wavenet, take_table(&mut root, "wavenet")?, "wavenet")?;
        let lstm = overlay(&defaults.lstm, take_table(&mut root, "lstm")?, "lstm")?;
        let unet = overlay(&defaults.unet, take_table(&mut root, "unet")?, "unet")?;
        let sweep = overlay(&defaults.sweep, take_table(&mut root, "sweep")?, "sweep")?;

        let mut train_patches = match take_table(&mut root, "train")? {
            Some(Value::Object(m)) => m,
            _ => serde_json::Map::new(),
        };
        if let Some(key) = train_patches
            .keys()
            .find(|k| ModelFamily::ALL.iter().all(|f| f.name() != k.as_str()))
        {
            return Err(Error::config(format!("train.{key}"), "unknown key"));
        }
        let mut train_section = |family: ModelFamily, base: &TrainConfig| -> Result<TrainConfig> {
            let patch = take_table(&mut train_patches, family.name()).map_err(|e| prefixed("train", e))?;
            let explicit_seed = patch.as_ref().is_some_and(|p| p.get("seed").is_some());
            let mut cfg = overlay(base, patch, &format!("train.{family}"))?;
            if !explicit_seed {
                cfg.seed = seed;
            }
            Ok(cfg)
        };
        let train = TrainSections {
            wavenet: train_section(ModelFamily::Wavenet, &defaults.train.wavenet)?,
            lstm: train_section(ModelFamily::Lstm, &defaults.train.lstm)?,
            unet: train_section(ModelFamily::Unet, &defaults.train.unet)?,
        };
        let config = RunConfig {
            seed,
            dataset,
            wavenet,
            lstm,
            unet,
            train,
            sweep,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Defaults, or the file's contents when a path is given.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    /// A command-line seed replaces every seed in the configuration.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.wavenet.seed = seed;
        self.train.lstm.seed = seed;
        self.train.unet.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate().map_err(|e| prefixed("dataset", e))?;
        self.wavenet.validate().map_err(|e| prefixed("wavenet", e))?;
        self.lstm.validate().map_err(|e| prefixed("lstm", e))?;
        self.unet.validate().map_err(|e| prefixed("unet", e))?;
        for family in ModelFamily::ALL {
            self.train_config(family)
                .validate()
                .map_err(|e| prefixed(&format!("train.{family}"), e))?;
        }
        if self.sweep.runs == 0 {
            return Err(Error::config("sweep.runs", "must be at least 1"));
        }
        if self.sweep.snrs.is_empty() || self.sweep.snrs.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(
                "sweep.snrs",
                "expected a non-empty list of finite dB values",
            ));
        }
        Ok(())
    }

    pub fn model_config(&self, family: ModelFamily) -> ModelConfig {
        match family {
            ModelFamily::Wavenet => ModelConfig::Wavenet(self.wavenet.clone()),
            ModelFamily::Lstm => ModelConfig::Lstm(self.lstm.clone()),
            ModelFamily::Unet => ModelConfig::Unet(self.unet.clone()),
        }
    }

    pub fn train_config(&self, family: ModelFamily) -> &TrainConfig {
        match family {
            ModelFamily::Wavenet => &self.train.wavenet,
            ModelFamily::Lstm => &self.train.lstm,
            ModelFamily::Unet => &self.train.unet,
        }
    }
}
