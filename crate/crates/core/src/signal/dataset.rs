use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, window_start, FeatureWindow};
use super::scenario::{Label, ScenarioConfig, ScenarioKind, SignalModel};
use super::{N_FEATURES, SAMPLE_RATE, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for, stream};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonIslandingCount {
    pub kind: ScenarioKind,
    pub scenarios: usize,
}

/// Scenario grid and dataset composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub active_power_levels: usize,
    /// MW
    pub active_power_range: [f64; 2],
    pub reactive_power_levels: usize,
    /// MVAR
    pub reactive_power_range: [f64; 2],
    pub quality_factor_range: [f64; 2],
    /// Islanding windows drawn across the power grid.
    pub islanding_windows: usize,
    pub non_islanding: Vec<NonIslandingCount>,
    pub non_islanding_windows: usize,
    /// Seconds.
    pub event_time: f64,
    pub test_fraction: f64,
    /// Share of the non-test part held out for validation.
    pub validation_fraction: f64,
    pub signal: SignalModel,
}

impl Default for GridSpec {
    fn default() -> Self {
        let count = |kind, scenarios| NonIslandingCount { kind, scenarios };
        Self {
            active_power_levels: 50,
            active_power_range: [1.2, 2.8],
            reactive_power_levels: 30,
            reactive_power_range: [0.0, 1.2],
            quality_factor_range: [0.5, 2.5],
            islanding_windows: 2211,
            non_islanding: vec![
                count(ScenarioKind::LoadSwitch, 120),
                count(ScenarioKind::CapacitorSwitch, 110),
                count(ScenarioKind::GridFault, 100),
                count(ScenarioKind::QualityFactorChange, 105),
            ],
            non_islanding_windows: 869,
            event_time: 0.06,
            test_fraction: 0.2,
            validation_fraction: 0.2,
            signal: SignalModel::default(),
        }
    }
}

impl GridSpec {
    fn islanding_scenarios(&self) -> usize {
        self.active_power_levels * self.reactive_power_levels
    }

    fn non_islanding_scenarios(&self) -> usize {
        self.non_islanding.iter().map(|c| c.scenarios).sum()
    }

    pub fn describe(&self) -> String {
        let kinds: Vec<String> = self
            .non_islanding
            .iter()
            .map(|c| format!("{}={}", c.kind, c.scenarios))
            .collect();
        format!(
            "islanding={}x{} P=[{},{}]MW Q=[{},{}]MVAR windows={}; {} windows={}",
            self.active_power_levels,
            self.reactive_power_levels,
            self.active_power_range[0],
            self.active_power_range[1],
            self.reactive_power_range[0],
            self.reactive_power_range[1],
            self.islanding_windows,
            kinds.join(" "),
            self.non_islanding_windows
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.islanding_scenarios() == 0 || self.islanding_windows == 0 {
            return Err(Error::config("islanding_windows", "grid yields no islanding windows"));
        }
        if self.non_islanding_scenarios() == 0 || self.non_islanding_windows == 0 {
            return Err(Error::config("non_islanding", "grid yields no non-islanding windows"));
        }
        if self.non_islanding.iter().any(|c| c.kind == ScenarioKind::Islanding) {
            return Err(Error::config("non_islanding", "islanding is not a non-islanding kind"));
        }
        for (key, range) in [
            ("active_power_range", self.active_power_range),
            ("reactive_power_range", self.reactive_power_range),
            ("quality_factor_range", self.quality_factor_range),
        ] {
            if !(range[0].is_finite() && range[1].is_finite() && range[0] >= 0.0 && range[0] <= range[1]) {
                return Err(Error::config(key, "expected 0 <= low <= high"));
            }
        }
        for (key, f) in [
            ("test_fraction", self.test_fraction),
            ("validation_fraction", self.validation_fraction),
        ] {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::config(key, "must lie in [0, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded uniform split: `test_fraction` of all indices go to test, then
    /// `validation_fraction` of the remainder to validation.
    pub fn random(n: usize, test_fraction: f64, validation_fraction: f64, rng: &mut impl Rng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let n_test = (n as f64 * test_fraction).round() as usize;
        let n_val = ((n - n_test) as f64 * validation_fraction).round() as usize;
        let mut test = order[..n_test].to_vec();
        let mut validation = order[n_test..n_test + n_val].to_vec();
        let mut train = order[n_test + n_val..].to_vec();
        test.sort_unstable();
        validation.sort_unstable();
        train.sort_unstable();
        Self {
            train,
            validation,
            test,
        }
    }

    /// Train and validation together (the 80 % side of the 80/20 split).
    pub fn train_and_validation(&self) -> usize {
        self.train.len() + self.validation.len()
    }

    fn check(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.validation).chain(&self.test) {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::config("split", format!("index {i} is out of range or repeated")));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::config("split", "splits do not cover every window"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMetadata {
    pub seed: u64,
    pub grid: String,
    pub islanding: usize,
    pub non_islanding: usize,
    pub window_len: usize,
    pub sample_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub windows: Vec<FeatureWindow>,
    pub split: Split,
    pub metadata: DatasetMetadata,
}

impl Dataset {
    /// Assembles a dataset, checking split coverage and recorded class counts.
    pub fn from_parts(windows: Vec<FeatureWindow>, split: Split, metadata: DatasetMetadata) -> Result<Self> {
        split.check(windows.len())?;
        let islanding = windows.iter().filter(|w| w.label == Label::Islanding).count();
        if islanding != metadata.islanding || windows.len() - islanding != metadata.non_islanding {
            return Err(Error::config(
                "counts",
                format!(
                    "metadata records {}/{} islanding/non-islanding, windows hold {}/{}",
                    metadata.islanding,
                    metadata.non_islanding,
                    islanding,
                    windows.len() - islanding
                ),
            ));
        }
        if let Some(w) = windows.iter().find(|w| w.steps() != metadata.window_len) {
            return Err(Error::shape(format!(
                "window of {} steps in a dataset of {}-step windows",
                w.steps(),
                metadata.window_len
            )));
        }
        Ok(Self {
            windows,
            split,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.metadata.window_len
    }

    pub fn labels(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.windows[i].label.as_f64()).collect()
    }

    /// `(islanding, non_islanding)` among `indices`.
    pub fn class_counts(&self, indices: &[usize]) -> (usize, usize) {
        let pos = indices
            .iter()
            .filter(|&&i| self.windows[i].label == Label::Islanding)
            .count();
        (pos, indices.len() - pos)
    }

    /// Stacks the selected windows into `[B, T, 6]`.
    pub fn tensor(&self, indices: &[usize]) -> Result<Tensor> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("no windows selected".into()));
        }
        let t = self.window_len();
        let mut values = Vec::with_capacity(indices.len() * t * N_FEATURES);
        for &i in indices {
            values.extend_from_slice(self.windows[i].values());
        }
        Tensor::new(vec![indices.len(), t, N_FEATURES], values)
    }
}

fn level(range: [f64; 2], levels: usize, i: usize) -> f64 {
    if levels <= 1 {
        range[0]
    } else {
        range[0] + (range[1] - range[0]) * i as f64 / (levels - 1) as f64
    }
}

/// Distinct post-event window slots for one scenario.
fn pick_slots(available: usize, wanted: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut slots: Vec<usize> = (0..available).collect();
    let (chosen, _) = slots.partial_shuffle(rng, wanted);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    chosen
}

/// Generates every scenario of `spec`, extracts post-event windows and
/// splits them. Scenario `i` draws from a seed derived from `(seed, i)` only.
pub fn build_dataset(spec: &GridSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut configs = Vec::new();
    let q_levels = spec.reactive_power_levels;
    for i in 0..spec.islanding_scenarios() {
        configs.push((
            ScenarioKind::Islanding,
            level(spec.active_power_range, spec.active_power_levels, i / q_levels),
            level(spec.reactive_power_range, q_levels, i % q_levels),
        ));
    }
    for count in &spec.non_islanding {
        for _ in 0..count.scenarios {
            configs.push((count.kind, f64::NAN, f64::NAN));
        }
    }

    let n_island = spec.islanding_scenarios();
    let n_non = spec.non_islanding_scenarios();
    let mut windows = Vec::with_capacity(spec.islanding_windows + spec.non_islanding_windows);
    for (idx, &(kind, p, q)) in configs.iter().enumerate() {
        let mut rng = rng_for(seed, stream::SCENARIO, idx as u64);
        let (load_p, load_q) = if p.is_nan() {
            (
                rng.random_range(spec.active_power_range[0]..=spec.active_power_range[1]),
                rng.random_range(spec.reactive_power_range[0]..=spec.reactive_power_range[1]),
            )
        } else {
            (p, q)
        };
        let config = ScenarioConfig {
            kind,
            load_active_power: load_p,
            load_reactive_power: load_q,
            event_time: spec.event_time,
            quality_factor: rng.random_range(spec.quality_factor_range[0]..=spec.quality_factor_range[1]),
            seed: derive_seed(seed, stream::SCENARIO, idx as u64),
        };
        let (total, n_scen, local) = if kind == ScenarioKind::Islanding {
            (spec.islanding_windows, n_island, idx)
        } else {
            (spec.non_islanding_windows, n_non, idx - n_island)
        };
        let wanted = total / n_scen + usize::from(local < total % n_scen);
        if wanted == 0 {
            continue;
        }
        let record = spec.signal.simulate(&config)?;
        let all = extract_features(&record)?;
        let first = (0..all.len())
            .find(|&k| window_start(k) >= record.event_index)
            .unwrap_or(all.len());
        let available = all.len() - first;
        if wanted > available {
            return Err(Error::config(
                "islanding_windows",
                format!("scenario {idx} needs {wanted} post-event windows, record has {available}"),
            ));
        }
        let mut pick_rng = rng_for(seed, stream::WINDOW_PICK, idx as u64);
        for slot in pick_slots(available, wanted, &mut pick_rng) {
            windows.push(all[first + slot].clone());
        }
    }

    let mut split_rng = rng_for(seed, stream::SPLIT, 0);
    let split = Split::random(
        windows.len(),
        spec.test_fraction,
        spec.validation_fraction,
        &mut split_rng,
    );
    let islanding = windows.iter().filter(|w| w.label == Label::Islanding).count();
    let metadata = DatasetMetadata {
        seed,
        grid: spec.describe(),
        islanding,
        non_islanding: windows.len() - islanding,
        window_len: WINDOW_LEN,
        sample_rate: SAMPLE_RATE,
    };
    Dataset::from_parts(windows, split, metadata)
}
