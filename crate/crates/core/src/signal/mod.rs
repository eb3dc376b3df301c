//! Synthetic three-phase scenarios, the six detection features and the
//! labelled window dataset built from them.

mod dataset;
mod features;
mod fortescue;
pub mod io;
mod noise;
mod phasor;
mod scenario;

pub use dataset::{build_dataset, Dataset, DatasetMetadata, GridSpec, NonIslandingCount, Split};
pub use features::{extract_features, window_start, FeatureWindow, CHANNEL_NAMES};
pub use fortescue::{fortescue, inverse_fortescue, SequenceComponents};
pub use noise::{inject_noise, inject_noise_batch, inject_noise_values, Snr};
pub use phasor::{estimate_frequency, estimate_rocof, sequence_phasors, superimposed, SequenceKind};
pub use scenario::{simulate_scenario, Label, ScenarioConfig, ScenarioKind, SignalModel, ThreePhaseRecord};

/// Sampling rate of every record, Hz.
pub const SAMPLE_RATE: f64 = 1000.0;
/// System frequency, Hz.
pub const NOMINAL_FREQUENCY: f64 = 50.0;
/// Samples in one nominal cycle at [`SAMPLE_RATE`].
pub const SAMPLES_PER_CYCLE: usize = 20;
/// Time steps per feature window (10 ms).
pub const WINDOW_LEN: usize = 10;
/// Feature channels per time step.
pub const N_FEATURES: usize = 6;
