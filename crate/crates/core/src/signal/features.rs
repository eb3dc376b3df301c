use super::phasor::{
    frequency_from_phasors, rocof_from_frequency, sequence_phasors, superimposed_from_phasors, SequenceKind,
};
use super::scenario::{Label, ThreePhaseRecord};
use super::{N_FEATURES, SAMPLES_PER_CYCLE, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Channel order of every feature window.
pub const CHANNEL_NAMES: [&str; N_FEATURES] = ["V1_mag", "V2_mag", "V0_mag", "ROCOF", "dV1_mag", "dV2_mag"];

/// `T x 6` feature matrix (row-major, time first) with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    values: Vec<f64>,
    steps: usize,
    pub label: Label,
}

impl FeatureWindow {
    pub fn new(values: Vec<f64>, steps: usize, label: Label) -> Result<Self> {
        if steps == 0 || values.len() != steps * N_FEATURES {
            return Err(Error::shape(format!(
                "feature window needs {steps} x {N_FEATURES} values, got {}",
                values.len()
            )));
        }
        Ok(Self { values, steps, label })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn get(&self, step: usize, channel: usize) -> f64 {
        self.values[step * N_FEATURES + channel]
    }

    pub fn channel(&self, channel: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(channel).step_by(N_FEATURES).copied()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.steps, N_FEATURES], self.values.clone()).expect("valid window")
    }
}

/// Per-sample feature rows `[|V1|, |V2|, |V0|, ROCOF, |dV1|, |dV2|]`.
pub(crate) fn feature_series(record: &ThreePhaseRecord) -> Result<Vec<[f64; N_FEATURES]>> {
    let seq = sequence_phasors(record)?;
    let freq = frequency_from_phasors(&seq, record.sample_rate, record.nominal_frequency);
    let rocof = rocof_from_frequency(&freq, record.sample_rate);
    let d1 = superimposed_from_phasors(&seq, SequenceKind::Positive);
    let d2 = superimposed_from_phasors(&seq, SequenceKind::Negative);
    Ok((0..record.len())
        .map(|t| {
            [
                seq[t].positive.norm(),
                seq[t].negative.norm(),
                seq[t].zero.norm(),
                rocof[t],
                d1[t],
                d2[t],
            ]
        })
        .collect())
}

/// First sample of the `k`-th window produced by [`extract_features`].
pub fn window_start(k: usize) -> usize {
    SAMPLES_PER_CYCLE + k * WINDOW_LEN
}

/// Slides a 10-sample window with a 10-sample stride over the record,
/// starting after a one-cycle warm-up.
pub fn extract_features(record: &ThreePhaseRecord) -> Result<Vec<FeatureWindow>> {
    if record.len() < SAMPLES_PER_CYCLE + WINDOW_LEN {
        return Err(Error::shape(format!(
            "record of {} samples is shorter than warm-up plus one window ({})",
            record.len(),
            SAMPLES_PER_CYCLE + WINDOW_LEN
        )));
    }
    let series = feature_series(record)?;
    let mut windows = Vec::new();
    let mut k = 0;
    while window_start(k) + WINDOW_LEN <= series.len() {
        let start = window_start(k);
        let values = series[start..start + WINDOW_LEN]
            .iter()
            .flat_map(|row| row.iter().copied())
            .collect();
        windows.push(FeatureWindow::new(values, WINDOW_LEN, record.label)?);
        k += 1;
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::scenario::{simulate_scenario, ScenarioConfig, ScenarioKind};
    use crate::signal::SignalModel;

    #[test]
    fn hundred_ms_record_yields_eight_windows() {
        let model = SignalModel {
            duration: 0.1,
            ..SignalModel::default()
        };
        let mut cfg = ScenarioConfig::new(ScenarioKind::LoadSwitch, 3);
        cfg.event_time = 0.05;
        let rec = model.simulate(&cfg).unwrap();
        let windows = extract_features(&rec).unwrap();
        // (100 - 20) / 10 full windows fit after the warm-up cycle
        assert_eq!(windows.len(), 8);
        assert!(windows.iter().all(|w| w.steps() == 10 && w.values().len() == 60));
    }

    #[test]
    fn short_record_is_rejected() {
        let model = SignalModel {
            duration: 0.025,
            ..SignalModel::default()
        };
        let mut cfg = ScenarioConfig::new(ScenarioKind::LoadSwitch, 3);
        cfg.event_time = 0.01;
        let rec = model.simulate(&cfg).unwrap();
        assert!(extract_features(&rec).is_err());
    }

    #[test]
    fn pre_event_windows_are_quiet() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::GridFault, 5);
        cfg.event_time = 0.15;
        let rec = simulate_scenario(&cfg).unwrap();
        let windows = extract_features(&rec).unwrap();
        // windows fully before the event (start + 10 <= 150) and after the
        // two-cycle settling of the delta estimators
        for w in windows.iter().take(13).skip(2) {
            for t in 0..w.steps() {
                assert!(w.get(t, 1) < 0.005, "V2 {}", w.get(t, 1));
                assert!(w.get(t, 2) < 0.005);
                assert!(w.get(t, 3).abs() < 1e-6);
                assert!(w.get(t, 4) < 1e-9 && w.get(t, 5) < 1e-9);
            }
        }
    }

    #[test]
    fn islanding_raises_rocof_after_the_event() {
        let rec = simulate_scenario(&ScenarioConfig::new(ScenarioKind::Islanding, 0)).unwrap();
        let series = feature_series(&rec).unwrap();
        let mean_abs = |r: std::ops::Range<usize>| {
            let n = r.len() as f64;
            r.map(|t| series[t][3].abs()).sum::<f64>() / n
        };
        assert_eq!(rec.label, Label::Islanding);
        assert!(mean_abs(rec.event_index..rec.len()) > mean_abs(40..rec.event_index));
    }

    #[test]
    fn load_switch_returns_to_pre_event_voltage() {
        let rec = simulate_scenario(&ScenarioConfig::new(ScenarioKind::LoadSwitch, 0)).unwrap();
        assert_eq!(rec.label, Label::NonIslanding);
        let series = feature_series(&rec).unwrap();
        let pre = series[rec.event_index - 1][0];
        for row in &series[rec.len() - 10..] {
            assert!((row[0] - pre).abs() / pre < 0.01);
        }
    }
}
