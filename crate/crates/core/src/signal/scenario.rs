//! Signal-level scenario generator.
//!
//! Each record is synthesised from slowly varying sequence components
//! (positive, negative, zero) rotating at an instantaneous system frequency.
//! Islanding events produce a sustained frequency ramp, a step in `|V1|` and
//! a sustained rise in `|V2|`. Grid-connected disturbances produce decaying
//! transients of the same quantities that return to their pre-event levels.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NOMINAL_FREQUENCY, SAMPLE_RATE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Islanding,
    LoadSwitch,
    CapacitorSwitch,
    GridFault,
    QualityFactorChange,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Islanding,
        ScenarioKind::LoadSwitch,
        ScenarioKind::CapacitorSwitch,
        ScenarioKind::GridFault,
        ScenarioKind::QualityFactorChange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Islanding => "islanding",
            ScenarioKind::LoadSwitch => "load_switch",
            ScenarioKind::CapacitorSwitch => "capacitor_switch",
            ScenarioKind::GridFault => "grid_fault",
            ScenarioKind::QualityFactorChange => "quality_factor_change",
        }
    }

    pub fn label(self) -> Label {
        match self {
            ScenarioKind::Islanding => Label::Islanding,
            _ => Label::NonIslanding,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("kind", format!("unknown scenario kind `{s}`")))
    }
}

/// Binary target; islanding is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    NonIslanding,
    Islanding,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::NonIslanding => 0,
            Label::Islanding => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::NonIslanding),
            1 => Ok(Label::Islanding),
            other => Err(Error::config("label", format!("expected 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// MW
    pub load_active_power: f64,
    /// MVAR
    pub load_reactive_power: f64,
    /// Seconds from the start of the record.
    pub event_time: f64,
    pub quality_factor: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        Self {
            kind,
            load_active_power: 2.0,
            load_reactive_power: 0.6,
            event_time: 0.06,
            quality_factor: 1.5,
            seed,
        }
    }
}

/// Parameters of the generative signal model shared by all scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalModel {
    /// Record length, seconds.
    pub duration: f64,
    /// Local active generation left in the island, MW.
    pub local_active_generation: f64,
    /// Local reactive generation left in the island, MVAR.
    pub local_reactive_generation: f64,
    /// Smallest sustained islanding ROCOF magnitude, Hz/s.
    pub rocof_floor: f64,
    /// Additional islanding ROCOF per unit of active-power mismatch, Hz/s.
    pub rocof_gain: f64,
    /// Islanding `|V1|` step per unit of reactive-power mismatch, pu.
    pub voltage_gain: f64,
    /// Upper bound on transient decay time constants, seconds.
    pub max_settling_tau: f64,
}

impl Default for SignalModel {
    fn default() -> Self {
        Self {
            duration: 0.3,
            local_active_generation: 2.0,
            local_reactive_generation: 0.6,
            rocof_floor: 1.5,
            rocof_gain: 5.0,
            voltage_gain: 0.08,
            max_settling_tau: 0.02,
        }
    }
}

/// Sampled phase voltages of one scenario (per unit).
#[derive(Debug, Clone, PartialEq)]
pub struct ThreePhaseRecord {
    pub sample_rate: f64,
    pub nominal_frequency: f64,
    pub va: Vec<f64>,
    pub vb: Vec<f64>,
    pub vc: Vec<f64>,
    pub label: Label,
    pub event_index: usize,
}

impl ThreePhaseRecord {
    pub fn len(&self) -> usize {
        self.va.len()
    }

    pub fn is_empty(&self) -> bool {
        self.va.is_empty()
    }

    /// Builds a record from per-sample sequence phasors (rotating frame).
    pub(crate) fn from_sequences(
        frame_angle: &[f64],
        v0: &[Complex64],
        v1: &[Complex64],
        v2: &[Complex64],
        label: Label,
        event_index: usize,
    ) -> Self {
        let al = Complex64::from_polar(1.0, TAU / 3.0);
        let al2 = al * al;
        let n = frame_angle.len();
        let (mut va, mut vb, mut vc) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let rot = Complex64::from_polar(1.0, frame_angle[i]);
            va.push(((v0[i] + v1[i] + v2[i]) * rot).re);
            vb.push(((v0[i] + al2 * v1[i] + al * v2[i]) * rot).re);
            vc.push(((v0[i] + al * v1[i] + al2 * v2[i]) * rot).re);
        }
        Self {
            sample_rate: SAMPLE_RATE,
            nominal_frequency: NOMINAL_FREQUENCY,
            va,
            vb,
            vc,
            label,
            event_index,
        }
    }
}

/// Post-event evolution of one record.
#[derive(Debug, Clone, Default)]
struct Trajectory {
    rocof: f64,
    freq_amp: f64,
    freq_osc_hz: f64,
    freq_tau: f64,
    phase_jump: f64,
    step_tau: f64,
    v1_step: f64,
    v2_step: f64,
    v0_step: f64,
    tau: f64,
    v1_transient: f64,
    v1_ring_hz: f64,
    v2_transient: f64,
    v0_transient: f64,
}

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let mag = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

impl Trajectory {
    fn draw(config: &ScenarioConfig, model: &SignalModel, rng: &mut ChaCha8Rng) -> Self {
        let tau_max = model.max_settling_tau;
        let qf = config.quality_factor;
        let mut tr = Trajectory {
            step_tau: rng.random_range(0.004..0.015),
            ..Default::default()
        };
        match config.kind {
            ScenarioKind::Islanding => {
                let p_mismatch =
                    (config.load_active_power - model.local_active_generation) / model.local_active_generation;
                let q_mismatch =
                    (config.load_reactive_power - model.local_reactive_generation) / model.local_active_generation;
                let direction = if p_mismatch == 0.0 {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    -p_mismatch.signum()
                };
                tr.rocof =
                    direction * (model.rocof_floor + model.rocof_gain * p_mismatch.abs()) * rng.random_range(0.9..1.1);
                tr.freq_amp = rng.random_range(0.0..0.06);
                tr.freq_osc_hz = rng.random_range(8.0..20.0);
                tr.freq_tau = (0.008 * qf).clamp(0.005, tau_max);
                tr.phase_jump = rng.random_range(-0.06..0.06);
                let q_dir = if q_mismatch == 0.0 { 1.0 } else { -q_mismatch.signum() };
                tr.v1_step = q_dir * (0.01 + model.voltage_gain * q_mismatch.abs()) + rng.random_range(-0.003..0.003);
                tr.step_tau = rng.random_range(0.002..0.008);
                tr.v2_step = rng.random_range(0.015..0.04);
                tr.v0_step = rng.random_range(0.0..0.003);
                tr.tau = rng.random_range(0.005..0.02);
                tr.v1_transient = rng.random_range(-0.02..0.02);
                tr.v1_ring_hz = rng.random_range(20.0..60.0);
            }
            ScenarioKind::LoadSwitch => {
                let scale = (config.load_active_power / model.local_active_generation).clamp(0.3, 1.5);
                tr.freq_amp = rng.random_range(0.03..0.15) * scale;
                tr.freq_osc_hz = rng.random_range(5.0..15.0);
                tr.freq_tau = rng.random_range(0.008..tau_max);
                tr.phase_jump = signed(rng, 0.01, 0.06);
                tr.tau = rng.random_range(0.006..tau_max);
                tr.v1_transient = -rng.random_range(0.02..0.08) * scale;
                tr.v2_transient = rng.random_range(0.0..0.003);
            }
            ScenarioKind::CapacitorSwitch => {
                tr.freq_amp = rng.random_range(0.02..0.1);
                tr.freq_osc_hz = rng.random_range(10.0..25.0);
                tr.freq_tau = rng.random_range(0.006..tau_max);
                tr.phase_jump = signed(rng, 0.02, 0.1);
                tr.tau = rng.random_range(0.005..tau_max);
                tr.v1_transient = rng.random_range(0.03..0.15);
                tr.v1_ring_hz = rng.random_range(30.0..90.0);
                tr.v2_transient = rng.random_range(0.0..0.004);
            }
            ScenarioKind::GridFault => {
                tr.freq_amp = rng.random_range(0.05..0.2);
                tr.freq_osc_hz = rng.random_range(5.0..15.0);
                tr.freq_tau = rng.random_range(0.008..tau_max);
                tr.phase_jump = signed(rng, 0.1, 0.3);
                tr.tau = rng.random_range(0.008..tau_max);
                tr.v1_transient = -rng.random_range(0.2..0.5);
                tr.v2_transient = rng.random_range(0.04..0.15);
                tr.v0_transient = rng.random_range(0.02..0.1);
            }
            ScenarioKind::QualityFactorChange => {
                let scale = (qf / 2.5).clamp(0.2, 1.0);
                tr.freq_amp = rng.random_range(0.01..0.06) * scale;
                tr.freq_osc_hz = rng.random_range(5.0..20.0);
                tr.freq_tau = rng.random_range(0.006..tau_max);
                tr.phase_jump = signed(rng, 0.0, 0.04);
                tr.tau = rng.random_range(0.006..tau_max);
                tr.v1_transient = signed(rng, 0.005, 0.03) * scale;
                tr.v1_ring_hz = rng.random_range(10.0..40.0);
                tr.v2_transient = rng.random_range(0.0..0.002);
            }
        }
        tr
    }

    fn frequency(&self, dt: f64) -> f64 {
        NOMINAL_FREQUENCY
            + self.rocof * dt
            + self.freq_amp * (-dt / self.freq_tau).exp() * (TAU * self.freq_osc_hz * dt).sin()
    }

    fn magnitudes(&self, dt: f64, pre: [f64; 3]) -> [f64; 3] {
        let settle = 1.0 - (-dt / self.step_tau).exp();
        let decay = (-dt / self.tau).exp();
        let ring = (TAU * self.v1_ring_hz * dt).cos();
        [
            pre[0] + self.v1_step * settle + self.v1_transient * decay * ring,
            (pre[1] + self.v2_step * settle + self.v2_transient * decay).max(0.0),
            (pre[2] + self.v0_step * settle + self.v0_transient * decay).max(0.0),
        ]
    }
}

fn validate(config: &ScenarioConfig, model: &SignalModel) -> Result<(usize, usize)> {
    let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
    if !finite_nonneg(config.load_active_power) {
        return Err(Error::config("load_active_power", "must be finite and >= 0"));
    }
    if !finite_nonneg(config.load_reactive_power) {
        return Err(Error::config("load_reactive_power", "must be finite and >= 0"));
    }
    if !(config.quality_factor.is_finite() && config.quality_factor > 0.0) {
        return Err(Error::config("quality_factor", "must be finite and > 0"));
    }
    if !(model.duration.is_finite() && model.duration > 0.0) {
        return Err(Error::config("duration", "must be finite and > 0"));
    }
    if !(model.max_settling_tau.is_finite() && model.max_settling_tau >= 0.01) {
        return Err(Error::config("max_settling_tau", "must be finite and >= 0.01 s"));
    }
    for (key, v) in [
        ("local_active_generation", model.local_active_generation),
        ("local_reactive_generation", model.local_reactive_generation),
        ("rocof_floor", model.rocof_floor),
        ("rocof_gain", model.rocof_gain),
        ("voltage_gain", model.voltage_gain),
    ] {
        if !v.is_finite() || v < 0.0 || (key == "local_active_generation" && v == 0.0) {
            return Err(Error::config(key, "must be finite and non-negative"));
        }
    }
    let len = (model.duration * SAMPLE_RATE).round() as usize;
    let event = (config.event_time * SAMPLE_RATE).round();
    if !(config.event_time.is_finite() && event >= 1.0 && (event as usize) < len) {
        return Err(Error::config(
            "event_time",
            format!("must lie strictly inside the {} s record", model.duration),
        ));
    }
    Ok((len, event as usize))
}

impl SignalModel {
    pub fn simulate(&self, config: &ScenarioConfig) -> Result<ThreePhaseRecord> {
        let (len, event_index) = validate(config, self)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let pre = [
            1.0 + rng.random_range(-0.03..0.03),
            rng.random_range(0.001..0.004),
            rng.random_range(0.0005..0.003),
        ];
        let v2_angle = rng.random_range(0.0..TAU);
        let v0_angle = rng.random_range(0.0..TAU);
        let mut theta = rng.random_range(-PI..PI);
        let tr = Trajectory::draw(config, self, &mut rng);

        let mut frame = Vec::with_capacity(len);
        let (mut v0, mut v1, mut v2) = (
            Vec::with_capacity(len),
            Vec::with_capacity(len),
            Vec::with_capacity(len),
        );
        for i in 0..len {
            let (freq, mags, jump) = if i >= event_index {
                let dt = (i - event_index) as f64 / SAMPLE_RATE;
                (tr.frequency(dt), tr.magnitudes(dt, pre), tr.phase_jump)
            } else {
                (NOMINAL_FREQUENCY, pre, 0.0)
            };
            frame.push(theta + jump);
            v1.push(Complex64::new(mags[0], 0.0));
            v2.push(Complex64::from_polar(mags[1], v2_angle));
            v0.push(Complex64::from_polar(mags[2], v0_angle));
            theta += TAU * freq / SAMPLE_RATE;
        }
        Ok(ThreePhaseRecord::from_sequences(
            &frame,
            &v0,
            &v1,
            &v2,
            config.kind.label(),
            event_index,
        ))
    }
}

/// Simulates one scenario with the default [`SignalModel`].
pub fn simulate_scenario(config: &ScenarioConfig) -> Result<ThreePhaseRecord> {
    SignalModel::default().simulate(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse_and_label() {
        assert_eq!("grid_fault".parse::<ScenarioKind>().unwrap(), ScenarioKind::GridFault);
        assert!("brownout".parse::<ScenarioKind>().is_err());
        assert_eq!(ScenarioKind::Islanding.label(), Label::Islanding);
        assert_eq!(ScenarioKind::LoadSwitch.label(), Label::NonIslanding);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        for kind in ScenarioKind::ALL {
            let cfg = ScenarioConfig::new(kind, 42);
            assert_eq!(simulate_scenario(&cfg).unwrap(), simulate_scenario(&cfg).unwrap());
        }
    }

    #[test]
    fn event_must_be_inside_record() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Islanding, 0);
        cfg.event_time = 0.3;
        assert!(matches!(simulate_scenario(&cfg), Err(Error::InvalidConfig { .. })));
        cfg.event_time = 0.0;
        assert!(simulate_scenario(&cfg).is_err());
        cfg.event_time = 0.05;
        cfg.load_active_power = -1.0;
        assert!(simulate_scenario(&cfg).is_err());
    }

    #[test]
    fn record_shape() {
        let rec = simulate_scenario(&ScenarioConfig::new(ScenarioKind::CapacitorSwitch, 1)).unwrap();
        assert_eq!(rec.len(), 300);
        assert_eq!(rec.vb.len(), 300);
        assert_eq!(rec.event_index, 60);
        assert_eq!(rec.sample_rate, 1000.0);
        assert_eq!(rec.label, Label::NonIslanding);
    }
}
