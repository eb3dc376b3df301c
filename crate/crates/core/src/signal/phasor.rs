//! One-cycle sliding DFT phasors and the quantities derived from them.
//!
//! Phasors are referenced to a fixed nominal-frequency frame, so a steady
//! 50 Hz signal gives a constant phasor and any rotation of the estimate
//! measures the frequency deviation directly.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use super::fortescue::{fortescue, SequenceComponents};
use super::scenario::ThreePhaseRecord;
use super::SAMPLES_PER_CYCLE;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    Zero,
    Positive,
    Negative,
}

impl SequenceKind {
    fn pick(self, s: &SequenceComponents) -> Complex64 {
        match self {
            SequenceKind::Zero => s.zero,
            SequenceKind::Positive => s.positive,
            SequenceKind::Negative => s.negative,
        }
    }
}

/// First sample with a full cycle of history behind it.
pub(crate) const FIRST_VALID: usize = SAMPLES_PER_CYCLE - 1;

fn check_length(record: &ThreePhaseRecord) -> Result<()> {
    let needed = 2 * SAMPLES_PER_CYCLE;
    if record.len() < needed || record.vb.len() != record.len() || record.vc.len() != record.len() {
        return Err(Error::shape(format!(
            "record needs {needed} samples on each phase, got {}/{}/{}",
            record.va.len(),
            record.vb.len(),
            record.vc.len()
        )));
    }
    Ok(())
}

fn phase_phasors(samples: &[f64], basis: &[Complex64]) -> Vec<Complex64> {
    let n = SAMPLES_PER_CYCLE;
    let scale = 2.0 / n as f64;
    let mut out = Vec::with_capacity(samples.len());
    for t in 0..samples.len() {
        let end = t.max(FIRST_VALID);
        let start = end + 1 - n;
        let acc: Complex64 = (start..=end).map(|m| basis[m % n] * samples[m]).sum();
        out.push(acc * scale);
    }
    out
}

/// Per-sample sequence components. Samples before the first full cycle
/// repeat the first valid estimate.
pub fn sequence_phasors(record: &ThreePhaseRecord) -> Result<Vec<SequenceComponents>> {
    check_length(record)?;
    let n = SAMPLES_PER_CYCLE;
    let basis: Vec<Complex64> = (0..n)
        .map(|m| Complex64::from_polar(1.0, -TAU * m as f64 / n as f64))
        .collect();
    let a = phase_phasors(&record.va, &basis);
    let b = phase_phasors(&record.vb, &basis);
    let c = phase_phasors(&record.vc, &basis);
    Ok((0..record.len()).map(|t| fortescue(a[t], b[t], c[t])).collect())
}

fn wrap(angle: f64) -> f64 {
    (angle + PI).rem_euclid(TAU) - PI
}

pub(crate) fn frequency_from_phasors(seq: &[SequenceComponents], sample_rate: f64, nominal: f64) -> Vec<f64> {
    let n = SAMPLES_PER_CYCLE;
    let span = n as f64 / sample_rate;
    (0..seq.len())
        .map(|t| {
            if t < FIRST_VALID + n {
                nominal
            } else {
                let now = seq[t].positive.arg();
                let before = seq[t - n].positive.arg();
                nominal + wrap(now - before) / (TAU * span)
            }
        })
        .collect()
}

pub(crate) fn rocof_from_frequency(freq: &[f64], sample_rate: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(freq.len());
    out.push(0.0);
    out.extend(freq.windows(2).map(|w| (w[1] - w[0]) * sample_rate));
    out
}

pub(crate) fn superimposed_from_phasors(seq: &[SequenceComponents], kind: SequenceKind) -> Vec<f64> {
    let n = SAMPLES_PER_CYCLE;
    (0..seq.len())
        .map(|t| {
            if t < FIRST_VALID + n {
                0.0
            } else {
                (kind.pick(&seq[t]) - kind.pick(&seq[t - n])).norm()
            }
        })
        .collect()
}

/// Positive-sequence frequency (Hz), from the phase advance over one cycle.
pub fn estimate_frequency(record: &ThreePhaseRecord) -> Result<Vec<f64>> {
    let seq = sequence_phasors(record)?;
    Ok(frequency_from_phasors(
        &seq,
        record.sample_rate,
        record.nominal_frequency,
    ))
}

/// Rate of change of frequency (Hz/s): first difference of the frequency
/// estimate times the sample rate.
pub fn estimate_rocof(record: &ThreePhaseRecord) -> Result<Vec<f64>> {
    let freq = estimate_frequency(record)?;
    Ok(rocof_from_frequency(&freq, record.sample_rate))
}

/// `|S(t) - S(t - one cycle)|` for the chosen sequence component; zero until
/// a full cycle of valid phasors exists.
pub fn superimposed(record: &ThreePhaseRecord, kind: SequenceKind) -> Result<Vec<f64>> {
    let seq = sequence_phasors(record)?;
    Ok(superimposed_from_phasors(&seq, kind))
}
