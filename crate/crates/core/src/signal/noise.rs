use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use super::features::FeatureWindow;
use super::N_FEATURES;
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::tensor::Tensor;

/// Noise level: a finite SNR in dB, or no noise at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Clean,
    Db(f64),
}

impl Snr {
    pub fn db(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(Snr::Db(value))
        } else {
            Err(Error::config("snr", format!("SNR must be finite, got {value}")))
        }
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Clean => f.write_str("clean"),
            Snr::Db(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Snr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("clean") || s.eq_ignore_ascii_case("none") {
            return Ok(Snr::Clean);
        }
        let value = s
            .trim_end_matches("dB")
            .trim_end_matches("db")
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::config("snr", format!("cannot parse `{s}` as dB")))?;
        Snr::db(value)
    }
}

/// Adds white Gaussian noise to each channel of a `steps x channels` block,
/// with variance equal to that channel's mean square over `10^(snr/10)`.
pub fn inject_noise_values(values: &mut [f64], channels: usize, snr_db: f64, rng: &mut impl Rng) {
    let steps = values.len() / channels;
    let ratio = 10f64.powf(snr_db / 10.0);
    for c in 0..channels {
        let power = (0..steps).map(|t| values[t * channels + c].powi(2)).sum::<f64>() / steps as f64;
        let sigma = (power / ratio).sqrt();
        for t in 0..steps {
            let z: f64 = rng.sample(StandardNormal);
            values[t * channels + c] += sigma * z;
        }
    }
}

/// Noisy copy of `window`; the label is untouched.
pub fn inject_noise(window: &FeatureWindow, snr: Snr, seed: u64) -> FeatureWindow {
    let mut out = window.clone();
    if let Snr::Db(db) = snr {
        let mut rng = rng_for(seed, crate::seed::stream::EVAL_NOISE, 0);
        inject_noise_values(out.values_mut(), N_FEATURES, db, &mut rng);
    }
    out
}

/// Noisy copy of a `[B, T, C]` batch. Row `r` draws from
/// `(seed, stream, ids[r])`, so a window's noise does not depend on which
/// batch it sits in.
pub fn inject_noise_batch(x: &Tensor, snr: Snr, seed: u64, stream: u64, ids: &[usize]) -> Result<Tensor> {
    let (b, t, c) = x.as_sequence_batch()?;
    if ids.len() != b {
        return Err(Error::shape(format!("{} noise ids for a batch of {b}", ids.len())));
    }
    let mut out = x.clone();
    if let Snr::Db(db) = snr {
        for (row, &id) in out.data_mut().chunks_exact_mut(t * c).zip(ids) {
            let mut rng = rng_for(seed, stream, id as u64);
            inject_noise_values(row, c, db, &mut rng);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Label;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn window(steps: usize) -> FeatureWindow {
        let values = (0..steps * N_FEATURES)
            .map(|i| 1.0 + 0.5 * ((i as f64) * 0.37).sin() * ((i % N_FEATURES) as f64 + 1.0))
            .collect();
        FeatureWindow::new(values, steps, Label::Islanding).unwrap()
    }

    #[test]
    fn clean_is_identity() {
        let w = window(10);
        assert_eq!(inject_noise(&w, Snr::Clean, 11), w);
    }

    #[test]
    fn parses_levels() {
        assert_eq!("10".parse::<Snr>().unwrap(), Snr::Db(10.0));
        assert_eq!("5dB".parse::<Snr>().unwrap(), Snr::Db(5.0));
        assert_eq!("clean".parse::<Snr>().unwrap(), Snr::Clean);
        assert!("loud".parse::<Snr>().is_err());
        assert!(Snr::db(f64::NAN).is_err());
    }

    /// Monte-Carlo check of the realised SNR per channel.
    fn empirical_snr(snr_db: f64) -> Vec<f64> {
        let steps = 100_000;
        let w = window(steps);
        let mut noisy = w.values().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        inject_noise_values(&mut noisy, N_FEATURES, snr_db, &mut rng);
        (0..N_FEATURES)
            .map(|c| {
                let (mut sig, mut noise) = (0.0, 0.0);
                for t in 0..steps {
                    let s = w.values()[t * N_FEATURES + c];
                    sig += s * s;
                    noise += (noisy[t * N_FEATURES + c] - s).powi(2);
                }
                10.0 * (sig / noise).log10()
            })
            .collect()
    }

    #[test]
    fn realised_snr_matches_request() {
        for target in [20.0, 10.0, 5.0, 0.0] {
            for got in empirical_snr(target) {
                assert!((got - target).abs() < 0.5, "asked {target} got {got}");
            }
        }
    }

    #[test]
    fn label_and_shape_survive() {
        let w = window(10);
        let n = inject_noise(&w, Snr::Db(5.0), 3);
        assert_eq!(n.label, w.label);
        assert_eq!(n.steps(), w.steps());
        assert_ne!(n, w);
        assert_ne!(inject_noise(&w, Snr::Db(5.0), 4), n);
    }
}
