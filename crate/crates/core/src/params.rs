//! Named parameter tensors and the per-channel input scaler shared by all
//! three networks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Ordered map from parameter name to tensor. Gradients use the same type.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(BTreeMap<String, Tensor>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.0.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.0
            .get(name)
            .ok_or_else(|| Error::CheckpointMismatch(format!("missing parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.0
            .get_mut(name)
            .ok_or_else(|| Error::CheckpointMismatch(format!("missing parameter `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.0.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total number of scalars.
    pub fn count(&self) -> usize {
        self.0.values().map(Tensor::len).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self(self.0.iter().map(|(k, v)| (k.clone(), v.zeros_like())).collect())
    }

    pub fn all_finite(&self) -> bool {
        self.0.values().all(Tensor::all_finite)
    }

    /// Checks that `other` has exactly the same names and shapes.
    pub fn expect_layout(&self, other: &Params) -> Result<()> {
        if self.0.len() != other.0.len() {
            return Err(Error::CheckpointMismatch(format!(
                "expected {} parameter tensors, got {}",
                self.0.len(),
                other.0.len()
            )));
        }
        for (name, t) in &self.0 {
            let o = other.get(name)?;
            if o.shape() != t.shape() {
                return Err(Error::CheckpointMismatch(format!(
                    "parameter `{name}` has shape {:?}, expected {:?}",
                    o.shape(),
                    t.shape()
                )));
            }
        }
        Ok(())
    }
}

impl FromIterator<(String, Tensor)> for Params {
    fn from_iter<I: IntoIterator<Item = (String, Tensor)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Per-channel standardisation fitted on training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    /// Leaves values unchanged.
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    /// Fits mean and standard deviation over every step of `[B, T, C]` or
    /// `[T, C]` input. Near-constant channels get unit scale.
    pub fn fit(x: &Tensor) -> Result<Self> {
        let (b, t, c) = x.as_sequence_batch()?;
        let n = (b * t) as f64;
        let mut mean = vec![0.0; c];
        for row in x.data().chunks_exact(c) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; c];
        for row in x.data().chunks_exact(c) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, x: &Tensor) -> Result<usize> {
        let c = *x.shape().last().expect("tensor rank >= 1");
        if c != self.channels() {
            return Err(Error::shape(format!(
                "scaler fitted on {} channels, input has {c}",
                self.channels()
            )));
        }
        Ok(c)
    }

    pub fn transform(&self, x: &Tensor) -> Result<Tensor> {
        let c = self.check(x)?;
        let mut out = x.clone();
        for row in out.data_mut().chunks_exact_mut(c) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn inverse(&self, x: &Tensor) -> Result<Tensor> {
        let c = self.check(x)?;
        let mut out = x.clone();
        for row in out.data_mut().chunks_exact_mut(c) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }
}
