//! Gated, dilated causal convolution classifier.
//!
//! Input `[B, T, 6]` is lifted to `filters` channels by a kernel-1 causal
//! conv, then passes through the blocks. Each block computes
//! `z = tanh(W_f * x) ⊙ sigmoid(W_g * x)`, adds a 1x1 projection of `z` to
//! its input (residual path) and emits another 1x1 projection (skip path).
//! The head sums the skips, applies ReLU, flattens over time and feeds one
//! dense logit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    conv1d_causal, conv1d_causal_backward, dense, dense_backward, glorot_uniform, sigmoid, LayerGrads,
};
use crate::params::{FeatureScaler, Params};
use crate::seed::{rng_for, stream};
use crate::signal::{FeatureWindow, N_FEATURES, WINDOW_LEN};
use crate::tensor::Tensor;
use crate::train::{bce_with_logits, Trainable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveNetConfig {
    pub input_channels: usize,
    pub filters: usize,
    pub kernel_size: usize,
    /// One dilation per block.
    pub dilations: Vec<usize>,
    pub window_len: usize,
}

impl Default for WaveNetConfig {
    fn default() -> Self {
        Self {
            input_channels: N_FEATURES,
            filters: 32,
            kernel_size: 2,
            dilations: vec![1, 2, 4, 8, 16],
            window_len: WINDOW_LEN,
        }
    }
}

impl WaveNetConfig {
    pub fn n_blocks(&self) -> usize {
        self.dilations.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("input_channels", self.input_channels),
            ("filters", self.filters),
            ("kernel_size", self.kernel_size),
            ("window_len", self.window_len),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if self.dilations.contains(&0) {
            return Err(Error::config("dilations", "every dilation must be >= 1"));
        }
        Ok(())
    }

    /// Channels seen by the head.
    fn head_channels(&self) -> usize {
        if self.n_blocks() == 0 {
            self.input_channels
        } else {
            self.filters
        }
    }
}

/// Number of past steps (including the current one) that can influence one
/// block-stack output.
pub fn receptive_field(config: &WaveNetConfig) -> usize {
    1 + (config.kernel_size - 1) * config.dilations.iter().sum::<usize>()
}

/// Trainable scalars of the configured network.
pub fn param_count(config: &WaveNetConfig) -> usize {
    let f = config.filters;
    let head = config.window_len * config.head_channels() + 1;
    if config.n_blocks() == 0 {
        return head;
    }
    let lift = config.input_channels * f + f;
    let block = 2 * (config.kernel_size * f * f + f) + 2 * (f * f + f);
    lift + config.n_blocks() * block + head
}

/// Borrowed weights of one gated residual block.
#[derive(Debug, Clone, Copy)]
pub struct WaveBlockParams<'a> {
    pub filter_kernel: &'a Tensor,
    pub filter_bias: &'a Tensor,
    pub gate_kernel: &'a Tensor,
    pub gate_bias: &'a Tensor,
    pub residual_weight: &'a Tensor,
    pub residual_bias: &'a Tensor,
    pub skip_weight: &'a Tensor,
    pub skip_bias: &'a Tensor,
}

impl<'a> WaveBlockParams<'a> {
    /// Views block `index` of a full parameter set.
    pub fn from_params(params: &'a Params, index: usize) -> Result<Self> {
        let p = |suffix: &str| params.get(&format!("block{index}.{suffix}"));
        Ok(Self {
            filter_kernel: p("filter.kernel")?,
            filter_bias: p("filter.bias")?,
            gate_kernel: p("gate.kernel")?,
            gate_bias: p("gate.bias")?,
            residual_weight: p("residual.weight")?,
            residual_bias: p("residual.bias")?,
            skip_weight: p("skip.weight")?,
            skip_bias: p("skip.bias")?,
        })
    }

    fn check(&self) -> Result<()> {
        if self.filter_kernel.shape() != self.gate_kernel.shape() {
            return Err(Error::shape(format!(
                "filter kernel {:?} and gate kernel {:?} differ",
                self.filter_kernel.shape(),
                self.gate_kernel.shape()
            )));
        }
        Ok(())
    }
}

struct Gated {
    tanh: Tensor,
    sigm: Tensor,
    z: Tensor,
}

fn gated_unit(x: &Tensor, p: &WaveBlockParams<'_>, dilation: usize) -> Result<Gated> {
    p.check()?;
    let tanh = conv1d_causal(x, p.filter_kernel, p.filter_bias, dilation)?.map(f64::tanh);
    let sigm = conv1d_causal(x, p.gate_kernel, p.gate_bias, dilation)?.map(sigmoid);
    let mut z = tanh.clone();
    for (v, s) in z.data_mut().iter_mut().zip(sigm.data()) {
        *v *= s;
    }
    Ok(Gated { tanh, sigm, z })
}

/// Returns `(residual_out, skip_out)` for one block.
pub fn wave_block_forward(x: &Tensor, p: &WaveBlockParams<'_>, dilation: usize) -> Result<(Tensor, Tensor)> {
    let g = gated_unit(x, p, dilation)?;
    let mut res = dense(&g.z, p.residual_weight, p.residual_bias)?;
    res.expect_shape(x.shape())?;
    res.add_scaled(1.0, x)?;
    let skip = dense(&g.z, p.skip_weight, p.skip_bias)?;
    Ok((res, skip))
}

/// Gradients of one block given upstream gradients of both outputs. The
/// forward pass is recomputed from `x`. Parameter keys: `filter.kernel`,
/// `filter.bias`, `gate.kernel`, `gate.bias`, `residual.weight`,
/// `residual.bias`, `skip.weight`, `skip.bias`.
pub fn wave_block_backward(
    x: &Tensor,
    p: &WaveBlockParams<'_>,
    dilation: usize,
    d_residual: &Tensor,
    d_skip: &Tensor,
) -> Result<LayerGrads> {
    let g = gated_unit(x, p, dilation)?;
    let mut res = dense_backward(&g.z, p.residual_weight, d_residual)?;
    let mut skip = dense_backward(&g.z, p.skip_weight, d_skip)?;
    let mut dz = res.input.clone();
    dz.add_scaled(1.0, &skip.input)?;

    let mut d_filter = dz.clone();
    let mut d_gate = dz;
    for (((df, dg), &a), &s) in d_filter
        .data_mut()
        .iter_mut()
        .zip(d_gate.data_mut().iter_mut())
        .zip(g.tanh.data())
        .zip(g.sigm.data())
    {
        let dzv = *df;
        *df = dzv * s * (1.0 - a * a);
        *dg = dzv * a * s * (1.0 - s);
    }
    let mut filter = conv1d_causal_backward(x, p.filter_kernel, dilation, &d_filter)?;
    let mut gate = conv1d_causal_backward(x, p.gate_kernel, dilation, &d_gate)?;

    let mut dx = d_residual.clone();
    dx.add_scaled(1.0, &filter.input)?;
    dx.add_scaled(1.0, &gate.input)?;

    let mut grads = LayerGrads {
        params: Default::default(),
        input: dx,
    };
    for (prefix, lg, keys) in [
        ("filter", &mut filter, ["kernel", "bias"]),
        ("gate", &mut gate, ["kernel", "bias"]),
        ("residual", &mut res, ["weight", "bias"]),
        ("skip", &mut skip, ["weight", "bias"]),
    ] {
        for key in keys {
            grads.params.insert(format!("{prefix}.{key}"), lg.take(key)?);
        }
    }
    Ok(grads)
}

/// Fresh Glorot-initialised parameters.
pub fn init_params(config: &WaveNetConfig, seed: u64) -> Result<Params> {
    config.validate()?;
    let mut rng = rng_for(seed, stream::INIT, 0);
    let f = config.filters;
    let k = config.kernel_size;
    let mut params = Params::new();
    if config.n_blocks() > 0 {
        let c = config.input_channels;
        params.insert("lift.kernel", glorot_uniform(&[1, c, f], c, f, &mut rng));
        params.insert("lift.bias", Tensor::zeros(&[f]));
        for i in 0..config.n_blocks() {
            for conv in ["filter", "gate"] {
                params.insert(
                    format!("block{i}.{conv}.kernel"),
                    glorot_uniform(&[k, f, f], k * f, k * f, &mut rng),
                );
                params.insert(format!("block{i}.{conv}.bias"), Tensor::zeros(&[f]));
            }
            for proj in ["residual", "skip"] {
                params.insert(
                    format!("block{i}.{proj}.weight"),
                    glorot_uniform(&[f, f], f, f, &mut rng),
                );
                params.insert(format!("block{i}.{proj}.bias"), Tensor::zeros(&[f]));
            }
        }
    }
    let n = config.window_len * config.head_channels();
    params.insert("head.weight", glorot_uniform(&[n, 1], n, 1, &mut rng));
    params.insert("head.bias", Tensor::zeros(&[1]));
    Ok(params)
}

struct Forward {
    /// Input of every block (after the lift), then the final residual.
    hidden: Vec<Tensor>,
    /// ReLU of the summed skips (or the raw input with no blocks).
    features: Tensor,
    logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveNet {
    pub config: WaveNetConfig,
    pub params: Params,
    pub scaler: FeatureScaler,
}

impl WaveNet {
    pub fn new(config: WaveNetConfig, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        let scaler = FeatureScaler::identity(config.input_channels);
        Ok(Self { config, params, scaler })
    }

    /// Network with every parameter zero; predicts exactly 0.5.
    pub fn zeros(config: WaveNetConfig) -> Result<Self> {
        let mut net = Self::new(config, 0)?;
        for (_, t) in net.params.iter_mut() {
            t.fill(0.0);
        }
        Ok(net)
    }

    pub fn from_parts(config: WaveNetConfig, params: Params, scaler: FeatureScaler) -> Result<Self> {
        init_params(&config, 0)?.expect_layout(&params)?;
        Ok(Self { config, params, scaler })
    }

    pub fn receptive_field(&self) -> usize {
        receptive_field(&self.config)
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let (b, t, c) = x.as_sequence_batch()?;
        if t != self.config.window_len || c != self.config.input_channels {
            return Err(Error::shape(format!(
                "wavenet expects windows of {} x {}, got {t} x {c}",
                self.config.window_len, self.config.input_channels
            )));
        }
        Ok(b)
    }

    fn forward(&self, x: &Tensor) -> Result<Forward> {
        let b = self.check_input(x)?;
        let p = &self.params;
        let mut hidden = Vec::with_capacity(self.config.n_blocks() + 1);
        let features = if self.config.n_blocks() == 0 {
            x.clone()
        } else {
            let mut h = conv1d_causal(x, p.get("lift.kernel")?, p.get("lift.bias")?, 1)?;
            let mut skips: Option<Tensor> = None;
            for (i, &d) in self.config.dilations.iter().enumerate() {
                let block = WaveBlockParams::from_params(p, i)?;
                let (res, skip) = wave_block_forward(&h, &block, d)?;
                match skips.as_mut() {
                    Some(s) => s.add_scaled(1.0, &skip)?,
                    None => skips = Some(skip),
                }
                hidden.push(std::mem::replace(&mut h, res));
            }
            hidden.push(h);
            skips.expect("at least one block").map(|v| v.max(0.0))
        };
        let flat = features.clone().reshape(&[b, features.len() / b])?;
        let logits = dense(&flat, p.get("head.weight")?, p.get("head.bias")?)?.into_data();
        Ok(Forward {
            hidden,
            features,
            logits,
        })
    }

    /// Logits for already-normalised input `[B, T, C]`.
    pub fn logits(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.logits)
    }

    fn backward(&self, x: &Tensor, fwd: &Forward, d_logits: &[f64]) -> Result<Params> {
        let b = d_logits.len();
        let p = &self.params;
        let mut grads = Params::new();
        let flat = fwd.features.clone().reshape(&[b, fwd.features.len() / b])?;
        let d_out = Tensor::new(vec![b, 1], d_logits.to_vec())?;
        let mut head = dense_backward(&flat, p.get("head.weight")?, &d_out)?;
        grads.insert("head.weight", head.take("weight")?);
        grads.insert("head.bias", head.take("bias")?);
        if self.config.n_blocks() == 0 {
            return Ok(grads);
        }
        // ReLU on the summed skips; every block receives the same skip gradient.
        let mut d_skip = head.input.reshape(fwd.features.shape())?;
        for (g, &y) in d_skip.data_mut().iter_mut().zip(fwd.features.data()) {
            if y <= 0.0 {
                *g = 0.0;
            }
        }
        let mut d_h = Tensor::zeros(fwd.hidden.last().expect("final residual").shape());
        for (i, &d) in self.config.dilations.iter().enumerate().rev() {
            let block = WaveBlockParams::from_params(p, i)?;
            let lg = wave_block_backward(&fwd.hidden[i], &block, d, &d_h, &d_skip)?;
            for (name, g) in lg.params {
                grads.insert(format!("block{i}.{name}"), g);
            }
            d_h = lg.input;
        }
        let mut lift = conv1d_causal_backward(x, p.get("lift.kernel")?, 1, &d_h)?;
        grads.insert("lift.kernel", lift.take("kernel")?);
        grads.insert("lift.bias", lift.take("bias")?);
        Ok(grads)
    }

    /// Islanding probabilities for raw (unscaled) windows `[B, T, C]`.
    pub fn predict_batch(&self, raw: &Tensor) -> Result<Vec<f64>> {
        let x = self.scaler.transform(raw)?;
        Ok(self.logits(&x)?.into_iter().map(sigmoid).collect())
    }

    /// Islanding probability of one raw window.
    pub fn predict(&self, window: &FeatureWindow) -> Result<f64> {
        let x = window.to_tensor();
        let shape = [1, x.dim(0), x.dim(1)];
        Ok(self.predict_batch(&x.reshape(&shape)?)?[0])
    }
}

impl Trainable for WaveNet {
    fn params(&self) -> &Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn loss(&self, input: &Tensor, target: &Tensor) -> Result<f64> {
        Ok(bce_with_logits(&self.logits(input)?, target.data())?.0)
    }

    fn loss_and_grad(&self, input: &Tensor, target: &Tensor) -> Result<(f64, Params)> {
        let fwd = self.forward(input)?;
        let (loss, d_logits) = bce_with_logits(&fwd.logits, target.data())?;
        Ok((loss, self.backward(input, &fwd, &d_logits)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Label;

    fn block_tensors(f: usize, k: usize, scale: f64) -> Vec<Tensor> {
        let mut i = 0usize;
        let mut next = |shape: &[usize]| {
            Tensor::from_fn(shape, |_| {
                i += 1;
                scale * ((i as f64) * 0.731).sin()
            })
        };
        vec![
            next(&[k, f, f]),
            next(&[f]),
            next(&[k, f, f]),
            next(&[f]),
            next(&[f, f]),
            next(&[f]),
            next(&[f, f]),
            next(&[f]),
        ]
    }

    fn view(t: &[Tensor]) -> WaveBlockParams<'_> {
        WaveBlockParams {
            filter_kernel: &t[0],
            filter_bias: &t[1],
            gate_kernel: &t[2],
            gate_bias: &t[3],
            residual_weight: &t[4],
            residual_bias: &t[5],
            skip_weight: &t[6],
            skip_bias: &t[7],
        }
    }

    #[test]
    fn receptive_fields() {
        let cfg = |d: Vec<usize>| WaveNetConfig {
            dilations: d,
            ..WaveNetConfig::default()
        };
        assert_eq!(receptive_field(&cfg(vec![1, 2, 4, 8])), 16);
        assert_eq!(receptive_field(&cfg(vec![1])), 2);
        assert_eq!(receptive_field(&cfg(vec![1, 2, 4, 8, 16])), 32);
    }

    #[test]
    fn zero_block_is_identity_on_residual() {
        let t = block_tensors(4, 2, 0.0);
        let x = Tensor::from_fn(&[2, 6, 4], |i| i as f64 * 0.1 - 1.0);
        let (res, skip) = wave_block_forward(&x, &view(&t), 2).unwrap();
        assert_eq!(res, x);
        assert!(skip.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn open_gate_with_zero_filter_gives_zero() {
        let mut t = block_tensors(3, 2, 0.0);
        t[3].fill(50.0);
        t[4] = Tensor::from_fn(&[3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let x = Tensor::from_fn(&[5, 3], |i| (i as f64).cos());
        let (res, _) = wave_block_forward(&x, &view(&t), 1).unwrap();
        assert!(res.max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn block_is_causal() {
        let t = block_tensors(3, 2, 0.5);
        let x = Tensor::from_fn(&[1, 12, 3], |i| (i as f64 * 0.37).sin());
        let (_, base) = wave_block_forward(&x, &view(&t), 4).unwrap();
        for step in 0..12 {
            let mut xp = x.clone();
            xp.data_mut()[step * 3] += 3.0;
            let (_, skip) = wave_block_forward(&xp, &view(&t), 4).unwrap();
            for s in 0..step {
                for c in 0..3 {
                    assert_eq!(skip.data()[s * 3 + c].to_bits(), base.data()[s * 3 + c].to_bits());
                }
            }
        }
    }

    #[test]
    fn zero_network_predicts_one_half() {
        let net = WaveNet::zeros(WaveNetConfig::default()).unwrap();
        let w = FeatureWindow::new((0..60).map(|i| i as f64).collect(), 10, Label::Islanding).unwrap();
        assert_eq!(net.predict(&w).unwrap(), 0.5);
    }

    #[test]
    fn predictions_are_probabilities() {
        let net = WaveNet::new(WaveNetConfig::default(), 3).unwrap();
        let x = Tensor::from_fn(&[4, 10, 6], |i| 40.0 * ((i as f64) * 1.1).sin());
        for q in net.predict_batch(&x).unwrap() {
            assert!(q > 0.0 && q < 1.0);
        }
    }

    #[test]
    fn last_step_can_change_the_output() {
        let net = WaveNet::new(WaveNetConfig::default(), 5).unwrap();
        let x = Tensor::from_fn(&[1, 10, 6], |i| ((i as f64) * 0.3).sin());
        let mut xp = x.clone();
        xp.data_mut()[9 * 6] += 1.0;
        assert_ne!(net.predict_batch(&x).unwrap(), net.predict_batch(&xp).unwrap());
    }

    #[test]
    fn counts_match_initialised_tensors() {
        for cfg in [
            WaveNetConfig::default(),
            WaveNetConfig {
                dilations: vec![],
                ..Default::default()
            },
            WaveNetConfig {
                filters: 8,
                kernel_size: 3,
                dilations: vec![1, 3],
                ..Default::default()
            },
        ] {
            assert_eq!(init_params(&cfg, 0).unwrap().count(), param_count(&cfg));
        }
        let head_only = WaveNetConfig {
            dilations: vec![],
            ..Default::default()
        };
        assert_eq!(param_count(&head_only), 10 * 6 + 1);
    }

    #[test]
    fn wrong_window_shape_is_rejected() {
        let net = WaveNet::new(WaveNetConfig::default(), 0).unwrap();
        assert!(net.predict_batch(&Tensor::zeros(&[1, 9, 6])).is_err());
        assert!(net.predict_batch(&Tensor::zeros(&[1, 10, 5])).is_err());
    }
}
