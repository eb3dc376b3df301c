//! Central finite-difference verification of the hand-written backward
//! passes.
//!
//! Layer targets are reduced to a scalar with a fixed random projection
//! `L = Σ r ⊙ output`, so the upstream gradient is `r`. Whole-model targets
//! use their training loss. Every scalar of small tensors is checked; large
//! tensors are sampled.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::{
    conv1d, conv1d_backward, dense, dense_backward, maxpool1d_backward, maxpool1d_with_indices, upsample1d,
    upsample1d_backward, Padding,
};
use crate::lstm::{lstm_layer_backward, lstm_layer_forward, Lstm, LstmConfig, LstmLayerParams};
use crate::params::Params;
use crate::seed::{rng_for, stream};
use crate::tensor::Tensor;
use crate::train::Trainable;
use crate::unet::{UNet, UNetConfig};
use crate::wavenet::{wave_block_backward, wave_block_forward, WaveBlockParams, WaveNet, WaveNetConfig};

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Magnitudes below this are compared absolutely rather than relatively.
pub const FLOOR: f64 = 1e-6;
/// Scalars checked per tensor when it is larger than this.
const SAMPLES_PER_TENSOR: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradTarget {
    Dense,
    ConvCausal,
    ConvSame,
    MaxPool,
    Upsample,
    /// One gated residual block, both outputs.
    WaveBlock,
    /// A single LSTM layer unrolled over three steps.
    LstmCell,
    WaveNet,
    Lstm,
    UNet,
}

impl GradTarget {
    pub const ALL: [GradTarget; 10] = [
        GradTarget::Dense,
        GradTarget::ConvCausal,
        GradTarget::ConvSame,
        GradTarget::MaxPool,
        GradTarget::Upsample,
        GradTarget::WaveBlock,
        GradTarget::LstmCell,
        GradTarget::WaveNet,
        GradTarget::Lstm,
        GradTarget::UNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GradTarget::Dense => "dense",
            GradTarget::ConvCausal => "conv-causal",
            GradTarget::ConvSame => "conv-same",
            GradTarget::MaxPool => "maxpool",
            GradTarget::Upsample => "upsample",
            GradTarget::WaveBlock => "wave-block",
            GradTarget::LstmCell => "lstm-cell",
            GradTarget::WaveNet => "wavenet",
            GradTarget::Lstm => "lstm",
            GradTarget::UNet => "unet",
        }
    }
}

impl fmt::Display for GradTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GradTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GradTarget::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::config("target", format!("unknown gradient target `{s}`")))
    }
}

/// `|a - n| / max(|a|, |n|, FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn project(out: &Tensor, r: &Tensor) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn positions(len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if len <= SAMPLES_PER_TENSOR {
        (0..len).collect()
    } else {
        sample(rng, len, SAMPLES_PER_TENSOR).into_vec()
    }
}

/// Max relative error of `analytic` against central differences of `loss`
/// with respect to `x`.
fn check_tensor(
    x: &Tensor,
    analytic: &Tensor,
    rng: &mut ChaCha8Rng,
    mut loss: impl FnMut(&Tensor) -> Result<f64>,
) -> Result<f64> {
    analytic.expect_shape(x.shape())?;
    let mut worst: f64 = 0.0;
    let mut probe = x.clone();
    for i in positions(x.len(), rng) {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + STEP;
        let up = loss(&probe)?;
        probe.data_mut()[i] = orig - STEP;
        let down = loss(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

fn check_params(
    params: &Params,
    analytic: &Params,
    rng: &mut ChaCha8Rng,
    mut loss: impl FnMut(&Params) -> Result<f64>,
) -> Result<f64> {
    params.expect_layout(analytic)?;
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let len = params.get(&name)?.len();
        for i in positions(len, rng) {
            let orig = probe.get(&name)?.data()[i];
            probe.get_mut(&name)?.data_mut()[i] = orig + STEP;
            let up = loss(&probe)?;
            probe.get_mut(&name)?.data_mut()[i] = orig - STEP;
            let down = loss(&probe)?;
            probe.get_mut(&name)?.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(relative_error(analytic.get(&name)?.data()[i], numeric));
        }
    }
    Ok(worst)
}

/// Zero biases put ReLU units fed by zero padding exactly on their kink,
/// where the derivative is undefined, so biases are jittered first.
fn jitter_biases(params: &mut Params, rng: &mut ChaCha8Rng) {
    for (name, t) in params.iter_mut() {
        if name.ends_with("bias") {
            for v in t.data_mut() {
                *v += rng.random_range(-0.1..0.1);
            }
        }
    }
}

fn model_check<M: Trainable + Clone>(model: &M, x: &Tensor, y: &Tensor, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (_, grads) = model.loss_and_grad(x, y)?;
    let mut probe = model.clone();
    check_params(model.params(), &grads, rng, |p| {
        *probe.params_mut() = p.clone();
        probe.loss(x, y)
    })
}

fn labels(n: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(&[n], |_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
}

/// Runs the check for `target` on inputs drawn from `seed` and returns the
/// largest relative error over all checked scalars (parameters and, for
/// layer targets, inputs).
pub fn gradcheck(target: GradTarget, seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed, stream::GRADCHECK, 0);
    match target {
        GradTarget::Dense => {
            let x = random(&[3, 4], &mut rng);
            let w = random(&[4, 5], &mut rng);
            let b = random(&[5], &mut rng);
            let r = random(&[3, 5], &mut rng);
            let mut g = dense_backward(&x, &w, &r)?;
            let e_x = check_tensor(&x, &g.input, &mut rng, |x| Ok(project(&dense(x, &w, &b)?, &r)))?;
            let e_w = check_tensor(&w, &g.take("weight")?, &mut rng, |w| {
                Ok(project(&dense(&x, w, &b)?, &r))
            })?;
            let e_b = check_tensor(&b, &g.take("bias")?, &mut rng, |b| Ok(project(&dense(&x, &w, b)?, &r)))?;
            Ok(e_x.max(e_w).max(e_b))
        }
        GradTarget::ConvCausal | GradTarget::ConvSame => {
            let (padding, taps, dilation) = match target {
                GradTarget::ConvCausal => (Padding::Causal, 2, 3),
                _ => (Padding::Same, 3, 1),
            };
            let x = random(&[2, 7, 3], &mut rng);
            let k = random(&[taps, 3, 4], &mut rng);
            let b = random(&[4], &mut rng);
            let r = random(&[2, 7, 4], &mut rng);
            let mut g = conv1d_backward(&x, &k, dilation, padding, &r)?;
            let f = |x: &Tensor, k: &Tensor, b: &Tensor| -> Result<f64> {
                Ok(project(&conv1d(x, k, b, dilation, padding)?, &r))
            };
            let e_x = check_tensor(&x, &g.input, &mut rng, |x| f(x, &k, &b))?;
            let e_k = check_tensor(&k, &g.take("kernel")?, &mut rng, |k| f(&x, k, &b))?;
            let e_b = check_tensor(&b, &g.take("bias")?, &mut rng, |b| f(&x, &k, b))?;
            Ok(e_x.max(e_k).max(e_b))
        }
        GradTarget::MaxPool => {
            // Distinct values spaced well beyond the step keep clear of ties.
            let mut values: Vec<f64> = (0..24).map(|i| i as f64 * 0.1).collect();
            values.shuffle(&mut rng);
            let x = Tensor::new(vec![2, 4, 3], values)?;
            let r = random(&[2, 2, 3], &mut rng);
            let pooled = maxpool1d_with_indices(&x, 2)?;
            let dx = maxpool1d_backward(&r, &pooled.argmax, x.shape())?;
            check_tensor(&x, &dx, &mut rng, |x| {
                Ok(project(&maxpool1d_with_indices(x, 2)?.output, &r))
            })
        }
        GradTarget::Upsample => {
            let x = random(&[2, 3, 2], &mut rng);
            let r = random(&[2, 6, 2], &mut rng);
            let dx = upsample1d_backward(&r, 2)?;
            check_tensor(&x, &dx, &mut rng, |x| Ok(project(&upsample1d(x, 2)?, &r)))
        }
        GradTarget::WaveBlock => {
            let f = 4;
            let mut p = Params::new();
            for (name, shape) in [
                ("filter.kernel", vec![2, f, f]),
                ("filter.bias", vec![f]),
                ("gate.kernel", vec![2, f, f]),
                ("gate.bias", vec![f]),
                ("residual.weight", vec![f, f]),
                ("residual.bias", vec![f]),
                ("skip.weight", vec![f, f]),
                ("skip.bias", vec![f]),
            ] {
                p.insert(format!("block0.{name}"), random(&shape, &mut rng));
            }
            let x = random(&[2, 6, f], &mut rng);
            let r_res = random(&[2, 6, f], &mut rng);
            let r_skip = random(&[2, 6, f], &mut rng);
            let dilation = 2;
            let loss = |x: &Tensor, p: &Params| -> Result<f64> {
                let (res, skip) = wave_block_forward(x, &WaveBlockParams::from_params(p, 0)?, dilation)?;
                Ok(project(&res, &r_res) + project(&skip, &r_skip))
            };
            let g = wave_block_backward(&x, &WaveBlockParams::from_params(&p, 0)?, dilation, &r_res, &r_skip)?;
            let e_x = check_tensor(&x, &g.input, &mut rng, |x| loss(x, &p))?;
            let analytic: Params = g.params.into_iter().map(|(k, v)| (format!("block0.{k}"), v)).collect();
            let e_p = check_params(&p, &analytic, &mut rng, |p| loss(&x, p))?;
            Ok(e_x.max(e_p))
        }
        GradTarget::LstmCell => {
            let (n, h) = (3, 4);
            let mut p = Params::new();
            p.insert("layer0.input_weights", random(&[n, 4 * h], &mut rng));
            p.insert("layer0.recurrent_weights", random(&[h, 4 * h], &mut rng));
            p.insert("layer0.bias", random(&[4 * h], &mut rng));
            let x = random(&[2, 3, n], &mut rng);
            let r = random(&[2, 3, h], &mut rng);
            let loss = |x: &Tensor, p: &Params| -> Result<f64> {
                let trace = lstm_layer_forward(x, &LstmLayerParams::from_params(p, 0)?)?;
                Ok(project(&trace.output, &r))
            };
            let view = LstmLayerParams::from_params(&p, 0)?;
            let trace = lstm_layer_forward(&x, &view)?;
            let g = lstm_layer_backward(&x, &view, &trace, &r)?;
            let e_x = check_tensor(&x, &g.input, &mut rng, |x| loss(x, &p))?;
            let analytic: Params = g.params.into_iter().map(|(k, v)| (format!("layer0.{k}"), v)).collect();
            let e_p = check_params(&p, &analytic, &mut rng, |p| loss(&x, p))?;
            Ok(e_x.max(e_p))
        }
        GradTarget::WaveNet => {
            let mut net = WaveNet::new(WaveNetConfig::default(), seed)?;
            jitter_biases(&mut net.params, &mut rng);
            let x = random(&[3, 10, 6], &mut rng);
            let y = labels(3, &mut rng);
            model_check(&net, &x, &y, &mut rng)
        }
        GradTarget::Lstm => {
            let mut net = Lstm::new(LstmConfig::default(), seed)?;
            jitter_biases(&mut net.params, &mut rng);
            let x = random(&[3, 10, 6], &mut rng);
            let y = labels(3, &mut rng);
            model_check(&net, &x, &y, &mut rng)
        }
        GradTarget::UNet => {
            let mut net = UNet::new(UNetConfig::default(), seed)?;
            jitter_biases(&mut net.params, &mut rng);
            let x = random(&[2, 10, 6], &mut rng);
            // Targets sit at least 0.5 away from the output so that no
            // probe crosses the kink of the absolute error.
            let mut y = net.forward_normalized(&x)?;
            for v in y.data_mut() {
                let offset = rng.random_range(0.5..1.0);
                *v += if rng.random_bool(0.5) { offset } else { -offset };
            }
            model_check(&net, &x, &y, &mut rng)
        }
    }
}
