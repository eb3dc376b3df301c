//! Two-level 1-D U-Net that maps noisy feature windows to clean ones.
//!
//! Encoder: two `same`-padded ReLU convs per level followed by a size-2 max
//! pool. Decoder: nearest-neighbour upsampling, concatenation with the
//! matching encoder output, two ReLU convs. A linear conv maps back to the
//! input channels. Windows are zero-padded at the end to a multiple of 4
//! and cropped back afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    concat_channels, conv1d, conv1d_backward, crop_time, glorot_uniform, maxpool1d_backward, maxpool1d_with_indices,
    pad_time, split_channels, upsample1d, upsample1d_backward, Padding,
};
use crate::params::{FeatureScaler, Params};
use crate::seed::{rng_for, stream};
use crate::signal::{FeatureWindow, N_FEATURES};
use crate::tensor::Tensor;
use crate::train::{mae_loss, mae_loss_grad, Trainable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UNetConfig {
    pub channels: usize,
    /// Filters of the first and second encoder level.
    pub filters: [usize; 2],
    pub kernel_size: usize,
}

impl Default for UNetConfig {
    fn default() -> Self {
        Self {
            channels: N_FEATURES,
            filters: [32, 64],
            kernel_size: 3,
        }
    }
}

impl UNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.filters.contains(&0) {
            return Err(Error::config("filters", "channel counts must be positive"));
        }
        if self.kernel_size == 0 {
            return Err(Error::config("kernel_size", "must be positive"));
        }
        Ok(())
    }

    /// `(name, in, out)` for every conv, in forward order.
    fn convs(&self) -> [(&'static str, usize, usize); 9] {
        let [f1, f2] = self.filters;
        [
            ("enc1a", self.channels, f1),
            ("enc1b", f1, f1),
            ("enc2a", f1, f2),
            ("enc2b", f2, f2),
            ("dec2a", f2 + f2, f2),
            ("dec2b", f2, f2),
            ("dec1a", f2 + f1, f1),
            ("dec1b", f1, f1),
            ("out", f1, self.channels),
        ]
    }
}

/// Internal length for a window of `steps`: the next multiple of 4.
pub fn padded_len(steps: usize) -> usize {
    steps.div_ceil(4) * 4
}

pub fn param_count(config: &UNetConfig) -> usize {
    config
        .convs()
        .iter()
        .map(|&(_, i, o)| config.kernel_size * i * o + o)
        .sum()
}

pub fn init_params(config: &UNetConfig, seed: u64) -> Result<Params> {
    config.validate()?;
    let k = config.kernel_size;
    let mut rng = rng_for(seed, stream::INIT, 0);
    let mut params = Params::new();
    for (name, i, o) in config.convs() {
        params.insert(
            format!("{name}.kernel"),
            glorot_uniform(&[k, i, o], k * i, k * o, &mut rng),
        );
        params.insert(format!("{name}.bias"), Tensor::zeros(&[o]));
    }
    Ok(params)
}

/// Inputs and (post-activation) outputs of every conv, plus pooling indices.
struct Forward {
    steps: usize,
    conv_in: Vec<Tensor>,
    conv_out: Vec<Tensor>,
    pool1: Vec<usize>,
    pool2: Vec<usize>,
    s1_shape: Vec<usize>,
    s2_shape: Vec<usize>,
    output: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UNet {
    pub config: UNetConfig,
    pub params: Params,
    pub scaler: FeatureScaler,
}

impl UNet {
    pub fn new(config: UNetConfig, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        let scaler = FeatureScaler::identity(config.channels);
        Ok(Self { config, params, scaler })
    }

    pub fn from_parts(config: UNetConfig, params: Params, scaler: FeatureScaler) -> Result<Self> {
        init_params(&config, 0)?.expect_layout(&params)?;
        Ok(Self { config, params, scaler })
    }

    fn conv(&self, name: &str, x: &Tensor, relu: bool) -> Result<Tensor> {
        let y = conv1d(
            x,
            self.params.get(&format!("{name}.kernel"))?,
            self.params.get(&format!("{name}.bias"))?,
            1,
            Padding::Same,
        )?;
        Ok(if relu { y.map(|v| v.max(0.0)) } else { y })
    }

    fn forward(&self, x: &Tensor) -> Result<Forward> {
        let (b, steps, c) = x.as_sequence_batch()?;
        if c != self.config.channels || steps == 0 {
            return Err(Error::shape(format!(
                "unet expects {} channels, got [{b}, {steps}, {c}]",
                self.config.channels
            )));
        }
        let x = x.clone().reshape(&[b, steps, c])?;
        let padded = pad_time(&x, padded_len(steps))?;
        let mut conv_in = Vec::with_capacity(9);
        let mut conv_out = Vec::with_capacity(9);
        let mut run = |name: &str, input: Tensor, relu: bool| -> Result<Tensor> {
            let y = self.conv(name, &input, relu)?;
            conv_in.push(input);
            conv_out.push(y.clone());
            Ok(y)
        };
        let a1 = run("enc1a", padded, true)?;
        let s1 = run("enc1b", a1, true)?;
        let p1 = maxpool1d_with_indices(&s1, 2)?;
        let a2 = run("enc2a", p1.output, true)?;
        let s2 = run("enc2b", a2, true)?;
        let p2 = maxpool1d_with_indices(&s2, 2)?;
        let c2 = concat_channels(&upsample1d(&p2.output, 2)?, &s2)?;
        let d2 = run("dec2a", c2, true)?;
        let d2 = run("dec2b", d2, true)?;
        let c1 = concat_channels(&upsample1d(&d2, 2)?, &s1)?;
        let d1 = run("dec1a", c1, true)?;
        let d1 = run("dec1b", d1, true)?;
        let y = run("out", d1, false)?;
        let output = crop_time(&y, steps)?;
        Ok(Forward {
            steps,
            conv_in,
            conv_out,
            pool1: p1.argmax,
            pool2: p2.argmax,
            s1_shape: s1.shape().to_vec(),
            s2_shape: s2.shape().to_vec(),
            output,
        })
    }

    fn backward(&self, fwd: &Forward, d_output: &Tensor) -> Result<Params> {
        let mut grads = Params::new();
        let names: Vec<&str> = self.config.convs().iter().map(|c| c.0).collect();
        // Walks one conv backwards: ReLU mask from its output, then the conv.
        let mut step = |idx: usize, upstream: Tensor, relu: bool| -> Result<Tensor> {
            let mut up = upstream;
            if relu {
                for (g, &y) in up.data_mut().iter_mut().zip(fwd.conv_out[idx].data()) {
                    if y <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let name = names[idx];
            let mut lg = conv1d_backward(
                &fwd.conv_in[idx],
                self.params.get(&format!("{name}.kernel"))?,
                1,
                Padding::Same,
                &up,
            )?;
            grads.insert(format!("{name}.kernel"), lg.take("kernel")?);
            grads.insert(format!("{name}.bias"), lg.take("bias")?);
            Ok(lg.input)
        };
        let padded = fwd.conv_out[8].dim(1);
        let d_y = pad_time(d_output, padded)?;
        let d = step(8, d_y, false)?;
        let d = step(7, d, true)?;
        let d_c1 = step(6, d, true)?;
        let f2 = self.config.filters[1];
        let (d_u1, mut d_s1) = split_channels(&d_c1, f2)?;
        let d = upsample1d_backward(&d_u1, 2)?;
        let d = step(5, d, true)?;
        let d_c2 = step(4, d, true)?;
        let (d_u2, mut d_s2) = split_channels(&d_c2, f2)?;
        let d_p2 = upsample1d_backward(&d_u2, 2)?;
        d_s2.add_scaled(1.0, &maxpool1d_backward(&d_p2, &fwd.pool2, &fwd.s2_shape)?)?;
        let d = step(3, d_s2, true)?;
        let d_p1 = step(2, d, true)?;
        d_s1.add_scaled(1.0, &maxpool1d_backward(&d_p1, &fwd.pool1, &fwd.s1_shape)?)?;
        let d = step(1, d_s1, true)?;
        step(0, d, true)?;
        debug_assert_eq!(fwd.steps, d_output.dim(1));
        Ok(grads)
    }

    /// Network output for already-normalised input `[B, T, C]` or `[T, C]`;
    /// the result has the input's shape.
    pub fn forward_normalized(&self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)?.output.reshape(x.shape())
    }

    /// Denoises raw windows `[B, T, C]` (or a single `[T, C]`).
    pub fn denoise(&self, raw: &Tensor) -> Result<Tensor> {
        let x = self.scaler.transform(raw)?;
        self.scaler.inverse(&self.forward_normalized(&x)?)
    }

    pub fn denoise_window(&self, window: &FeatureWindow) -> Result<FeatureWindow> {
        let out = self.denoise(&window.to_tensor())?;
        FeatureWindow::new(out.into_data(), window.steps(), window.label)
    }
}

impl Trainable for UNet {
    fn params(&self) -> &Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn loss(&self, input: &Tensor, target: &Tensor) -> Result<f64> {
        mae_loss(&self.forward_normalized(input)?, target)
    }

    fn loss_and_grad(&self, input: &Tensor, target: &Tensor) -> Result<(f64, Params)> {
        let fwd = self.forward(input)?;
        let target = target.clone().reshape(fwd.output.shape())?;
        let loss = mae_loss(&fwd.output, &target)?;
        let d_out = mae_loss_grad(&fwd.output, &target)?;
        Ok((loss, self.backward(&fwd, &d_out)?))
    }
}
