//! Stacked LSTM baseline.
//!
//! Standard cell: `f, i, o` through sigmoid, candidate `c~` through tanh,
//! `c_t = f ⊙ c_{t-1} + i ⊙ c~`, `h_t = o ⊙ tanh(c_t)`. Each layer keeps its
//! four gates side by side in the column order `f, i, c~, o`:
//! `input_weights` is `[in, 4h]`, `recurrent_weights` is `[h, 4h]` and
//! `bias` is `[4h]`. The last hidden state of the top layer feeds a dense
//! logit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{dense, dense_backward, glorot_uniform, sigmoid};
use crate::params::{FeatureScaler, Params};
use crate::seed::{rng_for, stream};
use crate::signal::{FeatureWindow, N_FEATURES};
use crate::tensor::{gemm, MatMut, MatRef, Tensor};
use crate::train::{bce_with_logits, Trainable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmConfig {
    pub input_size: usize,
    pub hidden_sizes: Vec<usize>,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            input_size: N_FEATURES,
            hidden_sizes: vec![64, 128, 64, 32],
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 {
            return Err(Error::config("input_size", "must be positive"));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::config(
                "hidden_sizes",
                "need at least one layer, all sizes positive",
            ));
        }
        Ok(())
    }

    fn layer_dims(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        std::iter::once(self.input_size)
            .chain(self.hidden_sizes.iter().copied())
            .zip(self.hidden_sizes.iter().copied())
    }
}

/// Trainable scalars: `4((in + h) h + h)` per layer plus the dense head.
pub fn param_count(config: &LstmConfig) -> usize {
    let layers: usize = config.layer_dims().map(|(i, h)| 4 * ((i + h) * h + h)).sum();
    layers + config.hidden_sizes.last().map_or(0, |h| h + 1)
}

/// Borrowed weights of one layer.
#[derive(Debug, Clone, Copy)]
pub struct LstmLayerParams<'a> {
    pub input_weights: &'a Tensor,
    pub recurrent_weights: &'a Tensor,
    pub bias: &'a Tensor,
}

impl<'a> LstmLayerParams<'a> {
    pub fn from_params(params: &'a Params, layer: usize) -> Result<Self> {
        let p = |suffix: &str| params.get(&format!("layer{layer}.{suffix}"));
        Ok(Self {
            input_weights: p("input_weights")?,
            recurrent_weights: p("recurrent_weights")?,
            bias: p("bias")?,
        })
    }

    /// `(input size, hidden size)`.
    fn dims(&self) -> Result<(usize, usize)> {
        let &[h, four_h] = self.recurrent_weights.shape() else {
            return Err(Error::shape("recurrent weights must be [h, 4h]"));
        };
        if four_h != 4 * h {
            return Err(Error::shape(format!(
                "recurrent weights must be square per gate, got [{h}, {four_h}]"
            )));
        }
        let &[n, cols] = self.input_weights.shape() else {
            return Err(Error::shape("input weights must be [in, 4h]"));
        };
        if cols != 4 * h {
            return Err(Error::shape(format!(
                "input weights have {cols} columns, expected {}",
                4 * h
            )));
        }
        self.bias.expect_shape(&[4 * h])?;
        Ok((n, h))
    }
}

/// Applies the gate nonlinearities in place to a `[.., 4h]` pre-activation
/// row.
fn activate_gates(row: &mut [f64], h: usize) {
    for (j, v) in row.iter_mut().enumerate() {
        *v = if (2 * h..3 * h).contains(&j) {
            v.tanh()
        } else {
            sigmoid(*v)
        };
    }
}

/// One time step for a batch: `x_t` is `[B, in]`, states are `[B, h]`.
/// Returns `(h_t, c_t)`.
pub fn lstm_cell_step(
    x_t: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
    p: &LstmLayerParams<'_>,
) -> Result<(Tensor, Tensor)> {
    let (n, h) = p.dims()?;
    let b = x_t.len() / n.max(1);
    if x_t.len() != b * n || h_prev.len() != b * h || c_prev.len() != b * h {
        return Err(Error::shape(format!(
            "cell step expects [B, {n}] input and [B, {h}] states"
        )));
    }
    let mut z = dense(&x_t.clone().reshape(&[b, n])?, p.input_weights, p.bias)?.into_data();
    gemm(
        1.0,
        MatRef::new(h_prev.data(), b, h),
        MatRef::new(p.recurrent_weights.data(), h, 4 * h),
        1.0,
        MatMut::new(&mut z, b, 4 * h),
    );
    let mut h_t = vec![0.0; b * h];
    let mut c_t = vec![0.0; b * h];
    for r in 0..b {
        let g = &mut z[r * 4 * h..(r + 1) * 4 * h];
        activate_gates(g, h);
        for j in 0..h {
            let c = g[j] * c_prev.data()[r * h + j] + g[h + j] * g[2 * h + j];
            c_t[r * h + j] = c;
            h_t[r * h + j] = g[3 * h + j] * c.tanh();
        }
    }
    Ok((Tensor::new(vec![b, h], h_t)?, Tensor::new(vec![b, h], c_t)?))
}

/// Cached activations of one layer over a whole sequence.
pub struct LayerTrace {
    batch: usize,
    steps: usize,
    hidden: usize,
    /// Post-activation gates, `[B, T, 4h]`.
    gates: Vec<f64>,
    /// Cell states, `[B, T, h]`.
    cells: Vec<f64>,
    /// Hidden states, `[B, T, h]`; the next layer's input.
    pub output: Tensor,
}

/// Runs one layer over `[B, T, in]` from zero state.
pub fn lstm_layer_forward(x: &Tensor, p: &LstmLayerParams<'_>) -> Result<LayerTrace> {
    let (n, h) = p.dims()?;
    let (b, t, c) = x.as_sequence_batch()?;
    if c != n {
        return Err(Error::shape(format!("lstm layer expects {n} inputs, got {c}")));
    }
    let g4 = 4 * h;
    // Input contribution for all steps at once.
    let mut gates = dense(x, p.input_weights, p.bias)?.into_data();
    let mut cells = vec![0.0; b * t * h];
    let mut hs = vec![0.0; b * t * h];
    for step in 0..t {
        if step > 0 {
            gemm(
                1.0,
                MatRef::strided(&hs[(step - 1) * h..], b, h, t * h, 1),
                MatRef::new(p.recurrent_weights.data(), h, g4),
                1.0,
                MatMut::strided(&mut gates[step * g4..], b, g4, t * g4, 1),
            );
        }
        for r in 0..b {
            let base = (r * t + step) * g4;
            let g = &mut gates[base..base + g4];
            activate_gates(g, h);
            for j in 0..h {
                let prev = if step > 0 {
                    cells[(r * t + step - 1) * h + j]
                } else {
                    0.0
                };
                let cv = g[j] * prev + g[h + j] * g[2 * h + j];
                cells[(r * t + step) * h + j] = cv;
                hs[(r * t + step) * h + j] = g[3 * h + j] * cv.tanh();
            }
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = h;
    Ok(LayerTrace {
        batch: b,
        steps: t,
        hidden: h,
        gates,
        cells,
        output: Tensor::new(shape, hs)?,
    })
}

/// Backpropagation through time for one layer. `d_output` is the upstream
/// gradient of every hidden state. Parameter keys: `input_weights`,
/// `recurrent_weights`, `bias`; `input` is the gradient of `x`.
pub fn lstm_layer_backward(
    x: &Tensor,
    p: &LstmLayerParams<'_>,
    trace: &LayerTrace,
    d_output: &Tensor,
) -> Result<crate::kernels::LayerGrads> {
    let (n, h) = p.dims()?;
    let (b, t) = (trace.batch, trace.steps);
    d_output.expect_shape(trace.output.shape())?;
    let g4 = 4 * h;
    let hs = trace.output.data();
    let mut dz = vec![0.0; b * t * g4];
    let mut dh_next = vec![0.0; b * h];
    let mut dc_next = vec![0.0; b * h];
    for step in (0..t).rev() {
        for r in 0..b {
            let gi = (r * t + step) * g4;
            let g = &trace.gates[gi..gi + g4];
            let d = &mut dz[gi..gi + g4];
            for j in 0..h {
                let si = (r * t + step) * h + j;
                let (f, i, cand, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = trace.cells[si].tanh();
                let c_prev = if step > 0 { trace.cells[si - h] } else { 0.0 };
                let dh = d_output.data()[si] + dh_next[r * h + j];
                let dc = dc_next[r * h + j] + dh * o * (1.0 - tc * tc);
                d[j] = dc * c_prev * f * (1.0 - f);
                d[h + j] = dc * cand * i * (1.0 - i);
                d[2 * h + j] = dc * i * (1.0 - cand * cand);
                d[3 * h + j] = dh * tc * o * (1.0 - o);
                dc_next[r * h + j] = dc * f;
            }
        }
        // dh_{t-1} = dz_t · Kᵀ
        gemm(
            1.0,
            MatRef::strided(&dz[step * g4..], b, g4, t * g4, 1),
            MatRef::new(p.recurrent_weights.data(), h, g4).t(),
            0.0,
            MatMut::new(&mut dh_next, b, h),
        );
    }

    // h_{t-1} for every step, zero at t = 0.
    let mut h_prev = vec![0.0; b * t * h];
    for r in 0..b {
        for step in 1..t {
            let dst = (r * t + step) * h;
            let src = (r * t + step - 1) * h;
            h_prev[dst..dst + h].copy_from_slice(&hs[src..src + h]);
        }
    }
    let rows = b * t;
    let mut d_k = vec![0.0; h * g4];
    gemm(
        1.0,
        MatRef::new(&h_prev, rows, h).t(),
        MatRef::new(&dz, rows, g4),
        0.0,
        MatMut::new(&mut d_k, h, g4),
    );
    let dz_tensor = Tensor::new(vec![rows, g4], dz)?;
    let x_rows = x.clone().reshape(&[rows, n])?;
    let mut input_part = dense_backward(&x_rows, p.input_weights, &dz_tensor)?;

    let mut params = std::collections::BTreeMap::new();
    params.insert("input_weights".to_string(), input_part.take("weight")?);
    params.insert("recurrent_weights".to_string(), Tensor::new(vec![h, g4], d_k)?);
    params.insert("bias".to_string(), input_part.take("bias")?);
    Ok(crate::kernels::LayerGrads {
        params,
        input: input_part.input.reshape(x.shape())?,
    })
}

pub fn init_params(config: &LstmConfig, seed: u64) -> Result<Params> {
    config.validate()?;
    let mut rng = rng_for(seed, stream::INIT, 0);
    let mut params = Params::new();
    for (l, (n, h)) in config.layer_dims().enumerate() {
        params.insert(
            format!("layer{l}.input_weights"),
            glorot_uniform(&[n, 4 * h], n, 4 * h, &mut rng),
        );
        params.insert(
            format!("layer{l}.recurrent_weights"),
            glorot_uniform(&[h, 4 * h], h, 4 * h, &mut rng),
        );
        params.insert(format!("layer{l}.bias"), Tensor::zeros(&[4 * h]));
    }
    let top = *config.hidden_sizes.last().expect("validated");
    params.insert("head.weight", glorot_uniform(&[top, 1], top, 1, &mut rng));
    params.insert("head.bias", Tensor::zeros(&[1]));
    Ok(params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub config: LstmConfig,
    pub params: Params,
    pub scaler: FeatureScaler,
}

struct Forward {
    traces: Vec<LayerTrace>,
    last: Tensor,
    logits: Vec<f64>,
}

impl Lstm {
    pub fn new(config: LstmConfig, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        let scaler = FeatureScaler::identity(config.input_size);
        Ok(Self { config, params, scaler })
    }

    pub fn zeros(config: LstmConfig) -> Result<Self> {
        let mut net = Self::new(config, 0)?;
        for (_, t) in net.params.iter_mut() {
            t.fill(0.0);
        }
        Ok(net)
    }

    pub fn from_parts(config: LstmConfig, params: Params, scaler: FeatureScaler) -> Result<Self> {
        init_params(&config, 0)?.expect_layout(&params)?;
        Ok(Self { config, params, scaler })
    }

    fn forward(&self, x: &Tensor) -> Result<Forward> {
        let (b, t, c) = x.as_sequence_batch()?;
        if c != self.config.input_size {
            return Err(Error::shape(format!(
                "lstm expects {} input channels, got {c}",
                self.config.input_size
            )));
        }
        let mut traces: Vec<LayerTrace> = Vec::with_capacity(self.config.hidden_sizes.len());
        for l in 0..self.config.hidden_sizes.len() {
            let p = LstmLayerParams::from_params(&self.params, l)?;
            let input = traces.last().map_or(x, |tr| &tr.output);
            let trace = lstm_layer_forward(input, &p)?;
            traces.push(trace);
        }
        let top = traces.last().expect("validated");
        let h = top.hidden;
        let mut last = Vec::with_capacity(b * h);
        for r in 0..b {
            let start = (r * t + t - 1) * h;
            last.extend_from_slice(&top.output.data()[start..start + h]);
        }
        let last = Tensor::new(vec![b, h], last)?;
        let logits = dense(&last, self.params.get("head.weight")?, self.params.get("head.bias")?)?.into_data();
        Ok(Forward { traces, last, logits })
    }

    pub fn logits(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.logits)
    }

    fn backward(&self, x: &Tensor, fwd: &Forward, d_logits: &[f64]) -> Result<Params> {
        let b = d_logits.len();
        let mut grads = Params::new();
        let d_out = Tensor::new(vec![b, 1], d_logits.to_vec())?;
        let mut head = dense_backward(&fwd.last, self.params.get("head.weight")?, &d_out)?;
        grads.insert("head.weight", head.take("weight")?);
        grads.insert("head.bias", head.take("bias")?);

        let top = fwd.traces.last().expect("validated");
        let (t, h) = (top.steps, top.hidden);
        let mut d_h = Tensor::zeros(top.output.shape());
        for r in 0..b {
            let start = (r * t + t - 1) * h;
            d_h.data_mut()[start..start + h].copy_from_slice(&head.input.data()[r * h..(r + 1) * h]);
        }
        for l in (0..fwd.traces.len()).rev() {
            let p = LstmLayerParams::from_params(&self.params, l)?;
            let input = if l == 0 { x } else { &fwd.traces[l - 1].output };
            let lg = lstm_layer_backward(input, &p, &fwd.traces[l], &d_h)?;
            for (name, g) in lg.params {
                grads.insert(format!("layer{l}.{name}"), g);
            }
            d_h = lg.input;
        }
        Ok(grads)
    }

    pub fn predict_batch(&self, raw: &Tensor) -> Result<Vec<f64>> {
        let x = self.scaler.transform(raw)?;
        Ok(self.logits(&x)?.into_iter().map(sigmoid).collect())
    }

    pub fn predict(&self, window: &FeatureWindow) -> Result<f64> {
        let x = window.to_tensor();
        let shape = [1, x.dim(0), x.dim(1)];
        Ok(self.predict_batch(&x.reshape(&shape)?)?[0])
    }
}

impl Trainable for Lstm {
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
