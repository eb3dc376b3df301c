use std::collections::BTreeMap;

use super::LayerGrads;
use crate::error::{Error, Result};
use crate::tensor::{gemm, MatMut, MatRef, Tensor};

/// Zero-padding scheme along the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// `(K-1)*dilation` zeros on the left; output at `t` sees inputs `<= t`.
    Causal,
    /// Split evenly on both sides (left gets the floor).
    Same,
}

impl Padding {
    fn left(self, kernel_size: usize, dilation: usize) -> usize {
        let span = (kernel_size - 1) * dilation;
        match self {
            Padding::Causal => span,
            Padding::Same => span / 2,
        }
    }
}

struct ConvGeometry {
    batch: usize,
    steps: usize,
    c_in: usize,
    c_out: usize,
    taps: usize,
    dilation: usize,
    left: usize,
}

fn geometry(input: &Tensor, kernel: &Tensor, dilation: usize, padding: Padding) -> Result<ConvGeometry> {
    let (batch, steps, c_in) = input.as_sequence_batch()?;
    let &[taps, k_in, c_out] = kernel.shape() else {
        return Err(Error::shape(format!(
            "conv kernel must be [K, Cin, Cout], got {:?}",
            kernel.shape()
        )));
    };
    if k_in != c_in {
        return Err(Error::shape(format!(
            "conv kernel expects {k_in} input channels, input has {c_in}"
        )));
    }
    if dilation == 0 {
        return Err(Error::shape("dilation must be >= 1"));
    }
    Ok(ConvGeometry {
        batch,
        steps,
        c_in,
        c_out,
        taps,
        dilation,
        left: padding.left(taps, dilation),
    })
}

/// Unrolls the padded taps into a `[B*T, K*Cin]` matrix.
fn im2col(input: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let width = g.taps * g.c_in;
    let mut col = vec![0.0; g.batch * g.steps * width];
    for b in 0..g.batch {
        let seq = &input[b * g.steps * g.c_in..(b + 1) * g.steps * g.c_in];
        for t in 0..g.steps {
            let row = &mut col[(b * g.steps + t) * width..(b * g.steps + t + 1) * width];
            for k in 0..g.taps {
                let src = (t + k * g.dilation).checked_sub(g.left);
                if let Some(src) = src.filter(|&s| s < g.steps) {
                    row[k * g.c_in..(k + 1) * g.c_in].copy_from_slice(&seq[src * g.c_in..(src + 1) * g.c_in]);
                }
            }
        }
    }
    col
}

fn col2im(col: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let width = g.taps * g.c_in;
    let mut out = vec![0.0; g.batch * g.steps * g.c_in];
    for b in 0..g.batch {
        let seq = &mut out[b * g.steps * g.c_in..(b + 1) * g.steps * g.c_in];
        for t in 0..g.steps {
            let row = &col[(b * g.steps + t) * width..(b * g.steps + t + 1) * width];
            for k in 0..g.taps {
                let src = (t + k * g.dilation).checked_sub(g.left);
                if let Some(src) = src.filter(|&s| s < g.steps) {
                    for (dst, v) in seq[src * g.c_in..(src + 1) * g.c_in]
                        .iter_mut()
                        .zip(&row[k * g.c_in..(k + 1) * g.c_in])
                    {
                        *dst += v;
                    }
                }
            }
        }
    }
    out
}

fn output_shape(input: &Tensor, c_out: usize) -> Vec<usize> {
    let mut shape = input.shape().to_vec();
    *shape.last_mut().expect("sequence tensor") = c_out;
    shape
}

/// 1-D convolution over time. `kernel` is `[K, Cin, Cout]`; output keeps the
/// input length.
pub fn conv1d(input: &Tensor, kernel: &Tensor, bias: &Tensor, dilation: usize, padding: Padding) -> Result<Tensor> {
    let g = geometry(input, kernel, dilation, padding)?;
    bias.expect_shape(&[g.c_out])?;
    let rows = g.batch * g.steps;
    let col = im2col(input.data(), &g);
    let mut out = Vec::with_capacity(rows * g.c_out);
    for _ in 0..rows {
        out.extend_from_slice(bias.data());
    }
    gemm(
        1.0,
        MatRef::new(&col, rows, g.taps * g.c_in),
        MatRef::new(kernel.data(), g.taps * g.c_in, g.c_out),
        1.0,
        MatMut::new(&mut out, rows, g.c_out),
    );
    Tensor::new(output_shape(input, g.c_out), out)
}

/// Dilated causal convolution: left zero-padding of `(K-1)*dilation`.
pub fn conv1d_causal(input: &Tensor, kernel: &Tensor, bias: &Tensor, dilation: usize) -> Result<Tensor> {
    conv1d(input, kernel, bias, dilation, Padding::Causal)
}

/// Gradients of [`conv1d`]; parameter keys are `kernel` and `bias`.
pub fn conv1d_backward(
    input: &Tensor,
    kernel: &Tensor,
    dilation: usize,
    padding: Padding,
    upstream: &Tensor,
) -> Result<LayerGrads> {
    let g = geometry(input, kernel, dilation, padding)?;
    upstream.expect_shape(&output_shape(input, g.c_out))?;
    let rows = g.batch * g.steps;
    let width = g.taps * g.c_in;
    let col = im2col(input.data(), &g);
    let up = MatRef::new(upstream.data(), rows, g.c_out);

    let mut d_kernel = vec![0.0; width * g.c_out];
    gemm(
        1.0,
        MatRef::new(&col, rows, width).t(),
        up,
        0.0,
        MatMut::new(&mut d_kernel, width, g.c_out),
    );

    let mut d_bias = vec![0.0; g.c_out];
    for row in upstream.data().chunks_exact(g.c_out) {
        for (acc, v) in d_bias.iter_mut().zip(row) {
            *acc += v;
        }
    }

    let mut d_col = vec![0.0; rows * width];
    gemm(
        1.0,
        up,
        MatRef::new(kernel.data(), width, g.c_out).t(),
        0.0,
        MatMut::new(&mut d_col, rows, width),
    );
    let d_input = col2im(&d_col, &g);

    let mut params = BTreeMap::new();
    params.insert("kernel".to_string(), Tensor::new(kernel.shape().to_vec(), d_kernel)?);
    params.insert("bias".to_string(), Tensor::new(vec![g.c_out], d_bias)?);
    Ok(LayerGrads {
        params,
        input: Tensor::new(input.shape().to_vec(), d_input)?,
    })
}

pub fn conv1d_causal_backward(
    input: &Tensor,
    kernel: &Tensor,
    dilation: usize,
    upstream: &Tensor,
) -> Result<LayerGrads> {
    conv1d_backward(input, kernel, dilation, Padding::Causal, upstream)
}
