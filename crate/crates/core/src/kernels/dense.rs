use std::collections::BTreeMap;

use super::LayerGrads;
use crate::error::{Error, Result};
use crate::tensor::{gemm, MatMut, MatRef, Tensor};

fn rows_of(input: &Tensor, weight: &Tensor) -> Result<(usize, usize, usize)> {
    let &[n, m] = weight.shape() else {
        return Err(Error::shape(format!(
            "dense weight must be [n, m], got {:?}",
            weight.shape()
        )));
    };
    let last = *input.shape().last().expect("tensor rank >= 1");
    if last != n {
        return Err(Error::shape(format!(
            "dense expects trailing dim {n}, got {:?}",
            input.shape()
        )));
    }
    Ok((input.len() / n, n, m))
}

/// `output = input · weight + bias` applied over the trailing axis.
pub fn dense(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (rows, n, m) = rows_of(input, weight)?;
    bias.expect_shape(&[m])?;
    let mut out = Vec::with_capacity(rows * m);
    for _ in 0..rows {
        out.extend_from_slice(bias.data());
    }
    gemm(
        1.0,
        MatRef::new(input.data(), rows, n),
        MatRef::new(weight.data(), n, m),
        1.0,
        MatMut::new(&mut out, rows, m),
    );
    let mut shape = input.shape().to_vec();
    *shape.last_mut().unwrap() = m;
    Tensor::new(shape, out)
}

/// Gradients of [`dense`]; parameter keys are `weight` and `bias`.
pub fn dense_backward(input: &Tensor, weight: &Tensor, upstream: &Tensor) -> Result<LayerGrads> {
    let (rows, n, m) = rows_of(input, weight)?;
    if upstream.len() != rows * m {
        return Err(Error::shape(format!(
            "dense upstream has {} values, expected {}",
            upstream.len(),
            rows * m
        )));
    }
    let up = MatRef::new(upstream.data(), rows, m);
    let mut d_weight = vec![0.0; n * m];
    gemm(
        1.0,
        MatRef::new(input.data(), rows, n).t(),
        up,
        0.0,
        MatMut::new(&mut d_weight, n, m),
    );
    let mut d_bias = vec![0.0; m];
    for row in upstream.data().chunks_exact(m) {
        for (acc, v) in d_bias.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let mut d_input = vec![0.0; rows * n];
    gemm(
        1.0,
        up,
        MatRef::new(weight.data(), n, m).t(),
        0.0,
        MatMut::new(&mut d_input, rows, n),
    );
    let mut params = BTreeMap::new();
    params.insert("weight".to_string(), Tensor::new(vec![n, m], d_weight)?);
    params.insert("bias".to_string(), Tensor::new(vec![m], d_bias)?);
    Ok(LayerGrads {
        params,
        input: Tensor::new(input.shape().to_vec(), d_input)?,
    })
}
