use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn with_steps(input: &Tensor, steps: usize) -> Vec<usize> {
    let mut shape = input.shape().to_vec();
    let axis = shape.len() - 2;
    shape[axis] = steps;
    shape
}

/// Max-pool output together with the flat input index each element came from.
#[derive(Debug, Clone)]
pub struct MaxPoolOutput {
    pub output: Tensor,
    pub argmax: Vec<usize>,
}

/// Non-overlapping max pooling over time; trailing `T % pool` steps are dropped.
pub fn maxpool1d_with_indices(input: &Tensor, pool: usize) -> Result<MaxPoolOutput> {
    let (batch, steps, channels) = input.as_sequence_batch()?;
    if pool == 0 || steps < pool {
        return Err(Error::shape(format!(
            "max-pool of size {pool} needs at least {pool} steps, got {steps}"
        )));
    }
    let out_steps = steps / pool;
    let data = input.data();
    let mut values = Vec::with_capacity(batch * out_steps * channels);
    let mut argmax = Vec::with_capacity(values.capacity());
    for b in 0..batch {
        for o in 0..out_steps {
            for c in 0..channels {
                let mut best = (b * steps + o * pool) * channels + c;
                for k in 1..pool {
                    let idx = (b * steps + o * pool + k) * channels + c;
                    // strict comparison keeps the first maximal index on ties
                    if data[idx] > data[best] {
                        best = idx;
                    }
                }
                values.push(data[best]);
                argmax.push(best);
            }
        }
    }
    Ok(MaxPoolOutput {
        output: Tensor::new(with_steps(input, out_steps), values)?,
        argmax,
    })
}

pub fn maxpool1d(input: &Tensor, pool: usize) -> Result<Tensor> {
    maxpool1d_with_indices(input, pool).map(|p| p.output)
}

/// Routes each upstream element to the input position that won the max.
pub fn maxpool1d_backward(upstream: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor> {
    if upstream.len() != argmax.len() {
        return Err(Error::shape("max-pool upstream does not match its forward output"));
    }
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    for (&idx, &u) in argmax.iter().zip(upstream.data()) {
        g[idx] += u;
    }
    Ok(grad)
}

/// Nearest-neighbour upsampling: every time step is repeated `factor` times.
pub fn upsample1d(input: &Tensor, factor: usize) -> Result<Tensor> {
    let (batch, steps, channels) = input.as_sequence_batch()?;
    if factor == 0 {
        return Err(Error::shape("upsample factor must be >= 1"));
    }
    let mut values = Vec::with_capacity(input.len() * factor);
    for b in 0..batch {
        for t in 0..steps {
            let row = &input.data()[(b * steps + t) * channels..(b * steps + t + 1) * channels];
            for _ in 0..factor {
                values.extend_from_slice(row);
            }
        }
    }
    Tensor::new(with_steps(input, steps * factor), values)
}

pub fn upsample1d_backward(upstream: &Tensor, factor: usize) -> Result<Tensor> {
    let (batch, up_steps, channels) = upstream.as_sequence_batch()?;
    if factor == 0 || up_steps % factor != 0 {
        return Err(Error::shape(format!(
            "upsample gradient length {up_steps} is not a multiple of {factor}"
        )));
    }
    let steps = up_steps / factor;
    let mut grad = Tensor::zeros(&with_steps(upstream, steps));
    let g = grad.data_mut();
    for b in 0..batch {
        for t in 0..up_steps {
            let dst = (b * steps + t / factor) * channels;
            let src = (b * up_steps + t) * channels;
            for c in 0..channels {
                g[dst + c] += upstream.data()[src + c];
            }
        }
    }
    Ok(grad)
}
