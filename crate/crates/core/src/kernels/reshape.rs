use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Concatenates two `[B, T, C]` tensors along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ba, ta, ca) = a.as_sequence_batch()?;
    let (bb, tb, cb) = b.as_sequence_batch()?;
    if (ba, ta) != (bb, tb) || a.rank() != b.rank() {
        return Err(Error::shape(format!(
            "cannot concat {:?} with {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut values = Vec::with_capacity(a.len() + b.len());
    for (ra, rb) in a.data().chunks_exact(ca).zip(b.data().chunks_exact(cb)) {
        values.extend_from_slice(ra);
        values.extend_from_slice(rb);
    }
    let mut shape = a.shape().to_vec();
    *shape.last_mut().unwrap() = ca + cb;
    Tensor::new(shape, values)
}

/// Inverse of [`concat_channels`]: splits off the first `first` channels.
pub fn split_channels(x: &Tensor, first: usize) -> Result<(Tensor, Tensor)> {
    let (_, _, c) = x.as_sequence_batch()?;
    if first == 0 || first >= c {
        return Err(Error::shape(format!("cannot split {c} channels at {first}")));
    }
    let rows = x.len() / c;
    let mut left = Vec::with_capacity(rows * first);
    let mut right = Vec::with_capacity(rows * (c - first));
    for row in x.data().chunks_exact(c) {
        left.extend_from_slice(&row[..first]);
        right.extend_from_slice(&row[first..]);
    }
    let mut ls = x.shape().to_vec();
    let mut rs = x.shape().to_vec();
    *ls.last_mut().unwrap() = first;
    *rs.last_mut().unwrap() = c - first;
    Ok((Tensor::new(ls, left)?, Tensor::new(rs, right)?))
}

/// Zero-pads the time axis at the end up to `steps`.
pub fn pad_time(x: &Tensor, steps: usize) -> Result<Tensor> {
    let (batch, t, c) = x.as_sequence_batch()?;
    if steps < t {
        return Err(Error::shape(format!("cannot pad {t} steps down to {steps}")));
    }
    let mut values = vec![0.0; batch * steps * c];
    for b in 0..batch {
        values[b * steps * c..(b * steps + t) * c].copy_from_slice(&x.data()[b * t * c..(b + 1) * t * c]);
    }
    let mut shape = x.shape().to_vec();
    let axis = shape.len() - 2;
    shape[axis] = steps;
    Tensor::new(shape, values)
}

/// Keeps the first `steps` time steps.
pub fn crop_time(x: &Tensor, steps: usize) -> Result<Tensor> {
    let (batch, t, c) = x.as_sequence_batch()?;
    if steps == 0 || steps > t {
        return Err(Error::shape(format!("cannot crop {t} steps to {steps}")));
    }
    let mut values = Vec::with_capacity(batch * steps * c);
    for b in 0..batch {
        values.extend_from_slice(&x.data()[b * t * c..(b * t + steps) * c]);
    }
    let mut shape = x.shape().to_vec();
    let axis = shape.len() - 2;
    shape[axis] = steps;
    Tensor::new(shape, values)
}
