//! Differentiable primitives the three networks are assembled from.
//!
//! Every op comes as a forward function plus a hand-written backward
//! function. Sequence tensors are `[T, C]` or batched `[B, T, C]`, with time
//! on the middle axis and channels last.

mod activation;
mod conv;
mod dense;
mod init;
mod pool;
mod reshape;

use std::collections::BTreeMap;

pub use activation::{activation, activation_backward, sigmoid, Activation};
pub use conv::{conv1d, conv1d_backward, conv1d_causal, conv1d_causal_backward, Padding};
pub use dense::{dense, dense_backward};
pub use init::glorot_uniform;
pub use pool::{maxpool1d, maxpool1d_backward, maxpool1d_with_indices, upsample1d, upsample1d_backward, MaxPoolOutput};
pub use reshape::{concat_channels, crop_time, pad_time, split_channels};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gradients produced by one layer's backward pass.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    /// Parameter gradients keyed by parameter name, shaped like the parameter.
    pub params: BTreeMap<String, Tensor>,
    /// Gradient with respect to the layer input.
    pub input: Tensor,
}

impl LayerGrads {
    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    /// Moves a named gradient out of the map.
    pub fn take(&mut self, name: &str) -> Result<Tensor> {
        self.params
            .remove(name)
            .ok_or_else(|| Error::shape(format!("no gradient named `{name}`")))
    }
}
