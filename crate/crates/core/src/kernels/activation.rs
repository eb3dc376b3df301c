use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `y`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn activation(input: &Tensor, kind: Activation) -> Tensor {
    input.map(|v| kind.apply(v))
}

/// Backward pass given the forward *output* and the upstream gradient.
pub fn activation_backward(output: &Tensor, upstream: &Tensor, kind: Activation) -> Result<Tensor> {
    upstream.expect_shape(output.shape())?;
    let mut grad = upstream.clone();
    for (g, &y) in grad.data_mut().iter_mut().zip(output.data()) {
        *g *= kind.derivative_from_output(y);
    }
    Ok(grad)
}
