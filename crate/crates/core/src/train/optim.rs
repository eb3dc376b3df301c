use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const RMSPROP_RHO: f64 = 0.9;
pub const OPTIMIZER_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Rmsprop,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Rmsprop => "rmsprop",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" => Ok(OptimizerKind::Rmsprop),
            other => Err(Error::config("optimizer", format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Adam update of one tensor; `t` is the 1-based step.
pub fn adam_step(theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, t: u64) {
    let c1 = 1.0 - ADAM_BETA1.powf(t as f64);
    let c2 = 1.0 - ADAM_BETA2.powf(t as f64);
    for (((p, &g), m), v) in theta.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + OPTIMIZER_EPS);
    }
}

/// `v <- rho v + (1 - rho) g^2;  theta <- theta - lr g / sqrt(v + eps)`.
pub fn rmsprop_step(theta: &mut [f64], grad: &[f64], v: &mut [f64], lr: f64) {
    for ((p, &g), v) in theta.iter_mut().zip(grad).zip(v.iter_mut()) {
        *v = RMSPROP_RHO * *v + (1.0 - RMSPROP_RHO) * g * g;
        *p -= lr * g / (*v + OPTIMIZER_EPS).sqrt();
    }
}

/// Moment buffers for every parameter tensor plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub step: u64,
    /// Adam first moment; empty for RMSprop.
    pub first_moment: Params,
    pub second_moment: Params,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &Params) -> Self {
        let first_moment = match kind {
            OptimizerKind::Adam => params.zeros_like(),
            OptimizerKind::Rmsprop => Params::new(),
        };
        Self {
            kind,
            learning_rate,
            step: 0,
            first_moment,
            second_moment: params.zeros_like(),
        }
    }

    /// Applies one update to every tensor in `params`.
    pub fn apply(&mut self, params: &mut Params, grads: &Params) -> Result<()> {
        params.expect_layout(grads)?;
        self.step += 1;
        for (name, p) in params.iter_mut() {
            let g = grads.get(name)?.data();
            let v = self.second_moment.get_mut(name)?.data_mut();
            match self.kind {
                OptimizerKind::Adam => {
                    let m = self.first_moment.get_mut(name)?.data_mut();
                    adam_step(p.data_mut(), g, m, v, self.learning_rate, self.step);
                }
                OptimizerKind::Rmsprop => rmsprop_step(p.data_mut(), g, v, self.learning_rate),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use proptest::prelude::*;

    #[test]
    fn adam_first_step_moves_by_lr() {
        let (mut p, mut m, mut v) = ([0.0], [0.0], [0.0]);
        adam_step(&mut p, &[1.0], &mut m, &mut v, 0.1, 1);
        assert!((p[0] + 0.1).abs() < 1e-6);
    }

    #[test]
    fn rmsprop_first_step() {
        let (mut p, mut v) = ([0.0], [0.0]);
        rmsprop_step(&mut p, &[1.0], &mut v, 0.1);
        assert!((v[0] - 0.1).abs() < 1e-15);
        assert!((p[0] + 0.1 / 0.1f64.sqrt()).abs() < 1e-6);
        assert!((p[0] + 0.3162).abs() < 1e-4);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = Params::new();
        params.insert("w", Tensor::from_fn(&[3], |i| i as f64));
        let before = params.clone();
        let grads = params.zeros_like();
        for kind in [OptimizerKind::Adam, OptimizerKind::Rmsprop] {
            let mut state = OptimizerState::new(kind, 0.01, &params);
            state.apply(&mut params, &grads).unwrap();
            assert_eq!(params, before);
        }
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let mut params = Params::new();
        params.insert("w", Tensor::zeros(&[2]));
        let mut grads = Params::new();
        grads.insert("v", Tensor::zeros(&[2]));
        let mut state = OptimizerState::new(OptimizerKind::Adam, 0.01, &params);
        assert!(state.apply(&mut params, &grads).is_err());
    }

    proptest! {
        #[test]
        fn rmsprop_first_update_is_bounded(g in -1e3f64..1e3, lr in 1e-5f64..1.0) {
            let (mut p, mut v) = ([0.0], [0.0]);
            rmsprop_step(&mut p, &[g], &mut v, lr);
            let bound = lr / (1.0 - RMSPROP_RHO).sqrt();
            prop_assert!(p[0].abs() <= bound * (1.0 + 1e-12));
            prop_assert!(p[0].is_finite());
        }

        #[test]
        fn adam_steps_stay_finite(gs in prop::collection::vec(-1e6f64..1e6, 1..20)) {
            let (mut p, mut m, mut v) = ([0.5], [0.0], [0.0]);
            for (t, g) in gs.iter().enumerate() {
                adam_step(&mut p, &[*g], &mut m, &mut v, 1e-3, t as u64 + 1);
                prop_assert!(p[0].is_finite() && m[0].is_finite() && v[0].is_finite());
            }
        }
    }
}
