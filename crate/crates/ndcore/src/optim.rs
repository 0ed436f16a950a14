use serde::{Deserialize, Serialize};

use crate::error::{NdError, Result};
use crate::tensor::Tensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;
pub const RMSPROP_RHO: f64 = 0.9;
/// Global-norm clipping threshold used for all neural training.
pub const CLIP_NORM: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    #[serde(rename = "adam_lr_0.01")]
    AdamLr001,
    Nadam,
    Rmsprop,
    /// Plain gradient descent; not part of the tuned set, used for
    /// convexity checks.
    Sgd,
}

impl OptimizerKind {
    pub const TUNED: [OptimizerKind; 4] = [
        OptimizerKind::Adam,
        OptimizerKind::AdamLr001,
        OptimizerKind::Nadam,
        OptimizerKind::Rmsprop,
    ];

    pub fn default_learning_rate(self) -> f64 {
        match self {
            OptimizerKind::Adam => 0.001,
            OptimizerKind::AdamLr001 => 0.01,
            OptimizerKind::Nadam => 0.002,
            OptimizerKind::Rmsprop => 0.001,
            OptimizerKind::Sgd => 0.1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::AdamLr001 => "adam_lr_0.01",
            OptimizerKind::Nadam => "nadam",
            OptimizerKind::Rmsprop => "rmsprop",
            OptimizerKind::Sgd => "sgd",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = NdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(Self::Adam),
            "adam_lr_0.01" => Ok(Self::AdamLr001),
            "nadam" => Ok(Self::Nadam),
            "rmsprop" => Ok(Self::Rmsprop),
            "sgd" => Ok(Self::Sgd),
            other => Err(NdError::InvalidArgument(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Moment accumulators and step counter for one parameter list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub step: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &[Tensor]) -> Self {
        Self::with_learning_rate(kind, kind.default_learning_rate(), params)
    }

    pub fn with_learning_rate(kind: OptimizerKind, learning_rate: f64, params: &[Tensor]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            kind,
            learning_rate,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    /// Applies one update in place. `trainable`, when given, masks which
    /// parameters are touched; frozen ones keep their accumulators at zero.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], trainable: Option<&[bool]>) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(NdError::InvalidArgument(format!(
                "optimizer got {} params, {} grads, state for {}",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            p.check_same_shape(g, "optimizer_step")?;
        }
        self.step += 1;
        let t = self.step as i32;
        let lr = self.learning_rate;
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if trainable.is_some_and(|m| !m[i]) {
                continue;
            }
            let m = self.first_moment[i].data_mut();
            let v = self.second_moment[i].data_mut();
            let p = p.data_mut();
            let g = g.data();
            match self.kind {
                OptimizerKind::Adam | OptimizerKind::AdamLr001 => {
                    let bc1 = 1.0 - BETA1.powi(t);
                    let bc2 = 1.0 - BETA2.powi(t);
                    for j in 0..p.len() {
                        m[j] = BETA1 * m[j] + (1.0 - BETA1) * g[j];
                        v[j] = BETA2 * v[j] + (1.0 - BETA2) * g[j] * g[j];
                        let m_hat = m[j] / bc1;
                        let v_hat = v[j] / bc2;
                        p[j] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
                    }
                }
                OptimizerKind::Nadam => {
                    // Nesterov momentum folded into the Adam update
                    let bc1 = 1.0 - BETA1.powi(t);
                    let bc1_next = 1.0 - BETA1.powi(t + 1);
                    let bc2 = 1.0 - BETA2.powi(t);
                    for j in 0..p.len() {
                        m[j] = BETA1 * m[j] + (1.0 - BETA1) * g[j];
                        v[j] = BETA2 * v[j] + (1.0 - BETA2) * g[j] * g[j];
                        let m_bar = BETA1 * m[j] / bc1_next + (1.0 - BETA1) * g[j] / bc1;
                        let v_hat = v[j] / bc2;
                        p[j] -= lr * m_bar / (v_hat.sqrt() + EPSILON);
                    }
                }
                OptimizerKind::Rmsprop => {
                    for j in 0..p.len() {
                        v[j] = RMSPROP_RHO * v[j] + (1.0 - RMSPROP_RHO) * g[j] * g[j];
                        p[j] -= lr * g[j] / (v[j].sqrt() + EPSILON);
                    }
                }
                OptimizerKind::Sgd => {
                    for j in 0..p.len() {
                        p[j] -= lr * g[j];
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients by `tau / g` when their global L2 norm `g`
/// exceeds `tau`. Returns the pre-clip norm.
pub fn clip_gradients(grads: &mut [Tensor], tau: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > tau {
        let k = tau / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= k;
            }
        }
    }
    norm
}
