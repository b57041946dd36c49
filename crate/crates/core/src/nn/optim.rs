use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

use super::model::{Gradients, MlpModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Descent,
    Ascent,
}

/// Hyperparameters of SGD with momentum and weight decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// `(epoch, multiplier)`: from `epoch` on (1-based), the rate is multiplied
    /// by `multiplier`. Multipliers compound.
    pub lr_schedule: Vec<(usize, f64)>,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_schedule: Vec::new(),
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(config_err!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(config_err!("momentum {} outside [0,1)", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(config_err!("weight decay must be non-negative"));
        }
        if let Some(&(_, m)) = self.lr_schedule.iter().find(|(_, m)| !(*m > 0.0 && m.is_finite())) {
            return Err(config_err!("learning-rate multiplier {m} must be positive"));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (1-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr_schedule
            .iter()
            .filter(|(e, _)| *e <= epoch)
            .fold(self.learning_rate, |lr, (_, m)| lr * m)
    }
}

/// SGD state: hyperparameters, current learning rate and the momentum buffer.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub config: SgdConfig,
    learning_rate: f64,
    velocity: Gradients,
}

impl OptimizerState {
    pub fn new(config: SgdConfig, model: &MlpModel) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            learning_rate: config.learning_rate,
            velocity: Gradients::zeros_like(model),
            config,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn velocity(&self) -> &Gradients {
        &self.velocity
    }

    /// Applies the schedule for `epoch`.
    pub fn set_epoch(&mut self, epoch: usize) {
        self.learning_rate = self.config.lr_at(epoch);
    }

    /// One parameter update.
    ///
    /// Descent: `v ← μ·v + (g + λ·w)`, `w ← w − lr·v`.
    /// Ascent: `w ← w + lr·g`, leaving the momentum buffer untouched and
    /// skipping weight decay.
    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients, direction: Direction) -> Result<()> {
        if !grads.matches(model) || self.velocity.weights.len() != model.weights.len() {
            return Err(crate::error::dim_err!("gradient shapes do not match the model"));
        }
        if !grads.is_finite() {
            return Err(Error::Numeric("non-finite gradient entry".into()));
        }
        let lr = self.learning_rate;
        let mu = self.config.momentum;
        let wd = self.config.weight_decay;
        let layers = model.weights.iter_mut().zip(model.biases.iter_mut());
        let grad_layers = grads.weights.iter().zip(&grads.biases);
        let vel_layers = self.velocity.weights.iter_mut().zip(self.velocity.biases.iter_mut());
        for ((w, b), ((gw, gb), (vw, vb))) in layers.zip(grad_layers.zip(vel_layers)) {
            let params = w.data_mut().iter_mut().chain(b.iter_mut());
            let g = gw.data().iter().chain(gb.iter());
            let v = vw.data_mut().iter_mut().chain(vb.iter_mut());
            match direction {
                Direction::Descent => {
                    for ((p, &g), v) in params.zip(g).zip(v) {
                        *v = mu * *v + g + wd * *p;
                        *p -= lr * *v;
                    }
                }
                Direction::Ascent => {
                    for (p, &g) in params.zip(g) {
                        *p += lr * g;
                    }
                }
            }
        }
        model.version += 1;
        Ok(())
    }
}
