use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Gradients, Parameterized, Tensor};

/// Decay and conditioning constants. There is no learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaDeltaConfig {
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for AdaDeltaConfig {
    fn default() -> Self {
        Self {
            rho: 0.95,
            epsilon: 1e-6,
        }
    }
}

/// Running averages `E[g²]` and `E[Δx²]` for every parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaDeltaState {
    config: AdaDeltaConfig,
    slots: Vec<Slot>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
struct Slot {
    name: String,
    sq_grad: Tensor,
    sq_update: Tensor,
}

impl AdaDeltaState {
    /// Zero accumulators shaped like the trainable tensors of `params`.
    pub fn new(config: AdaDeltaConfig, params: &impl Parameterized) -> Result<Self> {
        if !(config.rho > 0.0 && config.rho < 1.0) || config.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "AdaDelta needs 0 < rho < 1 and epsilon > 0, got {config:?}"
            )));
        }
        let mut state = Self {
            config,
            slots: Vec::new(),
            index: HashMap::new(),
        };
        params.visit(&mut |name, t| {
            state.index.insert(name.to_string(), state.slots.len());
            state.slots.push(Slot {
                name: name.to_string(),
                sq_grad: t.zeros_like(),
                sq_update: t.zeros_like(),
            });
        });
        Ok(state)
    }

    pub fn config(&self) -> AdaDeltaConfig {
        self.config
    }

    /// `E[g²]` for a parameter.
    pub fn sq_grad(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.slots[i].sq_grad)
    }

    /// `E[Δx²]` for a parameter.
    pub fn sq_update(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.slots[i].sq_update)
    }

    /// `(name, E[g²], E[Δx²])` for every slot, in registration order.
    pub fn slots(&self) -> impl Iterator<Item = (&str, &Tensor, &Tensor)> {
        self.slots
            .iter()
            .map(|s| (s.name.as_str(), &s.sq_grad, &s.sq_update))
    }

    /// Replaces both accumulators of a slot; shapes must match.
    pub fn restore_slot(&mut self, name: &str, sq_grad: Tensor, sq_update: Tensor) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::Precondition(format!("no optimizer slot named {name}")))?;
        let slot = &mut self.slots[i];
        if slot.sq_grad.shape() != sq_grad.shape() || slot.sq_update.shape() != sq_update.shape() {
            return Err(Error::ShapeMismatch {
                op: "restore_slot",
                left: slot.sq_grad.shape().to_vec(),
                right: sq_grad.shape().to_vec(),
            });
        }
        slot.sq_grad = sq_grad;
        slot.sq_update = sq_update;
        Ok(())
    }

    /// Applies one update. Gradients missing for a parameter count as zero.
    ///
    /// A non-finite gradient aborts the step before anything is modified.
    pub fn step(&mut self, params: &mut impl Parameterized, grads: &Gradients) -> Result<()> {
        for (name, g) in grads.iter() {
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of {name}")));
            }
        }
        let mut problem = None;
        params.visit(&mut |name, t| {
            if problem.is_some() {
                return;
            }
            match self.index.get(name) {
                None => problem = Some(Error::Precondition(format!("no optimizer slot for {name}"))),
                Some(&i) if self.slots[i].sq_grad.shape() != t.shape() => {
                    problem = Some(Error::ShapeMismatch {
                        op: "adadelta_step",
                        left: self.slots[i].sq_grad.shape().to_vec(),
                        right: t.shape().to_vec(),
                    })
                }
                Some(_) => {}
            }
            if let Some(g) = grads.get(name) {
                if g.shape() != t.shape() && problem.is_none() {
                    problem = Some(Error::ShapeMismatch {
                        op: "adadelta_step",
                        left: t.shape().to_vec(),
                        right: g.shape().to_vec(),
                    });
                }
            }
        });
        if let Some(e) = problem {
            return Err(e);
        }

        let AdaDeltaConfig { rho, epsilon } = self.config;
        let slots = &mut self.slots;
        let index = &self.index;
        params.visit_mut(&mut |name, t| {
            let slot = &mut slots[index[name]];
            let sq_g = slot.sq_grad.data_mut();
            let sq_dx = slot.sq_update.data_mut();
            match grads.get(name) {
                Some(g) => {
                    for (((x, &gi), eg), edx) in t
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(sq_g.iter_mut())
                        .zip(sq_dx.iter_mut())
                    {
                        *eg = rho * *eg + (1.0 - rho) * gi * gi;
                        let dx = -((*edx + epsilon).sqrt() / (*eg + epsilon).sqrt()) * gi;
                        *edx = rho * *edx + (1.0 - rho) * dx * dx;
                        *x += dx;
                    }
                }
                None => {
                    // zero gradient: no movement, both averages decay
                    sq_g.iter_mut().for_each(|v| *v *= rho);
                    sq_dx.iter_mut().for_each(|v| *v *= rho);
                }
            }
        });
        Ok(())
    }
}

/// Free-function form of [`AdaDeltaState::step`].
pub fn adadelta_step(
    params: &mut impl Parameterized,
    grads: &Gradients,
    state: &mut AdaDeltaState,
) -> Result<()> {
    state.step(params, grads)
}
