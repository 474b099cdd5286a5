//! Dense tensors, differentiable primitives, gradient checking and AdaDelta.

mod adadelta;
pub mod gradcheck;
pub mod ops;
mod tensor;

pub use adadelta::{adadelta_step, AdaDeltaConfig, AdaDeltaState};
pub use gradcheck::{grad_check, grad_check_coords, relative_error, GradCheckReport};
pub use tensor::Tensor;

use std::collections::HashMap;

/// Anything that owns a set of named tensors that can be optimized.
pub trait Parameterized {
    /// Visits every trainable tensor in a stable order.
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor));

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |_, t| out.extend_from_slice(t.data()));
        out
    }

    /// Overwrites all trainable tensors from a vector produced by [`flatten`](Self::flatten).
    fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.visit_mut(&mut |_, t| {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        });
        assert_eq!(offset, flat.len(), "flat parameter vector has the wrong length");
    }

    fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.len());
        n
    }
}

/// Gradients keyed by parameter identifier.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    entries: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    /// Zero gradients with the names and shapes of `params`.
    pub fn zeros_for(params: &impl Parameterized) -> Self {
        let mut g = Self::new();
        params.visit(&mut |name, t| g.insert(name, t.zeros_like()));
        g
    }

    /// Copies the trainable tensors of a parameter-shaped gradient holder.
    pub fn from_params(holder: &impl Parameterized) -> Self {
        let mut g = Self::new();
        holder.visit(&mut |name, t| g.insert(name, t.clone()));
        g
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) {
        if let Some(&i) = self.index.get(name) {
            self.entries[i].1 = tensor;
        } else {
            self.index.insert(name.to_string(), self.entries.len());
            self.entries.push((name.to_string(), tensor));
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in &mut self.entries {
            t.scale(factor);
        }
    }

    /// Adds `other` entry-wise; missing entries are inserted.
    pub fn accumulate(&mut self, other: &Gradients) -> crate::Result<()> {
        for (name, t) in other.iter() {
            match self.get_mut(name) {
                Some(mine) => mine.add_assign(t)?,
                None => self.insert(name, t.clone()),
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.is_finite())
    }
}

impl Parameterized for Gradients {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        for (n, t) in &self.entries {
            f(n, t);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (n, t) in &mut self.entries {
            f(n, t);
        }
    }
}
