//! Named parameter storage and binding onto a tape.

use std::collections::BTreeMap;
use std::rc::Rc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::array::Array;
use crate::error::{NnError, Result};
use crate::tape::{Gradients, Tape, Tensor};

/// Trainable parameters plus non-trainable buffers (batch-norm running
/// statistics), both keyed by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Array>,
    buffers: BTreeMap<String, Array>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array) {
        self.params.insert(name.into(), value);
    }

    pub fn insert_buffer(&mut self, name: impl Into<String>, value: Array) {
        self.buffers.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Result<&Array> {
        self.params
            .get(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array> {
        self.params
            .get_mut(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn buffer(&self, name: &str) -> Result<&Array> {
        self.buffers
            .get(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn buffer_mut(&mut self, name: &str) -> Result<&mut Array> {
        self.buffers
            .get_mut(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn params(&self) -> impl Iterator<Item = (&String, &Array)> {
        self.params.iter()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = (&String, &mut Array)> {
        self.params.iter_mut()
    }

    pub fn buffers(&self) -> impl Iterator<Item = (&String, &Array)> {
        self.buffers.iter()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.values().map(Array::len).sum()
    }

    /// Records every parameter as a differentiable leaf on `tape`.
    pub fn bind(&self, tape: &Rc<Tape>) -> ParamVars {
        ParamVars {
            tape: Rc::clone(tape),
            vars: self
                .params
                .iter()
                .map(|(k, v)| (k.clone(), tape.leaf(v.clone())))
                .collect(),
        }
    }

    /// Records every parameter as a constant (inference).
    pub fn bind_frozen(&self, tape: &Rc<Tape>) -> ParamVars {
        ParamVars {
            tape: Rc::clone(tape),
            vars: self
                .params
                .iter()
                .map(|(k, v)| (k.clone(), tape.constant(v.clone())))
                .collect(),
        }
    }
}

/// Parameters of one forward pass as tape tensors.
pub struct ParamVars {
    tape: Rc<Tape>,
    vars: BTreeMap<String, Tensor>,
}

impl ParamVars {
    pub fn tape(&self) -> &Rc<Tape> {
        &self.tape
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.vars
            .get(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    /// Extracts parameter gradients; parameters that did not influence the
    /// output get zeros.
    pub fn gradients(&self, grads: &mut Gradients) -> BTreeMap<String, Array> {
        self.vars
            .iter()
            .map(|(k, t)| {
                let g = grads.take(t).unwrap_or_else(|| Array::zeros(&t.shape()));
                (k.clone(), g)
            })
            .collect()
    }
}

/// He-normal initialisation with standard deviation `sqrt(2 / fan_in)`.
pub fn he_normal<R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Array {
    scaled_normal(shape, (2.0 / fan_in.max(1) as f64).sqrt(), rng)
}

pub fn scaled_normal<R: Rng>(shape: &[usize], std: f64, rng: &mut R) -> Array {
    let dist = Normal::new(0.0, std).expect("finite std");
    let n: usize = shape.iter().product();
    Array::from_vec(shape, (0..n).map(|_| dist.sample(rng)).collect()).expect("shape")
}
