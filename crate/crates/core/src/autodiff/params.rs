//! Named trainable parameters and their gradients.
//!
//! Parameters live in slots; logical names map onto slots. Two names may
//! alias the same slot, which is how encoder parameter sharing works: the
//! question- and chain-encoder names point at one tensor and gradients from
//! both uses accumulate there.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Storage for all trainable tensors of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamStore<S> {
    slots: Vec<Tensor<S>>,
    names: BTreeMap<String, usize>,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            slots: Vec::new(),
            names: BTreeMap::new(),
        }
    }

    /// Registers a fresh slot under `name` and returns its index.
    pub fn register(&mut self, name: &str, tensor: Tensor<S>) -> Result<usize> {
        if self.names.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        let slot = self.slots.len();
        self.slots.push(tensor);
        self.names.insert(name.to_string(), slot);
        Ok(slot)
    }

    /// Registers `name` as an alias of an existing slot (parameter sharing).
    pub fn alias(&mut self, name: &str, slot: usize) -> Result<()> {
        if self.names.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        if slot >= self.slots.len() {
            return Err(Error::Config(format!("alias to unknown slot {slot}")));
        }
        self.names.insert(name.to_string(), slot);
        Ok(())
    }

    pub fn slot_of(&self, name: &str) -> Result<usize> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("parameter {name}")))
    }

    pub fn get(&self, slot: usize) -> &Tensor<S> {
        &self.slots[slot]
    }

    pub fn get_mut(&mut self, slot: usize) -> &mut Tensor<S> {
        &mut self.slots[slot]
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    /// Total number of trainable scalars over distinct slots.
    pub fn trainable_len(&self) -> usize {
        self.slots.iter().map(Tensor::len).sum()
    }

    /// Iterates `(name, slot)` pairs in sorted name order.
    pub fn names(&self) -> impl Iterator<Item = (&str, usize)> {
        self.names.iter().map(|(n, s)| (n.as_str(), *s))
    }
}

/// Per-slot gradient buffers aligned with a [`ParamStore`].
///
/// Slots never touched by a backward pass hold zeros.
#[derive(Clone, Debug)]
pub struct Gradients<S> {
    by_slot: Vec<Vec<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros_like(params: &ParamStore<S>) -> Self {
        Gradients {
            by_slot: (0..params.n_slots())
                .map(|i| vec![S::zero(); params.get(i).len()])
                .collect(),
        }
    }

    pub fn slot(&self, slot: usize) -> &[S] {
        &self.by_slot[slot]
    }

    pub fn slot_mut(&mut self, slot: usize) -> &mut [S] {
        &mut self.by_slot[slot]
    }

    pub fn n_slots(&self) -> usize {
        self.by_slot.len()
    }

    /// Global L2 norm over every gradient entry.
    pub fn global_norm(&self) -> S {
        let mut acc = S::zero();
        for g in &self.by_slot {
            for &v in g {
                acc += v * v;
            }
        }
        acc.sqrt()
    }

    /// Multiplies every entry in place.
    pub fn scale(&mut self, factor: S) {
        for g in &mut self.by_slot {
            for v in g.iter_mut() {
                *v *= factor;
            }
        }
    }

    /// `self += other * factor`, used by linearity tests and loss mixing.
    pub fn add_scaled(&mut self, other: &Gradients<S>, factor: S) {
        for (a, b) in self.by_slot.iter_mut().zip(&other.by_slot) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y * factor;
            }
        }
    }
}

/// Deterministic parameter initializer.
///
/// Weights draw from uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
/// Draws are generated in f64 and converted, so a given seed produces the
/// same parameters whatever the scalar type.
pub struct ParamInit {
    rng: ChaCha8Rng,
}

impl ParamInit {
    pub fn new(seed: u64) -> Self {
        ParamInit {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Glorot-uniform tensor with explicit fan counts.
    pub fn glorot<S: Scalar>(&mut self, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<S> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let len: usize = shape.iter().product();
        let data = (0..len)
            .map(|_| lit::<S>(self.rng.gen_range(-bound..bound)))
            .collect();
        Tensor::from_vec(shape, data).expect("shape/len consistent")
    }

    /// Zero-filled tensor (biases).
    pub fn zeros<S: Scalar>(&mut self, shape: &[usize]) -> Tensor<S> {
        Tensor::zeros(shape)
    }
}
