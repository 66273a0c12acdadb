//! Gradient clipping and the Adam optimizer.

use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamStore};
use crate::scalar::{lit, Scalar};

/// Scales all gradients so their global L2 norm is at most `max_norm`
/// (within floating-point slack 1e-12), preserving direction.
///
/// Norms within one part in 1e12 of the bound are left untouched; a clipped
/// result re-measures inside that band, so the operation is idempotent.
pub fn clip_gradients<S: Scalar>(grads: &mut Gradients<S>, max_norm: S) {
    let norm = grads.global_norm();
    if norm > max_norm * (S::one() + lit(1e-12)) {
        grads.scale(max_norm / norm);
    }
}

/// First/second moment state for bias-corrected Adam.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState<S> {
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
    t: u64,
    beta1: S,
    beta2: S,
    eps: S,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(params: &ParamStore<S>) -> Self {
        AdamState {
            m: (0..params.n_slots())
                .map(|i| vec![S::zero(); params.get(i).len()])
                .collect(),
            v: (0..params.n_slots())
                .map(|i| vec![S::zero(); params.get(i).len()])
                .collect(),
            t: 0,
            beta1: lit(0.9),
            beta2: lit(0.999),
            eps: lit(1e-8),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update of every parameter slot.
    pub fn step(&mut self, params: &mut ParamStore<S>, grads: &Gradients<S>, lr: S) {
        self.t += 1;
        let t = lit::<S>(self.t as f64);
        let bc1 = S::one() - self.beta1.powf(t);
        let bc2 = S::one() - self.beta2.powf(t);
        for slot in 0..params.n_slots() {
            let g = grads.slot(slot);
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            let p = params.get_mut(slot).data_mut();
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (S::one() - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (S::one() - self.beta2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
