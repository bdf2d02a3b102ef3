use serde::{Deserialize, Serialize};

use crate::params::ParamStore;
use crate::scalar::Float;

/// Linear warmup to `base`, then constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup: u64,
}

impl LrSchedule {
    pub fn at(&self, step: u64) -> f64 {
        lr_at(self.base, self.warmup, step)
    }
}

pub fn lr_at(base: f64, warmup: u64, step: u64) -> f64 {
    if warmup == 0 {
        return base;
    }
    base * (step as f64 / warmup as f64).min(1.0)
}

/// Adam moments, one buffer per parameter, and the update counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T: Float> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of updates applied so far.
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Float> AdamState<T> {
    pub fn new(store: &ParamStore<T>) -> Self {
        Self::with_betas(store, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(store: &ParamStore<T>, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = || store.iter().map(|(_, t)| vec![T::zero(); t.numel()]).collect();
        AdamState { beta1, beta2, eps, step: 0, m: zeros(), v: zeros() }
    }
}

/// One bias-corrected Adam update. Parameters without a gradient keep their
/// value and moments.
pub fn adam_step<T: Float>(
    store: &mut ParamStore<T>,
    grads: &[Option<Vec<T>>],
    state: &mut AdamState<T>,
    lr: f64,
) {
    assert_eq!(grads.len(), store.len(), "one gradient slot per parameter");
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, tensor) in store.tensors_mut().iter_mut().enumerate() {
        let Some(g) = &grads[i] else { continue };
        if !tensor.requires_grad {
            continue;
        }
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..g.len() {
            let gj = g[j].as_f64();
            let mj = b1 * m[j].as_f64() + (1.0 - b1) * gj;
            let vj = b2 * v[j].as_f64() + (1.0 - b2) * gj * gj;
            m[j] = T::from_f64(mj);
            v[j] = T::from_f64(vj);
            let update = lr * (mj / c1) / ((vj / c2).sqrt() + state.eps);
            tensor.data[j] -= T::from_f64(update);
        }
    }
}
