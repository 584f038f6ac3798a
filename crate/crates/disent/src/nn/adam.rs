use serde::{Deserialize, Serialize};

use super::Element;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
        }
    }
}

/// Adam with per-tensor first/second moments.
///
/// Tensors are visited in a fixed order each step; moment buffers are
/// allocated lazily on the first step and indexed by visit position, which
/// keeps the optimizer free of any name bookkeeping.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub cfg: AdamConfig,
    pub t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    cursor: usize,
    corr1: T,
    corr2: T,
}

impl<T: Element> AdamState<T> {
    pub fn new(cfg: AdamConfig) -> Self {
        Self {
            cfg,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
            cursor: 0,
            corr1: T::one(),
            corr2: T::one(),
        }
    }

    /// Starts a new optimization step; call before the `update` sequence.
    pub fn begin_step(&mut self) {
        self.t += 1;
        self.cursor = 0;
        let t = self.t as i32;
        self.corr1 = T::from_scalar(1.0 - self.cfg.beta1.powi(t));
        self.corr2 = T::from_scalar(1.0 - self.cfg.beta2.powi(t));
    }

    /// Applies one Adam update to a parameter tensor given its gradient.
    pub fn update(&mut self, param: &mut [T], grad: &[T]) {
        debug_assert_eq!(param.len(), grad.len());
        if self.cursor == self.m.len() {
            self.m.push(vec![T::zero(); param.len()]);
            self.v.push(vec![T::zero(); param.len()]);
        }
        let m = &mut self.m[self.cursor];
        let v = &mut self.v[self.cursor];
        self.cursor += 1;

        let b1 = T::from_scalar(self.cfg.beta1);
        let b2 = T::from_scalar(self.cfg.beta2);
        let one = T::one();
        let lr = T::from_scalar(self.cfg.lr);
        let eps = T::from_scalar(self.cfg.eps);

        for i in 0..param.len() {
            let g = grad[i];
            m[i] = b1 * m[i] + (one - b1) * g;
            v[i] = b2 * v[i] + (one - b2) * g * g;
            let m_hat = m[i] / self.corr1;
            let v_hat = v[i] / self.corr2;
            param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }

    /// Moment buffers in visit order, for checkpointing.
    pub fn moments(&self) -> (&[Vec<T>], &[Vec<T>]) {
        (&self.m, &self.v)
    }

    /// Restores moments saved by [`Self::moments`].
    pub fn restore(&mut self, t: u64, m: Vec<Vec<T>>, v: Vec<Vec<T>>) {
        self.t = t;
        self.m = m;
        self.v = v;
        self.cursor = 0;
    }
}
