use crate::error::{Error, Result};
use crate::nn::{Gradients, Network, ParamKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2 coefficient, applied to conv and dense weights only.
    pub weight_decay: f64,
}

/// First/second moment estimates aligned with the trainable tensors of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        let shapes: Vec<usize> = net
            .param_specs()
            .iter()
            .filter(|s| s.kind.trainable())
            .map(|s| s.numel())
            .collect();
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    /// `θ ← θ − lr · m̂ / (√v̂ + ε)` with bias-corrected moments.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients, hp: &AdamHyper) -> Result<()> {
        let grads = grads.tensors();
        let mut params = net.trainable_mut();
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::Shape("gradient record does not match the network".into()));
        }
        for ((_, p), (g, m)) in params.iter().zip(grads.iter().zip(&self.m)) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(Error::Shape(
                    "gradient tensor does not match its parameter".into(),
                ));
            }
        }
        self.t += 1;
        let c1 = 1.0 - hp.beta1.powi(self.t as i32);
        let c2 = 1.0 - hp.beta2.powi(self.t as i32);
        for (((kind, p), g), (m, v)) in params
            .iter_mut()
            .zip(&grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let decay = if *kind == ParamKind::Weight {
                hp.weight_decay
            } else {
                0.0
            };
            for i in 0..p.len() {
                let g = g[i] + decay * p[i];
                m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
                v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
            }
        }
        Ok(())
    }
}
