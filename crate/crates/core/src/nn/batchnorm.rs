use serde::{Deserialize, Serialize};

use super::tensor::Tensor3;
use crate::error::{Error, Result};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-7;

/// Per-channel batch normalization over the (batch, length) axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm1d {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

/// Values saved by a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Tensor3,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnGrads {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != self.channels() {
            return Err(Error::Shape(format!(
                "batch norm over {} channels got {}",
                self.channels(),
                x.channels()
            )));
        }
        Ok(())
    }

    /// Normalize with batch statistics. Running statistics are not touched;
    /// fold them in with [`BatchNorm1d::absorb`].
    pub fn forward_train(&self, x: &Tensor3) -> Result<(Tensor3, BnCache)> {
        self.check(x)?;
        let (batch, channels, len) = x.shape();
        let count = batch * len;
        if count < 2 {
            return Err(Error::DegenerateBatch(format!(
                "train-mode batch norm needs at least 2 values per channel, got {count}"
            )));
        }
        let n = count as f64;
        let mut mean = vec![0.0; channels];
        let mut var = vec![0.0; channels];
        for c in 0..channels {
            let m = (0..batch).map(|b| x.lane(b, c).iter().sum::<f64>()).sum::<f64>() / n;
            let v = (0..batch)
                .map(|b| x.lane(b, c).iter().map(|v| (v - m) * (v - m)).sum::<f64>())
                .sum::<f64>()
                / n;
            mean[c] = m;
            var[c] = v;
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut xhat = Tensor3::zeros(batch, channels, len);
        let mut out = Tensor3::zeros(batch, channels, len);
        for b in 0..batch {
            for c in 0..channels {
                let src = x.lane(b, c);
                for (h, v) in xhat.lane_mut(b, c).iter_mut().zip(src) {
                    *h = (v - mean[c]) * inv_std[c];
                }
                for (y, h) in out.lane_mut(b, c).iter_mut().zip(xhat.lane(b, c)) {
                    *y = self.gamma[c] * h + self.beta[c];
                }
            }
        }
        Ok((
            out,
            BnCache {
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
            },
        ))
    }

    pub fn forward_eval(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check(x)?;
        let (batch, channels, len) = x.shape();
        let mut out = Tensor3::zeros(batch, channels, len);
        for c in 0..channels {
            let scale = self.gamma[c] / (self.running_var[c] + self.eps).sqrt();
            let shift = self.beta[c] - self.running_mean[c] * scale;
            for b in 0..batch {
                for (y, v) in out.lane_mut(b, c).iter_mut().zip(x.lane(b, c)) {
                    *y = v * scale + shift;
                }
            }
        }
        Ok(out)
    }

    /// `running = (1 − m)·running + m·batch` for mean and variance.
    pub fn absorb(&mut self, batch_mean: &[f64], batch_var: &[f64]) {
        let m = self.momentum;
        for (r, b) in self.running_mean.iter_mut().zip(batch_mean) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, b) in self.running_var.iter_mut().zip(batch_var) {
            *r = (1.0 - m) * *r + m * b;
        }
    }

    pub fn backward(&self, cache: &BnCache, grad_out: &Tensor3) -> Result<(Tensor3, BnGrads)> {
        cache.xhat.same_shape(grad_out, "batch norm grad_out")?;
        let (batch, channels, len) = grad_out.shape();
        let n = (batch * len) as f64;
        let mut grad_x = Tensor3::zeros(batch, channels, len);
        let mut gg = vec![0.0; channels];
        let mut gb = vec![0.0; channels];
        for c in 0..channels {
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for b in 0..batch {
                for (g, h) in grad_out.lane(b, c).iter().zip(cache.xhat.lane(b, c)) {
                    sum_g += g;
                    sum_gx += g * h;
                }
            }
            gb[c] = sum_g;
            gg[c] = sum_gx;
            let mean_g = sum_g / n;
            let mean_gx = sum_gx / n;
            let scale = self.gamma[c] * cache.inv_std[c];
            for b in 0..batch {
                let g = grad_out.lane(b, c);
                let h = cache.xhat.lane(b, c);
                for ((dx, gv), hv) in grad_x.lane_mut(b, c).iter_mut().zip(g).zip(h) {
                    *dx = scale * (gv - mean_g - hv * mean_gx);
                }
            }
        }
        Ok((grad_x, BnGrads { gamma: gg, beta: gb }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_batch_is_a_fixed_point() {
        // per channel: values ±1 over (batch, length) already have mean 0, variance 1
        let x = Tensor3::from_vec(2, 1, 2, vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        let (y, _) = BatchNorm1d::new(1).forward_train(&x).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_channel_maps_to_beta() {
        let mut bn = BatchNorm1d::new(1);
        bn.beta[0] = 0.7;
        let x = Tensor3::from_vec(1, 1, 4, vec![3.0; 4]).unwrap();
        let (y, _) = bn.forward_train(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn single_value_batch_is_rejected_in_train_mode() {
        let x = Tensor3::from_vec(1, 1, 1, vec![1.0]).unwrap();
        assert!(matches!(
            BatchNorm1d::new(1).forward_train(&x),
            Err(Error::DegenerateBatch(_))
        ));
        assert!(BatchNorm1d::new(1).forward_eval(&x).is_ok());
    }

    #[test]
    fn running_stats_follow_momentum() {
        let mut bn = BatchNorm1d::new(1);
        bn.absorb(&[2.0], &[3.0]);
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        assert!((bn.running_var[0] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn eval_uses_running_stats() {
        let mut bn = BatchNorm1d::new(1);
        bn.running_mean[0] = 1.0;
        bn.running_var[0] = 4.0 - bn.eps;
        let x = Tensor3::from_vec(1, 1, 2, vec![1.0, 5.0]).unwrap();
        let y = bn.forward_eval(&x).unwrap();
        assert!((y.data()[0]).abs() < 1e-12);
        assert!((y.data()[1] - 2.0).abs() < 1e-12);
    }
}
