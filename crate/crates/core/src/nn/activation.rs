use rand::{Rng, RngCore};

use super::tensor::Tensor3;
use crate::error::{Error, Result};

pub fn relu(x: &Tensor3) -> Tensor3 {
    x.map(|v| v.max(0.0))
}

/// Masks `grad_out` by `z > 0`; the subgradient at zero is zero.
pub fn relu_backward(z: &Tensor3, grad_out: &Tensor3) -> Result<Tensor3> {
    z.same_shape(grad_out, "relu grad_out")?;
    let data = z
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
        .collect();
    Tensor3::from_vec(z.batch(), z.channels(), z.len(), data)
}

/// Inverted dropout mask: each entry is `0` with probability `p`, else `1/(1−p)`.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    scale: Vec<f64>,
}

impl DropoutMask {
    /// Draws one uniform per element. `p == 0` yields an all-ones mask
    /// without consuming randomness.
    pub fn sample(shape: (usize, usize, usize), p: f64, rng: &mut dyn RngCore) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout rate {p} not in [0, 1)")));
        }
        let n = shape.0 * shape.1 * shape.2;
        if p == 0.0 {
            return Ok(Self { scale: vec![1.0; n] });
        }
        let keep = 1.0 / (1.0 - p);
        let scale = (0..n)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        Ok(Self { scale })
    }

    pub fn apply(&self, x: &Tensor3) -> Result<Tensor3> {
        if self.scale.len() != x.data().len() {
            return Err(Error::Shape("dropout mask does not match input".into()));
        }
        let data = x.data().iter().zip(&self.scale).map(|(v, s)| v * s).collect();
        Tensor3::from_vec(x.batch(), x.channels(), x.len(), data)
    }

    /// The map is linear, so backward applies the same mask.
    pub fn backward(&self, grad_out: &Tensor3) -> Result<Tensor3> {
        self.apply(grad_out)
    }

    pub fn kept_fraction(&self) -> f64 {
        self.scale.iter().filter(|&&s| s != 0.0).count() as f64 / self.scale.len().max(1) as f64
    }
}

/// Row-wise softmax over `k` logits per row, max-subtracted.
pub fn softmax(logits: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        out.extend(row.iter().map(|z| (z - max).exp()));
        let sum: f64 = out[start..].iter().sum();
        out[start..].iter_mut().for_each(|v| *v /= sum);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(v: &[f64]) -> Tensor3 {
        Tensor3::from_vec(1, 1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn relu_definition() {
        assert_eq!(relu(&t(&[-1.0, 0.0, 2.0])).data(), &[0.0, 0.0, 2.0]);
        let nonneg = t(&[0.0, 1.5, 3.0]);
        assert_eq!(relu(&nonneg), nonneg);
        let g = relu_backward(&t(&[-1.0, 0.0, 2.0]), &t(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn relu_matches_finite_differences_away_from_zero() {
        let z = t(&[-0.7, 0.3, 1.9, -2.2]);
        let g = relu_backward(&z, &t(&[1.0; 4])).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let (mut p, mut m) = (z.clone(), z.clone());
            p.data_mut()[i] += h;
            m.data_mut()[i] -= h;
            let fd = (relu(&p).data()[i] - relu(&m).data()[i]) / (2.0 * h);
            assert!((fd - g.data()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_rate_dropout_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = t(&[1.0, -2.0, 3.0]);
        let mask = DropoutMask::sample(x.shape(), 0.0, &mut rng).unwrap();
        assert_eq!(mask.apply(&x).unwrap(), x);
        assert!(DropoutMask::sample(x.shape(), 1.0, &mut rng).is_err());
    }

    #[test]
    fn dropout_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let x = Tensor3::from_vec(1, 1, n, vec![1.0; n]).unwrap();
        let mask = DropoutMask::sample(x.shape(), 0.5, &mut rng).unwrap();
        assert!((mask.kept_fraction() - 0.5).abs() < 0.002);
        let y = mask.apply(&x).unwrap();
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn dropout_is_seed_deterministic() {
        let shape = (2, 3, 5);
        let a = DropoutMask::sample(shape, 0.3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = DropoutMask::sample(shape, 0.3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.scale, b.scale);
    }

    #[test]
    fn softmax_properties() {
        assert_eq!(softmax(&[0.0; 4], 4), vec![0.25; 4]);
        let a = softmax(&[0.1, -1.3, 2.2], 3);
        let b = softmax(&[100.1, 98.7, 102.2], 3);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let big = softmax(&[1000.0, 0.0], 2);
        assert!(big.iter().all(|v| v.is_finite()));
        assert_eq!(big[0], 1.0);
        // exp(-1000) underflows f64; the exact value is ~5e-435
        assert!(big[1] < 1e-300);
    }
}
