#![allow(dead_code)]

use chanprune::nn::{init_network, Architecture, Network, Tensor3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference step for 64-bit checks.
pub const H: f64 = 1e-5;

/// Relative error with a floor so that near-zero gradients are compared
/// on an absolute scale.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, b: usize, c: usize, l: usize) -> Tensor3 {
    Tensor3::from_vec(b, c, l, random_vec(rng, b * c * l, 1.0)).unwrap()
}

/// `Σ out ⊙ r`, a scalar probe whose gradient with respect to `out` is `r`.
pub fn probe(out: &[f64], r: &[f64]) -> f64 {
    out.iter().zip(r).map(|(a, b)| a * b).sum()
}

/// Central difference of `f` at coordinate `i` of `x`.
pub fn central_diff(x: &mut [f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + H;
    let up = f(x);
    x[i] = orig - H;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * H)
}

/// Small random network with randomized BN affine parameters and running stats.
pub fn random_small_network(
    seed: u64,
    widths: [usize; 3],
    len: usize,
    classes: usize,
    dropout: f64,
) -> Network {
    let arch = Architecture {
        widths,
        kernel: 3,
        dropout,
        input_len: len,
        classes,
    };
    let mut net = init_network(&arch, seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    for blk in &mut net.blocks {
        for b in blk.conv.bias.iter_mut() {
            *b = r.random_range(-0.5..0.5);
        }
        for g in blk.bn.gamma.iter_mut() {
            *g = r.random_range(0.5..1.5);
        }
        for b in blk.bn.beta.iter_mut() {
            *b = r.random_range(-0.5..0.5);
        }
        for m in blk.bn.running_mean.iter_mut() {
            *m = r.random_range(-0.3..0.3);
        }
        for v in blk.bn.running_var.iter_mut() {
            *v = r.random_range(0.5..2.0);
        }
    }
    for b in net.dense.bias.iter_mut() {
        *b = r.random_range(-0.5..0.5);
    }
    net
}
