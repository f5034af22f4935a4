use serde::{Deserialize, Serialize};

use super::tensor::Tensor3;
use crate::error::{Error, Result};

/// Stride-1 1D convolution with symmetric same-padding.
///
/// Cross-correlation convention: `out[o][l] = b[o] + Σ_i Σ_t w[o][i][t] · x[i][l + t − k/2]`,
/// with out-of-range input positions read as zero. Weights are stored
/// `(c_out, c_in, k)` row-major so that one output kernel is a contiguous slab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn new(c_in: usize, c_out: usize, k: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if c_in == 0 || c_out == 0 {
            return Err(Error::Config("conv channels must be positive".into()));
        }
        if k.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel width {k} must be odd")));
        }
        if weight.len() != c_out * c_in * k || bias.len() != c_out {
            return Err(Error::Shape(format!(
                "conv ({c_out}, {c_in}, {k}) got {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            c_in,
            c_out,
            k,
            weight,
            bias,
        })
    }

    pub fn padding(&self) -> usize {
        self.k / 2
    }

    /// The `(c_in, k)` weight slab of output kernel `o`.
    pub fn kernel(&self, o: usize) -> &[f64] {
        let n = self.c_in * self.k;
        &self.weight[o * n..(o + 1) * n]
    }

    #[inline]
    fn w(&self, o: usize, i: usize, t: usize) -> f64 {
        self.weight[(o * self.c_in + i) * self.k + t]
    }

    /// Output range `lo..lo + n` whose input position `l + t − pad` lies in
    /// `[0, len)`, together with the input offset of `lo`.
    #[inline]
    fn valid(&self, t: usize, len: usize) -> Option<(usize, usize, usize)> {
        let pad = self.padding();
        let lo = pad.saturating_sub(t);
        let hi = (len + pad).saturating_sub(t).min(len);
        (hi > lo).then(|| (lo, hi - lo, lo + t - pad))
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != self.c_in {
            return Err(Error::Shape(format!(
                "conv expects {} input channels, got {}",
                self.c_in,
                x.channels()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check_input(x)?;
        let (batch, _, len) = x.shape();
        let mut out = Tensor3::zeros(batch, self.c_out, len);
        for b in 0..batch {
            for o in 0..self.c_out {
                let lane = out.lane_mut(b, o);
                lane.fill(self.bias[o]);
                for i in 0..self.c_in {
                    let src = x.lane(b, i);
                    for t in 0..self.k {
                        let Some((lo, n, shift)) = self.valid(t, len) else {
                            continue;
                        };
                        let w = self.w(o, i, t);
                        for (y, xv) in lane[lo..lo + n].iter_mut().zip(&src[shift..shift + n]) {
                            *y += w * xv;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Gradients of the forward map given the upstream gradient `grad_out`.
    pub fn backward(&self, x: &Tensor3, grad_out: &Tensor3) -> Result<(Tensor3, ConvGrads)> {
        self.check_input(x)?;
        let (batch, _, len) = x.shape();
        if grad_out.shape() != (batch, self.c_out, len) {
            return Err(Error::Shape(format!(
                "conv grad_out {:?}, expected {:?}",
                grad_out.shape(),
                (batch, self.c_out, len)
            )));
        }
        let mut grad_x = Tensor3::zeros(batch, self.c_in, len);
        let mut gw = vec![0.0; self.weight.len()];
        let mut gb = vec![0.0; self.c_out];
        for b in 0..batch {
            for o in 0..self.c_out {
                let g = grad_out.lane(b, o);
                gb[o] += g.iter().sum::<f64>();
                for i in 0..self.c_in {
                    let src = x.lane(b, i);
                    for t in 0..self.k {
                        let Some((lo, n, shift)) = self.valid(t, len) else {
                            continue;
                        };
                        let hi = lo + n;
                        let widx = (o * self.c_in + i) * self.k + t;
                        gw[widx] += g[lo..hi]
                            .iter()
                            .zip(&src[shift..shift + n])
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                        let w = self.weight[widx];
                        let dst = grad_x.lane_mut(b, i);
                        for (dx, gv) in dst[shift..shift + n].iter_mut().zip(&g[lo..hi]) {
                            *dx += w * gv;
                        }
                    }
                }
            }
        }
        Ok((grad_x, ConvGrads { weight: gw, bias: gb }))
    }
}
