use serde::{Deserialize, Serialize};

use super::tensor::Tensor3;
use crate::error::{Error, Result};

/// Fully connected head: `logits = W·x + b`, `W` stored `(k, c_in)` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub c_in: usize,
    pub k: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(c_in: usize, k: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != c_in * k || bias.len() != k {
            return Err(Error::Shape(format!(
                "dense ({k}, {c_in}) got {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            c_in,
            k,
            weight,
            bias,
        })
    }

    fn check(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != self.c_in || x.len() != 1 {
            return Err(Error::Shape(format!(
                "dense expects (B, {}, 1), got {:?}",
                self.c_in,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Flat `(B, k)` logits.
    pub fn forward(&self, x: &Tensor3) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut out = Vec::with_capacity(x.batch() * self.k);
        for row in x.data().chunks(self.c_in) {
            for (w, b) in self.weight.chunks(self.c_in).zip(&self.bias) {
                out.push(b + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>());
            }
        }
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor3, grad_logits: &[f64]) -> Result<(Tensor3, DenseGrads)> {
        self.check(x)?;
        if grad_logits.len() != x.batch() * self.k {
            return Err(Error::Shape("dense grad_logits has wrong length".into()));
        }
        let mut grad_x = Tensor3::zeros(x.batch(), self.c_in, 1);
        let mut gw = vec![0.0; self.weight.len()];
        let mut gb = vec![0.0; self.k];
        for (b, (row, g)) in x
            .data()
            .chunks(self.c_in)
            .zip(grad_logits.chunks(self.k))
            .enumerate()
        {
            for (o, &go) in g.iter().enumerate() {
                gb[o] += go;
                let w = &self.weight[o * self.c_in..(o + 1) * self.c_in];
                let dw = &mut gw[o * self.c_in..(o + 1) * self.c_in];
                for i in 0..self.c_in {
                    dw[i] += go * row[i];
                }
                let gx = &mut grad_x.data_mut()[b * self.c_in..(b + 1) * self.c_in];
                for i in 0..self.c_in {
                    gx[i] += go * w[i];
                }
            }
        }
        Ok((grad_x, DenseGrads { weight: gw, bias: gb }))
    }
}
