use super::tensor::Tensor3;
use crate::error::{Error, Result};

pub const POOL_WIDTH: usize = 2;

/// Non-overlapping max pooling of width [`POOL_WIDTH`]; an odd tail is dropped.
///
/// Returns the pooled tensor and, for each output element, the flat input
/// index of its window's maximum (first index on ties).
pub fn maxpool1d(x: &Tensor3) -> (Tensor3, Vec<usize>) {
    let (batch, channels, len) = x.shape();
    let out_len = len / POOL_WIDTH;
    let mut out = Tensor3::zeros(batch, channels, out_len);
    let mut argmax = Vec::with_capacity(batch * channels * out_len);
    for b in 0..batch {
        for c in 0..channels {
            let base = x.idx(b, c, 0);
            let src = x.lane(b, c);
            let dst = out.lane_mut(b, c);
            for (j, y) in dst.iter_mut().enumerate() {
                let start = j * POOL_WIDTH;
                let mut best = start;
                for i in start + 1..start + POOL_WIDTH {
                    if src[i] > src[best] {
                        best = i;
                    }
                }
                *y = src[best];
                argmax.push(base + best);
            }
        }
    }
    (out, argmax)
}

pub fn maxpool1d_backward(
    input_shape: (usize, usize, usize),
    argmax: &[usize],
    grad_out: &Tensor3,
) -> Result<Tensor3> {
    if argmax.len() != grad_out.data().len() {
        return Err(Error::Shape(
            "max-pool grad_out does not match cached argmax".into(),
        ));
    }
    let (b, c, l) = input_shape;
    let mut grad_x = Tensor3::zeros(b, c, l);
    let gx = grad_x.data_mut();
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        gx[i] += g;
    }
    Ok(grad_x)
}

/// Global average pooling: `(B, C, L) → (B, C, 1)`.
pub fn gap(x: &Tensor3) -> Result<Tensor3> {
    let (batch, channels, len) = x.shape();
    if len == 0 {
        return Err(Error::Shape("global average pooling over zero length".into()));
    }
    let mut out = Tensor3::zeros(batch, channels, 1);
    for b in 0..batch {
        for c in 0..channels {
            out.lane_mut(b, c)[0] = x.lane(b, c).iter().sum::<f64>() / len as f64;
        }
    }
    Ok(out)
}

pub fn gap_backward(input_len: usize, grad_out: &Tensor3) -> Result<Tensor3> {
    let (batch, channels, one) = grad_out.shape();
    if one != 1 || input_len == 0 {
        return Err(Error::Shape(
            "global average pooling grad_out must have length 1".into(),
        ));
    }
    let mut grad_x = Tensor3::zeros(batch, channels, input_len);
    for b in 0..batch {
        for c in 0..channels {
            let g = grad_out.lane(b, c)[0] / input_len as f64;
            grad_x.lane_mut(b, c).fill(g);
        }
    }
    Ok(grad_x)
}
