use crate::error::{Error, Result};

/// Probabilities are floored at this value inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean negative log-likelihood over the batch and its gradient with respect
/// to the logits, `(probs − onehot) / B`, for flat `(B, k)` softmax outputs.
pub fn cross_entropy(probs: &[f64], labels: &[usize], k: usize) -> Result<(f64, Vec<f64>)> {
    if k == 0 || probs.len() != labels.len() * k {
        return Err(Error::Shape(format!(
            "{} probabilities for {} labels and {k} classes",
            probs.len(),
            labels.len()
        )));
    }
    let batch = labels.len() as f64;
    let mut loss = 0.0;
    let mut grad = probs.to_vec();
    for (row, (&y, g)) in probs.chunks(k).zip(labels.iter().zip(grad.chunks_mut(k))) {
        if y >= k {
            return Err(Error::Label { label: y, classes: k });
        }
        // f64::max would swallow a NaN probability
        loss -= if row[y].is_nan() {
            f64::NAN
        } else {
            row[y].max(PROB_FLOOR).ln()
        };
        g[y] -= 1.0;
        g.iter_mut().for_each(|v| *v /= batch);
    }
    Ok((loss / batch, grad))
}
