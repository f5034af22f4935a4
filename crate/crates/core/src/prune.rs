//! Structured channel pruning by L1 kernel scores.
//!
//! Each conv output kernel `j` is scored by `s_j = Σ_i Σ_k |w[j][i][k]|`.
//! The highest-scoring kernels of every conv layer are kept, and a smaller
//! network is rebuilt with channel-aligned slices: the kept rows of conv `l`,
//! the matching BN entries, the matching input columns of conv `l+1`, and the
//! matching dense input columns for the last block (GAP preserves channel
//! identity).

use serde::{Deserialize, Serialize};

use crate::data::SignalDataset;
use crate::error::{Error, Result};
use crate::nn::{init_unchecked_widths, BatchNorm1d, Conv1d, ConvBlock, Dense, Network, Tensor3};
use crate::train::{train, TrainConfig, TrainHistory};

pub const DEFAULT_RATIO: f64 = 0.5;

/// L1 norm of each output kernel's `(c_in, k)` slab; bias excluded.
pub fn kernel_scores(conv: &Conv1d) -> Vec<f64> {
    (0..conv.c_out)
        .map(|j| conv.kernel(j).iter().map(|w| w.abs()).sum())
        .collect()
}

pub fn keep_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).ceil() as usize).clamp(1, n.max(1))
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config(format!("retention ratio {ratio} not in (0, 1]")));
    }
    Ok(())
}

/// Indices of the `max(1, ⌈ratio·n⌉)` highest scores, ties going to the
/// lower index, returned ascending.
pub fn select_keep(scores: &[f64], ratio: f64) -> Result<Vec<usize>> {
    check_ratio(ratio)?;
    if scores.is_empty() {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut keep = order[..keep_count(scores.len(), ratio)].to_vec();
    keep.sort_unstable();
    Ok(keep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDecision {
    pub scores: Vec<f64>,
    pub keep: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneDecision {
    pub ratio: f64,
    pub layers: Vec<LayerDecision>,
}

impl PruneDecision {
    pub fn original_widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.scores.len()).collect()
    }

    pub fn pruned_widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.keep.len()).collect()
    }
}

/// Score every conv layer and keep the same fraction of each.
pub fn decide(net: &Network, ratio: f64) -> Result<PruneDecision> {
    check_ratio(ratio)?;
    let layers = net
        .blocks
        .iter()
        .map(|b| {
            let scores = kernel_scores(&b.conv);
            let keep = select_keep(&scores, ratio)?;
            Ok(LayerDecision { scores, keep })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PruneDecision { ratio, layers })
}

fn pick<T: Copy>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i]).collect()
}

fn slice_conv(conv: &Conv1d, in_keep: &[usize], out_keep: &[usize]) -> Result<Conv1d> {
    let k = conv.k;
    let mut weight = Vec::with_capacity(out_keep.len() * in_keep.len() * k);
    for &o in out_keep {
        let slab = conv.kernel(o);
        for &i in in_keep {
            weight.extend_from_slice(&slab[i * k..(i + 1) * k]);
        }
    }
    Conv1d::new(
        in_keep.len(),
        out_keep.len(),
        k,
        weight,
        pick(&conv.bias, out_keep),
    )
}

fn slice_bn(bn: &BatchNorm1d, keep: &[usize]) -> BatchNorm1d {
    BatchNorm1d {
        gamma: pick(&bn.gamma, keep),
        beta: pick(&bn.beta, keep),
        running_mean: pick(&bn.running_mean, keep),
        running_var: pick(&bn.running_var, keep),
        momentum: bn.momentum,
        eps: bn.eps,
    }
}

/// Build the smaller network that keeps exactly the channels in `decision`.
pub fn rebuild_pruned(net: &Network, decision: &PruneDecision) -> Result<Network> {
    net.check_consistency()?;
    if decision.layers.len() != net.blocks.len() {
        return Err(Error::Decision(format!(
            "decision covers {} conv layers, network has {}",
            decision.layers.len(),
            net.blocks.len()
        )));
    }
    for (l, (layer, blk)) in decision.layers.iter().zip(&net.blocks).enumerate() {
        if layer.keep.is_empty() {
            return Err(Error::Config(format!("conv layer {} keeps no kernels", l + 1)));
        }
        if let Some(&bad) = layer.keep.iter().find(|&&j| j >= blk.conv.c_out) {
            return Err(Error::Decision(format!(
                "conv layer {} has {} kernels, index {bad} out of range",
                l + 1,
                blk.conv.c_out
            )));
        }
        if !layer.keep.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Decision(format!(
                "conv layer {} keep set must be strictly increasing",
                l + 1
            )));
        }
    }

    let mut blocks = Vec::with_capacity(net.blocks.len());
    let mut in_keep: Vec<usize> = vec![0];
    for (blk, layer) in net.blocks.iter().zip(&decision.layers) {
        blocks.push(ConvBlock {
            conv: slice_conv(&blk.conv, &in_keep, &layer.keep)?,
            bn: slice_bn(&blk.bn, &layer.keep),
            dropout: blk.dropout,
        });
        in_keep = layer.keep.clone();
    }
    let d = &net.dense;
    let mut weight = Vec::with_capacity(d.k * in_keep.len());
    for row in d.weight.chunks(d.c_in) {
        weight.extend(in_keep.iter().map(|&i| row[i]));
    }
    let dense = Dense::new(in_keep.len(), d.k, weight, d.bias.clone())?;
    let pruned = Network {
        blocks,
        dense,
        input_len: net.input_len,
    };
    pruned.check_consistency()?;
    Ok(pruned)
}

/// Kernels retained, as a percentage of the original conv kernel count.
pub fn retention_rate(original: &Network, pruned: &Network) -> f64 {
    100.0 * pruned.kernel_count() as f64 / original.kernel_count() as f64
}

/// Copy of `net` in which every pruned channel is cut off from the rest of
/// the network by zeroing the weights that consume it. Shares no code with
/// [`rebuild_pruned`], so the two can check each other.
pub fn mask_pruned_channels(net: &Network, decision: &PruneDecision) -> Result<Network> {
    if decision.layers.len() != net.blocks.len() {
        return Err(Error::Decision("decision does not cover every conv layer".into()));
    }
    let mut masked = net.clone();
    for (l, layer) in decision.layers.iter().enumerate() {
        let c_out = net.blocks[l].conv.c_out;
        let dropped: Vec<usize> = (0..c_out).filter(|j| !layer.keep.contains(j)).collect();
        if let Some(next) = masked.blocks.get_mut(l + 1) {
            let (c_in, k) = (next.conv.c_in, next.conv.k);
            for o in 0..next.conv.c_out {
                for &j in &dropped {
                    let start = (o * c_in + j) * k;
                    next.conv.weight[start..start + k].fill(0.0);
                }
            }
        } else {
            let d = &mut masked.dense;
            for o in 0..d.k {
                for &j in &dropped {
                    d.weight[o * d.c_in + j] = 0.0;
                }
            }
        }
    }
    Ok(masked)
}

/// Largest absolute eval-mode logit difference between the rebuilt network
/// and the masked original over `inputs`.
pub fn masked_equivalence_gap(
    original: &Network,
    pruned: &Network,
    decision: &PruneDecision,
    inputs: &Tensor3,
) -> Result<f64> {
    let masked = mask_pruned_channels(original, decision)?;
    let a = masked.logits(inputs)?;
    let b = pruned.logits(inputs)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone)]
pub struct PruneOutcome {
    pub decision: PruneDecision,
    /// The rebuilt network before any retraining.
    pub rebuilt: Network,
    pub retrained: Network,
    pub history: TrainHistory,
}

/// Score the trained `net`, rebuild it at `ratio` and retrain with the same
/// configuration. With `reinit`, retraining starts from fresh weights of the
/// pruned shape instead of the surviving ones.
pub fn prune_and_retrain(
    net: &Network,
    train_ds: &SignalDataset,
    val_ds: &SignalDataset,
    cfg: &TrainConfig,
    ratio: f64,
    reinit: bool,
) -> Result<PruneOutcome> {
    let decision = decide(net, ratio)?;
    let rebuilt = rebuild_pruned(net, &decision)?;
    let start = if reinit {
        init_unchecked_widths(&rebuilt.architecture(), cfg.seed)?
    } else {
        rebuilt.clone()
    };
    let (retrained, history) = train(start, train_ds, val_ds, cfg)?;
    Ok(PruneOutcome {
        decision,
        rebuilt,
        retrained,
        history,
    })
}
