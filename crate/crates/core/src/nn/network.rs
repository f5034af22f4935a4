//! The three-block 1D CNN: `(Conv → BN → ReLU → Dropout → MaxPool) × 3 → GAP → Dense`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::{relu, relu_backward, softmax, DropoutMask};
use super::batchnorm::{BatchNorm1d, BnCache, BnGrads};
use super::conv::{Conv1d, ConvGrads};
use super::dense::{Dense, DenseGrads};
use super::pool::{gap, gap_backward, maxpool1d, maxpool1d_backward};
use super::tensor::Tensor3;
use crate::data::SignalDataset;
use crate::error::{Error, Result};

pub const BLOCKS: usize = 3;

/// Architecture tuple `(c1, c2, c3, k, p_drop, d, K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub widths: [usize; BLOCKS],
    pub kernel: usize,
    pub dropout: f64,
    pub input_len: usize,
    pub classes: usize,
}

impl Architecture {
    pub fn new(input_len: usize, classes: usize) -> Self {
        Self {
            widths: [16, 32, 64],
            kernel: 5,
            dropout: 0.3,
            input_len,
            classes,
        }
    }

    fn validate_common(&self) -> Result<()> {
        if self.widths.contains(&0) {
            return Err(Error::Config("conv widths must be positive".into()));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel width {} must be odd", self.kernel)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if self.input_len >> BLOCKS == 0 {
            return Err(Error::Config(format!(
                "input length {} too short for {BLOCKS} pooling stages",
                self.input_len
            )));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        Ok(())
    }

    /// Fresh architectures must widen block over block; pruned ones need not.
    pub fn validate_fresh(&self) -> Result<()> {
        self.validate_common()?;
        if !self.widths.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(format!(
                "conv widths {:?} must be strictly increasing",
                self.widths
            )));
        }
        Ok(())
    }

    pub fn kernel_count(&self) -> usize {
        self.widths.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub conv: Conv1d,
    pub bn: BatchNorm1d,
    pub dropout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Conv and dense weights; the only tensors that receive weight decay.
    Weight,
    Bias,
    BnAffine,
    /// Running statistics: persisted but not trained.
    BnStat,
}

impl ParamKind {
    pub fn trainable(self) -> bool {
        self != ParamKind::BnStat
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub blocks: Vec<ConvBlock>,
    pub dense: Dense,
    pub input_len: usize,
}

pub enum Mode<'a> {
    Eval,
    /// Batch statistics for BN and fresh dropout masks drawn from the RNG.
    Train(&'a mut dyn RngCore),
}

#[derive(Debug, Clone)]
struct BlockCache {
    input: Tensor3,
    bn: Option<BnCache>,
    /// BN output, i.e. the ReLU pre-activation.
    pre_relu: Tensor3,
    mask: Option<DropoutMask>,
    pool_in_shape: (usize, usize, usize),
    argmax: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    blocks: Vec<BlockCache>,
    gap_in_len: usize,
    pooled: Tensor3,
    train: bool,
}

/// Which side of every ReLU and max-pool decision a forward pass took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPattern {
    pub relu_active: Vec<bool>,
    pub argmax: Vec<usize>,
}

impl ForwardCache {
    pub fn pattern(&self) -> ActivationPattern {
        ActivationPattern {
            relu_active: self
                .blocks
                .iter()
                .flat_map(|b| b.pre_relu.data().iter().map(|&v| v > 0.0))
                .collect(),
            argmax: self
                .blocks
                .iter()
                .flat_map(|b| b.argmax.iter().copied())
                .collect(),
        }
    }
}

/// Gradients shape-congruent with the trainable tensors of a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub convs: Vec<ConvGrads>,
    pub bns: Vec<BnGrads>,
    pub dense: DenseGrads,
}

impl Gradients {
    /// Trainable gradients in canonical parameter order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(4 * self.convs.len() + 2);
        for (c, b) in self.convs.iter().zip(&self.bns) {
            out.push(c.weight.as_slice());
            out.push(c.bias.as_slice());
            out.push(b.gamma.as_slice());
            out.push(b.beta.as_slice());
        }
        out.push(self.dense.weight.as_slice());
        out.push(self.dense.bias.as_slice());
        out
    }
}

impl Network {
    /// Zero conv/dense parameters and identity batch norm for `arch`.
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        arch.validate_common()?;
        let mut blocks = Vec::with_capacity(BLOCKS);
        let mut c_in = 1;
        for &c_out in &arch.widths {
            let k = arch.kernel;
            blocks.push(ConvBlock {
                conv: Conv1d::new(c_in, c_out, k, vec![0.0; c_out * c_in * k], vec![0.0; c_out])?,
                bn: BatchNorm1d::new(c_out),
                dropout: arch.dropout,
            });
            c_in = c_out;
        }
        Ok(Self {
            blocks,
            dense: Dense::new(
                c_in,
                arch.classes,
                vec![0.0; c_in * arch.classes],
                vec![0.0; arch.classes],
            )?,
            input_len: arch.input_len,
        })
    }

    pub fn architecture(&self) -> Architecture {
        let mut widths = [0; BLOCKS];
        for (w, b) in widths.iter_mut().zip(&self.blocks) {
            *w = b.conv.c_out;
        }
        Architecture {
            widths,
            kernel: self.blocks[0].conv.k,
            dropout: self.blocks[0].dropout,
            input_len: self.input_len,
            classes: self.dense.k,
        }
    }

    pub fn classes(&self) -> usize {
        self.dense.k
    }

    pub fn kernel_count(&self) -> usize {
        self.blocks.iter().map(|b| b.conv.c_out).sum()
    }

    /// Trainable scalar count (running statistics excluded).
    pub fn parameter_count(&self) -> usize {
        self.param_specs()
            .iter()
            .filter(|s| s.kind.trainable())
            .map(ParamSpec::numel)
            .sum()
    }

    /// Every persisted tensor, in canonical order.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let spec = |name: String, shape: Vec<usize>, kind| ParamSpec { name, shape, kind };
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let n = i + 1;
            let c = &b.conv;
            out.push(spec(
                format!("conv{n}.weight"),
                vec![c.c_out, c.c_in, c.k],
                ParamKind::Weight,
            ));
            out.push(spec(format!("conv{n}.bias"), vec![c.c_out], ParamKind::Bias));
            for name in ["gamma", "beta"] {
                out.push(spec(format!("bn{n}.{name}"), vec![c.c_out], ParamKind::BnAffine));
            }
            for name in ["running_mean", "running_var"] {
                out.push(spec(format!("bn{n}.{name}"), vec![c.c_out], ParamKind::BnStat));
            }
        }
        out.push(spec(
            "dense.weight".into(),
            vec![self.dense.k, self.dense.c_in],
            ParamKind::Weight,
        ));
        out.push(spec("dense.bias".into(), vec![self.dense.k], ParamKind::Bias));
        out
    }

    /// Every persisted tensor, in the order of [`Network::param_specs`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend([
                b.conv.weight.as_slice(),
                b.conv.bias.as_slice(),
                b.bn.gamma.as_slice(),
                b.bn.beta.as_slice(),
                b.bn.running_mean.as_slice(),
                b.bn.running_var.as_slice(),
            ]);
        }
        out.push(self.dense.weight.as_slice());
        out.push(self.dense.bias.as_slice());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.conv.weight);
            out.push(&mut b.conv.bias);
            out.push(&mut b.bn.gamma);
            out.push(&mut b.bn.beta);
            out.push(&mut b.bn.running_mean);
            out.push(&mut b.bn.running_var);
        }
        out.push(&mut self.dense.weight);
        out.push(&mut self.dense.bias);
        out
    }

    /// Trainable tensors with their kinds, aligned with [`Gradients::tensors`].
    pub fn trainable_mut(&mut self) -> Vec<(ParamKind, &mut [f64])> {
        let kinds: Vec<ParamKind> = self.param_specs().into_iter().map(|s| s.kind).collect();
        kinds
            .into_iter()
            .zip(self.tensors_mut())
            .filter(|(k, _)| k.trainable())
            .collect()
    }

    pub fn check_consistency(&self) -> Result<()> {
        if self.blocks.len() != BLOCKS {
            return Err(Error::Shape(format!(
                "expected {BLOCKS} conv blocks, found {}",
                self.blocks.len()
            )));
        }
        let mut c_in = 1;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.conv.c_in != c_in {
                return Err(Error::Shape(format!(
                    "block {} takes {} channels but receives {c_in}",
                    i + 1,
                    b.conv.c_in
                )));
            }
            let c = b.conv.c_out;
            let bn = &b.bn;
            if [
                bn.gamma.len(),
                bn.beta.len(),
                bn.running_mean.len(),
                bn.running_var.len(),
            ]
            .iter()
            .any(|&n| n != c)
            {
                return Err(Error::Shape(format!("block {} batch norm width != {c}", i + 1)));
            }
            c_in = c;
        }
        if self.dense.c_in != c_in {
            return Err(Error::Shape(format!(
                "dense takes {} inputs but the last conv has {c_in} channels",
                self.dense.c_in
            )));
        }
        Ok(())
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != 1 || x.len() != self.input_len {
            return Err(Error::Shape(format!(
                "network expects (B, 1, {}), got {:?}",
                self.input_len,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Forward pass returning flat `(B, K)` logits and the cache needed by
    /// [`Network::backward`]. Parameters are never modified here; train-mode
    /// batch statistics are folded in separately by [`Network::absorb_batch_stats`].
    pub fn forward(&self, x: &Tensor3, mut mode: Mode<'_>) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(x)?;
        let train = matches!(mode, Mode::Train(_));
        let mut caches = Vec::with_capacity(self.blocks.len());
        let mut h = x.clone();
        for blk in &self.blocks {
            let z = blk.conv.forward(&h)?;
            let (y, bn) = match mode {
                Mode::Eval => (blk.bn.forward_eval(&z)?, None),
                Mode::Train(_) => {
                    let (y, c) = blk.bn.forward_train(&z)?;
                    (y, Some(c))
                }
            };
            let a = relu(&y);
            let (a, mask) = match &mut mode {
                Mode::Eval => (a, None),
                Mode::Train(rng) => {
                    let m = DropoutMask::sample(a.shape(), blk.dropout, &mut **rng)?;
                    (m.apply(&a)?, Some(m))
                }
            };
            let (pooled, argmax) = maxpool1d(&a);
            caches.push(BlockCache {
                input: h,
                bn,
                pre_relu: y,
                mask,
                pool_in_shape: a.shape(),
                argmax,
            });
            h = pooled;
        }
        let gap_in_len = h.len();
        let pooled = gap(&h)?;
        let logits = self.dense.forward(&pooled)?;
        Ok((
            logits,
            ForwardCache {
                blocks: caches,
                gap_in_len,
                pooled,
                train,
            },
        ))
    }

    /// Eval-mode logits without retaining intermediate activations.
    pub fn logits(&self, x: &Tensor3) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for blk in &self.blocks {
            let y = blk.bn.forward_eval(&blk.conv.forward(&h)?)?;
            h = maxpool1d(&relu(&y)).0;
        }
        self.dense.forward(&gap(&h)?)
    }

    /// Eval-mode class probabilities, flat `(B, K)`.
    pub fn probabilities(&self, x: &Tensor3) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?, self.classes()))
    }

    /// Eval-mode argmax of the class probabilities (lowest index on ties).
    pub fn predict(&self, x: &Tensor3) -> Result<Vec<usize>> {
        Ok(self
            .probabilities(x)?
            .chunks(self.classes())
            .map(argmax_first)
            .collect())
    }

    /// Gradients of a scalar loss given `grad_logits = ∂loss/∂logits`.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &[f64]) -> Result<Gradients> {
        if !cache.train {
            return Err(Error::Config(
                "backward requires a train-mode forward cache".into(),
            ));
        }
        let (g_pooled, dense) = self.dense.backward(&cache.pooled, grad_logits)?;
        let mut g = gap_backward(cache.gap_in_len, &g_pooled)?;
        let mut convs = Vec::with_capacity(self.blocks.len());
        let mut bns = Vec::with_capacity(self.blocks.len());
        for (blk, c) in self.blocks.iter().zip(&cache.blocks).rev() {
            let g_drop = maxpool1d_backward(c.pool_in_shape, &c.argmax, &g)?;
            let g_act = match &c.mask {
                Some(m) => m.backward(&g_drop)?,
                None => g_drop,
            };
            let g_y = relu_backward(&c.pre_relu, &g_act)?;
            let bn_cache = c.bn.as_ref().expect("train cache holds batch-norm state");
            let (g_z, bn_g) = blk.bn.backward(bn_cache, &g_y)?;
            let (g_x, conv_g) = blk.conv.backward(&c.input, &g_z)?;
            convs.push(conv_g);
            bns.push(bn_g);
            g = g_x;
        }
        convs.reverse();
        bns.reverse();
        Ok(Gradients { convs, bns, dense })
    }

    /// Fold train-mode batch statistics into the BN running estimates.
    pub fn absorb_batch_stats(&mut self, cache: &ForwardCache) {
        for (blk, c) in self.blocks.iter_mut().zip(&cache.blocks) {
            if let Some(bn) = &c.bn {
                blk.bn.absorb(&bn.batch_mean, &bn.batch_var);
            }
        }
    }
}

pub fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// He-uniform conv/dense weights (bound `√(6 / fan_in)`), zero biases,
/// identity batch norm. Deterministic in `seed`.
pub fn init_network(arch: &Architecture, seed: u64) -> Result<Network> {
    arch.validate_fresh()?;
    init_unchecked_widths(arch, seed)
}

/// As [`init_network`] but accepts any positive widths, e.g. a pruned layout.
pub fn init_unchecked_widths(arch: &Architecture, seed: u64) -> Result<Network> {
    arch.validate_common()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut he = |n: usize, fan_in: usize| -> Vec<f64> {
        let bound = (6.0 / fan_in as f64).sqrt();
        (0..n).map(|_| rng.random_range(-bound..bound)).collect()
    };
    let mut blocks = Vec::with_capacity(BLOCKS);
    let mut c_in = 1;
    for &c_out in &arch.widths {
        let k = arch.kernel;
        let conv = Conv1d::new(c_in, c_out, k, he(c_out * c_in * k, c_in * k), vec![0.0; c_out])?;
        blocks.push(ConvBlock {
            conv,
            bn: BatchNorm1d::new(c_out),
            dropout: arch.dropout,
        });
        c_in = c_out;
    }
    let dense = Dense::new(
        c_in,
        arch.classes,
        he(arch.classes * c_in, c_in),
        vec![0.0; arch.classes],
    )?;
    Ok(Network {
        blocks,
        dense,
        input_len: arch.input_len,
    })
}

/// Stack dataset rows into a `(rows.len(), 1, d)` tensor.
pub fn segments_tensor(ds: &SignalDataset, rows: &[usize]) -> Tensor3 {
    let mut data = Vec::with_capacity(rows.len() * ds.len());
    for &r in rows {
        data.extend_from_slice(ds.row(r));
    }
    Tensor3::from_vec(rows.len(), 1, ds.len(), data).expect("rows have length d")
}
