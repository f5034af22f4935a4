//! Labeled signal segments: Segment-CSV IO, cleaning, standard scaling,
//! stratified splitting and a synthetic generator for desk-scale runs.
//!
//! Segment-CSV is UTF-8 with a `label,s0,...,s{d-1}` header followed by one
//! row per segment: an integer class label and `d` decimal samples. `NaN` is
//! accepted as a sample token so that [`clean`] can drop corrupted rows.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clamp on per-feature standard deviation.
pub const STD_EPS: f64 = 1e-8;

/// `n` fixed-length segments stored row-major with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDataset {
    samples: Vec<f64>,
    labels: Vec<usize>,
    len: usize,
    classes: usize,
}

impl SignalDataset {
    pub fn new(samples: Vec<f64>, labels: Vec<usize>, len: usize, classes: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Shape("segment length must be positive".into()));
        }
        if samples.len() != labels.len() * len {
            return Err(Error::Shape(format!(
                "{} samples for {} rows of length {}",
                samples.len(),
                labels.len(),
                len
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Label { label: bad, classes });
        }
        Ok(Self {
            samples,
            labels,
            len,
            classes,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Segment length `d`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Class count `K`.
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.len..(i + 1) * self.len]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut samples = Vec::with_capacity(indices.len() * self.len);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n() {
                return Err(Error::Shape(format!("row {i} out of range ({} rows)", self.n())));
            }
            samples.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Ok(Self {
            samples,
            labels,
            len: self.len,
            classes: self.classes,
        })
    }

    fn check_all_classes_present(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Degenerate("no rows left".into()));
        }
        if let Some(c) = self.class_counts().iter().position(|&n| n == 0) {
            return Err(Error::Degenerate(format!("class {c} has no rows")));
        }
        Ok(())
    }
}

/// Parse Segment-CSV text. Non-finite samples are kept.
pub fn parse_segment_csv(text: &str) -> Result<SignalDataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::EmptyInput("no header line".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.first() != Some(&"label") || columns.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "header must be `label,s0,...`".into(),
        });
    }
    let len = columns.len() - 1;

    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != len + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} columns, found {}", len + 1, fields.len()),
            });
        }
        let label: usize = fields[0].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("label `{}` is not a non-negative integer", fields[0]),
        })?;
        labels.push(label);
        for tok in &fields[1..] {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("sample `{tok}` is not a number"),
            })?;
            samples.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("no data rows".into()));
    }
    let classes = labels.iter().copied().max().unwrap_or(0) + 1;
    SignalDataset::new(samples, labels, len, classes)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<SignalDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.is_empty() {
        return Err(Error::EmptyInput(format!("{} is empty", path.display())));
    }
    parse_segment_csv(&text)
}

/// Render as Segment-CSV. Samples use the shortest round-trip decimal form.
pub fn to_segment_csv(ds: &SignalDataset) -> String {
    let mut out = String::with_capacity(ds.samples.len() * 12);
    out.push_str("label");
    for j in 0..ds.len {
        let _ = write!(out, ",s{j}");
    }
    out.push('\n');
    for i in 0..ds.n() {
        let _ = write!(out, "{}", ds.labels[i]);
        for v in ds.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(ds: &SignalDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_segment_csv(ds)).map_err(|e| Error::io(path, e))
}

/// Drop every row holding a non-finite sample, preserving row order.
pub fn clean(ds: &SignalDataset) -> Result<SignalDataset> {
    let keep: Vec<usize> = (0..ds.n())
        .filter(|&i| ds.row(i).iter().all(|v| v.is_finite()))
        .collect();
    let out = ds.subset(&keep)?;
    out.check_all_classes_present()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Per-feature mean and population standard deviation (clamped at [`STD_EPS`]).
pub fn standardize_fit(train: &SignalDataset) -> Result<ScalerParams> {
    if train.is_empty() {
        return Err(Error::EmptyInput("cannot fit a scaler on zero rows".into()));
    }
    let n = train.n() as f64;
    let d = train.len;
    let mut mean = vec![0.0; d];
    for i in 0..train.n() {
        for (m, v) in mean.iter_mut().zip(train.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for i in 0..train.n() {
        for ((s, v), m) in var.iter_mut().zip(train.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_EPS)).collect();
    Ok(ScalerParams { mean, std })
}

pub fn standardize_apply(ds: &SignalDataset, sc: &ScalerParams) -> Result<SignalDataset> {
    if sc.mean.len() != ds.len || sc.std.len() != ds.len {
        return Err(Error::Shape(format!(
            "scaler has {} features, dataset has {}",
            sc.mean.len(),
            ds.len
        )));
    }
    let mut out = ds.clone();
    for row in out.samples.chunks_mut(ds.len) {
        for ((v, m), s) in row.iter_mut().zip(&sc.mean).zip(&sc.std) {
            *v = (*v - m) / s;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.64,
            val: 0.16,
            test: 0.20,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Config(format!("{name} ratio {r} not in (0,1)")));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// (train, val, test) row counts for a class of `n` members.
    pub fn class_counts(&self, n: usize) -> (usize, usize, usize) {
        // The small slack absorbs representation error such as 0.64 * 50.
        let train = (self.train * n as f64 + 1e-9).floor() as usize;
        let val = (self.val * n as f64 + 1e-9).floor() as usize;
        (train, val, n - train - val)
    }
}

/// Row indices of each split, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn apply(&self, ds: &SignalDataset) -> Result<(SignalDataset, SignalDataset, SignalDataset)> {
        Ok((
            ds.subset(&self.train)?,
            ds.subset(&self.val)?,
            ds.subset(&self.test)?,
        ))
    }
}

pub fn stratified_split_indices(ds: &SignalDataset, r: &SplitRatios, seed: u64) -> Result<SplitIndices> {
    r.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for class in 0..ds.classes {
        let mut members: Vec<usize> = (0..ds.n()).filter(|&i| ds.labels[i] == class).collect();
        if members.len() < 3 {
            return Err(Error::Stratification(format!(
                "class {class} has {} members, need at least 3",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let (n_train, n_val, _) = r.class_counts(members.len());
        split.train.extend_from_slice(&members[..n_train]);
        split.val.extend_from_slice(&members[n_train..n_train + n_val]);
        split.test.extend_from_slice(&members[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

pub fn stratified_split(
    ds: &SignalDataset,
    r: &SplitRatios,
    seed: u64,
) -> Result<(SignalDataset, SignalDataset, SignalDataset)> {
    stratified_split_indices(ds, r, seed)?.apply(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub len: usize,
    pub classes: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_class: 400,
            len: 178,
            classes: 3,
            noise_sigma: 0.3,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_class < 1 {
            return Err(Error::Config("n_per_class must be at least 1".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        if self.len < 8 {
            return Err(Error::Config("segment length must be at least 8".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(
                "noise sigma must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Noise-free template of class `class`: a sinusoid whose frequency grows
/// with the class index plus a centred Gaussian burst whose amplitude does too.
pub fn class_template(class: usize, len: usize) -> Vec<f64> {
    let cycles = 3.0 + 2.0 * class as f64;
    let burst = 0.5 + 0.5 * class as f64;
    let centre = len as f64 / 2.0;
    let width = len as f64 / 12.0;
    (0..len)
        .map(|t| {
            let t = t as f64;
            let phase = 2.0 * std::f64::consts::PI * cycles * t / len as f64;
            let z = (t - centre) / width;
            phase.sin() + burst * (-0.5 * z * z).exp()
        })
        .collect()
}

/// Class-major rows: all of class 0, then class 1, and so on.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SignalDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut samples = Vec::with_capacity(cfg.classes * cfg.n_per_class * cfg.len);
    let mut labels = Vec::with_capacity(cfg.classes * cfg.n_per_class);
    for class in 0..cfg.classes {
        let template = class_template(class, cfg.len);
        for _ in 0..cfg.n_per_class {
            samples.extend(
                template
                    .iter()
                    .map(|v| v + cfg.noise_sigma * noise.sample(&mut rng)),
            );
            labels.push(class);
        }
    }
    SignalDataset::new(samples, labels, cfg.len, cfg.classes)
}
