//! Confusion matrix, accuracy, per-class precision/recall/F1 and macro-F1.
//!
//! Convention: `counts[i][j]` is the number of samples of true class `i`
//! predicted as class `j`. Any `0/0` in precision, recall or F1 is `0`.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::SignalDataset;
use crate::error::{Error, Result};
use crate::nn::{segments_tensor, Network};

/// Repetitions whose median gives the reported inference time.
pub const TIMING_REPEATS: usize = 5;
const EVAL_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    /// `K` lines of `K` comma-separated counts, truth-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.counts {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut counts = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row = line
                .split(',')
                .map(|t| t.trim().parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            counts.push(row);
        }
        if counts.iter().any(|r| r.len() != counts.len()) {
            return Err(Error::Shape("confusion matrix is not square".into()));
        }
        Ok(Self { counts })
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "{} truths vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for l in [t, p] {
            if l >= classes {
                return Err(Error::Label { label: l, classes });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// `trace / total`; the multiclass form of `(TP + TN) / (TP + TN + FP + FN)`.
pub fn accuracy(c: &ConfusionMatrix) -> Result<f64> {
    match c.total() {
        0 => Err(Error::EmptyEval),
        n => Ok(c.trace() as f64 / n as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn per_class_prf(c: &ConfusionMatrix) -> Result<Vec<ClassScores>> {
    if c.total() == 0 {
        return Err(Error::EmptyEval);
    }
    Ok((0..c.classes())
        .map(|k| {
            let tp = c.counts[k][k] as f64;
            let fp = c.col_sum(k) as f64 - tp;
            let fn_ = c.row_sum(k) as f64 - tp;
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            let f1 = ratio(2.0 * precision * recall, precision + recall);
            ClassScores {
                precision,
                recall,
                f1,
            }
        })
        .collect())
}

/// Unweighted mean of per-class F1.
pub fn macro_f1(c: &ConfusionMatrix) -> Result<f64> {
    let scores = per_class_prf(c)?;
    Ok(scores.iter().map(|s| s.f1).sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
    pub kernels_retained_pct: f64,
    pub kernel_count: usize,
    pub parameter_count: usize,
    /// Median wall-clock seconds to classify 1000 segments.
    pub inference_seconds_per_1000: f64,
    pub samples: usize,
}

impl EvalReport {
    /// Copy with timing zeroed, for comparisons that must ignore it.
    pub fn without_timing(&self) -> Self {
        Self {
            inference_seconds_per_1000: 0.0,
            ..self.clone()
        }
    }
}

pub fn predict_dataset(net: &Network, ds: &SignalDataset) -> Result<Vec<usize>> {
    if ds.len() != net.input_len {
        return Err(Error::Shape(format!(
            "model expects segments of length {}, dataset has {}",
            net.input_len,
            ds.len()
        )));
    }
    let rows: Vec<usize> = (0..ds.n()).collect();
    let mut out = Vec::with_capacity(ds.n());
    for chunk in rows.chunks(EVAL_BATCH) {
        out.extend(net.predict(&segments_tensor(ds, chunk))?);
    }
    Ok(out)
}

/// Evaluate `net` on `ds` in eval mode. `reference_kernels` is the kernel
/// count of the unpruned model; `None` means `net` is its own reference.
pub fn evaluate(net: &Network, ds: &SignalDataset, reference_kernels: Option<usize>) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::EmptyEval);
    }
    if ds.classes() > net.classes() {
        return Err(Error::Shape(format!(
            "dataset has {} classes, model predicts {}",
            ds.classes(),
            net.classes()
        )));
    }
    let mut times = Vec::with_capacity(TIMING_REPEATS);
    let mut predictions = Vec::new();
    for _ in 0..TIMING_REPEATS {
        let start = Instant::now();
        predictions = predict_dataset(net, ds)?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let median = times[TIMING_REPEATS / 2];

    let confusion = confusion_matrix(ds.labels(), &predictions, net.classes())?;
    let kernels = net.kernel_count();
    Ok(EvalReport {
        accuracy: accuracy(&confusion)?,
        per_class: per_class_prf(&confusion)?,
        macro_f1: macro_f1(&confusion)?,
        confusion,
        kernels_retained_pct: 100.0 * kernels as f64 / reference_kernels.unwrap_or(kernels) as f64,
        kernel_count: kernels,
        parameter_count: net.parameter_count(),
        inference_seconds_per_1000: median / ds.n() as f64 * 1000.0,
        samples: ds.n(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_class_predictor() -> ConfusionMatrix {
        let truth: Vec<usize> = (0..100).map(|i| i % 2).collect();
        confusion_matrix(&truth, &[0; 100], 2).unwrap()
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let y = [0, 1, 2, 2, 1, 0, 0];
        let c = confusion_matrix(&y, &y, 3).unwrap();
        assert_eq!(c.counts, vec![vec![3, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
        assert_eq!(accuracy(&c).unwrap(), 1.0);
        assert_eq!(macro_f1(&c).unwrap(), 1.0);
        for s in per_class_prf(&c).unwrap() {
            assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn balanced_one_class_predictor() {
        let c = one_class_predictor();
        assert_eq!(c.counts, vec![vec![50, 0], vec![50, 0]]);
        assert_eq!(accuracy(&c).unwrap(), 0.5);
        let s = per_class_prf(&c).unwrap();
        assert_eq!((s[0].precision, s[0].recall), (0.5, 1.0));
        assert_eq!(s[0].f1, 2.0 / 3.0);
        assert_eq!((s[1].precision, s[1].recall, s[1].f1), (0.0, 0.0, 0.0));
        assert_eq!(macro_f1(&c).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            confusion_matrix(&[0, 3], &[0, 1], 3),
            Err(Error::Label { label: 3, .. })
        ));
        assert!(confusion_matrix(&[0], &[0, 1], 3).is_err());
        let empty = confusion_matrix(&[], &[], 2).unwrap();
        assert!(matches!(accuracy(&empty), Err(Error::EmptyEval)));
        assert!(macro_f1(&empty).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let c = one_class_predictor();
        assert_eq!(c.to_csv(), "50,0\n50,0\n");
        assert_eq!(ConfusionMatrix::from_csv(&c.to_csv()).unwrap(), c);
    }
}
