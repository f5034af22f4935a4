use std::path::PathBuf;

use chanprune::metrics::{evaluate, EvalReport};
use chanprune::train::load_model;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::failure::{CliResult, Failure};
use crate::prune::PruneRecord;
use crate::run::*;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model directory written by `train` or `prune`.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset; defaults to the one the model was trained on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory; defaults to the model directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub model_dir: PathBuf,
    pub data: PathBuf,
    #[serde(flatten)]
    pub report: EvalReport,
    /// Rows of the cleaned dataset forming the test split.
    pub test_indices: Vec<usize>,
}

pub fn run(a: &EvalArgs) -> CliResult {
    let model = ModelDir::open(&a.model)?;
    let net = load_model(&a.model)?;
    if model.scaler.mean.len() != net.input_len {
        return Err(Failure::input(format!(
            "scaler covers {} features but the model expects segments of length {}",
            model.scaler.mean.len(),
            net.input_len
        )));
    }
    let (_, _, test) = model.splits(a.data.as_deref())?;
    let prune_path = a.model.join(PRUNE_FILE);
    let reference = if prune_path.exists() {
        Some(read_json::<PruneRecord>(&prune_path)?.reference_kernels)
    } else {
        None
    };
    let report = evaluate(&net, &test, reference)?;

    let out = a.out.clone().unwrap_or_else(|| a.model.clone());
    create_dir(&out)?;
    write_text(&out.join(CONFUSION_FILE), &report.confusion.to_csv())?;
    println!(
        "test accuracy {:.4}, macro-F1 {:.4}, kernels retained {}%, {:.4} s per 1000 segments",
        report.accuracy, report.macro_f1, report.kernels_retained_pct, report.inference_seconds_per_1000
    );
    let file = ReportFile {
        model_dir: absolute(&a.model),
        data: a
            .data
            .as_deref()
            .map(absolute)
            .unwrap_or_else(|| model.run.data.clone()),
        report,
        test_indices: model.split.indices.test.clone(),
    };
    write_json(&out.join(REPORT_FILE), &file)
}
