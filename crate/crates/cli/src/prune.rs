use std::path::PathBuf;

use chanprune::nn::segments_tensor;
use chanprune::prune::{masked_equivalence_gap, prune_and_retrain, LayerDecision, DEFAULT_RATIO};
use chanprune::train::io::{MANIFEST_FILE, PARAMS_FILE};
use chanprune::train::{load_model, save_model, TrainConfig};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::failure::{CliResult, Failure};
use crate::run::*;
use crate::TrainOverrides;

/// Largest tolerated logit gap between the rebuilt and the masked network.
pub const VERIFY_TOLERANCE: f64 = 1e-10;
const VERIFY_ROWS: usize = 64;

#[derive(Args, Debug)]
pub struct PruneArgs {
    /// Trained model directory.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset; defaults to the one the model was trained on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Fraction of kernels kept in every conv layer.
    #[arg(long, default_value_t = DEFAULT_RATIO)]
    pub ratio: f64,
    /// Retrain from fresh weights instead of the surviving ones.
    #[arg(long)]
    pub reinit: bool,
    /// Check the rebuilt network against the masked original before retraining.
    #[arg(long)]
    pub verify: bool,
    /// Pruned model directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneRecord {
    pub ratio: f64,
    pub reinit: bool,
    pub original_widths: Vec<usize>,
    pub pruned_widths: Vec<usize>,
    pub layers: Vec<LayerDecision>,
    /// Kernel count of the unpruned ancestor, the denominator of retention.
    pub reference_kernels: usize,
    pub baseline_parameters: usize,
    pub pruned_parameters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_gap: Option<f64>,
}

pub fn run(a: &PruneArgs) -> CliResult {
    let started_at = now();
    let base = ModelDir::open(&a.model)?;
    let net = load_model(&a.model)?;
    let stored: TrainConfig = read_json(&a.model.join(CONFIG_FILE))?;
    let cfg = resolve_config(stored, &a.overrides)?;
    let (tr, va, te) = base.splits(a.data.as_deref())?;
    let reference_kernels = match read_json::<PruneRecord>(&a.model.join(PRUNE_FILE)) {
        Ok(p) => p.reference_kernels,
        Err(_) if !a.model.join(PRUNE_FILE).exists() => net.kernel_count(),
        Err(e) => return Err(e),
    };

    let outcome = prune_and_retrain(&net, &tr, &va, &cfg, a.ratio, a.reinit)?;
    let verify_gap = if a.verify {
        let rows: Vec<usize> = (0..te.n().min(VERIFY_ROWS)).collect();
        let gap = masked_equivalence_gap(
            &net,
            &outcome.rebuilt,
            &outcome.decision,
            &segments_tensor(&te, &rows),
        )?;
        println!(
            "masked-equivalence gap {gap:.3e} over {} test segments",
            rows.len()
        );
        if !(gap <= VERIFY_TOLERANCE) {
            return Err(Failure::numeric(format!(
                "rebuilt network deviates from the masked original by {gap:e}"
            )));
        }
        Some(gap)
    } else {
        None
    };

    create_dir(&a.out)?;
    save_model(&outcome.retrained, &a.out)?;
    let d = &outcome.decision;
    let record = PruneRecord {
        ratio: a.ratio,
        reinit: a.reinit,
        original_widths: d.original_widths(),
        pruned_widths: d.pruned_widths(),
        layers: d.layers.clone(),
        reference_kernels,
        baseline_parameters: net.parameter_count(),
        pruned_parameters: outcome.retrained.parameter_count(),
        verify_gap,
    };
    write_json(&a.out.join(PRUNE_FILE), &record)?;
    copy_file(&a.model.join(SCALER_FILE), &a.out.join(SCALER_FILE))?;
    copy_file(&a.model.join(SPLIT_FILE), &a.out.join(SPLIT_FILE))?;
    write_json(&a.out.join(CONFIG_FILE), &cfg)?;
    write_text(&a.out.join(HISTORY_FILE), &outcome.history.to_csv())?;

    println!(
        "widths {:?} -> {:?}; parameters {} -> {}; retrained {} epochs, best epoch {}",
        record.original_widths,
        record.pruned_widths,
        record.baseline_parameters,
        record.pruned_parameters,
        outcome.history.epochs.len(),
        outcome.history.best_epoch
    );
    RunManifest {
        command: "prune".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_at,
        finished_at: String::new(),
        data: a
            .data
            .as_deref()
            .map(absolute)
            .unwrap_or_else(|| base.run.data.clone()),
        seeds: Seeds {
            split: base.split.seed,
            init: if a.reinit { cfg.seed } else { base.run.seeds.init },
            train: cfg.seed,
        },
        config: cfg,
        architecture: outcome.retrained.architecture(),
        baseline: Some(absolute(&a.model)),
        ratio: Some(a.ratio),
        reinit: a.reinit,
        artifacts: [
            MANIFEST_FILE,
            PARAMS_FILE,
            PRUNE_FILE,
            SCALER_FILE,
            SPLIT_FILE,
            CONFIG_FILE,
            HISTORY_FILE,
        ]
        .map(String::from)
        .to_vec(),
    }
    .finish(&a.out)
}
