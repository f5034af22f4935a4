use std::path::PathBuf;

use chanprune::data::{standardize_apply, standardize_fit, stratified_split_indices, SplitRatios};
use chanprune::nn::{init_network, Architecture};
use chanprune::train::{save_model, train, TrainConfig};
use clap::Args;

use crate::failure::CliResult;
use crate::run::*;
use crate::TrainOverrides;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Segment-CSV dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Model directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

pub fn run(a: &TrainArgs) -> CliResult {
    let started_at = now();
    let cfg = resolve_config(TrainConfig::default(), &a.overrides)?;
    let ds = load_clean(&a.data)?;
    let ratios = SplitRatios::default();
    let split = stratified_split_indices(&ds, &ratios, cfg.seed)?;
    let (tr, va, _) = split.apply(&ds)?;
    let scaler = standardize_fit(&tr)?;
    let tr = standardize_apply(&tr, &scaler)?;
    let va = standardize_apply(&va, &scaler)?;

    let arch = Architecture::new(ds.len(), ds.classes());
    let net = init_network(&arch, cfg.seed)?;
    let (best, history) = train(net, &tr, &va, &cfg)?;

    create_dir(&a.out)?;
    save_model(&best, &a.out)?;
    write_json(&a.out.join(SCALER_FILE), &scaler)?;
    write_json(
        &a.out.join(SPLIT_FILE),
        &SplitFile {
            rows: ds.n(),
            seed: cfg.seed,
            ratios,
            indices: split,
        },
    )?;
    write_json(&a.out.join(CONFIG_FILE), &cfg)?;
    write_text(&a.out.join(HISTORY_FILE), &history.to_csv())?;

    let best_row = history.best().expect("training ran at least one epoch");
    println!(
        "trained {} epochs; best epoch {} with val accuracy {:.4}, val macro-F1 {:.4}; {} parameters",
        history.epochs.len(),
        history.best_epoch,
        best_row.val_acc,
        best_row.val_macro_f1,
        best.parameter_count()
    );
    RunManifest {
        command: "train".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_at,
        finished_at: String::new(),
        data: absolute(&a.data),
        seeds: Seeds {
            split: cfg.seed,
            init: cfg.seed,
            train: cfg.seed,
        },
        config: cfg,
        architecture: arch,
        baseline: None,
        ratio: None,
        reinit: false,
        artifacts: [
            chanprune::train::io::MANIFEST_FILE,
            chanprune::train::io::PARAMS_FILE,
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
