use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chanprune::train::TrainHistory;
use clap::Args;

use crate::eval::ReportFile;
use crate::failure::{CliResult, Failure};
use crate::run::*;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// `report.json` of the unpruned model.
    #[arg(long)]
    pub baseline: PathBuf,
    /// `report.json` of the pruned model.
    #[arg(long)]
    pub pruned: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Kernel percentage without decimals when it is whole.
fn pct(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}%")
    } else {
        format!("{v:.2}%")
    }
}

/// `accuracy % / macro-F1 / kernels %`, e.g. `92.78 / 0.8686 / 100%`.
pub fn summary(accuracy_pct: f64, macro_f1: f64, kernels_pct: f64) -> String {
    format!("{accuracy_pct:.2} / {macro_f1:.4} / {}", pct(kernels_pct))
}

/// (name, baseline, pruned) for every compared quantity.
fn metrics(b: &ReportFile, p: &ReportFile) -> Vec<(&'static str, f64, f64)> {
    let (b, p) = (&b.report, &p.report);
    vec![
        ("accuracy_pct", 100.0 * b.accuracy, 100.0 * p.accuracy),
        ("macro_f1", b.macro_f1, p.macro_f1),
        (
            "kernels_retained_pct",
            b.kernels_retained_pct,
            p.kernels_retained_pct,
        ),
        ("kernel_count", b.kernel_count as f64, p.kernel_count as f64),
        (
            "parameter_count",
            b.parameter_count as f64,
            p.parameter_count as f64,
        ),
        (
            "inference_seconds_per_1000",
            b.inference_seconds_per_1000,
            p.inference_seconds_per_1000,
        ),
    ]
}

pub fn comparison_csv(b: &ReportFile, p: &ReportFile) -> String {
    let mut out = String::from("metric,baseline,pruned,delta\n");
    for (name, x, y) in metrics(b, p) {
        let _ = writeln!(out, "{name},{x},{y},{}", y - x);
    }
    out
}

pub fn comparison_md(b: &ReportFile, p: &ReportFile) -> String {
    let mut out = String::from("# Baseline vs pruned\n\n");
    out.push_str("| Model | Accuracy (%) | Macro F1 | Kernels Retained |\n");
    out.push_str("|---|---|---|---|\n");
    for (name, r) in [("Baseline CNN", &b.report), ("Pruned CNN", &p.report)] {
        let _ = writeln!(
            out,
            "| {name} | {:.2} | {:.4} | {} |",
            100.0 * r.accuracy,
            r.macro_f1,
            pct(r.kernels_retained_pct)
        );
    }
    out.push_str("\n| Metric | Baseline | Pruned | Delta |\n|---|---|---|---|\n");
    for (name, x, y) in metrics(b, p) {
        let _ = writeln!(out, "| {name} | {x:.6} | {y:.6} | {:+.6} |", y - x);
    }
    let _ = write!(
        out,
        "\nBaseline: {}\nPruned: {}\n",
        summary(
            100.0 * b.report.accuracy,
            b.report.macro_f1,
            b.report.kernels_retained_pct
        ),
        summary(
            100.0 * p.report.accuracy,
            p.report.macro_f1,
            p.report.kernels_retained_pct
        )
    );
    out
}

fn read_history(model_dir: &Path) -> CliResult<TrainHistory> {
    let path = model_dir.join(HISTORY_FILE);
    let text =
        std::fs::read_to_string(&path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(TrainHistory::from_csv(&text)?)
}

pub fn loss_curves_csv(curves: &[(&str, TrainHistory)]) -> String {
    let mut out = String::from("model,epoch,train_loss,val_loss,val_acc,val_macro_f1,lr\n");
    for (name, h) in curves {
        for e in &h.epochs {
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{},{}",
                e.epoch, e.train_loss, e.val_loss, e.val_acc, e.val_macro_f1, e.lr
            );
        }
    }
    out
}

pub fn run(a: &ReportArgs) -> CliResult {
    let b: ReportFile = read_json(&a.baseline)?;
    let p: ReportFile = read_json(&a.pruned)?;
    let (kb, kp) = (b.report.confusion.classes(), p.report.confusion.classes());
    if kb != kp {
        return Err(Failure::input(format!(
            "baseline has {kb} classes, pruned has {kp}"
        )));
    }
    let curves = [
        ("baseline", read_history(&b.model_dir)?),
        ("pruned", read_history(&p.model_dir)?),
    ];

    create_dir(&a.out)?;
    write_text(&a.out.join("comparison.md"), &comparison_md(&b, &p))?;
    write_text(&a.out.join("comparison.csv"), &comparison_csv(&b, &p))?;
    write_text(&a.out.join("loss_curves.csv"), &loss_curves_csv(&curves))?;
    write_text(
        &a.out.join("confusion_baseline.csv"),
        &b.report.confusion.to_csv(),
    )?;
    write_text(&a.out.join("confusion_pruned.csv"), &p.report.confusion.to_csv())?;
    println!(
        "baseline {}\npruned   {}",
        summary(
            100.0 * b.report.accuracy,
            b.report.macro_f1,
            b.report.kernels_retained_pct
        ),
        summary(
            100.0 * p.report.accuracy,
            p.report.macro_f1,
            p.report.kernels_retained_pct
        )
    );
    Ok(())
}
