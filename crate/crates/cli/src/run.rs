//! Files shared between commands and the run manifest written next to every model.

use std::path::{Path, PathBuf};

use chanprune::data::{
    clean, load_dataset, standardize_apply, ScalerParams, SignalDataset, SplitIndices, SplitRatios,
};
use chanprune::nn::Architecture;
use chanprune::train::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::failure::{CliResult, Failure};
use crate::TrainOverrides;

pub const RUN_FILE: &str = "run.json";
pub const SCALER_FILE: &str = "scaler.json";
pub const SPLIT_FILE: &str = "split.json";
pub const CONFIG_FILE: &str = "train_config.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const PRUNE_FILE: &str = "prune.json";
pub const REPORT_FILE: &str = "report.json";
pub const CONFUSION_FILE: &str = "confusion.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub split: u64,
    pub init: u64,
    pub train: u64,
}

/// Everything needed to re-run the command that produced a model directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub data: PathBuf,
    pub seeds: Seeds,
    pub config: TrainConfig,
    pub architecture: Architecture,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub reinit: bool,
    /// File names inside the model directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    /// Stamp the finish time and write `run.json` once every listed artifact exists.
    pub fn finish(mut self, dir: &Path) -> CliResult {
        if let Some(missing) = self.artifacts.iter().find(|f| !dir.join(f).exists()) {
            return Err(Failure::input(format!("artifact {missing} was not written")));
        }
        self.artifacts.push(RUN_FILE.into());
        self.finished_at = now();
        write_json(&dir.join(RUN_FILE), &self)
    }
}

/// Persisted split, tied to the row count of the cleaned dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub rows: usize,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub indices: SplitIndices,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(Failure::input)?;
    write_text(path, &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn copy_file(from: &Path, to: &Path) -> CliResult {
    std::fs::copy(from, to)
        .map(|_| ())
        .map_err(|e| Failure::input(format!("copy {} -> {}: {e}", from.display(), to.display())))
}

pub fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))
}

/// Defaults, then the `--config` file, then individual flags.
pub fn resolve_config(base: TrainConfig, o: &TrainOverrides) -> CliResult<TrainConfig> {
    let mut cfg = match &o.config {
        None => base,
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
            let parsed: Result<TrainConfig, String> = if is_json {
                serde_json::from_str(&text).map_err(|e| e.to_string())
            } else {
                toml::from_str(&text).map_err(|e| e.to_string())
            };
            parsed.map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(n) = o.max_epochs {
        cfg.max_epochs = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_clean(path: &Path) -> CliResult<SignalDataset> {
    Ok(clean(&load_dataset(path)?)?)
}

/// Persisted artifacts of a trained model directory.
pub struct ModelDir {
    pub run: RunManifest,
    pub split: SplitFile,
    pub scaler: ScalerParams,
}

impl ModelDir {
    pub fn open(dir: &Path) -> CliResult<Self> {
        if !dir.is_dir() {
            return Err(Failure::input(format!(
                "model directory {} not found",
                dir.display()
            )));
        }
        Ok(Self {
            run: read_json(&dir.join(RUN_FILE))?,
            split: read_json(&dir.join(SPLIT_FILE))?,
            scaler: read_json(&dir.join(SCALER_FILE))?,
        })
    }

    /// Cleaned dataset (from `data`, or the one recorded at training time)
    /// split and standardized exactly as during training.
    pub fn splits(&self, data: Option<&Path>) -> CliResult<(SignalDataset, SignalDataset, SignalDataset)> {
        let path = data.unwrap_or(&self.run.data);
        let ds = load_clean(path)?;
        if ds.n() != self.split.rows {
            return Err(Failure::input(format!(
                "{} has {} usable rows but the stored split covers {}",
                path.display(),
                ds.n(),
                self.split.rows
            )));
        }
        let (tr, va, te) = self.split.indices.apply(&ds)?;
        Ok((
            standardize_apply(&tr, &self.scaler)?,
            standardize_apply(&va, &self.scaler)?,
            standardize_apply(&te, &self.scaler)?,
        ))
    }
}
