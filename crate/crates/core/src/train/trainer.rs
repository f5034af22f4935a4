use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamHyper, AdamState};
use super::loss::cross_entropy;
use crate::data::SignalDataset;
use crate::error::{Error, Result};
use crate::metrics::{accuracy, confusion_matrix, macro_f1};
use crate::nn::{argmax_first, segments_tensor, softmax, Mode, Network};

/// A validation macro-F1 must beat the best so far by at least this much
/// to count as an improvement.
pub const MIN_IMPROVEMENT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Non-improving epochs before stopping.
    pub patience: usize,
    /// Non-improving epochs before each learning-rate halving.
    pub plateau_wait: usize,
    pub lr_min: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.0025,
            weight_decay: 1e-4,
            batch_size: 128,
            max_epochs: 120,
            patience: 10,
            plateau_wait: 5,
            lr_min: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr0) {
            return Err(Error::Config(format!(
                "need 0 < lr_min ({}) <= lr0 ({})",
                self.lr_min, self.lr0
            )));
        }
        if !(self.patience >= self.plateau_wait && self.plateau_wait >= 1) {
            return Err(Error::Config(format!(
                "need patience ({}) >= plateau_wait ({}) >= 1",
                self.patience, self.plateau_wait
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.eps_adam > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(
                "eps_adam must be positive and weight_decay non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn adam(&self, lr: f64) -> AdamHyper {
        AdamHyper {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps_adam,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Event {
    /// This epoch's snapshot is the one returned.
    Best,
    /// Learning rate halved for the following epochs.
    LrHalved,
    EarlyStop,
    /// Training ended and the best snapshot replaced the final weights.
    BestRestored,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Event::Best => "best",
            Event::LrHalved => "lr-halved",
            Event::EarlyStop => "early-stop",
            Event::BestRestored => "best-restored",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub val_macro_f1: f64,
    /// Learning rate in effect during this epoch.
    pub lr: f64,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch of the returned snapshot.
    pub best_epoch: usize,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,val_loss,val_acc,val_macro_f1,lr,event";

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        for e in &self.epochs {
            let events: Vec<String> = e.events.iter().map(Event::to_string).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.epoch,
                e.train_loss,
                e.val_loss,
                e.val_acc,
                e.val_macro_f1,
                e.lr,
                events.join(";")
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == HISTORY_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header `{HISTORY_HEADER}`"),
                })
            }
        }
        let mut history = TrainHistory::default();
        for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad("expected 7 columns"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            let events = f[6]
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| match s {
                    "best" => Ok(Event::Best),
                    "lr-halved" => Ok(Event::LrHalved),
                    "early-stop" => Ok(Event::EarlyStop),
                    "best-restored" => Ok(Event::BestRestored),
                    _ => Err(bad("unknown event")),
                })
                .collect::<Result<Vec<_>>>()?;
            let record = EpochRecord {
                epoch: f[0].parse().map_err(|_| bad("bad epoch"))?,
                train_loss: num(f[1])?,
                val_loss: num(f[2])?,
                val_acc: num(f[3])?,
                val_macro_f1: num(f[4])?,
                lr: num(f[5])?,
                events,
            };
            if record.events.contains(&Event::Best) {
                history.best_epoch = record.epoch;
            }
            history.epochs.push(record);
        }
        Ok(history)
    }
}

/// What the scheduler decided after observing one epoch's metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Verdict {
    pub improved: bool,
    pub lr_halved: bool,
    pub stop: bool,
}

/// Early stopping and plateau learning-rate halving on a maximized metric.
#[derive(Debug, Clone)]
pub struct PlateauMonitor {
    patience: usize,
    plateau_wait: usize,
    lr_min: f64,
    lr: f64,
    best: f64,
    stale: usize,
}

impl PlateauMonitor {
    pub fn new(cfg: &TrainConfig) -> Self {
        Self {
            patience: cfg.patience,
            plateau_wait: cfg.plateau_wait,
            lr_min: cfg.lr_min,
            lr: cfg.lr0,
            best: f64::NEG_INFINITY,
            stale: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn observe(&mut self, metric: f64) -> Verdict {
        if metric >= self.best + MIN_IMPROVEMENT {
            self.best = metric;
            self.stale = 0;
            return Verdict {
                improved: true,
                ..Verdict::default()
            };
        }
        self.stale += 1;
        if self.stale >= self.patience {
            return Verdict {
                stop: true,
                ..Verdict::default()
            };
        }
        let mut lr_halved = false;
        if self.stale.is_multiple_of(self.plateau_wait) {
            let next = (self.lr / 2.0).max(self.lr_min);
            lr_halved = next < self.lr;
            self.lr = next;
        }
        Verdict {
            lr_halved,
            ..Verdict::default()
        }
    }
}

/// Validation loss, accuracy and macro-F1 in eval mode.
pub fn validation_scores(net: &Network, ds: &SignalDataset) -> Result<(f64, f64, f64)> {
    let rows: Vec<usize> = (0..ds.n()).collect();
    let k = net.classes();
    let mut loss_sum = 0.0;
    let mut preds = Vec::with_capacity(ds.n());
    for chunk in rows.chunks(256) {
        let probs = softmax(&net.logits(&segments_tensor(ds, chunk))?, k);
        let labels: Vec<usize> = chunk.iter().map(|&r| ds.labels()[r]).collect();
        let (loss, _) = cross_entropy(&probs, &labels, k)?;
        loss_sum += loss * chunk.len() as f64;
        preds.extend(probs.chunks(k).map(argmax_first));
    }
    let cm = confusion_matrix(ds.labels(), &preds, k)?;
    Ok((loss_sum / ds.n() as f64, accuracy(&cm)?, macro_f1(&cm)?))
}

/// Mini-batch Adam on cross-entropy with early stopping on validation
/// macro-F1. Returns the best-scoring snapshot, never simply the last state.
pub fn train(
    mut net: Network,
    train_ds: &SignalDataset,
    val_ds: &SignalDataset,
    cfg: &TrainConfig,
) -> Result<(Network, TrainHistory)> {
    cfg.validate()?;
    if train_ds.is_empty() || val_ds.is_empty() {
        return Err(Error::EmptyInput(
            "training and validation sets must be non-empty".into(),
        ));
    }
    for ds in [train_ds, val_ds] {
        if ds.len() != net.input_len || ds.classes() > net.classes() {
            return Err(Error::Shape(format!(
                "dataset (d={}, K={}) does not fit network (d={}, K={})",
                ds.len(),
                ds.classes(),
                net.input_len,
                net.classes()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(&net);
    let mut monitor = PlateauMonitor::new(cfg);
    let mut history = TrainHistory::default();
    let mut best = net.clone();
    let mut order: Vec<usize> = (0..train_ds.n()).collect();
    let k = net.classes();

    for epoch in 1..=cfg.max_epochs {
        let lr = monitor.lr();
        let hyper = cfg.adam(lr);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = segments_tensor(train_ds, batch);
            let labels: Vec<usize> = batch.iter().map(|&r| train_ds.labels()[r]).collect();
            let (logits, cache) = net.forward(&x, Mode::Train(&mut rng))?;
            let (loss, grad) = cross_entropy(&softmax(&logits, k), &labels, k)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            let grads = net.backward(&cache, &grad)?;
            net.absorb_batch_stats(&cache);
            adam.step(&mut net, &grads, &hyper)?;
            if net.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
                return Err(Error::Divergence { epoch });
            }
        }
        let train_loss = loss_sum / train_ds.n() as f64;
        let (val_loss, val_acc, val_f1) = validation_scores(&net, val_ds)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }

        let verdict = monitor.observe(val_f1);
        let mut events = Vec::new();
        if verdict.improved {
            best = net.clone();
            history.best_epoch = epoch;
        }
        if verdict.lr_halved {
            events.push(Event::LrHalved);
        }
        if verdict.stop {
            events.push(Event::EarlyStop);
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_acc,
            val_macro_f1: val_f1,
            lr,
            events,
        });
        if verdict.stop {
            break;
        }
    }

    let best_epoch = history.best_epoch;
    history.epochs[best_epoch - 1].events.insert(0, Event::Best);
    if best_epoch != history.epochs.len() {
        history
            .epochs
            .last_mut()
            .expect("at least one epoch")
            .events
            .push(Event::BestRestored);
    }
    Ok((best, history))
}
