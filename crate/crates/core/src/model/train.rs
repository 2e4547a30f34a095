use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::Model;
use crate::nn::{Gradients, Optimizer, OptimizerState};
use crate::par::{self, Execution};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// Set per run from the experiment seed.
    #[serde(skip)]
    pub seed: u64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 30,
            optimizer: Optimizer::default(),
            seed: 0,
            exec: Execution::default(),
        }
    }
}

/// One normalized utterance and its token ids (EOS not included).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub features: Array2<f64>,
    pub target: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean joint loss per utterance.
    pub train_loss: f64,
    pub val_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best model by validation error, or the last one without a validator.
    pub model: Model,
    pub metrics: Vec<EpochMetrics>,
    /// 1-based; 0 when no epoch ran.
    pub best_epoch: usize,
    /// Set when a non-finite loss stopped training early.
    pub diverged: bool,
}

/// Sum of per-utterance losses and gradients, reduced in input order.
pub fn batch_gradients(model: &Model, items: &[&TrainItem], exec: Execution) -> (f64, Gradients) {
    let lambda = model.config().ctc_weight;
    let parts = par::map(exec, items, |it| model.loss_and_grad(&it.features, &it.target, lambda));
    let mut total = Gradients::zeros(model.params().len());
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.accumulate(g);
    }
    (loss, total)
}

/// Minibatch training. `validate` returns an error rate (lower is better)
/// and drives best-epoch selection; ties go to the later epoch.
pub fn train(
    model: Model,
    items: &[TrainItem],
    cfg: &TrainConfig,
    validate: Option<&(dyn Fn(&Model) -> f64 + Sync)>,
) -> Result<TrainOutcome> {
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    if items.is_empty() && cfg.epochs > 0 {
        return Err(Error::Data("no training utterances".into()));
    }
    let mut model = model;
    let mut state = OptimizerState::new(model.params());
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Model)> = None;
    let mut diverged = false;

    'epochs: for epoch in 1..=cfg.epochs {
        let mut r = rng::seeded(cfg.seed, &format!("shuffle-{epoch}"));
        order.shuffle(&mut r);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&TrainItem> = chunk.iter().map(|&i| &items[i]).collect();
            let (loss, mut grads) = batch_gradients(&model, &batch, cfg.exec);
            if !loss.is_finite() || !grads.is_finite() {
                log::warn!("non-finite loss in epoch {epoch}; stopping");
                diverged = true;
                break 'epochs;
            }
            grads.scale(1.0 / batch.len() as f64);
            let before = model.params().clone();
            state.step(&cfg.optimizer, model.params_mut(), &grads);
            if model.params().iter().any(|(_, _, v)| v.iter().any(|x| !x.is_finite())) {
                log::warn!("non-finite parameters in epoch {epoch}; stopping");
                *model.params_mut() = before;
                diverged = true;
                break 'epochs;
            }
            sum += loss;
        }
        let train_loss = sum / items.len() as f64;
        let val_error = validate.map(|f| f(&model));
        log::info!("epoch {epoch}: loss {train_loss:.4} val {val_error:?}");
        metrics.push(EpochMetrics {
            epoch,
            train_loss,
            val_error,
        });
        if let Some(v) = val_error {
            if best.as_ref().is_none_or(|(b, _, _)| v <= *b) {
                best = Some((v, epoch, model.clone()));
            }
        }
    }

    let last_epoch = metrics.last().map_or(0, |m| m.epoch);
    let (model, best_epoch) = match best {
        Some((_, e, m)) => (m, e),
        None => (model, last_epoch),
    };
    Ok(TrainOutcome {
        model,
        metrics,
        best_epoch,
        diverged,
    })
}

/// Writes `epoch,train_loss,val_error` rows.
pub fn write_metrics(path: &Path, metrics: &[EpochMetrics]) -> Result<()> {
    let mut out = String::from("epoch,train_loss,val_error\n");
    for m in metrics {
        let val = m.val_error.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", m.epoch, m.train_loss, val));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
