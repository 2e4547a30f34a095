//! Glue between datasets and the model: audio loading, cached features,
//! normalization and token encoding.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use ndarray::Array2;

use crate::audio::{self, AudioClip};
use crate::dataset::{BackgroundFile, Example, ExampleSource, Subset, TaskDataset};
use crate::eval::{classification_error, evaluate, CategoryMap};
use crate::features::{normalize, Fbank, FeatureMatrix, FeatureStats};
use crate::labels::Vocabulary;
use crate::model::{
    train, Checkpoint, CheckpointMeta, DecodeOptions, EpochMetrics, Model, ModelConfig, TrainConfig, TrainItem,
};
use crate::par::{self, Execution};
use crate::{Error, Result};

/// Filterbank features keyed by [`ExampleSource::key`].
pub type FeatureCache = BTreeMap<String, FeatureMatrix>;

/// Computes features for every distinct source in `examples` that is not
/// already cached.
pub fn extend_cache<'a>(
    cache: &mut FeatureCache,
    root: &Path,
    examples: impl IntoIterator<Item = &'a Example>,
    background: &[BackgroundFile],
    fbank: &Fbank,
    exec: Execution,
) -> Result<()> {
    let mut todo: BTreeMap<String, &ExampleSource> = BTreeMap::new();
    for ex in examples {
        let key = ex.source.key(background);
        if !cache.contains_key(&key) {
            todo.entry(key).or_insert(&ex.source);
        }
    }
    if todo.is_empty() {
        return Ok(());
    }
    let mut noise: HashMap<usize, AudioClip> = HashMap::new();
    for src in todo.values() {
        if let ExampleSource::Silence(c) = src {
            if let Entry::Vacant(e) = noise.entry(c.background) {
                e.insert(audio::read_wav(&root.join(&background[c.background].path))?);
            }
        }
    }
    let jobs: Vec<(&String, &&ExampleSource)> = todo.iter().collect();
    let results = par::map(exec, &jobs, |(_, src)| {
        let clip = match src {
            ExampleSource::File(rel) => audio::read_wav(&root.join(rel))?,
            ExampleSource::Silence(c) => noise[&c.background].crop(c.offset, c.len),
        };
        fbank.compute(&clip)
    });
    for ((key, _), feats) in jobs.into_iter().zip(results) {
        cache.insert(key.clone(), feats?);
    }
    Ok(())
}

/// Normalized `T × 80` features for one example.
pub fn example_features(ex: &Example, cache: &FeatureCache, stats: &FeatureStats, background: &[BackgroundFile]) -> Result<Array2<f64>> {
    let key = ex.source.key(background);
    let feats = cache
        .get(&key)
        .ok_or_else(|| Error::Data(format!("no features computed for {key}")))?;
    Ok(normalize(feats, stats).frames)
}

/// Mean/variance over the training examples' features.
pub fn training_stats(train: &[Example], cache: &FeatureCache, background: &[BackgroundFile]) -> Result<FeatureStats> {
    let mut seen = std::collections::BTreeSet::new();
    let mut feats = Vec::new();
    for ex in train {
        let key = ex.source.key(background);
        if seen.insert(key.clone()) {
            feats.push(
                cache
                    .get(&key)
                    .ok_or_else(|| Error::Data(format!("no features computed for {key}")))?,
            );
        }
    }
    FeatureStats::from_features(feats)
}

pub fn train_items(
    examples: &[Example],
    cache: &FeatureCache,
    stats: &FeatureStats,
    vocab: &Vocabulary,
    background: &[BackgroundFile],
) -> Result<Vec<TrainItem>> {
    examples
        .iter()
        .map(|ex| {
            Ok(TrainItem {
                features: example_features(ex, cache, stats, background)?,
                target: vocab.encode(ex.tokens.tokens()),
            })
        })
        .collect()
}

/// Model, optimizer and validation-decoding settings for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// `vocab_size` is overwritten with the task vocabulary's size.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub val_decode: DecodeOptions,
    pub exec: Execution,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            val_decode: DecodeOptions::greedy(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub checkpoint: Checkpoint,
    pub metrics: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub diverged: bool,
}

/// Validation error restricted to `subset` (all utterances when `None`).
#[allow(clippy::too_many_arguments)]
pub fn validation_error(
    model: &Model,
    vocab: &Vocabulary,
    map: &CategoryMap,
    task: &TaskDataset,
    cache: &FeatureCache,
    stats: &FeatureStats,
    subset: Option<Subset>,
    opts: &DecodeOptions,
    exec: Execution,
) -> f64 {
    let examples: Vec<Example> = task
        .validation
        .iter()
        .filter(|e| subset.is_none_or(|s| e.subset == s))
        .cloned()
        .collect();
    match evaluate(model, vocab, map, &examples, cache, stats, &task.background, opts, exec) {
        Ok(r) => classification_error(&r, |_| true).unwrap_or(f64::INFINITY),
        Err(e) => {
            log::warn!("validation failed: {e}");
            f64::INFINITY
        }
    }
}

/// Trains a fresh model on `task.train`, selecting the epoch with the lowest
/// validation error.
pub fn fit_task(task: &TaskDataset, vocab: &Vocabulary, map: &CategoryMap, cache: &FeatureCache, opts: &FitOptions, seed: u64) -> Result<Fitted> {
    let stats = training_stats(&task.train, cache, &task.background)?;
    let items = train_items(&task.train, cache, &stats, vocab, &task.background)?;
    let model = Model::new(opts.model.clone().with_vocab(vocab.len()), seed)?;
    let train_cfg = TrainConfig {
        seed,
        exec: opts.exec,
        ..opts.train.clone()
    };
    let has_val = !task.validation.is_empty();
    let validate = |m: &Model| validation_error(m, vocab, map, task, cache, &stats, None, &opts.val_decode, opts.exec);
    let out = train(model, &items, &train_cfg, has_val.then_some(&validate as &(dyn Fn(&Model) -> f64 + Sync)))?;
    Ok(Fitted {
        checkpoint: Checkpoint {
            model: out.model,
            vocab: vocab.clone(),
            categories: task.categories.clone(),
            stats,
            meta: CheckpointMeta {
                seed,
                epoch: out.best_epoch,
                extra: Default::default(),
            },
        },
        metrics: out.metrics,
        best_epoch: out.best_epoch,
        diverged: out.diverged,
    })
}
