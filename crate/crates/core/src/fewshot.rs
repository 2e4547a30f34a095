//! Vocabulary extension from a few examples per new keyword.
//!
//! * `retrain` trains from scratch on the original training data plus the
//!   few-shot recordings, each repeated `k` times.
//! * `retrain_replace` does the same, but every transcription is first
//!   restricted to the base-12 vocabulary (missing tokens become the UNK
//!   token), so the output layer keeps its original size.
//! * `adapt` continues training a base-12 model on `f` examples per new
//!   keyword plus `f` examples per original keyword.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    add_fewshot, build_task_dataset, oversample, sample_fewshot, BackgroundFile, CorpusEntry, Example, FewShotSample,
    Phase, Split, Subset, TaskDataset, TaskOptions, WordSets,
};
use crate::eval::{evaluate_split, summarize, CategoryMap, EvalReport};
use crate::features::Fbank;
use crate::labels::{build_vocabulary, replace_missing_tokens, LabelScheme, Lexicon, Transcriber, Vocabulary};
use crate::model::{train, Checkpoint, CheckpointMeta, DecodeOptions, TrainConfig};
use crate::par::{self, Execution};
use crate::pipeline::{extend_cache, fit_task, train_items, validation_error, FeatureCache, FitOptions};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Retrain,
    RetrainReplace,
    Adapt,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Retrain, Strategy::RetrainReplace, Strategy::Adapt];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Retrain => "retrain",
            Strategy::RetrainReplace => "retrain_replace",
            Strategy::Adapt => "adapt",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?} (expected retrain, retrain_replace or adapt)")))
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of one few-shot experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotRun {
    pub strategy: Strategy,
    pub f: usize,
    pub k: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub scheme: LabelScheme,
    pub seed: u64,
    pub best_epoch: usize,
    pub diverged: bool,
    /// Validation then test.
    pub reports: Vec<EvalReport>,
}

impl FewShotRun {
    pub fn report(&self, split: Split) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.split == split.as_str())
    }
}

/// Settings shared by every run of an experiment.
#[derive(Debug, Clone)]
pub struct FewShotSetup {
    pub sets: WordSets,
    pub lexicon: Lexicon,
    pub scheme: LabelScheme,
    pub task: TaskOptions,
    pub fit: FitOptions,
    pub decode: DecodeOptions,
    /// Adds `_silence_` and `_unknown_` examples to the adaptation set.
    pub adapt_fillers: bool,
}

/// Datasets and features prepared once per corpus.
#[derive(Debug, Clone)]
pub struct FewShotEnv {
    pub setup: FewShotSetup,
    pub base_task: TaskDataset,
    pub extended_task: TaskDataset,
    pub base_vocab: Vocabulary,
    pub extended_vocab: Vocabulary,
    pub cache: FeatureCache,
}

fn as_examples(entries: &[CorpusEntry], task: &TaskDataset, transcriber: &Transcriber) -> Result<Vec<Example>> {
    let mut words = BTreeMap::new();
    for e in entries {
        words.entry(e.word.clone()).or_insert_with(Vec::new).push(e.clone());
    }
    let all = FewShotSample {
        f: 0,
        entries: words,
        seed: 0,
    };
    Ok(add_fewshot(&empty_like(task), &all, transcriber)?.train)
}

impl FewShotEnv {
    /// Builds both task phases and computes features for every utterance
    /// any run may touch.
    pub fn prepare(root: &Path, entries: &[CorpusEntry], background: &[BackgroundFile], setup: FewShotSetup) -> Result<Self> {
        let transcriber = Transcriber::new(setup.scheme, setup.lexicon.clone());
        let base_opts = TaskOptions {
            phase: Phase::Base12,
            ..setup.task.clone()
        };
        let ext_opts = TaskOptions {
            phase: Phase::Extended,
            ..setup.task.clone()
        };
        let base_task = build_task_dataset(entries, background, &setup.sets, &transcriber, &base_opts)?;
        let extended_task = build_task_dataset(entries, background, &setup.sets, &transcriber, &ext_opts)?;
        let base_vocab = build_vocabulary(setup.scheme, &setup.sets, &setup.lexicon, Phase::Base12)?;
        let extended_vocab = build_vocabulary(setup.scheme, &setup.sets, &setup.lexicon, Phase::Extended)?;
        let reserved = as_examples(&extended_task.reserved, &extended_task, &transcriber)?;
        let mut cache = FeatureCache::new();
        let fbank = Fbank::new(Default::default());
        let all = extended_task
            .train
            .iter()
            .chain(&extended_task.validation)
            .chain(&extended_task.test)
            .chain(&reserved);
        extend_cache(&mut cache, root, all, background, &fbank, setup.fit.exec)?;
        Ok(Self {
            setup,
            base_task,
            extended_task,
            base_vocab,
            extended_vocab,
            cache,
        })
    }

    pub fn transcriber(&self) -> Transcriber {
        Transcriber::new(self.setup.scheme, self.setup.lexicon.clone())
    }

    /// Transcriber whose output never leaves the base-12 vocabulary.
    pub fn restricted_transcriber(&self) -> Transcriber {
        self.transcriber().restricted(self.base_vocab.clone())
    }

    pub fn sample(&self, f: usize, seed: u64) -> Result<FewShotSample> {
        sample_fewshot(&self.extended_task.reserved, &self.setup.sets.new_kwd, f, rng::derive_seed(seed, "fewshot"))
    }

    /// Trains the 12-category base model.
    pub fn train_base(&self, seed: u64) -> Result<crate::pipeline::Fitted> {
        let map = CategoryMap::new(&self.base_task.categories, &self.transcriber())?;
        fit_task(&self.base_task, &self.base_vocab, &map, &self.cache, &self.setup.fit, seed)
    }

    fn evaluate(&self, ckpt: &Checkpoint, task: &TaskDataset, map: &CategoryMap) -> Result<Vec<EvalReport>> {
        [Split::Validation, Split::Test]
            .into_iter()
            .map(|s| {
                evaluate_split(&ckpt.model, &ckpt.vocab, map, task, s, &self.cache, &ckpt.stats, &self.setup.decode, self.setup.fit.exec)
                    .map(|(r, _)| r)
            })
            .collect()
    }

    /// Base-12 evaluation of a checkpoint (validation and test).
    pub fn evaluate_base(&self, ckpt: &Checkpoint) -> Result<Vec<EvalReport>> {
        let map = CategoryMap::new(&self.base_task.categories, &self.transcriber())?;
        self.evaluate(ckpt, &self.base_task, &map)
    }
}

/// Replaces every token outside `vocab` in each example's transcription.
pub fn restrict_examples(examples: &mut [Example], vocab: &Vocabulary) {
    for e in examples {
        e.tokens = replace_missing_tokens(&e.tokens, vocab);
    }
}

/// Trains from scratch on `task` plus the few-shot sample oversampled `k`
/// times. With `replace`, labels are restricted to the base-12 vocabulary.
pub fn run_retrain(env: &FewShotEnv, task: &TaskDataset, sample: &FewShotSample, k: usize, replace: bool, seed: u64) -> Result<FewShotRun> {
    let fitted = retrain_checkpoint(env, task, sample, k, replace, seed)?;
    let transcriber = if replace { env.restricted_transcriber() } else { env.transcriber() };
    let map = CategoryMap::new(&fitted.1.categories, &transcriber)?;
    let reports = env.evaluate(&fitted.0.checkpoint, &fitted.1, &map)?;
    Ok(FewShotRun {
        strategy: if replace { Strategy::RetrainReplace } else { Strategy::Retrain },
        f: sample.f,
        k: Some(k),
        lr: None,
        epochs: None,
        scheme: env.setup.scheme,
        seed,
        best_epoch: fitted.0.best_epoch,
        diverged: fitted.0.diverged,
        reports,
    })
}

/// The training half of [`run_retrain`]: the fitted model and the task it
/// was trained on (few-shot examples and label restriction applied).
pub fn retrain_checkpoint(
    env: &FewShotEnv,
    task: &TaskDataset,
    sample: &FewShotSample,
    k: usize,
    replace: bool,
    seed: u64,
) -> Result<(crate::pipeline::Fitted, TaskDataset)> {
    let transcriber = env.transcriber();
    let mut ds = oversample(&add_fewshot(task, sample, &transcriber)?, sample, k)?;
    let vocab = if replace {
        for part in [&mut ds.train, &mut ds.validation, &mut ds.test] {
            restrict_examples(part, &env.base_vocab);
        }
        env.base_vocab.clone()
    } else if ds.phase == Phase::Extended {
        env.extended_vocab.clone()
    } else {
        env.base_vocab.clone()
    };
    let map_transcriber = if replace { env.restricted_transcriber() } else { transcriber };
    let map = CategoryMap::new(&ds.categories, &map_transcriber)?;
    let fitted = fit_task(&ds, &vocab, &map, &env.cache, &env.setup.fit, seed)?;
    Ok((fitted, ds))
}

/// `f` original-keyword training examples per keyword, drawn without
/// replacement.
fn sample_original(env: &FewShotEnv, f: usize, seed: u64) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for word in &env.setup.sets.org_kwd {
        let pool: Vec<&Example> = env.base_task.train.iter().filter(|e| &e.word == word).collect();
        if pool.len() < f {
            return Err(Error::InsufficientFewShot {
                f,
                counts: format!("{word}: {}", pool.len()),
            });
        }
        let mut r = rng::seeded(seed, &format!("adapt-original/{word}"));
        let mut idx = index::sample(&mut r, pool.len(), f).into_vec();
        idx.sort_unstable();
        out.extend(idx.into_iter().map(|i| pool[i].clone()));
    }
    if env.setup.adapt_fillers {
        for cat in [crate::dataset::SILENCE_CATEGORY, crate::dataset::UNKNOWN_CATEGORY] {
            let pool: Vec<&Example> = env.base_task.train.iter().filter(|e| e.category == cat).collect();
            let n = f.min(pool.len());
            let mut r = rng::seeded(seed, &format!("adapt-filler/{cat}"));
            let mut idx = index::sample(&mut r, pool.len(), n).into_vec();
            idx.sort_unstable();
            out.extend(idx.into_iter().map(|i| pool[i].clone()));
        }
    }
    Ok(out)
}

/// Continues training `base` on the adaptation set with learning rate `lr`
/// for up to `epochs` epochs, keeping the epoch with the lowest validation
/// error on the new keywords. Zero epochs returns `base` untouched.
pub fn adapt_checkpoint(env: &FewShotEnv, base: &Checkpoint, sample: &FewShotSample, lr: f64, epochs: usize, seed: u64) -> Result<(Checkpoint, usize, bool)> {
    if lr.is_nan() || lr <= 0.0 {
        return Err(Error::Config(format!("learning rate must be > 0, got {lr}")));
    }
    let restricted = env.restricted_transcriber();
    let mut adapt_set = add_fewshot(&empty_like(&env.extended_task), sample, &restricted)?.train;
    adapt_set.extend(sample_original(env, sample.f, seed)?);
    restrict_examples(&mut adapt_set, &base.vocab);
    let items = train_items(&adapt_set, &env.cache, &base.stats, &base.vocab, &env.extended_task.background)?;
    let mut optimizer = env.setup.fit.train.optimizer.clone();
    optimizer.lr = lr;
    let cfg = TrainConfig {
        epochs,
        optimizer,
        seed,
        exec: env.setup.fit.exec,
        ..env.setup.fit.train.clone()
    };
    let map = CategoryMap::new(&env.extended_task.categories, &restricted)?;
    let mut val_task = env.extended_task.clone();
    restrict_examples(&mut val_task.validation, &base.vocab);
    let validate = |m: &crate::model::Model| {
        validation_error(
            m,
            &base.vocab,
            &map,
            &val_task,
            &env.cache,
            &base.stats,
            Some(Subset::NewKwd),
            &env.setup.fit.val_decode,
            env.setup.fit.exec,
        )
    };
    let out = train(base.model.clone(), &items, &cfg, Some(&validate))?;
    let ckpt = Checkpoint {
        model: out.model,
        vocab: base.vocab.clone(),
        categories: env.extended_task.categories.clone(),
        stats: base.stats.clone(),
        meta: CheckpointMeta {
            seed,
            epoch: out.best_epoch,
            extra: BTreeMap::from([("strategy".to_string(), "adapt".to_string()), ("lr".to_string(), lr.to_string())]),
        },
    };
    Ok((ckpt, out.best_epoch, out.diverged))
}

fn empty_like(task: &TaskDataset) -> TaskDataset {
    TaskDataset {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        categories: task.categories.clone(),
        reserved: Vec::new(),
        background: task.background.clone(),
        phase: task.phase,
        seed: task.seed,
    }
}

pub fn run_adapt(env: &FewShotEnv, base: &Checkpoint, sample: &FewShotSample, lr: f64, epochs: usize, seed: u64) -> Result<FewShotRun> {
    let (ckpt, best_epoch, diverged) = adapt_checkpoint(env, base, sample, lr, epochs, seed)?;
    let map = CategoryMap::new(&env.extended_task.categories, &env.restricted_transcriber())?;
    let mut task = env.extended_task.clone();
    for part in [&mut task.validation, &mut task.test] {
        restrict_examples(part, &ckpt.vocab);
    }
    let reports = env.evaluate(&ckpt, &task, &map)?;
    Ok(FewShotRun {
        strategy: Strategy::Adapt,
        f: sample.f,
        k: None,
        lr: Some(lr),
        epochs: Some(epochs),
        scheme: env.setup.scheme,
        seed,
        best_epoch,
        diverged,
        reports,
    })
}

/// Axis values of a sweep. Retrain strategies sweep `k`; adapt sweeps
/// `lr × epochs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub strategy: Strategy,
    pub f: usize,
    pub k: Vec<usize>,
    pub lr: Vec<f64>,
    pub epochs: Vec<usize>,
    pub seeds: Vec<u64>,
}

pub const DEFAULT_LR_GRID: [f64; 7] = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0];

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            strategy: Strategy::Retrain,
            f: 10,
            k: vec![1, 10, 30, 100, 300],
            lr: DEFAULT_LR_GRID.to_vec(),
            epochs: vec![10],
            seeds: (0..10).collect(),
        }
    }
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub strategy: Strategy,
    pub f: usize,
    pub k: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
}

impl SweepGrid {
    pub fn from_toml(text: &str) -> Result<Self> {
        let g: SweepGrid = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sweep grid serializes")
    }

    pub fn repeats(&self) -> usize {
        self.seeds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("sweep needs at least one seed".into()));
        }
        match self.strategy {
            Strategy::Adapt => {
                if self.lr.is_empty() || self.epochs.is_empty() {
                    return Err(Error::Config("adapt sweeps need non-empty lr and epochs lists".into()));
                }
                if self.lr.iter().any(|&l| l.is_nan() || l <= 0.0) {
                    return Err(Error::Config("learning rates must be > 0".into()));
                }
            }
            _ => {
                if self.k.is_empty() || self.k.contains(&0) {
                    return Err(Error::Config("retrain sweeps need a non-empty k list with k >= 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        match self.strategy {
            Strategy::Adapt => self
                .lr
                .iter()
                .flat_map(|&lr| {
                    self.epochs.iter().map(move |&e| SweepPoint {
                        strategy: Strategy::Adapt,
                        f: self.f,
                        k: None,
                        lr: Some(lr),
                        epochs: Some(e),
                    })
                })
                .collect(),
            s => self
                .k
                .iter()
                .map(|&k| SweepPoint {
                    strategy: s,
                    f: self.f,
                    k: Some(k),
                    lr: None,
                    epochs: None,
                })
                .collect(),
        }
    }
}

/// One evaluation set of one run. `error` is empty for failed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub strategy: Strategy,
    pub f: usize,
    pub k: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: u64,
    pub split: String,
    pub set: String,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: Strategy,
    pub f: usize,
    pub k: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub split: String,
    pub set: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
    /// Runs that diverged or errored.
    pub failed: usize,
}

const SWEEP_SETS: [&str; 6] = ["org_kwd", "silence", "org_unk", "new_unk", "unk", "new_kwd"];

fn raw_rows(point: &SweepPoint, seed: u64, run: Option<&FewShotRun>) -> Vec<RawRow> {
    let mut rows = Vec::new();
    for split in ["validation", "test"] {
        for set in SWEEP_SETS {
            let error = run
                .filter(|r| !r.diverged)
                .and_then(|r| r.reports.iter().find(|x| x.split == split))
                .and_then(|rep| rep.error(set));
            let failed = run.is_none_or(|r| r.diverged);
            if error.is_none() && !failed {
                continue;
            }
            rows.push(RawRow {
                strategy: point.strategy,
                f: point.f,
                k: point.k,
                lr: point.lr,
                epochs: point.epochs,
                seed,
                split: split.into(),
                set: set.into(),
                error,
            });
        }
    }
    rows
}

/// Runs every grid point with every seed (in parallel when `exec` allows).
/// Failed runs become rows with an empty error.
pub fn run_sweep<F>(grid: &SweepGrid, exec: Execution, runner: F) -> Result<(Vec<RawRow>, Vec<AggregateRow>)>
where
    F: Fn(&SweepPoint, u64) -> Result<FewShotRun> + Sync + Send,
{
    grid.validate()?;
    let jobs: Vec<(SweepPoint, u64)> = grid
        .points()
        .into_iter()
        .flat_map(|p| grid.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let results = par::map(exec, &jobs, |(p, s)| runner(p, *s));
    let mut raw = Vec::new();
    for ((p, s), r) in jobs.iter().zip(&results) {
        match r {
            Ok(run) => {
                if run.diverged {
                    log::warn!("sweep point {p:?} seed {s} diverged");
                }
                raw.extend(raw_rows(p, *s, Some(run)));
            }
            Err(e) => {
                log::warn!("sweep point {p:?} seed {s} failed: {e}");
                raw.extend(raw_rows(p, *s, None));
            }
        }
    }
    let agg = aggregate(&raw);
    Ok((raw, agg))
}

type GroupKey = (Strategy, usize, Option<usize>, Option<u64>, Option<usize>, String, String);

/// Groups raw rows by (point, split, set) in first-appearance order.
pub fn aggregate(raw: &[RawRow]) -> Vec<AggregateRow> {
    let mut order: Vec<GroupKey> = Vec::new();
    let mut groups: BTreeMap<GroupKey, (Vec<f64>, usize, &RawRow)> = BTreeMap::new();
    for r in raw {
        let key = (r.strategy, r.f, r.k, r.lr.map(f64::to_bits), r.epochs, r.split.clone(), r.set.clone());
        let g = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            (Vec::new(), 0, r)
        });
        match r.error {
            Some(e) => g.0.push(e),
            None => g.1 += 1,
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (values, failed, r) = &groups[&key];
            let s = summarize(values);
            AggregateRow {
                strategy: r.strategy,
                f: r.f,
                k: r.k,
                lr: r.lr,
                epochs: r.epochs,
                split: r.split.clone(),
                set: r.set.clone(),
                mean: s.map(|s| s.mean),
                std: s.map(|s| s.std),
                n: values.len(),
                failed: *failed,
            }
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const RAW_COLUMNS: [&str; 9] = ["strategy", "f", "k", "lr", "epochs", "seed", "split", "set", "error"];

/// Appends rows to a raw results CSV, writing the header for a new file.
pub fn append_raw_csv(path: &Path, rows: &[RawRow]) -> Result<()> {
    let exists = path.exists() && std::fs::metadata(path).map(|m| m.len() > 0).unwrap_or(false);
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if !exists {
        w.write_record(RAW_COLUMNS)?;
    }
    for r in rows {
        w.write_record([
            r.strategy.as_str().to_string(),
            r.f.to_string(),
            opt(r.k),
            opt(r.lr),
            opt(r.epochs),
            r.seed.to_string(),
            r.split.clone(),
            r.set.clone(),
            opt(r.error),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_raw_csv(path: &Path) -> Result<Vec<RawRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let bad = |what: &str| Error::Data(format!("{}: bad {what}", path.display()));
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                rec[i].parse().map(Some).map_err(|_| bad(RAW_COLUMNS[i]))
            }
        };
        let int = |i: usize| -> Result<Option<usize>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                rec[i].parse().map(Some).map_err(|_| bad(RAW_COLUMNS[i]))
            }
        };
        out.push(RawRow {
            strategy: rec[0].parse()?,
            f: int(1)?.ok_or_else(|| bad("f"))?,
            k: int(2)?,
            lr: num(3)?,
            epochs: int(4)?,
            seed: rec[5].parse().map_err(|_| bad("seed"))?,
            split: rec[6].to_string(),
            set: rec[7].to_string(),
            error: num(8)?,
        });
    }
    Ok(out)
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    w.write_record(["strategy", "f", "k", "lr", "epochs", "split", "set", "mean", "std", "n", "failed", "single_run"])?;
    for r in rows {
        w.write_record([
            r.strategy.as_str().to_string(),
            r.f.to_string(),
            opt(r.k),
            opt(r.lr),
            opt(r.epochs),
            r.split.clone(),
            r.set.clone(),
            opt(r.mean),
            opt(r.std),
            r.n.to_string(),
            r.failed.to_string(),
            (r.n == 1).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
