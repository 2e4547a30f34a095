//! Layered run configuration: preset defaults, then the TOML file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use kws_core::dataset::{TaskOptions, WordSets};
use kws_core::fewshot::{Strategy, SweepGrid, DEFAULT_LR_GRID};
use kws_core::labels::LabelScheme;
use kws_core::model::{DecodeOptions, ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// Environment variable holding the default corpus root.
pub const CORPUS_ENV: &str = "KWS_CORPUS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Sizes used for the full corpus.
    #[default]
    Paper,
    /// Small network for synthetic corpora and smoke runs.
    Toy,
    /// Tiny network for tests.
    Micro,
}

impl Preset {
    pub fn model(self) -> ModelConfig {
        match self {
            Preset::Paper => ModelConfig::default(),
            Preset::Toy => ModelConfig::toy(0),
            Preset::Micro => ModelConfig::micro(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub val_pct: f64,
    pub test_pct: f64,
    pub silence_duration_s: f64,
    pub include_silence: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        let t = TaskOptions::default();
        Self {
            val_pct: t.val_pct,
            test_pct: t.test_pct,
            silence_duration_s: t.silence_duration_s,
            include_silence: t.include_silence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewShotConfig {
    pub strategy: Strategy,
    pub f: usize,
    pub k: usize,
    pub lr: f64,
    pub adapt_epochs: usize,
    pub adapt_fillers: bool,
}

impl Default for FewShotConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Retrain,
            f: 10,
            k: 10,
            lr: 3.0,
            adapt_epochs: 10,
            adapt_fillers: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub k: Vec<usize>,
    pub lr: Vec<f64>,
    pub epochs: Vec<usize>,
    pub repeats: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k: vec![1, 10, 30, 100, 300],
            lr: DEFAULT_LR_GRID.to_vec(),
            epochs: vec![10],
            repeats: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    pub seed: u64,
    pub scheme: LabelScheme,
    /// Pronunciation lexicon replacing the built-in one (phoneme scheme).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    /// Trained model read by `eval`, `attn` and `adapt`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub sequential: bool,
    pub preset: Preset,
    pub words: WordSets,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Decoding used for per-epoch validation.
    pub val_decode: DecodeOptions,
    pub decode: DecodeOptions,
    pub fewshot: FewShotConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn with_preset(preset: Preset) -> Self {
        Self {
            corpus: None,
            out: PathBuf::from("runs"),
            tag: None,
            seed: 0,
            scheme: LabelScheme::Phoneme,
            lexicon: None,
            checkpoint: None,
            workers: 0,
            sequential: false,
            preset,
            words: WordSets::default(),
            data: DataConfig::default(),
            model: preset.model(),
            train: TrainConfig::default(),
            val_decode: DecodeOptions::greedy(),
            decode: DecodeOptions::default(),
            fewshot: FewShotConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    pub fn task_options(&self) -> TaskOptions {
        TaskOptions {
            val_pct: self.data.val_pct,
            test_pct: self.data.test_pct,
            seed: self.seed,
            silence_duration_s: self.data.silence_duration_s,
            include_silence: self.data.include_silence,
            ..TaskOptions::default()
        }
    }

    pub fn sweep_grid(&self) -> SweepGrid {
        SweepGrid {
            strategy: self.fewshot.strategy,
            f: self.fewshot.f,
            k: self.sweep.k.clone(),
            lr: self.sweep.lr.clone(),
            epochs: self.sweep.epochs.clone(),
            seeds: (0..self.sweep.repeats as u64).map(|i| self.seed + i).collect(),
        }
    }

    pub fn tag(&self) -> String {
        self.tag.clone().unwrap_or_else(|| format!("seed{}", self.seed))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.lexicon.is_some() && self.scheme != LabelScheme::Phoneme {
            anyhow::bail!(ConfigError(format!(
                "a lexicon only applies to the phoneme scheme, but scheme is {}",
                self.scheme
            )));
        }
        self.words.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.model
            .clone()
            .with_vocab(5)
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;
        if self.train.batch_size == 0 {
            anyhow::bail!(ConfigError("train.batch_size must be >= 1".into()));
        }
        if self.decode.beam == 0 || self.val_decode.beam == 0 {
            anyhow::bail!(ConfigError("beam must be >= 1".into()));
        }
        if self.fewshot.k == 0 {
            anyhow::bail!(ConfigError("fewshot.k must be >= 1".into()));
        }
        if self.fewshot.lr.is_nan() || self.fewshot.lr <= 0.0 {
            anyhow::bail!(ConfigError("fewshot.lr must be > 0".into()));
        }
        if self.sweep.repeats == 0 {
            anyhow::bail!(ConfigError("sweep.repeats must be >= 1".into()));
        }
        Ok(())
    }
}

/// Invalid configuration or usage; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Recursively overlays `top` onto `base`. A table whose `kind` differs
/// from the base replaces it outright (tagged enums such as the optimizer).
pub fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => {
                let same_kind = match (b.get("kind"), t.get("kind")) {
                    (Some(x), Some(y)) => x == y,
                    _ => true,
                };
                if same_kind {
                    merge(b, t);
                } else {
                    *b = t;
                }
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Builds a config from an optional TOML file and flag overrides (given as
/// a table in the same shape as the file). Flags win over the file, which
/// wins over the preset defaults.
pub fn parse_config(path: Option<&Path>, flags: Table) -> anyhow::Result<RunConfig> {
    let file: Table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    let preset_of = |t: &Table| t.get("preset").and_then(|v| v.as_str()).map(str::to_string);
    let preset = match preset_of(&flags).or_else(|| preset_of(&file)) {
        Some(p) => Value::String(p)
            .try_into::<Preset>()
            .map_err(|_| ConfigError("preset must be one of paper, toy, micro".into()))?,
        None => Preset::default(),
    };
    let mut table = Table::try_from(RunConfig::with_preset(preset)).expect("defaults serialize");
    merge(&mut table, file);
    merge(&mut table, flags);
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e| ConfigError(format!("invalid configuration: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
