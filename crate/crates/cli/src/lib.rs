//! Command-line driver: `prepare → train → eval → fewshot / sweep →
//! attn / report`, configured by a TOML file plus flag overrides.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use kws_core::fewshot::Strategy;
use kws_core::labels::LabelScheme;
use toml::{Table, Value};

pub use commands::dispatch;
pub use config::{parse_config, ConfigError, Preset, RunConfig, CORPUS_ENV};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

const EXIT_HELP: &str = "Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 training diverged.";

#[derive(Debug, Parser)]
#[command(name = "kws", version, about = "Hybrid CTC/attention keyword classifier", after_help = EXIT_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SchemeArg {
    Phoneme,
    Grapheme,
    Word,
}

impl From<SchemeArg> for LabelScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Phoneme => LabelScheme::Phoneme,
            SchemeArg::Grapheme => LabelScheme::Grapheme,
            SchemeArg::Word => LabelScheme::Word,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum StrategyArg {
    Retrain,
    RetrainReplace,
    Adapt,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Retrain => Strategy::Retrain,
            StrategyArg::RetrainReplace => Strategy::RetrainReplace,
            StrategyArg::Adapt => Strategy::Adapt,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus root (per-word directories of WAV files).
    #[arg(long, global = true, env = CORPUS_ENV)]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root; results go to <out>/<command>/<tag>/.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output subdirectory name (default: seed<seed>).
    #[arg(long, global = true)]
    pub tag: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, global = true)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Few-shot examples per new keyword.
    #[arg(long, global = true)]
    pub f: Option<usize>,
    /// Oversampling factor for the retrain strategies.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Learning rate (training, or adaptation for few-shot commands).
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// Training epochs (adaptation epochs for adapt).
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub beam: Option<usize>,
    /// Seeds per sweep point.
    #[arg(long, global = true)]
    pub repeats: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Disable data-parallel execution.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Scan the corpus and write split manifests and vocabularies.
    Prepare,
    /// Train the 12-category base model.
    Train,
    /// Evaluate a checkpoint on the validation and test splits.
    Eval,
    /// Run one few-shot experiment.
    Fewshot,
    /// Run a seeded grid of few-shot experiments.
    Sweep,
    /// Dump attention weights and heatmaps for test utterances.
    Attn {
        /// Words to dump.
        #[arg(long, value_delimiter = ',', default_value = "stop,yes")]
        words: Vec<String>,
        /// Utterances per word.
        #[arg(long, default_value_t = 2)]
        count: usize,
    },
    /// Merge report CSVs into one table.
    Report {
        /// Directories searched recursively for report.csv (default: --out).
        #[arg(long, value_delimiter = ',')]
        inputs: Vec<PathBuf>,
    },
    /// Write a synthetic corpus for smoke runs.
    ToyCorpus {
        #[arg(long)]
        dest: PathBuf,
        #[arg(long, default_value_t = 40)]
        speakers: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Prepare => "prepare",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Fewshot => "fewshot",
            Command::Sweep => "sweep",
            Command::Attn { .. } => "attn",
            Command::Report { .. } => "report",
            Command::ToyCorpus { .. } => "toy-corpus",
        }
    }
}

fn table(pairs: Vec<(&str, Value)>) -> Table {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn path_value(p: &std::path::Path) -> Value {
    Value::String(p.to_string_lossy().into_owned())
}

/// Translates flags into a config overlay. Flags with command-dependent
/// meaning (`--lr`, `--epochs`) are routed to the section the command uses.
pub fn flag_overrides(command: &Command, a: &CommonArgs) -> Table {
    let mut t = Table::new();
    let few = matches!(command, Command::Fewshot | Command::Sweep);
    if let Some(c) = &a.corpus {
        t.insert("corpus".into(), path_value(c));
    }
    if let Some(s) = a.seed {
        t.insert("seed".into(), Value::Integer(s as i64));
    }
    if let Some(o) = &a.out {
        t.insert("out".into(), path_value(o));
    }
    if let Some(tag) = &a.tag {
        t.insert("tag".into(), Value::String(tag.clone()));
    }
    if let Some(s) = a.scheme {
        t.insert("scheme".into(), Value::String(LabelScheme::from(s).as_str().into()));
    }
    if let Some(p) = a.preset {
        let name = match p {
            Preset::Paper => "paper",
            Preset::Toy => "toy",
            Preset::Micro => "micro",
        };
        t.insert("preset".into(), Value::String(name.into()));
    }
    if let Some(l) = &a.lexicon {
        t.insert("lexicon".into(), path_value(l));
    }
    if let Some(c) = &a.checkpoint {
        t.insert("checkpoint".into(), path_value(c));
    }
    if let Some(w) = a.workers {
        t.insert("workers".into(), Value::Integer(w as i64));
    }
    if a.sequential {
        t.insert("sequential".into(), Value::Boolean(true));
    }
    let mut fewshot = Table::new();
    let mut sweep = Table::new();
    let mut train = Table::new();
    if let Some(s) = a.strategy {
        fewshot.insert("strategy".into(), Value::String(Strategy::from(s).as_str().into()));
    }
    if let Some(f) = a.f {
        fewshot.insert("f".into(), Value::Integer(f as i64));
    }
    if let Some(k) = a.k {
        fewshot.insert("k".into(), Value::Integer(k as i64));
        sweep.insert("k".into(), Value::Array(vec![Value::Integer(k as i64)]));
    }
    if let Some(lr) = a.lr {
        if few {
            fewshot.insert("lr".into(), Value::Float(lr));
            sweep.insert("lr".into(), Value::Array(vec![Value::Float(lr)]));
        } else {
            train.insert("optimizer".into(), Value::Table(table(vec![("lr", Value::Float(lr))])));
        }
    }
    if let Some(e) = a.epochs {
        train.insert("epochs".into(), Value::Integer(e as i64));
        if few {
            fewshot.insert("adapt_epochs".into(), Value::Integer(e as i64));
            sweep.insert("epochs".into(), Value::Array(vec![Value::Integer(e as i64)]));
        }
    }
    if let Some(r) = a.repeats {
        sweep.insert("repeats".into(), Value::Integer(r as i64));
    }
    if let Some(b) = a.beam {
        t.insert("decode".into(), Value::Table(table(vec![("beam", Value::Integer(b as i64))])));
    }
    for (name, sub) in [("fewshot", fewshot), ("sweep", sweep), ("train", train)] {
        if !sub.is_empty() {
            t.insert(name.into(), Value::Table(sub));
        }
    }
    t
}

/// Maps an error to its documented exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_USAGE;
    }
    if err.downcast_ref::<commands::DivergedRun>().is_some() {
        return EXIT_DIVERGED;
    }
    match err.downcast_ref::<kws_core::Error>() {
        Some(kws_core::Error::Config(_) | kws_core::Error::MissingRoot(_)) => EXIT_USAGE,
        Some(kws_core::Error::Diverged { .. }) => EXIT_DIVERGED,
        _ => EXIT_DATA,
    }
}

/// Parses flags, resolves the configuration and runs the command. Returns
/// the output directory.
pub fn run(cli: &Cli) -> anyhow::Result<PathBuf> {
    let flags = flag_overrides(&cli.command, &cli.common);
    let cfg = parse_config(cli.common.config.as_deref(), flags)?;
    let workers = if cfg.sequential { 1 } else { cfg.workers };
    kws_core::par::with_workers(workers, || dispatch(&cli.command, &cfg))
}
