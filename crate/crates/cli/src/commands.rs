use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use kws_core::dataset::{build_task_dataset, scan_corpus, write_manifest, CorpusScan, Phase, Split, TaskDataset, TaskOptions};
use kws_core::eval::{
    dump_attention, evaluate_split, read_report_csv, render_table, report_cells, results_tsv, row_entropy, write_report_csv,
    CategoryMap, EvalReport, ReportCell,
};
use kws_core::features::Fbank;
use kws_core::fewshot::{
    append_raw_csv, run_adapt, run_retrain, run_sweep, write_aggregate_csv, FewShotEnv, FewShotRun, FewShotSetup, RawRow,
    Strategy,
};
use kws_core::labels::{build_vocabulary, load_lexicon, Lexicon, Transcriber};
use kws_core::model::{write_metrics, Checkpoint};
use kws_core::par::Execution;
use kws_core::pipeline::{example_features, extend_cache, FeatureCache, FitOptions};
use kws_core::synth::{write_toy_corpus, ToyCorpusSpec};

use crate::config::{ConfigError, RunConfig};
use crate::Command;

/// Training stopped on a non-finite loss; maps to exit code 3.
#[derive(Debug)]
pub struct DivergedRun(pub String);

impl std::fmt::Display for DivergedRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training diverged: {}", self.0)
    }
}

impl std::error::Error for DivergedRun {}

const TABLE_SETS: [&str; 3] = ["org_kwd", "unk", "new_kwd"];

fn exec(cfg: &RunConfig) -> Execution {
    if cfg.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn corpus_root(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let root = cfg.corpus.clone().ok_or_else(|| {
        ConfigError(format!("no corpus root: pass --corpus or set {}", crate::CORPUS_ENV))
    })?;
    if !root.is_dir() {
        return Err(kws_core::Error::MissingRoot(root).into());
    }
    Ok(root)
}

fn lexicon(cfg: &RunConfig) -> anyhow::Result<Lexicon> {
    Ok(match &cfg.lexicon {
        Some(p) => load_lexicon(p)?,
        None => Lexicon::builtin(),
    })
}

/// Creates `<out>/<command>/<tag>/` and echoes the resolved config into it.
fn out_dir(cfg: &RunConfig, command: &str) -> anyhow::Result<PathBuf> {
    let dir = cfg.out.join(command).join(cfg.tag());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.toml"), cfg.to_toml()).with_context(|| format!("writing config to {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn scan(cfg: &RunConfig) -> anyhow::Result<(PathBuf, CorpusScan)> {
    let root = corpus_root(cfg)?;
    let scan = scan_corpus(&root, exec(cfg))?;
    if scan.entries.is_empty() {
        return Err(kws_core::Error::Data(format!("no recordings found under {}", root.display())).into());
    }
    Ok((root, scan))
}

fn setup(cfg: &RunConfig) -> anyhow::Result<FewShotSetup> {
    Ok(FewShotSetup {
        sets: cfg.words.clone(),
        lexicon: lexicon(cfg)?,
        scheme: cfg.scheme,
        task: cfg.task_options(),
        fit: FitOptions {
            model: cfg.model.clone(),
            train: cfg.train.clone(),
            val_decode: cfg.val_decode,
            exec: exec(cfg),
        },
        decode: cfg.decode,
        adapt_fillers: cfg.fewshot.adapt_fillers,
    })
}

fn env(cfg: &RunConfig) -> anyhow::Result<FewShotEnv> {
    let (root, scan) = scan(cfg)?;
    Ok(FewShotEnv::prepare(&root, &scan.entries, &scan.background, setup(cfg)?)?)
}

fn load_checkpoint(cfg: &RunConfig) -> anyhow::Result<Checkpoint> {
    let p = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| ConfigError("this command needs --checkpoint".into()))?;
    Ok(Checkpoint::load(p)?)
}

pub fn dispatch(command: &Command, cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    match command {
        Command::Prepare => prepare(cfg),
        Command::Train => train(cfg),
        Command::Eval => eval(cfg),
        Command::Fewshot => fewshot(cfg),
        Command::Sweep => sweep(cfg),
        Command::Attn { words, count } => attn(cfg, words, *count),
        Command::Report { inputs } => report(cfg, inputs),
        Command::ToyCorpus { dest, speakers } => toy_corpus(cfg, dest, *speakers),
    }
}

fn summary(task: &TaskDataset) -> String {
    let mut s = String::from("split\tcategory\tcount\n");
    for split in Split::ALL {
        for c in &task.categories {
            s.push_str(&format!("{}\t{}\t{}\n", split.as_str(), c, task.count(split, c)));
        }
    }
    s
}

fn prepare(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let (_, scan) = scan(cfg)?;
    let dir = out_dir(cfg, "prepare")?;
    let lex = lexicon(cfg)?;
    let transcriber = Transcriber::new(cfg.scheme, lex.clone());
    for (phase, name) in [(Phase::Base12, "base"), (Phase::Extended, "extended")] {
        let opts = TaskOptions {
            phase,
            ..cfg.task_options()
        };
        let task = build_task_dataset(&scan.entries, &scan.background, &cfg.words, &transcriber, &opts)?;
        write_manifest(&dir.join(format!("manifest_{name}.tsv")), &task)?;
        write(&dir.join(format!("counts_{name}.tsv")), &summary(&task))?;
        build_vocabulary(cfg.scheme, &cfg.words, &lex, phase)?.save(&dir.join(format!("vocab_{name}.txt")))?;
    }
    let mut warnings = scan.warnings.join("\n");
    if !warnings.is_empty() {
        warnings.push('\n');
    }
    write(&dir.join("scan_warnings.txt"), &warnings)?;
    log::info!("{} recordings, {} skipped", scan.entries.len(), scan.warnings.len());
    Ok(dir)
}

fn train(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let env = env(cfg)?;
    let dir = out_dir(cfg, "train")?;
    let fitted = env.train_base(cfg.seed)?;
    write_metrics(&dir.join("metrics.csv"), &fitted.metrics)?;
    let mut ckpt = fitted.checkpoint;
    ckpt.meta.extra.insert("strategy".into(), "base".into());
    ckpt.save(&dir.join("model.ckpt"))?;
    if fitted.diverged {
        return Err(DivergedRun(format!("last good checkpoint saved to {}", dir.join("model.ckpt").display())).into());
    }
    log::info!("best epoch {}", fitted.best_epoch);
    Ok(dir)
}

fn task_for<'a>(env: &'a FewShotEnv, ckpt: &Checkpoint) -> &'a TaskDataset {
    if ckpt.categories.len() > env.base_task.categories.len() {
        &env.extended_task
    } else {
        &env.base_task
    }
}

fn write_reports(dir: &Path, cells: &[ReportCell]) -> anyhow::Result<()> {
    write_report_csv(&dir.join("report.csv"), cells)?;
    let mut text = String::new();
    for split in ["validation", "test"] {
        text.push_str(&format!("{split}\n{}\n", render_table(cells, split, &TABLE_SETS)));
    }
    write(&dir.join("report.txt"), &text)
}

fn eval(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let ckpt = load_checkpoint(cfg)?;
    let env = env(cfg)?;
    let dir = out_dir(cfg, "eval")?;
    let task = task_for(&env, &ckpt);
    let map = CategoryMap::new(&ckpt.categories, &env.transcriber().restricted(ckpt.vocab.clone()))?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for split in [Split::Validation, Split::Test] {
        let (rep, results) = evaluate_split(&ckpt.model, &ckpt.vocab, &map, task, split, &env.cache, &ckpt.stats, &cfg.decode, exec(cfg))?;
        write(&dir.join(format!("results_{}.tsv", split.as_str())), &results_tsv(&results))?;
        write(&dir.join(format!("confusion_{}.csv", split.as_str())), &rep.confusion.to_csv())?;
        reports.push(rep);
    }
    let strategy = ckpt.meta.extra.get("strategy").cloned().unwrap_or_else(|| "base".into());
    let f = ckpt.meta.extra.get("f").and_then(|v| v.parse().ok());
    write_reports(&dir, &report_cells(cfg.scheme.as_str(), &strategy, f, &reports))?;
    Ok(dir)
}

#[allow(clippy::too_many_arguments)]
fn run_once(env: &FewShotEnv, base: Option<&Checkpoint>, strategy: Strategy, f: usize, k: usize, lr: f64, epochs: usize, seed: u64) -> kws_core::Result<FewShotRun> {
    let sample = env.sample(f, seed)?;
    match strategy {
        Strategy::Retrain => run_retrain(env, &env.extended_task, &sample, k, false, seed),
        Strategy::RetrainReplace => run_retrain(env, &env.extended_task, &sample, k, true, seed),
        Strategy::Adapt => {
            let base = base.ok_or_else(|| kws_core::Error::Config("adapt needs a base checkpoint".into()))?;
            run_adapt(env, base, &sample, lr, epochs, seed)
        }
    }
}

fn raw_for(run: &FewShotRun) -> Vec<RawRow> {
    let mut rows = Vec::new();
    for rep in &run.reports {
        for set in kws_core::eval::SETS {
            if let Some(e) = rep.error(set) {
                rows.push(RawRow {
                    strategy: run.strategy,
                    f: run.f,
                    k: run.k,
                    lr: run.lr,
                    epochs: run.epochs,
                    seed: run.seed,
                    split: rep.split.clone(),
                    set: set.into(),
                    error: Some(e),
                });
            }
        }
    }
    rows
}

fn fewshot(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let fs_cfg = &cfg.fewshot;
    let base = match fs_cfg.strategy {
        Strategy::Adapt => Some(load_checkpoint(cfg)?),
        _ => None,
    };
    let env = env(cfg)?;
    let dir = out_dir(cfg, "fewshot")?;
    let run = run_once(&env, base.as_ref(), fs_cfg.strategy, fs_cfg.f, fs_cfg.k, fs_cfg.lr, fs_cfg.adapt_epochs, cfg.seed)?;
    if run.diverged {
        return Err(DivergedRun(format!("{} f={} seed={}", run.strategy, run.f, run.seed)).into());
    }
    append_raw_csv(&dir.join("results.csv"), &raw_for(&run))?;
    write_reports(&dir, &report_cells(cfg.scheme.as_str(), run.strategy.as_str(), Some(run.f), &run.reports))?;
    Ok(dir)
}

fn sweep(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let grid = cfg.sweep_grid();
    grid.validate()?;
    let base = match grid.strategy {
        Strategy::Adapt => Some(load_checkpoint(cfg)?),
        _ => None,
    };
    let env = env(cfg)?;
    let dir = out_dir(cfg, "sweep")?;
    write(&dir.join("grid.toml"), &grid.to_toml())?;
    let (raw, agg) = run_sweep(&grid, exec(cfg), |p, seed| {
        run_once(&env, base.as_ref(), p.strategy, p.f, p.k.unwrap_or(1), p.lr.unwrap_or(cfg.fewshot.lr), p.epochs.unwrap_or(0), seed)
    })?;
    append_raw_csv(&dir.join("raw.csv"), &raw)?;
    write_aggregate_csv(&dir.join("aggregate.csv"), &agg)?;
    let failed: usize = agg.iter().map(|a| a.failed).max().unwrap_or(0);
    if failed > 0 {
        log::warn!("some sweep runs failed; see the failed column of aggregate.csv");
    }
    Ok(dir)
}

fn attn(cfg: &RunConfig, words: &[String], count: usize) -> anyhow::Result<PathBuf> {
    let ckpt = load_checkpoint(cfg)?;
    let (root, scan) = scan(cfg)?;
    let dir = out_dir(cfg, "attn")?;
    let transcriber = Transcriber::new(cfg.scheme, lexicon(cfg)?);
    let phase = if ckpt.categories.len() > cfg.words.org_kwd.len() + 2 {
        Phase::Extended
    } else {
        Phase::Base12
    };
    let task = build_task_dataset(&scan.entries, &scan.background, &cfg.words, &transcriber, &TaskOptions { phase, ..cfg.task_options() })?;
    let picked: Vec<_> = words
        .iter()
        .flat_map(|w| task.test.iter().filter(move |e| &e.word == w).take(count))
        .cloned()
        .collect();
    if picked.is_empty() {
        return Err(kws_core::Error::Data(format!("no test utterances for {}", words.join(", "))).into());
    }
    let mut cache = FeatureCache::new();
    extend_cache(&mut cache, &root, &picked, &task.background, &Fbank::new(Default::default()), exec(cfg))?;
    let utts = picked
        .iter()
        .map(|e| Ok((e.source.key(&task.background), example_features(e, &cache, &ckpt.stats, &task.background)?)))
        .collect::<kws_core::Result<Vec<_>>>()?;
    let dumps = dump_attention(&ckpt.model, &ckpt.vocab, &utts, &dir, &cfg.decode)?;
    let mut index = String::from("key,tokens,mean_entropy,uniform_entropy,csv,png\n");
    for d in &dumps {
        let h: f64 = d.weights.rows().into_iter().map(row_entropy).sum::<f64>() / d.weights.nrows() as f64;
        let file = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        index.push_str(&format!(
            "{},{},{:.6},{:.6},{},{}\n",
            d.key,
            d.tokens.join(" "),
            h,
            (d.weights.ncols() as f64).ln(),
            file(&d.csv),
            file(&d.png)
        ));
    }
    write(&dir.join("attention.csv"), &index)?;
    Ok(dir)
}

fn find_reports(dir: &Path, skip: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if dir == skip {
        return Ok(());
    }
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            find_reports(&p, skip, out)?;
        } else if p.file_name().is_some_and(|n| n == "report.csv") {
            out.push(p);
        }
    }
    Ok(())
}

fn report(cfg: &RunConfig, inputs: &[PathBuf]) -> anyhow::Result<PathBuf> {
    let dir = out_dir(cfg, "report")?;
    let roots = if inputs.is_empty() { vec![cfg.out.clone()] } else { inputs.to_vec() };
    let mut files = Vec::new();
    for r in &roots {
        find_reports(r, &dir, &mut files).with_context(|| format!("searching {}", r.display()))?;
    }
    if files.is_empty() {
        return Err(kws_core::Error::Data("no report.csv files found".into()).into());
    }
    let mut cells = Vec::new();
    for f in &files {
        cells.extend(read_report_csv(f)?);
    }
    write_reports(&dir, &cells)?;
    let sources: String = files.iter().map(|f| format!("{}\n", f.display())).collect();
    write(&dir.join("sources.txt"), &sources)?;
    Ok(dir)
}

fn toy_corpus(cfg: &RunConfig, dest: &Path, speakers: usize) -> anyhow::Result<PathBuf> {
    let spec = ToyCorpusSpec {
        speakers,
        seed: cfg.seed,
        ..Default::default()
    };
    let n = write_toy_corpus(dest, &spec, &lexicon(cfg)?)?;
    log::info!("wrote {n} recordings to {}", dest.display());
    Ok(dest.to_path_buf())
}
