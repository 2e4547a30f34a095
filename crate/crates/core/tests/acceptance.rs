//! Acceptance checks, one line per criterion. Run with
//! `cargo test -p kws-core --test acceptance`; exits non-zero if any
//! mandatory criterion fails. The full-scale criterion only runs when
//! `KWS_FULL_CORPUS` points at a real corpus, and is never required.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use kws_core::dataset::*;
use kws_core::eval::*;
use kws_core::features::Fbank;
use kws_core::fewshot::*;
use kws_core::labels::*;
use kws_core::model::*;
use kws_core::nn::{Optimizer, ParamStore, Tape};
use kws_core::par::Execution;
use kws_core::pipeline::*;
use kws_core::rng;
use kws_core::synth::*;
use ndarray::Array2;
use rand::Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn random_logp(t: usize, v: usize, r: &mut impl Rng) -> Array2<f64> {
    let mut x = Array2::from_shape_fn((t, v), |_| r.gen_range(-3.0..3.0));
    for mut row in x.rows_mut() {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    x
}

fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &p in path {
        if Some(p) != prev && p != blank {
            out.push(p);
        }
        prev = Some(p);
    }
    out
}

fn brute_force_ctc(logp: &Array2<f64>, target: &[usize]) -> f64 {
    let (t, v) = logp.dim();
    let mut total = 0.0;
    let mut path = vec![0usize; t];
    for code in 0..v.pow(t as u32) {
        let mut c = code;
        for p in path.iter_mut() {
            *p = c % v;
            c /= v;
        }
        if collapse(&path, 0) == target {
            total += path.iter().enumerate().map(|(i, &p)| logp[[i, p]]).sum::<f64>().exp();
        }
    }
    -total.ln()
}

fn targets(labels: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for t in &frontier {
            for l in 1..=labels {
                let mut n: Vec<usize> = t.clone();
                n.push(l);
                next.push(n);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn ctc_oracle() -> Outcome {
    let mut r = rng::seeded(1, "acceptance-ctc");
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for v in 2..=3 {
        for t in 1..=5 {
            for target in targets(v - 1, 3) {
                let logp = random_logp(t, v, &mut r);
                let got = ctc_loss(&logp, &target, 0);
                let want = brute_force_ctc(&logp, &target);
                cases += 1;
                if want.is_infinite() {
                    ensure!(got.loss.is_infinite() && !got.feasible, "T={t} target {target:?}: expected infeasible, got {}", got.loss);
                    continue;
                }
                let err = (got.loss - want).abs();
                worst = worst.max(err);
                ensure!(err <= 1e-6, "T={t} V={v} target {target:?}: {} vs {}", got.loss, want);
            }
        }
    }
    Ok(format!("{cases} cases, max abs diff {worst:.1e}"))
}

fn gradient_check() -> Outcome {
    let m = Model::new(ModelConfig::micro(5), 21).map_err(|e| e.to_string())?;
    let mut r = rng::seeded(22, "acceptance-grad");
    let x = Array2::from_shape_fn((8, 80), |_| r.gen_range(-1.0..1.0));
    let target = [3, 4];
    let mut worst: f64 = 0.0;
    for lambda in [0.0, 0.5, 1.0] {
        let (_, grads) = m.loss_and_grad(&x, &target, lambda);
        let loss_at = |p: &ParamStore| {
            let mm = Model::from_params(m.config().clone(), p.clone()).unwrap();
            let mut tape = Tape::new(mm.params());
            let out = mm.joint_loss(&mut tape, &x, &target, lambda);
            tape.scalar(out.total)
        };
        let mut p = m.params().clone();
        for id in m.params().ids() {
            let analytic = grads.get(id).cloned().unwrap_or_else(|| Array2::zeros(m.params().get(id).dim()));
            let mut numeric = Array2::zeros(analytic.dim());
            for idx in 0..analytic.len() {
                let (i, j) = (idx / analytic.ncols(), idx % analytic.ncols());
                let orig = p.get(id)[[i, j]];
                let h = 1e-4;
                p.get_mut(id)[[i, j]] = orig + h;
                let up = loss_at(&p);
                p.get_mut(id)[[i, j]] = orig - h;
                let down = loss_at(&p);
                p.get_mut(id)[[i, j]] = orig;
                numeric[[i, j]] = (up - down) / (2.0 * h);
            }
            let norm = |a: &Array2<f64>| a.mapv(|v| v * v).sum().sqrt();
            let scale = norm(&analytic).max(norm(&numeric));
            let rel = if scale == 0.0 { 0.0 } else { norm(&(&analytic - &numeric)) / scale };
            worst = worst.max(rel);
            ensure!(rel <= 1e-4, "lambda {lambda}, {}: relative error {rel:.2e}", m.params().name(id));
        }
    }
    Ok(format!("{} tensors x 3 weights, max relative error {worst:.1e}", m.params().len()))
}

fn label_surgery() -> Outcome {
    let sets = WordSets::default();
    let lex = Lexicon::builtin();
    let mut r = rng::seeded(3, "acceptance-labels");
    for (scheme, want) in [(LabelScheme::Phoneme, "UNK UNK UNK UNK UNK D"), (LabelScheme::Grapheme, "? ? ? ? w ? r d")] {
        let base = build_vocabulary(scheme, &sets, &lex, Phase::Base12).map_err(|e| e.to_string())?;
        let ext = build_vocabulary(scheme, &sets, &lex, Phase::Extended).map_err(|e| e.to_string())?;
        let t = transcribe("backward", Role::Keyword, scheme, &lex).map_err(|e| e.to_string())?;
        let got = replace_missing_tokens(&t, &base).to_string();
        ensure!(got == want, "{scheme:?}: got {got:?}, want {want:?}");
        let pool: Vec<String> = ext.tokens().iter().cloned().chain(["ZZ".to_string(), "é".to_string()]).collect();
        for _ in 0..1000 {
            let len = r.gen_range(0..10);
            let t: Transcription = (0..len).map(|_| pool[r.gen_range(0..pool.len())].clone()).collect();
            let once = replace_missing_tokens(&t, &base);
            let twice = replace_missing_tokens(&once, &base);
            ensure!(once == twice, "not idempotent on {t}");
            ensure!(once.len() == t.len(), "length changed on {t}");
            ensure!(once.tokens().iter().all(|x| base.contains(x)), "out-of-vocabulary token left in {once}");
        }
    }
    Ok("both printed examples exact, 2000 random transcriptions idempotent".into())
}

/// A file list shaped like the real corpus: 105,800 clips from 2,618
/// speakers over the 35 words.
fn synthetic_file_list() -> Vec<CorpusEntry> {
    let mut r = rng::seeded(4, "acceptance-speakers");
    let mut speakers = HashSet::new();
    while speakers.len() < 2618 {
        speakers.insert(format!("{:08x}", r.gen::<u32>()));
    }
    let mut speakers: Vec<String> = speakers.into_iter().collect();
    speakers.sort();
    let mut takes: HashMap<(usize, usize), usize> = HashMap::new();
    (0..105_800)
        .map(|i| {
            let w = i % CORPUS_WORDS.len();
            let s = r.gen_range(0..speakers.len());
            let n = takes.entry((w, s)).or_default();
            let path = format!("{}/{}_nohash_{}.wav", CORPUS_WORDS[w], speakers[s], n);
            *n += 1;
            parse_entry_path(&path).expect("well-formed path")
        })
        .collect()
}

fn split_protocol(entries: &[CorpusEntry]) -> Outcome {
    let assign = |es: &[CorpusEntry]| -> BTreeMap<String, Split> { es.iter().map(|e| (e.path.clone(), assign_split(e, 10.0, 10.0))).collect() };
    let first = assign(entries);
    let mut reversed = entries.to_vec();
    reversed.reverse();
    ensure!(assign(&reversed) == first, "assignment depends on list order");
    ensure!(assign(entries) == first, "assignment differs between runs");
    let mut by_speaker: HashMap<&str, HashSet<Split>> = HashMap::new();
    let mut counts: BTreeMap<Split, usize> = BTreeMap::new();
    for e in entries {
        let s = first[&e.path];
        by_speaker.entry(&e.speaker_id).or_default().insert(s);
        *counts.entry(s).or_default() += 1;
    }
    ensure!(by_speaker.values().all(|s| s.len() == 1), "a speaker spans several splits");
    let n = entries.len() as f64;
    let mut shares = Vec::new();
    for (split, want) in [(Split::Train, 80.0), (Split::Validation, 10.0), (Split::Test, 10.0)] {
        let pct = 100.0 * *counts.get(&split).unwrap_or(&0) as f64 / n;
        ensure!((pct - want).abs() <= 1.5, "{} holds {pct:.2}%", split.as_str());
        shares.push(format!("{pct:.2}"));
    }
    Ok(format!("{} clips, {} speakers, shares {}", entries.len(), by_speaker.len(), shares.join("/")))
}

fn balancing(entries: &[CorpusEntry]) -> Outcome {
    let sets = WordSets::default();
    let tr = Transcriber::new(LabelScheme::Phoneme, Lexicon::builtin());
    let opts = TaskOptions { include_silence: false, ..Default::default() };
    let base = build_task_dataset(entries, &[], &sets, &tr, &opts).map_err(|e| e.to_string())?;
    let kwd: Vec<usize> = sets.org_kwd.iter().map(|w| base.count(Split::Train, w)).collect();
    let mean = kwd.iter().sum::<usize>() as f64 / kwd.len() as f64;
    let unk = base.count(Split::Train, UNKNOWN_CATEGORY);
    ensure!(unk == mean.round() as usize, "{unk} training unknowns, mean keyword count {mean}");

    let ext = build_task_dataset(entries, &[], &sets, &tr, &TaskOptions { phase: Phase::Extended, ..opts }).map_err(|e| e.to_string())?;
    for (f, k) in [(10, 300), (100, 30)] {
        let sample = sample_fewshot(&ext.reserved, &sets.new_kwd, f, 7).map_err(|e| e.to_string())?;
        let ds = oversample(&add_fewshot(&ext, &sample, &tr).map_err(|e| e.to_string())?, &sample, k).map_err(|e| e.to_string())?;
        for w in &sets.new_kwd {
            let n = ds.count(Split::Train, w);
            ensure!(n == 3000, "f={f} k={k}: {w} has {n} training examples");
        }
    }
    Ok(format!("{unk} unknowns = round({mean:.1}); f=10,k=300 and f=100,k=30 give 3000 per class"))
}

fn toy_overfit() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sets = WordSets::default();
    let lex = Lexicon::builtin();
    let spec = ToyCorpusSpec { speakers: 5, background_files: 1, background_s: 5.0, ..Default::default() };
    write_toy_corpus(dir.path(), &spec, &lex).map_err(|e| e.to_string())?;
    let scan = scan_corpus(dir.path(), Execution::Parallel).map_err(|e| e.to_string())?;
    let tr = Transcriber::new(LabelScheme::Phoneme, lex.clone());
    let vocab = build_vocabulary(LabelScheme::Phoneme, &sets, &lex, Phase::Base12).map_err(|e| e.to_string())?;
    let file = |e: &CorpusEntry, category: &str, subset, role| -> Example {
        Example {
            source: ExampleSource::File(e.path.clone()),
            speaker_id: Some(e.speaker_id.clone()),
            word: e.word.clone(),
            category: category.into(),
            subset,
            tokens: tr.transcribe(&e.word, role).unwrap(),
        }
    };
    let mut examples = Vec::new();
    for w in &sets.org_kwd {
        examples.extend(scan.entries.iter().filter(|e| &e.word == w).take(5).map(|e| file(e, w, Subset::OrgKwd, Role::Keyword)));
    }
    for (i, w) in sets.org_unk.iter().take(5).enumerate() {
        let e = scan.entries.iter().filter(|e| &e.word == w).nth(i).unwrap();
        examples.push(file(e, UNKNOWN_CATEGORY, Subset::OrgUnk, Role::Unknown));
    }
    let sil = tr.transcribe("", Role::Silence).map_err(|e| e.to_string())?;
    for c in plan_silence(&scan.background, 5, 1.0, 3).map_err(|e| e.to_string())? {
        examples.push(Example {
            source: ExampleSource::Silence(c),
            speaker_id: None,
            word: SILENCE_CATEGORY.into(),
            category: SILENCE_CATEGORY.into(),
            subset: Subset::Silence,
            tokens: sil.clone(),
        });
    }
    ensure!(examples.len() == 60, "expected 60 toy clips, built {}", examples.len());

    let mut cache = FeatureCache::new();
    extend_cache(&mut cache, dir.path(), &examples, &scan.background, &Fbank::new(Default::default()), Execution::Parallel)
        .map_err(|e| e.to_string())?;
    let stats = training_stats(&examples, &cache, &scan.background).map_err(|e| e.to_string())?;
    let items = train_items(&examples, &cache, &stats, &vocab, &scan.background).map_err(|e| e.to_string())?;
    let mut cats = sets.org_kwd.clone();
    cats.push(SILENCE_CATEGORY.into());
    cats.push(UNKNOWN_CATEGORY.into());
    let map = CategoryMap::new(&cats, &tr).map_err(|e| e.to_string())?;
    let toy_error = |m: &Model| {
        evaluate(m, &vocab, &map, &examples, &cache, &stats, &scan.background, &DecodeOptions::greedy(), Execution::Parallel)
            .ok()
            .and_then(|r| classification_error(&r, |_| true))
            .unwrap_or(f64::INFINITY)
    };
    let model = Model::new(ModelConfig::toy(vocab.len()), 1).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { epochs: 100, batch_size: 10, optimizer: Optimizer::adam(0.003), seed: 1, exec: Execution::Parallel };
    let out = train(model, &items, &cfg, Some(&toy_error)).map_err(|e| e.to_string())?;
    ensure!(!out.diverged, "training diverged");
    let losses: Vec<f64> = out.metrics.iter().map(|m| m.train_loss).collect();
    ensure!(losses.windows(2).take(4).all(|w| w[1] < w[0]), "loss not strictly decreasing over the first 5 epochs: {:?}", &losses[..5]);
    let err = toy_error(&out.model);
    ensure!(err <= 5.0, "toy error {err}% after best epoch {}", out.best_epoch);
    let first = out.metrics.iter().find(|m| m.val_error.is_some_and(|e| e <= 5.0)).map(|m| m.epoch);
    let x = example_features(&examples[0], &cache, &stats, &scan.background).map_err(|e| e.to_string())?;
    let d = beam_decode(&out.model, &x, &vocab, &DecodeOptions::default());
    ensure!(d.tokens == examples[0].tokens.tokens(), "decoded {:?} for {}", d.tokens, examples[0].tokens);
    Ok(format!("error {err:.1}% at epoch {}, first <=5% at epoch {first:?}; decoded '{}'", out.best_epoch, d.tokens.join(" ")))
}

fn eval_algebra() -> Outcome {
    let mut r = rng::seeded(5, "acceptance-eval");
    let cats: Vec<String> = ["yes", "no", SILENCE_CATEGORY, UNKNOWN_CATEGORY].iter().map(|s| s.to_string()).collect();
    for trial in 0..200 {
        let n = r.gen_range(1..300);
        let results: Vec<UtteranceResult> = (0..n)
            .map(|i| {
                let (subset, reference) = match r.gen_range(0..4) {
                    0 => (Subset::OrgKwd, cats[r.gen_range(0..2)].clone()),
                    1 => (Subset::Silence, cats[2].clone()),
                    2 => (Subset::OrgUnk, cats[3].clone()),
                    _ => (Subset::NewUnk, cats[3].clone()),
                };
                let predicted = if r.gen_bool(0.7) { reference.clone() } else { cats[r.gen_range(0..4)].clone() };
                UtteranceResult {
                    key: format!("u{i}"),
                    word: reference.clone(),
                    subset,
                    reference,
                    predicted: CategoryPrediction { category: predicted, matched_rule: MatchRule::ExactKeyword },
                    decoded: String::new(),
                }
            })
            .collect();
        let rep = EvalReport::from_results("test", &cats, &results);
        if let (Some(a), Some(b)) = (rep.error("org_unk"), rep.error("new_unk")) {
            ensure!(rep.error("unk") == Some((a + b) / 2.0), "trial {trial}: unk {:?} vs ({a} + {b}) / 2", rep.error("unk"));
        }
        ensure!(rep.confusion.total() == n, "trial {trial}: confusion total {} for {n} results", rep.confusion.total());
        let (c, o) = (rep.confusion.error_pct().unwrap(), rep.overall.unwrap());
        ensure!((c - o).abs() <= 1e-9, "trial {trial}: confusion error {c} vs overall {o}");
        let rows: usize = cats.iter().map(|c| rep.confusion.row_total(c)).sum();
        ensure!(rows == n, "trial {trial}: row totals {rows}");
        let weighted: f64 = ["org_kwd", "silence", "org_unk", "new_unk"]
            .iter()
            .filter_map(|s| rep.error(s).map(|e| e * rep.counts[*s] as f64))
            .sum::<f64>()
            / n as f64;
        ensure!((weighted - o).abs() <= 1e-9, "trial {trial}: per-set errors do not add up to the overall error");
    }
    let base = EvalReport::from_results("test", &cats, &[]);
    let table = render_table(&report_cells("phoneme", "base", None, &[base]), "test", &SETS);
    let row = table.lines().nth(1).ok_or("empty table")?;
    ensure!(row.split_whitespace().last() == Some("-"), "untrained set not rendered as '-': {row:?}");
    Ok("200 random result sets reconcile; untrained sets render '-'".into())
}

fn attention_invariants() -> Outcome {
    let sets = WordSets::default();
    let lex = Lexicon::builtin();
    let vocab = build_vocabulary(LabelScheme::Phoneme, &sets, &lex, Phase::Base12).map_err(|e| e.to_string())?;
    let m = Model::new(ModelConfig::micro(vocab.len()), 8).map_err(|e| e.to_string())?;
    let mut r = rng::seeded(8, "acceptance-attention");
    let opts = DecodeOptions { beam: 2, ctc_weight: 0.3, max_len: Some(4) };
    let mut rows = 0;
    for t in 1..=200usize {
        let x = Array2::from_shape_fn((t, 80), |_| r.gen_range(-1.0..1.0));
        let d = beam_decode(&m, &x, &vocab, &opts);
        let t_enc = t.div_ceil(2).div_ceil(2);
        let (l, cols) = d.trace.weights.dim();
        ensure!(cols == t_enc && encoder_len(t) == t_enc, "T={t}: trace has {cols} columns, want {t_enc}");
        ensure!(l == d.trace.tokens.len() && l >= 1, "T={t}: {l} rows for {} tokens", d.trace.tokens.len());
        for row in d.trace.weights.rows() {
            ensure!((row.sum() - 1.0).abs() <= 1e-5, "T={t}: row sums to {}", row.sum());
        }
        rows += l;
    }
    Ok(format!("T = 1..200, {rows} rows checked"))
}

fn fewshot_env(root: &Path) -> kws_core::Result<FewShotEnv> {
    let lex = Lexicon::builtin();
    let spec = ToyCorpusSpec { speakers: 10, background_files: 1, background_s: 5.0, ..Default::default() };
    write_toy_corpus(root, &spec, &lex)?;
    let scan = scan_corpus(root, Execution::Parallel)?;
    let setup = FewShotSetup {
        sets: WordSets::default(),
        lexicon: lex,
        scheme: LabelScheme::Phoneme,
        task: TaskOptions::default(),
        fit: FitOptions {
            model: ModelConfig::micro(0),
            train: TrainConfig { epochs: 1, batch_size: 32, optimizer: Optimizer::adam(0.01), seed: 0, exec: Execution::Parallel },
            ..Default::default()
        },
        decode: DecodeOptions::greedy(),
        adapt_fillers: false,
    };
    FewShotEnv::prepare(root, &scan.entries, &scan.background, setup)
}

fn fewshot_plumbing() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let env = fewshot_env(dir.path()).map_err(|e| e.to_string())?;
    let base = env.train_base(0).map_err(|e| e.to_string())?.checkpoint;
    let sample = env.sample(2, 0).map_err(|e| e.to_string())?;
    let (adapted, _, _) = adapt_checkpoint(&env, &base, &sample, 3.0, 0, 0).map_err(|e| e.to_string())?;
    ensure!(adapted.model == base.model, "adapt with 0 epochs changed the model");

    let (_, ds) = retrain_checkpoint(&env, &env.extended_task, &sample, 3, true, 0).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for ex in ds.train.iter().chain(&ds.validation).chain(&ds.test) {
        if let Some(t) = ex.tokens.tokens().iter().find(|t| !env.base_vocab.contains(t)) {
            return Err(format!("{} carries out-of-vocabulary token {t}", ex.word));
        }
        checked += 1;
    }

    let grid = SweepGrid { strategy: Strategy::RetrainReplace, f: 2, k: vec![1, 3], lr: vec![], epochs: vec![], seeds: vec![0, 1, 2] };
    let (raw, agg) = run_sweep(&grid, Execution::Parallel, |p, seed| {
        let sample = env.sample(p.f, seed)?;
        run_retrain(&env, &env.extended_task, &sample, p.k.unwrap_or(1), true, seed)
    })
    .map_err(|e| e.to_string())?;
    let csv = dir.path().join("raw.csv");
    append_raw_csv(&csv, &raw).map_err(|e| e.to_string())?;
    let again = aggregate(&read_raw_csv(&csv).map_err(|e| e.to_string())?);
    ensure!(again.len() == agg.len() && !agg.is_empty(), "{} aggregate rows from CSV, {} in memory", again.len(), agg.len());
    for (a, b) in agg.iter().zip(&again) {
        ensure!((a.set.as_str(), a.split.as_str(), a.k, a.n) == (b.set.as_str(), b.split.as_str(), b.k, b.n), "row mismatch {a:?} vs {b:?}");
        for (x, y) in [(a.mean, b.mean), (a.std, b.std)] {
            ensure!(x.is_some() == y.is_some() && (x.unwrap_or(0.0) - y.unwrap_or(0.0)).abs() <= 1e-9, "{a:?} vs {b:?}");
        }
    }
    Ok(format!("adapt(0) bitwise identical, {checked} restricted targets in vocabulary, {} aggregate rows reproduced", agg.len()))
}

fn main() {
    let mut failed = 0;
    let mut line = |n: u32, name: &str, f: &dyn Fn() -> Outcome| {
        let t0 = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t0.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("criterion {n} {name}: PASS ({detail}; {secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} {name}: FAIL ({why}; {secs:.1}s)");
            }
        }
    };
    let entries = synthetic_file_list();
    line(1, "ctc oracle", &ctc_oracle);
    line(2, "gradient check", &gradient_check);
    line(3, "label surgery", &label_surgery);
    line(4, "split protocol", &|| split_protocol(&entries));
    line(5, "balancing and oversampling", &|| balancing(&entries));
    line(6, "toy overfit", &toy_overfit);
    line(7, "evaluation algebra", &eval_algebra);
    line(8, "attention invariants", &attention_invariants);
    line(9, "few-shot plumbing", &fewshot_plumbing);
    match std::env::var_os("KWS_FULL_CORPUS") {
        None => println!("criterion 10 full-scale error (optional): SKIP (set KWS_FULL_CORPUS and use `kws train`/`kws eval`)"),
        Some(p) => println!("criterion 10 full-scale error (optional): SKIP (run `kws train --preset paper --corpus {}` then `kws eval`)", Path::new(&p).display()),
    }
    if failed > 0 {
        println!("{failed} mandatory criteria failed");
        std::process::exit(1);
    }
}
