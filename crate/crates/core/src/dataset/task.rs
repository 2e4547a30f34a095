use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::silence::{plan_silence, SilenceCrop};
use super::split::{assign_split, Split};
use super::{BackgroundFile, CorpusEntry, FewShotSample, Subset, WordSets};
use crate::labels::{Role, Transcriber, Transcription};
use crate::{rng, Error, Result};

pub const SILENCE_CATEGORY: &str = "_silence_";
pub const UNKNOWN_CATEGORY: &str = "_unknown_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// 10 original keywords plus silence and unknown.
    #[serde(rename = "base-12")]
    Base12,
    /// Base task plus the new keywords.
    Extended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExampleSource {
    /// Corpus-relative path.
    File(String),
    Silence(SilenceCrop),
}

impl ExampleSource {
    /// Stable key used by feature caches and manifests.
    pub fn key(&self, background: &[BackgroundFile]) -> String {
        match self {
            ExampleSource::File(p) => p.clone(),
            ExampleSource::Silence(c) => format!("{}@{}+{}", background[c.background].path, c.offset, c.len),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub source: ExampleSource,
    pub speaker_id: Option<String>,
    pub word: String,
    pub category: String,
    pub subset: Subset,
    pub tokens: Transcription,
}

#[derive(Debug, Clone)]
pub struct TaskOptions {
    pub val_pct: f64,
    pub test_pct: f64,
    pub phase: Phase,
    pub seed: u64,
    pub silence_duration_s: f64,
    pub include_silence: bool,
}

impl Default for TaskOptions {
    fn default() -> Self {
        Self {
            val_pct: 10.0,
            test_pct: 10.0,
            phase: Phase::Base12,
            seed: 0,
            silence_duration_s: 1.0,
            include_silence: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TaskDataset {
    pub train: Vec<Example>,
    pub validation: Vec<Example>,
    pub test: Vec<Example>,
    pub categories: Vec<String>,
    /// Training recordings of the new keywords, held aside for few-shot
    /// sampling.
    pub reserved: Vec<CorpusEntry>,
    pub background: Vec<BackgroundFile>,
    pub phase: Phase,
    pub seed: u64,
}

impl TaskDataset {
    pub fn split(&self, split: Split) -> &[Example] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn count(&self, split: Split, category: &str) -> usize {
        self.split(split).iter().filter(|e| e.category == category).count()
    }
}

fn keyword_example(e: &CorpusEntry, subset: Subset, tr: &Transcriber) -> Result<Example> {
    Ok(Example {
        source: ExampleSource::File(e.path.clone()),
        speaker_id: Some(e.speaker_id.clone()),
        word: e.word.clone(),
        category: e.word.clone(),
        subset,
        tokens: tr.transcribe(&e.word, Role::Keyword)?,
    })
}

fn unknown_example(e: &CorpusEntry, subset: Subset, tr: &Transcriber) -> Result<Example> {
    Ok(Example {
        source: ExampleSource::File(e.path.clone()),
        speaker_id: Some(e.speaker_id.clone()),
        word: e.word.clone(),
        category: UNKNOWN_CATEGORY.into(),
        subset,
        tokens: tr.transcribe(&e.word, Role::Unknown)?,
    })
}

fn mean_keyword_count(entries: &[&CorpusEntry], sets: &WordSets) -> f64 {
    let mut counts: BTreeMap<&str, usize> = sets.org_kwd.iter().map(|w| (w.as_str(), 0)).collect();
    for e in entries {
        if let Some(c) = counts.get_mut(e.word.as_str()) {
            *c += 1;
        }
    }
    counts.values().sum::<usize>() as f64 / counts.len() as f64
}

/// Builds train/validation/test examples for the requested phase.
///
/// Training unknowns come from `org_unk` only and are downsampled to the
/// rounded mean per-keyword training count; validation and test unknowns
/// cover both `org_unk` and `new_unk`. New-keyword training recordings are
/// never used directly: they go to `reserved`.
pub fn build_task_dataset(
    entries: &[CorpusEntry],
    background: &[BackgroundFile],
    sets: &WordSets,
    transcriber: &Transcriber,
    opts: &TaskOptions,
) -> Result<TaskDataset> {
    sets.validate()?;
    if !(0.0..=100.0).contains(&(opts.val_pct + opts.test_pct)) || opts.val_pct < 0.0 || opts.test_pct < 0.0 {
        return Err(Error::Config(format!(
            "invalid split percentages {} / {}",
            opts.val_pct, opts.test_pct
        )));
    }
    let mut sorted: Vec<&CorpusEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));

    let mut by_split: BTreeMap<Split, Vec<(&CorpusEntry, Subset)>> = BTreeMap::new();
    for e in sorted {
        let subset = match sets.subset_of(&e.word) {
            Some(s) => s,
            None if sets.is_excluded(&e.word) => continue,
            None => {
                return Err(Error::Config(format!(
                    "corpus word {:?} belongs to no word set (add it to a set or to `excluded`)",
                    e.word
                )))
            }
        };
        by_split
            .entry(assign_split(e, opts.val_pct, opts.test_pct))
            .or_default()
            .push((e, subset));
    }

    let mut categories: Vec<String> = sets.org_kwd.clone();
    categories.push(SILENCE_CATEGORY.into());
    categories.push(UNKNOWN_CATEGORY.into());
    if opts.phase == Phase::Extended {
        categories.extend(sets.new_kwd.iter().cloned());
    }

    let mut out = TaskDataset {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        categories,
        reserved: Vec::new(),
        background: background.to_vec(),
        phase: opts.phase,
        seed: opts.seed,
    };

    for split in Split::ALL {
        let items = by_split.remove(&split).unwrap_or_default();
        let kwd: Vec<&CorpusEntry> = items.iter().filter(|(_, s)| *s == Subset::OrgKwd).map(|(e, _)| *e).collect();
        let mean = mean_keyword_count(&kwd, sets);
        let mut examples = Vec::new();
        let mut unk_pool = Vec::new();
        for &(e, subset) in &items {
            match (split, subset) {
                (_, Subset::OrgKwd) => examples.push(keyword_example(e, subset, transcriber)?),
                (Split::Train, Subset::OrgUnk) => unk_pool.push(e),
                (Split::Train, Subset::NewKwd) => out.reserved.push(e.clone()),
                (Split::Train, Subset::NewUnk) => {}
                (_, Subset::OrgUnk | Subset::NewUnk) => examples.push(unknown_example(e, subset, transcriber)?),
                (_, Subset::NewKwd) => {
                    if opts.phase == Phase::Extended {
                        examples.push(keyword_example(e, subset, transcriber)?);
                    }
                }
                (_, Subset::Silence) => unreachable!("word sets never yield the silence subset"),
            }
        }
        if split == Split::Train {
            let target = (mean.round() as usize).min(unk_pool.len());
            if target < mean.round() as usize {
                log::warn!("only {} training unknowns available, wanted {}", unk_pool.len(), mean.round());
            }
            let mut r = rng::seeded(opts.seed, "unknown-downsample");
            let mut picked: Vec<usize> = rand::seq::index::sample(&mut r, unk_pool.len(), target).into_vec();
            picked.sort_unstable();
            for i in picked {
                examples.push(unknown_example(unk_pool[i], Subset::OrgUnk, transcriber)?);
            }
        }
        if opts.include_silence {
            let count = mean.round() as usize;
            let crops = plan_silence(
                background,
                count,
                opts.silence_duration_s,
                rng::derive_seed(opts.seed, &format!("silence/{}", split.as_str())),
            )?;
            let sil = transcriber.transcribe(SILENCE_CATEGORY, Role::Silence)?;
            examples.extend(crops.into_iter().map(|c| Example {
                source: ExampleSource::Silence(c),
                speaker_id: None,
                word: SILENCE_CATEGORY.into(),
                category: SILENCE_CATEGORY.into(),
                subset: Subset::Silence,
                tokens: sil.clone(),
            }));
        }
        match split {
            Split::Train => out.train = examples,
            Split::Validation => out.validation = examples,
            Split::Test => out.test = examples,
        }
    }
    Ok(out)
}

/// Adds each few-shot recording to the training set once, as a keyword of
/// its own category.
pub fn add_fewshot(dataset: &TaskDataset, sample: &FewShotSample, transcriber: &Transcriber) -> Result<TaskDataset> {
    let mut out = dataset.clone();
    for (word, e) in sample.iter() {
        if !out.categories.iter().any(|c| c == word) {
            out.categories.push(word.to_string());
        }
        out.train.push(keyword_example(e, Subset::NewKwd, transcriber)?);
    }
    Ok(out)
}

/// Repeats every few-shot training example so that it occurs exactly `k`
/// times; everything else occurs once.
pub fn oversample(dataset: &TaskDataset, sample: &FewShotSample, k: usize) -> Result<TaskDataset> {
    if k < 1 {
        return Err(Error::Config(format!("oversampling factor must be >= 1, got {k}")));
    }
    let paths: HashSet<&str> = sample.iter().map(|(_, e)| e.path.as_str()).collect();
    let mut out = dataset.clone();
    let extra: Vec<Example> = dataset
        .train
        .iter()
        .filter(|e| matches!(&e.source, ExampleSource::File(p) if paths.contains(p.as_str())))
        .flat_map(|e| std::iter::repeat_n(e.clone(), k - 1))
        .collect();
    out.train.extend(extra);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_entry_path, sample_fewshot};
    use crate::labels::{LabelScheme, Lexicon};

    fn corpus() -> (Vec<CorpusEntry>, Vec<BackgroundFile>) {
        let sets = WordSets::default();
        let mut entries = Vec::new();
        let mut n = 0u64;
        for (wi, w) in sets.org_kwd.iter().chain(&sets.org_unk).chain(&sets.new_kwd).chain(&sets.new_unk).enumerate() {
            for j in 0..(40 + wi * 3) {
                n += 1;
                let spk = format!("{:08x}", (n * 2_654_435_761) % (1 << 32) / 7);
                entries.push(parse_entry_path(&format!("{w}/{spk}_nohash_{}.wav", j % 3)).unwrap());
            }
        }
        entries.push(parse_entry_path("backward/0badc0de_nohash_0.wav").unwrap());
        let bg = vec![BackgroundFile {
            path: "_background_noise_/white.wav".into(),
            n_samples: 16000 * 60,
            sample_rate: 16000,
        }];
        (entries, bg)
    }

    fn tr() -> Transcriber {
        Transcriber::new(LabelScheme::Phoneme, Lexicon::builtin())
    }

    #[test]
    fn base_phase_excludes_new_words_everywhere() {
        let (entries, bg) = corpus();
        let sets = WordSets::default();
        let ds = build_task_dataset(&entries, &bg, &sets, &tr(), &TaskOptions::default()).unwrap();
        assert_eq!(ds.categories.len(), 12);
        for e in ds.train.iter() {
            assert!(!sets.new_kwd.contains(&e.word) && !sets.new_unk.contains(&e.word));
        }
        for e in ds.validation.iter().chain(&ds.test) {
            assert!(!sets.new_kwd.contains(&e.word));
            assert!(ds.categories.contains(&e.category));
        }
        assert!(ds.reserved.iter().all(|e| sets.new_kwd.contains(&e.word)));
        assert!(!ds.reserved.is_empty());
    }

    #[test]
    fn unknown_and_silence_are_balanced_to_keyword_mean() {
        let (entries, bg) = corpus();
        let sets = WordSets::default();
        let ds = build_task_dataset(&entries, &bg, &sets, &tr(), &TaskOptions::default()).unwrap();
        let kwd = ds.train.iter().filter(|e| e.subset == Subset::OrgKwd).count();
        let m = (kwd as f64 / 10.0).round() as usize;
        assert_eq!(ds.count(Split::Train, UNKNOWN_CATEGORY), m);
        assert_eq!(ds.count(Split::Train, SILENCE_CATEGORY), m);
        assert!(ds.train.iter().filter(|e| e.category == UNKNOWN_CATEGORY).all(|e| e.tokens.to_string() == "UNK"));
    }

    #[test]
    fn extended_phase_adds_new_keyword_categories() {
        let (entries, bg) = corpus();
        let opts = TaskOptions {
            phase: Phase::Extended,
            ..Default::default()
        };
        let ds = build_task_dataset(&entries, &bg, &WordSets::default(), &tr(), &opts).unwrap();
        assert_eq!(ds.categories.len(), 18);
        assert!(ds.validation.iter().chain(&ds.test).any(|e| e.subset == Subset::NewKwd));
        assert!(ds.train.iter().all(|e| e.subset != Subset::NewKwd));
    }

    #[test]
    fn word_in_no_set_is_fatal() {
        let (mut entries, bg) = corpus();
        entries.push(parse_entry_path("banana/0000abcd_nohash_0.wav").unwrap());
        let err = build_task_dataset(&entries, &bg, &WordSets::default(), &tr(), &TaskOptions::default());
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn seeded_and_order_independent() {
        let (entries, bg) = corpus();
        let sets = WordSets::default();
        let a = build_task_dataset(&entries, &bg, &sets, &tr(), &TaskOptions::default()).unwrap();
        let mut rev = entries.clone();
        rev.reverse();
        let b = build_task_dataset(&rev, &bg, &sets, &tr(), &TaskOptions::default()).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn oversampling_counts() {
        let (entries, bg) = corpus();
        let sets = WordSets::default();
        let opts = TaskOptions {
            phase: Phase::Extended,
            ..Default::default()
        };
        let ds = build_task_dataset(&entries, &bg, &sets, &tr(), &opts).unwrap();
        let sample = sample_fewshot(&ds.reserved, &sets.new_kwd, 2, 1).unwrap();
        let with = add_fewshot(&ds, &sample, &tr()).unwrap();
        assert_eq!(with.train.len(), ds.train.len() + 2 * 6);
        assert_eq!(oversample(&with, &sample, 1).unwrap().train, with.train);
        let over = oversample(&with, &sample, 5).unwrap();
        assert_eq!(over.train.len(), with.train.len() + 4 * 2 * 6);
        assert!(oversample(&with, &sample, 0).is_err());
    }
}
