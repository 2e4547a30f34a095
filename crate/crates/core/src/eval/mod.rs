//! Category mapping, per-set classification error, reports and attention
//! dumps.

mod attention;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use attention::{dump_attention, read_trace_csv, render_heatmap, row_entropy, write_trace_csv, AttentionDump};
pub use report::{read_report_csv, render_table, report_cells, summarize, write_report_csv, ReportCell, Summary, REPORT_COLUMNS};

use crate::dataset::{BackgroundFile, Example, Subset, TaskDataset, SILENCE_CATEGORY, UNKNOWN_CATEGORY};
use crate::features::FeatureStats;
use crate::labels::{Role, Transcriber, Transcription, Vocabulary, SIL};
use crate::model::{beam_decode, DecodeOptions, Model};
use crate::par::{self, Execution};
use crate::pipeline::{example_features, FeatureCache};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchRule {
    ExactKeyword,
    Silence,
    FallbackUnknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryPrediction {
    pub category: String,
    pub matched_rule: MatchRule,
}

/// Keyword transcriptions of a task's categories.
#[derive(Debug, Clone)]
pub struct CategoryMap {
    categories: Vec<String>,
    keywords: BTreeMap<Vec<String>, String>,
}

impl CategoryMap {
    /// Keyword categories are transcribed with `transcriber`, so a restricted
    /// transcriber yields the same (possibly UNK-replaced) sequences the
    /// model was trained on. When two keywords share a sequence the first
    /// category wins.
    pub fn new(categories: &[String], transcriber: &Transcriber) -> Result<Self> {
        let mut keywords = BTreeMap::new();
        for c in categories {
            if c == SILENCE_CATEGORY || c == UNKNOWN_CATEGORY {
                continue;
            }
            let t = transcriber.transcribe(c, Role::Keyword)?;
            if let Some(prev) = keywords.get(&t.0) {
                log::warn!("keywords {prev} and {c} share the transcription {t}; {c} is unreachable");
                continue;
            }
            keywords.insert(t.0, c.clone());
        }
        Ok(Self {
            categories: categories.to_vec(),
            keywords,
        })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// Exact keyword match, then `SIL` or empty as silence, else unknown.
    pub fn map(&self, decoded: &[String]) -> CategoryPrediction {
        if let Some(c) = self.keywords.get(decoded) {
            return CategoryPrediction {
                category: c.clone(),
                matched_rule: MatchRule::ExactKeyword,
            };
        }
        if decoded.is_empty() || (decoded.len() == 1 && decoded[0] == SIL) {
            return CategoryPrediction {
                category: SILENCE_CATEGORY.into(),
                matched_rule: MatchRule::Silence,
            };
        }
        CategoryPrediction {
            category: UNKNOWN_CATEGORY.into(),
            matched_rule: MatchRule::FallbackUnknown,
        }
    }
}

pub fn map_to_category(decoded: &Transcription, map: &CategoryMap) -> CategoryPrediction {
    map.map(decoded.tokens())
}

/// Outcome for one evaluated utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceResult {
    pub key: String,
    pub word: String,
    pub subset: Subset,
    pub reference: String,
    pub predicted: CategoryPrediction,
    pub decoded: String,
}

impl UtteranceResult {
    pub fn correct(&self) -> bool {
        self.reference == self.predicted.category
    }
}

/// Decodes every example and maps it to a category.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    model: &Model,
    vocab: &Vocabulary,
    map: &CategoryMap,
    examples: &[Example],
    cache: &FeatureCache,
    stats: &FeatureStats,
    background: &[BackgroundFile],
    opts: &DecodeOptions,
    exec: Execution,
) -> Result<Vec<UtteranceResult>> {
    let out = par::map(exec, examples, |ex| -> Result<UtteranceResult> {
        let x = example_features(ex, cache, stats, background)?;
        let d = beam_decode(model, &x, vocab, opts);
        Ok(UtteranceResult {
            key: ex.source.key(background),
            word: ex.word.clone(),
            subset: ex.subset,
            reference: ex.category.clone(),
            predicted: map.map(&d.tokens),
            decoded: d.tokens.join(" "),
        })
    });
    out.into_iter().collect()
}

/// Percentage misclassified among results selected by `filter`; `None` when
/// nothing is selected.
pub fn classification_error(results: &[UtteranceResult], filter: impl Fn(&UtteranceResult) -> bool) -> Option<f64> {
    let (mut n, mut wrong) = (0usize, 0usize);
    for r in results.iter().filter(|r| filter(r)) {
        n += 1;
        if !r.correct() {
            wrong += 1;
        }
    }
    (n > 0).then(|| 100.0 * wrong as f64 / n as f64)
}

/// Evaluation sets in report order.
pub const SETS: [&str; 6] = ["org_kwd", "silence", "org_unk", "new_unk", "unk", "new_kwd"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub categories: Vec<String>,
    /// `counts[reference][predicted]`
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_results(categories: &[String], results: &[UtteranceResult]) -> Self {
        let mut cats = categories.to_vec();
        for r in results {
            for c in [&r.reference, &r.predicted.category] {
                if !cats.contains(c) {
                    cats.push(c.clone());
                }
            }
        }
        let idx = |c: &str| cats.iter().position(|x| x == c).expect("category registered above");
        let mut counts = vec![vec![0; cats.len()]; cats.len()];
        for r in results {
            counts[idx(&r.reference)][idx(&r.predicted.category)] += 1;
        }
        Self { categories: cats, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, category: &str) -> usize {
        self.categories
            .iter()
            .position(|c| c == category)
            .map_or(0, |i| self.counts[i].iter().sum())
    }

    pub fn error_pct(&self) -> Option<f64> {
        let total = self.total();
        let diag: usize = (0..self.categories.len()).map(|i| self.counts[i][i]).sum();
        (total > 0).then(|| 100.0 * (total - diag) as f64 / total as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("reference,{}\n", self.categories.join(","));
        for (c, row) in self.categories.iter().zip(&self.counts) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("{c},{}\n", cells.join(",")));
        }
        s
    }
}

/// Per-set errors for one split of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    /// Error percentage per set; absent when the set has no utterances.
    pub errors: BTreeMap<String, Option<f64>>,
    pub counts: BTreeMap<String, usize>,
    pub overall: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub meta: BTreeMap<String, String>,
}

fn subset_filter(set: &str) -> impl Fn(&UtteranceResult) -> bool + '_ {
    move |r: &UtteranceResult| r.subset.as_str() == set
}

impl EvalReport {
    /// The `unk` entry is the plain mean of `org_unk` and `new_unk`
    /// regardless of their sizes (or whichever one exists).
    pub fn from_results(split: &str, categories: &[String], results: &[UtteranceResult]) -> Self {
        let mut errors = BTreeMap::new();
        let mut counts = BTreeMap::new();
        for set in ["org_kwd", "silence", "org_unk", "new_unk", "new_kwd"] {
            let f = subset_filter(set);
            counts.insert(set.to_string(), results.iter().filter(|r| f(r)).count());
            errors.insert(set.to_string(), classification_error(results, f));
        }
        let unk = match (errors["org_unk"], errors["new_unk"]) {
            (Some(a), Some(b)) => Some((a + b) / 2.0),
            (a, b) => a.or(b),
        };
        errors.insert("unk".into(), unk);
        counts.insert("unk".into(), counts["org_unk"] + counts["new_unk"]);
        Self {
            split: split.into(),
            errors,
            counts,
            overall: classification_error(results, |_| true),
            confusion: ConfusionMatrix::from_results(categories, results),
            meta: BTreeMap::new(),
        }
    }

    pub fn error(&self, set: &str) -> Option<f64> {
        self.errors.get(set).copied().flatten()
    }

    pub fn accuracy(&self, set: &str) -> Option<f64> {
        self.error(set).map(|e| 100.0 - e)
    }
}

/// Runs [`evaluate`] on one split of a task and builds its report.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_split(
    model: &Model,
    vocab: &Vocabulary,
    map: &CategoryMap,
    task: &TaskDataset,
    split: crate::dataset::Split,
    cache: &FeatureCache,
    stats: &FeatureStats,
    opts: &DecodeOptions,
    exec: Execution,
) -> Result<(EvalReport, Vec<UtteranceResult>)> {
    let results = evaluate(model, vocab, map, task.split(split), cache, stats, &task.background, opts, exec)?;
    Ok((EvalReport::from_results(split.as_str(), &task.categories, &results), results))
}

/// Writes per-utterance results as TSV.
pub fn results_tsv(results: &[UtteranceResult]) -> String {
    let mut s = String::from("key\tword\tsubset\treference\tpredicted\trule\tdecoded\n");
    for r in results {
        let rule = match r.predicted.matched_rule {
            MatchRule::ExactKeyword => "exact-keyword",
            MatchRule::Silence => "silence",
            MatchRule::FallbackUnknown => "fallback-unknown",
        };
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.key,
            r.word,
            r.subset.as_str(),
            r.reference,
            r.predicted.category,
            rule,
            r.decoded
        ));
    }
    s
}
