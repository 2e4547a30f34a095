use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CorpusEntry;
use crate::{rng, Error, Result};

/// `f` held-aside training recordings for each new keyword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotSample {
    pub f: usize,
    pub entries: BTreeMap<String, Vec<CorpusEntry>>,
    pub seed: u64,
}

impl FewShotSample {
    pub fn empty(seed: u64) -> Self {
        Self {
            f: 0,
            entries: BTreeMap::new(),
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &CorpusEntry)> {
        self.entries.iter().flat_map(|(w, es)| es.iter().map(move |e| (w.as_str(), e)))
    }
}

/// Samples exactly `f` reserved entries per word, without replacement.
pub fn sample_fewshot(reserved: &[CorpusEntry], words: &[String], f: usize, seed: u64) -> Result<FewShotSample> {
    let mut pools: BTreeMap<&str, Vec<&CorpusEntry>> = words.iter().map(|w| (w.as_str(), Vec::new())).collect();
    for e in reserved {
        if let Some(p) = pools.get_mut(e.word.as_str()) {
            p.push(e);
        }
    }
    let short: Vec<String> = pools
        .iter()
        .filter(|(_, p)| p.len() < f)
        .map(|(w, p)| format!("{w}={}", p.len()))
        .collect();
    if !short.is_empty() {
        return Err(Error::InsufficientFewShot {
            f,
            counts: short.join(", "),
        });
    }
    let mut entries = BTreeMap::new();
    for (word, mut pool) in pools {
        pool.sort_by(|a, b| a.path.cmp(&b.path));
        let mut r = rng::seeded(seed, &format!("fewshot/{word}"));
        let picked = rand::seq::index::sample(&mut r, pool.len(), f);
        entries.insert(word.to_string(), picked.iter().map(|i| pool[i].clone()).collect());
    }
    Ok(FewShotSample { f, entries, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_entry_path;

    fn reserved(word: &str, n: usize) -> Vec<CorpusEntry> {
        (0..n)
            .map(|i| parse_entry_path(&format!("{word}/{:08x}_nohash_0.wav", i * 7919)).unwrap())
            .collect()
    }

    #[test]
    fn exactly_f_per_word_without_replacement() {
        let mut pool = reserved("four", 50);
        pool.extend(reserved("zero", 30));
        let words = vec!["four".to_string(), "zero".to_string()];
        let s = sample_fewshot(&pool, &words, 10, 3).unwrap();
        for w in &words {
            let es = &s.entries[w];
            assert_eq!(es.len(), 10);
            let mut paths: Vec<_> = es.iter().map(|e| &e.path).collect();
            paths.sort();
            paths.dedup();
            assert_eq!(paths.len(), 10);
            assert!(es.iter().all(|e| &e.word == w));
        }
        assert_eq!(s, sample_fewshot(&pool, &words, 10, 3).unwrap());
        assert_ne!(s.entries, sample_fewshot(&pool, &words, 10, 4).unwrap().entries);
    }

    #[test]
    fn input_order_does_not_matter() {
        let pool = reserved("one", 40);
        let mut rev = pool.clone();
        rev.reverse();
        let w = vec!["one".to_string()];
        assert_eq!(sample_fewshot(&pool, &w, 5, 1).unwrap(), sample_fewshot(&rev, &w, 5, 1).unwrap());
    }

    #[test]
    fn insufficient_reports_counts() {
        let pool = reserved("two", 3);
        let err = sample_fewshot(&pool, &["two".to_string(), "three".to_string()], 5, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("two=3") && msg.contains("three=0"), "{msg}");
    }
}
