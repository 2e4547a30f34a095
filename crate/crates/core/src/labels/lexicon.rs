use std::collections::BTreeMap;
use std::path::Path;

use log::warn;

use crate::{Error, Result};

/// Word → phoneme sequence, one pronunciation per word.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<String>>,
}

const BUILTIN: &str = include_str!("../../data/lexicon.txt");

impl Lexicon {
    /// ARPAbet pronunciations for all 35 corpus words, shipped with the crate.
    pub fn builtin() -> Self {
        parse_lexicon(BUILTIN).expect("bundled lexicon is valid").0
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn insert(&mut self, word: &str, phones: Vec<String>) -> Option<Vec<String>> {
        self.entries.insert(word.to_lowercase(), phones)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(w, p)| (w.as_str(), p.as_slice()))
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(w, p)| format!("{w} {}\n", p.join(" ")))
            .collect()
    }
}

/// Parses `WORD PH1 PH2 ...` lines. Blank lines and `#` comments are skipped.
/// Returns the lexicon and the number of duplicate words (last one wins).
pub fn parse_lexicon(text: &str) -> Result<(Lexicon, usize)> {
    let mut lex = Lexicon::default();
    let mut duplicates = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or_default();
        let phones: Vec<String> = parts.map(str::to_string).collect();
        if phones.is_empty() {
            return Err(Error::Lexicon {
                line: i + 1,
                msg: format!("empty pronunciation for {word:?}"),
            });
        }
        if lex.insert(word, phones).is_some() {
            warn!("lexicon line {}: duplicate entry for {word:?}, keeping the last one", i + 1);
            duplicates += 1;
        }
    }
    Ok((lex, duplicates))
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_lexicon(&text)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_backward() {
        let (lex, dups) = parse_lexicon("backward B AE K W ER D\n").unwrap();
        assert_eq!(dups, 0);
        assert_eq!(lex.get("backward").unwrap(), ["B", "AE", "K", "W", "ER", "D"]);
    }

    #[test]
    fn empty_file_is_empty_lexicon() {
        assert!(parse_lexicon("").unwrap().0.is_empty());
    }

    #[test]
    fn duplicate_is_last_wins() {
        let (lex, dups) = parse_lexicon("on AO N\non AA N\n").unwrap();
        assert_eq!(dups, 1);
        assert_eq!(lex.get("on").unwrap(), ["AA", "N"]);
    }

    #[test]
    fn empty_pronunciation_reports_line() {
        let err = parse_lexicon("yes Y EH S\n\nno\n").unwrap_err();
        assert!(matches!(err, Error::Lexicon { line: 3, .. }));
    }

    #[test]
    fn builtin_covers_all_corpus_words() {
        let lex = Lexicon::builtin();
        for w in crate::dataset::CORPUS_WORDS {
            assert!(lex.get(w).is_some(), "{w}");
        }
        assert_eq!(lex.get("yes").unwrap().len(), 3);
    }
}
