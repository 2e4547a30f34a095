//! Output label schemes, the pronunciation lexicon and vocabulary handling.
//!
//! Unknown-category words always become a single unknown token (`UNK` for
//! phonemes, `?` otherwise). Per-token replacement with that same token is
//! only used for few-shot label surgery, see [`replace_missing_tokens`].

mod lexicon;
mod vocab;

use serde::{Deserialize, Serialize};

pub use lexicon::{load_lexicon, parse_lexicon, Lexicon};
pub use vocab::{build_vocabulary, Vocabulary, BLANK, EOS, SIL, SOS, UNK_CHAR, UNK_PHONE};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelScheme {
    Phoneme,
    Grapheme,
    Word,
}

impl LabelScheme {
    pub const ALL: [LabelScheme; 3] = [LabelScheme::Phoneme, LabelScheme::Grapheme, LabelScheme::Word];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelScheme::Phoneme => "phoneme",
            LabelScheme::Grapheme => "grapheme",
            LabelScheme::Word => "word",
        }
    }

    /// Token used for `_unknown_` words and for few-shot replacement.
    pub fn unk_token(self) -> &'static str {
        match self {
            LabelScheme::Phoneme => UNK_PHONE,
            LabelScheme::Grapheme | LabelScheme::Word => UNK_CHAR,
        }
    }
}

impl std::str::FromStr for LabelScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phoneme" => Ok(LabelScheme::Phoneme),
            "grapheme" => Ok(LabelScheme::Grapheme),
            "word" => Ok(LabelScheme::Word),
            other => Err(Error::Config(format!(
                "unknown label scheme {other:?} (expected phoneme, grapheme or word)"
            ))),
        }
    }
}

impl std::fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a word stands for in the current task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Keyword,
    Unknown,
    Silence,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transcription(pub Vec<String>);

impl Transcription {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::fmt::Display for Transcription {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl<S: AsRef<str>> FromIterator<S> for Transcription {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Transcription(iter.into_iter().map(|s| s.as_ref().to_string()).collect())
    }
}

pub fn transcribe(word: &str, role: Role, scheme: LabelScheme, lexicon: &Lexicon) -> Result<Transcription> {
    let tokens = match role {
        Role::Silence => vec![SIL.to_string()],
        Role::Unknown => vec![scheme.unk_token().to_string()],
        Role::Keyword => match scheme {
            LabelScheme::Phoneme => lexicon
                .get(word)
                .ok_or_else(|| Error::MissingPronunciation(word.to_string()))?
                .to_vec(),
            LabelScheme::Grapheme => word.chars().map(|c| c.to_string()).collect(),
            LabelScheme::Word => vec![word.to_string()],
        },
    };
    Ok(Transcription(tokens))
}

/// Replaces every token absent from `vocab` with the vocabulary's unknown
/// token. Length-preserving and idempotent.
pub fn replace_missing_tokens(trans: &Transcription, vocab: &Vocabulary) -> Transcription {
    let unk = vocab.unk_token();
    Transcription(
        trans
            .0
            .iter()
            .map(|t| if vocab.contains(t) { t.clone() } else { unk.to_string() })
            .collect(),
    )
}

/// Scheme + lexicon, optionally restricted to a fixed vocabulary through
/// [`replace_missing_tokens`].
#[derive(Debug, Clone)]
pub struct Transcriber {
    pub scheme: LabelScheme,
    pub lexicon: Lexicon,
    pub restrict_to: Option<Vocabulary>,
}

impl Transcriber {
    pub fn new(scheme: LabelScheme, lexicon: Lexicon) -> Self {
        Self {
            scheme,
            lexicon,
            restrict_to: None,
        }
    }

    pub fn restricted(mut self, vocab: Vocabulary) -> Self {
        self.restrict_to = Some(vocab);
        self
    }

    pub fn transcribe(&self, word: &str, role: Role) -> Result<Transcription> {
        let t = transcribe(word, role, self.scheme, &self.lexicon)?;
        Ok(match &self.restrict_to {
            Some(v) => replace_missing_tokens(&t, v),
            None => t,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Phase, WordSets};

    fn t(s: &str) -> Transcription {
        s.split_whitespace().collect()
    }

    #[test]
    fn transcribe_roles() {
        let lex = Lexicon::builtin();
        assert_eq!(
            transcribe("backward", Role::Keyword, LabelScheme::Grapheme, &lex).unwrap(),
            t("b a c k w a r d")
        );
        assert_eq!(transcribe("bed", Role::Unknown, LabelScheme::Phoneme, &lex).unwrap(), t("UNK"));
        assert_eq!(transcribe("bed", Role::Unknown, LabelScheme::Grapheme, &lex).unwrap(), t("?"));
        assert_eq!(transcribe("stop", Role::Keyword, LabelScheme::Word, &lex).unwrap(), t("stop"));
        assert_eq!(transcribe("x", Role::Silence, LabelScheme::Word, &lex).unwrap(), t("SIL"));
        assert_eq!(transcribe("yes", Role::Keyword, LabelScheme::Phoneme, &lex).unwrap(), t("Y EH S"));
    }

    #[test]
    fn keyword_without_pronunciation_is_an_error() {
        let err = transcribe("zebra", Role::Keyword, LabelScheme::Phoneme, &Lexicon::default()).unwrap_err();
        assert!(matches!(err, Error::MissingPronunciation(w) if w == "zebra"));
    }

    #[test]
    fn backward_surgery_matches_printed_examples() {
        let lex = Lexicon::builtin();
        let sets = WordSets::default();
        let pv = build_vocabulary(LabelScheme::Phoneme, &sets, &lex, Phase::Base12).unwrap();
        let ph = transcribe("backward", Role::Keyword, LabelScheme::Phoneme, &lex).unwrap();
        assert_eq!(replace_missing_tokens(&ph, &pv).to_string(), "UNK UNK UNK UNK UNK D");
        let gv = build_vocabulary(LabelScheme::Grapheme, &sets, &lex, Phase::Base12).unwrap();
        let gr = transcribe("backward", Role::Keyword, LabelScheme::Grapheme, &lex).unwrap();
        assert_eq!(replace_missing_tokens(&gr, &gv).0.concat(), "????w?rd");
    }

    #[test]
    fn in_vocabulary_transcription_is_unchanged() {
        let lex = Lexicon::builtin();
        let sets = WordSets::default();
        for scheme in LabelScheme::ALL {
            let v = build_vocabulary(scheme, &sets, &lex, Phase::Base12).unwrap();
            for w in &sets.org_kwd {
                let tr = transcribe(w, Role::Keyword, scheme, &lex).unwrap();
                assert_eq!(replace_missing_tokens(&tr, &v), tr);
            }
        }
    }

    #[test]
    fn restricted_transcriber_applies_surgery() {
        let lex = Lexicon::builtin();
        let v = build_vocabulary(LabelScheme::Phoneme, &WordSets::default(), &lex, Phase::Base12).unwrap();
        let tr = Transcriber::new(LabelScheme::Phoneme, lex).restricted(v);
        assert_eq!(tr.transcribe("backward", Role::Keyword).unwrap().to_string(), "UNK UNK UNK UNK UNK D");
        assert_eq!(tr.transcribe("four", Role::Keyword).unwrap().to_string(), "F AO R");
    }

    #[test]
    fn scheme_parses() {
        assert_eq!("grapheme".parse::<LabelScheme>().unwrap(), LabelScheme::Grapheme);
        assert!("letters".parse::<LabelScheme>().is_err());
    }
}
