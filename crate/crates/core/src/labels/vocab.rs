use std::collections::HashMap;
use std::path::Path;

use super::{transcribe, LabelScheme, Lexicon, Role};
use crate::dataset::{Phase, WordSets};
use crate::{Error, Result};

pub const BLANK: &str = "<blank>";
pub const SOS: &str = "<sos>";
pub const EOS: &str = "<eos>";
pub const SIL: &str = "SIL";
pub const UNK_PHONE: &str = "UNK";
pub const UNK_CHAR: &str = "?";

/// Ordered token inventory. Index 0 is the CTC blank, followed by SOS, EOS,
/// the scheme's unknown token and SIL; regular tokens follow in order of
/// first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    scheme: LabelScheme,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub const BLANK_ID: usize = 0;
    pub const SOS_ID: usize = 1;
    pub const EOS_ID: usize = 2;
    pub const UNK_ID: usize = 3;
    pub const SIL_ID: usize = 4;

    pub fn new(scheme: LabelScheme) -> Self {
        let mut v = Self {
            scheme,
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in [BLANK, SOS, EOS, scheme.unk_token(), SIL] {
            v.push(t);
        }
        v
    }

    fn push(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), self.tokens.len() - 1);
        self.tokens.len() - 1
    }

    pub fn scheme(&self) -> LabelScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn unk_token(&self) -> &str {
        &self.tokens[Self::UNK_ID]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Token ids for a transcription; tokens outside the vocabulary map to
    /// the unknown id.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t).unwrap_or(Self::UNK_ID)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }

    pub fn to_text(&self) -> String {
        self.tokens.iter().map(|t| format!("{t}\n")).collect()
    }

    pub fn from_tokens(scheme: LabelScheme, tokens: &[String]) -> Result<Self> {
        let expected = [BLANK, SOS, EOS, scheme.unk_token(), SIL];
        if tokens.len() < expected.len() || tokens[..expected.len()].iter().zip(expected).any(|(a, b)| a != b) {
            return Err(Error::Data(format!(
                "vocabulary must start with {expected:?} for the {scheme} scheme"
            )));
        }
        let mut v = Self::new(scheme);
        for t in &tokens[expected.len()..] {
            if v.contains(t) {
                return Err(Error::Data(format!("duplicate vocabulary token {t:?}")));
            }
            v.push(t);
        }
        Ok(v)
    }

    pub fn from_text(scheme: LabelScheme, text: &str) -> Result<Self> {
        let tokens: Vec<String> = text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect();
        Self::from_tokens(scheme, &tokens)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(scheme: LabelScheme, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(scheme, &text)
    }
}

/// Base-12 vocabularies only hold tokens reachable from the original
/// keywords; the extended phase appends whatever the new keywords need.
pub fn build_vocabulary(scheme: LabelScheme, sets: &WordSets, lexicon: &Lexicon, phase: Phase) -> Result<Vocabulary> {
    let mut v = Vocabulary::new(scheme);
    let extra: &[String] = match phase {
        Phase::Base12 => &[],
        Phase::Extended => &sets.new_kwd,
    };
    for w in sets.org_kwd.iter().chain(extra) {
        for t in transcribe(w, Role::Keyword, scheme, lexicon)?.0 {
            v.push(&t);
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets() -> WordSets {
        WordSets::default()
    }

    #[test]
    fn specials_come_first() {
        let v = Vocabulary::new(LabelScheme::Phoneme);
        assert_eq!(v.tokens(), [BLANK, SOS, EOS, "UNK", "SIL"]);
        assert_eq!(Vocabulary::new(LabelScheme::Grapheme).unk_token(), "?");
    }

    #[test]
    fn base_phoneme_vocab_excludes_new_only_phonemes() {
        let lex = Lexicon::builtin();
        let v = build_vocabulary(LabelScheme::Phoneme, &sets(), &lex, Phase::Base12).unwrap();
        for p in ["Z", "TH", "UW", "IH"] {
            assert!(!v.contains(p), "{p}");
        }
        for p in ["Y", "EH", "S", "AA"] {
            assert!(v.contains(p));
        }
    }

    #[test]
    fn grapheme_base_vocab_is_letters_of_original_keywords() {
        let lex = Lexicon::builtin();
        let s = sets();
        let v = build_vocabulary(LabelScheme::Grapheme, &s, &lex, Phase::Base12).unwrap();
        let letters: std::collections::HashSet<String> =
            s.org_kwd.iter().flat_map(|w| w.chars().map(|c| c.to_string())).collect();
        for t in &v.tokens()[5..] {
            assert!(letters.contains(t));
        }
        assert_eq!(v.len(), 5 + letters.len());
    }

    #[test]
    fn extended_is_a_superset_with_stable_prefix() {
        let lex = Lexicon::builtin();
        for scheme in LabelScheme::ALL {
            let b = build_vocabulary(scheme, &sets(), &lex, Phase::Base12).unwrap();
            let e = build_vocabulary(scheme, &sets(), &lex, Phase::Extended).unwrap();
            assert!(e.len() >= b.len());
            assert_eq!(&e.tokens()[..b.len()], b.tokens());
        }
    }

    #[test]
    fn file_round_trip_keeps_order() {
        let lex = Lexicon::builtin();
        let v = build_vocabulary(LabelScheme::Word, &sets(), &lex, Phase::Extended).unwrap();
        let back = Vocabulary::from_text(LabelScheme::Word, &v.to_text()).unwrap();
        assert_eq!(back, v);
        assert!(Vocabulary::from_text(LabelScheme::Phoneme, &v.to_text()).is_err());
    }
}
