use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|w| w.to_string()).collect()
}

/// Partition of the corpus words into the four experimental sets.
///
/// `excluded` lists corpus words deliberately left out of every set; any
/// other word that appears in the corpus but in no list is a configuration
/// error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordSets {
    pub org_kwd: Vec<String>,
    pub org_unk: Vec<String>,
    pub new_kwd: Vec<String>,
    pub new_unk: Vec<String>,
    #[serde(default)]
    pub excluded: Vec<String>,
}

impl Default for WordSets {
    fn default() -> Self {
        Self {
            org_kwd: words(&["down", "go", "left", "no", "off", "on", "right", "stop", "up", "yes"]),
            org_unk: words(&[
                "bed", "bird", "cat", "dog", "happy", "house", "marvin", "sheila", "tree", "visual", "wow",
            ]),
            new_kwd: words(&["forward", "four", "one", "three", "two", "zero"]),
            new_unk: words(&["eight", "five", "follow", "learn", "nine", "seven", "six"]),
            // the 35th corpus word is absent from the published word table
            excluded: words(&["backward"]),
        }
    }
}

/// Which experimental set an utterance belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    OrgKwd,
    OrgUnk,
    NewKwd,
    NewUnk,
    Silence,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::OrgKwd => "org_kwd",
            Subset::OrgUnk => "org_unk",
            Subset::NewKwd => "new_kwd",
            Subset::NewUnk => "new_unk",
            Subset::Silence => "silence",
        }
    }

    pub fn parse(s: &str) -> Option<Subset> {
        Some(match s {
            "org_kwd" => Subset::OrgKwd,
            "org_unk" => Subset::OrgUnk,
            "new_kwd" => Subset::NewKwd,
            "new_unk" => Subset::NewUnk,
            "silence" => Subset::Silence,
            _ => return None,
        })
    }
}

impl WordSets {
    /// Variant with `backward` counted among the new keywords (seven of them),
    /// as the running text describes.
    pub fn with_backward_as_new_keyword() -> Self {
        let mut s = Self::default();
        s.new_kwd.insert(0, "backward".into());
        s.excluded.clear();
        s
    }

    fn lists(&self) -> [(&'static str, &Vec<String>); 5] {
        [
            ("org_kwd", &self.org_kwd),
            ("org_unk", &self.org_unk),
            ("new_kwd", &self.new_kwd),
            ("new_unk", &self.new_unk),
            ("excluded", &self.excluded),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.org_kwd.is_empty() {
            return Err(Error::Config("org_kwd must not be empty".into()));
        }
        let mut seen: HashSet<&str> = HashSet::new();
        for (name, list) in self.lists() {
            for w in list {
                if !seen.insert(w) {
                    return Err(Error::Config(format!("word {w:?} appears twice (again in {name})")));
                }
            }
        }
        Ok(())
    }

    /// Total number of words in the four experimental sets.
    pub fn len(&self) -> usize {
        self.org_kwd.len() + self.org_unk.len() + self.new_kwd.len() + self.new_unk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subset_of(&self, word: &str) -> Option<Subset> {
        let has = |l: &Vec<String>| l.iter().any(|w| w == word);
        if has(&self.org_kwd) {
            Some(Subset::OrgKwd)
        } else if has(&self.org_unk) {
            Some(Subset::OrgUnk)
        } else if has(&self.new_kwd) {
            Some(Subset::NewKwd)
        } else if has(&self.new_unk) {
            Some(Subset::NewUnk)
        } else {
            None
        }
    }

    pub fn is_excluded(&self, word: &str) -> bool {
        self.excluded.iter().any(|w| w == word)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::CORPUS_WORDS;

    #[test]
    fn defaults_match_word_table() {
        let s = WordSets::default();
        assert_eq!((s.org_kwd.len(), s.org_unk.len(), s.new_kwd.len(), s.new_unk.len()), (10, 11, 6, 7));
        assert_eq!(s.len(), 34);
        s.validate().unwrap();
        for w in CORPUS_WORDS {
            assert!(s.subset_of(w).is_some() || s.is_excluded(w), "{w}");
        }
    }

    #[test]
    fn seven_keyword_variant() {
        let s = WordSets::with_backward_as_new_keyword();
        s.validate().unwrap();
        assert_eq!(s.new_kwd.len(), 7);
        assert_eq!(s.len(), 35);
    }

    #[test]
    fn overlapping_sets_are_rejected() {
        let mut s = WordSets::default();
        s.org_unk.push("yes".into());
        assert!(s.validate().is_err());
    }
}
