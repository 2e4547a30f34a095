use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use super::CorpusEntry;

/// 2^27 - 1, the per-class file cap of the reference split procedure.
const MAX_WAVS_PER_CLASS: u64 = (1 << 27) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        Some(match s {
            "train" | "training" => Split::Train,
            "validation" | "val" => Split::Validation,
            "test" | "testing" => Split::Test,
            _ => return None,
        })
    }
}

/// SHA-1 of the speaker id, reduced modulo 2^27. Equals Python's
/// `int(hashlib.sha1(s).hexdigest(), 16) % (2**27)`: only the low 27 bits
/// of the big-endian digest matter.
pub fn split_bucket(speaker_id: &str) -> u64 {
    let digest = Sha1::digest(speaker_id.as_bytes());
    let tail = u32::from_be_bytes([digest[16], digest[17], digest[18], digest[19]]) as u64;
    tail % (MAX_WAVS_PER_CLASS + 1)
}

pub fn split_percentage(speaker_id: &str) -> f64 {
    split_bucket(speaker_id) as f64 * (100.0 / MAX_WAVS_PER_CLASS as f64)
}

/// Pure function of the speaker id: buckets below `val_pct` go to
/// validation, the next `test_pct` to test, the rest to training.
pub fn assign_split(entry: &CorpusEntry, val_pct: f64, test_pct: f64) -> Split {
    let p = split_percentage(&entry.speaker_id);
    if p < val_pct {
        Split::Validation
    } else if p < val_pct + test_pct {
        Split::Test
    } else {
        Split::Train
    }
}
