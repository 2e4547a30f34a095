use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::audio;
use crate::features::FbankConfig;
use crate::par::{self, Execution};
use crate::{Error, Result};

pub const BACKGROUND_DIR: &str = "_background_noise_";

/// The 35 words of the second corpus release.
pub const CORPUS_WORDS: [&str; 35] = [
    "backward", "bed", "bird", "cat", "dog", "down", "eight", "five", "follow", "forward", "four", "go", "happy",
    "house", "learn", "left", "marvin", "nine", "no", "off", "on", "one", "right", "seven", "sheila", "six", "stop",
    "three", "tree", "two", "up", "visual", "wow", "yes", "zero",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    /// Path relative to the corpus root, `/`-separated: `<word>/<file>.wav`.
    pub path: String,
    pub word: String,
    pub speaker_id: String,
    pub take: u32,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundFile {
    pub path: String,
    pub n_samples: usize,
    pub sample_rate: u32,
}

#[derive(Debug, Clone, Default)]
pub struct CorpusScan {
    pub root: PathBuf,
    pub entries: Vec<CorpusEntry>,
    pub background: Vec<BackgroundFile>,
    /// One message per skipped file.
    pub warnings: Vec<String>,
}

impl CorpusScan {
    pub fn abs_path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

/// Parses `<word>/<speaker>_nohash_<take>.wav`. The duration is left at the
/// nominal one second; [`scan_corpus`] fills in the real value.
pub fn parse_entry_path(rel: &str) -> Option<CorpusEntry> {
    let rel = rel.replace('\\', "/");
    let (word, file) = rel.rsplit_once('/').map(|(dir, f)| (dir.rsplit('/').next().unwrap_or(dir), f))?;
    let stem = file.strip_suffix(".wav")?;
    let (speaker, take) = stem.split_once("_nohash_")?;
    if speaker.is_empty() || !speaker.chars().all(|c| c.is_ascii_hexdigit()) || word.is_empty() {
        return None;
    }
    let take = take.parse().ok()?;
    Some(CorpusEntry {
        path: format!("{word}/{file}"),
        word: word.to_string(),
        speaker_id: speaker.to_string(),
        take,
        duration_s: 1.0,
    })
}

fn sorted_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    out.sort();
    Ok(out)
}

/// Lists every utterance under `root`. Background-noise recordings are
/// returned separately; files with unparsable names or shorter than one
/// analysis window are skipped and reported in `warnings`.
pub fn scan_corpus(root: &Path, exec: Execution) -> Result<CorpusScan> {
    if !root.is_dir() {
        return Err(Error::MissingRoot(root.to_path_buf()));
    }
    let min_samples = FbankConfig::default().window_samples();
    let mut scan = CorpusScan {
        root: root.to_path_buf(),
        ..Default::default()
    };
    let mut candidates = Vec::new();
    for dir in sorted_dir(root)? {
        if !dir.is_dir() {
            continue;
        }
        let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        for file in sorted_dir(&dir)? {
            if file.extension().and_then(|e| e.to_str()) != Some("wav") {
                continue;
            }
            let fname = file.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            candidates.push((name.clone(), fname, file));
        }
    }

    let headers = par::map(exec, &candidates, |(_, _, file)| -> Result<(usize, u32)> {
        let reader = hound::WavReader::open(file).map_err(|source| Error::Wav {
            path: file.clone(),
            source,
        })?;
        Ok((reader.duration() as usize, reader.spec().sample_rate))
    });

    for ((dir, fname, _), header) in candidates.iter().zip(headers) {
        let rel = format!("{dir}/{fname}");
        let (n_samples, sr) = match header {
            Ok(h) => h,
            Err(e) => {
                scan.warnings.push(format!("{rel}: unreadable ({e})"));
                continue;
            }
        };
        if dir == BACKGROUND_DIR {
            scan.background.push(BackgroundFile {
                path: rel,
                n_samples,
                sample_rate: sr,
            });
            continue;
        }
        let Some(mut entry) = parse_entry_path(&rel) else {
            scan.warnings.push(format!("{rel}: filename does not match <speaker>_nohash_<take>.wav"));
            continue;
        };
        if n_samples < min_samples || sr == 0 {
            scan.warnings.push(format!("{rel}: too short ({n_samples} samples)"));
            continue;
        }
        entry.duration_s = n_samples as f64 / sr as f64;
        scan.entries.push(entry);
    }
    for w in &scan.warnings {
        warn!("skipped {w}");
    }
    Ok(scan)
}

/// Loads the audio behind a corpus-relative path.
pub(crate) fn load(root: &Path, rel: &str) -> Result<audio::AudioClip> {
    audio::read_wav(&root.join(rel))
}
