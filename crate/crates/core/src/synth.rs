//! Synthetic Speech Commands-style corpus for smoke tests and demos.
//!
//! Every phoneme is rendered as a fixed pair of tones, so a word is a short
//! sequence of two-tone segments placed at a random onset inside a one-second
//! clip. Speakers differ in pitch, loudness, tempo and noise level. The
//! result is learnable in minutes on a CPU while still exercising the full
//! pipeline (file layout, splits, silence crops, features, labels).

use std::f64::consts::TAU;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{write_wav, AudioClip, SAMPLE_RATE};
use crate::dataset::{BACKGROUND_DIR, CORPUS_WORDS};
use crate::labels::Lexicon;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyCorpusSpec {
    pub words: Vec<String>,
    pub speakers: usize,
    /// Recordings per (speaker, word).
    pub takes: u32,
    pub background_files: usize,
    pub background_s: f64,
    pub seed: u64,
}

impl Default for ToyCorpusSpec {
    fn default() -> Self {
        Self {
            words: CORPUS_WORDS.iter().map(|w| w.to_string()).collect(),
            speakers: 40,
            takes: 1,
            background_files: 2,
            background_s: 10.0,
            seed: 0,
        }
    }
}

/// Per-speaker rendering parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Voice {
    pub pitch: f64,
    pub gain: f64,
    pub tempo: f64,
    pub noise: f64,
}

impl Voice {
    pub fn for_speaker(speaker: &str, seed: u64) -> Self {
        let mut r = rng::seeded(seed, &format!("voice/{speaker}"));
        Self {
            pitch: r.gen_range(0.94..1.06),
            gain: r.gen_range(0.25..0.45),
            tempo: r.gen_range(0.9..1.1),
            noise: r.gen_range(0.002..0.01),
        }
    }
}

const PHONE_MS: f64 = 90.0;

/// Stable tone pair for a phoneme (or any token).
fn tones(phone: &str) -> (f64, f64) {
    let mut h: u32 = 2_166_136_261;
    for b in phone.bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(16_777_619);
    }
    let low = 250.0 + (h % 11) as f64 * 110.0;
    let high = 1700.0 + ((h / 11) % 13) as f64 * 280.0;
    (low, high)
}

/// Fresh speaker ids: 8 lowercase hex digits, unique.
pub fn toy_speakers(n: usize, seed: u64) -> Vec<String> {
    let mut r = rng::seeded(seed, "speakers");
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let s = format!("{:08x}", r.gen::<u32>());
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn phones_for(word: &str, lexicon: &Lexicon) -> Vec<String> {
    match lexicon.get(word) {
        Some(p) => p.to_vec(),
        None => word.chars().map(|c| c.to_string()).collect(),
    }
}

/// One-second recording of `word`.
pub fn synth_word(word: &str, lexicon: &Lexicon, voice: &Voice, r: &mut ChaCha8Rng) -> AudioClip {
    let n = SAMPLE_RATE as usize;
    let sr = SAMPLE_RATE as f64;
    let mut s: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0) * voice.noise).collect();
    let phones = phones_for(word, lexicon);
    let seg = (PHONE_MS / 1000.0 * voice.tempo * sr) as usize;
    let total = seg * phones.len();
    let latest = n.saturating_sub(total + 800);
    let onset = r.gen_range(latest.min(800)..=latest);
    let fade = seg / 6;
    for (i, p) in phones.iter().enumerate() {
        let (f1, f2) = tones(p);
        let (f1, f2) = (f1 * voice.pitch, f2 * voice.pitch);
        let phase: f64 = r.gen_range(0.0..TAU);
        let start = onset + i * seg;
        for k in 0..seg {
            let idx = start + k;
            if idx >= n {
                break;
            }
            let env = if k < fade {
                k as f64 / fade as f64
            } else if k + fade > seg {
                (seg - k) as f64 / fade as f64
            } else {
                1.0
            };
            let t = k as f64 / sr;
            s[idx] += voice.gain * env * (0.6 * (TAU * f1 * t + phase).sin() + 0.4 * (TAU * f2 * t).sin());
        }
    }
    AudioClip::new(s.into_iter().map(|v| v.clamp(-1.0, 1.0) as f32).collect(), SAMPLE_RATE)
}

/// Low-level coloured noise standing in for the background recordings.
pub fn synth_background(seconds: f64, r: &mut ChaCha8Rng) -> AudioClip {
    let n = (seconds * SAMPLE_RATE as f64) as usize;
    let level = r.gen_range(0.01..0.04);
    let mut prev = 0.0;
    let samples = (0..n)
        .map(|_| {
            prev = 0.9 * prev + 0.1 * r.gen_range(-1.0..1.0);
            (prev * level * 5.0) as f32
        })
        .collect();
    AudioClip::new(samples, SAMPLE_RATE)
}

/// Writes `<root>/<word>/<speaker>_nohash_<take>.wav` for every word,
/// speaker and take, plus background noise files. Returns the number of word
/// recordings written.
pub fn write_toy_corpus(root: &Path, spec: &ToyCorpusSpec, lexicon: &Lexicon) -> Result<usize> {
    if spec.speakers == 0 || spec.takes == 0 {
        return Err(Error::Config("toy corpus needs at least one speaker and one take".into()));
    }
    let speakers = toy_speakers(spec.speakers, spec.seed);
    let mut count = 0;
    for word in &spec.words {
        let dir = root.join(word);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for spk in &speakers {
            let voice = Voice::for_speaker(spk, spec.seed);
            for take in 0..spec.takes {
                let mut r = rng::seeded(spec.seed, &format!("clip/{word}/{spk}/{take}"));
                let clip = synth_word(word, lexicon, &voice, &mut r);
                write_wav(&dir.join(format!("{spk}_nohash_{take}.wav")), &clip)?;
                count += 1;
            }
        }
    }
    let bg = root.join(BACKGROUND_DIR);
    std::fs::create_dir_all(&bg).map_err(|e| Error::io(&bg, e))?;
    for i in 0..spec.background_files {
        let mut r = rng::seeded(spec.seed, &format!("background/{i}"));
        write_wav(&bg.join(format!("noise_{i}.wav")), &synth_background(spec.background_s, &mut r))?;
    }
    Ok(count)
}
