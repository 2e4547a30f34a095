use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{self, BackgroundFile};
use crate::audio::AudioClip;
use crate::{rng, Error, Result};

/// A window into one of the background-noise recordings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SilenceCrop {
    pub background: usize,
    pub offset: usize,
    pub len: usize,
}

/// Picks `count` uniformly random crops of `duration_s` seconds. Only the
/// background headers are needed, so this runs without touching audio.
pub fn plan_silence(background: &[BackgroundFile], count: usize, duration_s: f64, seed: u64) -> Result<Vec<SilenceCrop>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let usable: Vec<(usize, usize)> = background
        .iter()
        .enumerate()
        .filter_map(|(i, b)| {
            let len = (duration_s * b.sample_rate as f64).round() as usize;
            (len > 0 && b.n_samples >= len).then_some((i, len))
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::Data(format!(
            "no background recording is at least {duration_s} s long; cannot synthesize silence"
        )));
    }
    let mut r = rng::seeded(seed, "silence");
    Ok((0..count)
        .map(|_| {
            let (i, len) = usable[r.gen_range(0..usable.len())];
            let offset = r.gen_range(0..=background[i].n_samples - len);
            SilenceCrop {
                background: i,
                offset,
                len,
            }
        })
        .collect())
}

/// Materializes silence clips from the background recordings under `root`.
pub fn synthesize_silence(
    root: &Path,
    background: &[BackgroundFile],
    count: usize,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<AudioClip>> {
    let plan = plan_silence(background, count, duration_s, seed)?;
    let mut loaded: HashMap<usize, AudioClip> = HashMap::new();
    let mut out = Vec::with_capacity(plan.len());
    for crop in plan {
        let clip = match loaded.entry(crop.background) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(corpus::load(root, &background[crop.background].path)?),
        };
        out.push(clip.crop(crop.offset, crop.len));
    }
    Ok(out)
}
