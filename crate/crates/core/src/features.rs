//! 80-dimensional log-mel filterbank front-end and global mean/variance
//! normalization.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use log::warn;
use ndarray::{Array1, Array2, Axis};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::par::{self, Execution};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbankConfig {
    pub sample_rate: u32,
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub n_mels: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub log_floor: f64,
}

impl Default for FbankConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
            n_mels: 80,
            low_hz: 20.0,
            high_hz: 7600.0,
            log_floor: 1e-10,
        }
    }
}

impl FbankConfig {
    pub fn window_samples(&self) -> usize {
        (self.sample_rate as f64 * self.frame_length_ms / 1000.0).round() as usize
    }

    pub fn shift_samples(&self) -> usize {
        (self.sample_rate as f64 * self.frame_shift_ms / 1000.0).round() as usize
    }

    pub fn fft_size(&self) -> usize {
        self.window_samples().next_power_of_two()
    }

    /// `1 + floor((samples - window) / shift)`, or 0 when too short.
    pub fn num_frames(&self, samples: usize) -> usize {
        let w = self.window_samples();
        if samples < w {
            0
        } else {
            1 + (samples - w) / self.shift_samples()
        }
    }
}

/// T×n_mels log-mel energies.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub frames: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(frames: Array2<f64>) -> Self {
        Self { frames }
    }

    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale, `n_mels × (fft_size/2 + 1)`.
pub fn mel_filterbank(cfg: &FbankConfig) -> Array2<f64> {
    let n_fft = cfg.fft_size();
    let n_bins = n_fft / 2 + 1;
    let (lo, hi) = (hz_to_mel(cfg.low_hz), hz_to_mel(cfg.high_hz));
    let centers: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = cfg.sample_rate as f64 / n_fft as f64;
    let mut fb = Array2::zeros((cfg.n_mels, n_bins));
    for m in 0..cfg.n_mels {
        let (l, c, r) = (centers[m], centers[m + 1], centers[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f > l && f <= c {
                (f - l) / (c - l)
            } else if f > c && f < r {
                (r - f) / (r - c)
            } else {
                0.0
            };
            fb[[m, k]] = w;
        }
    }
    fb
}

/// Reusable filterbank extractor (FFT plan, window and mel matrix).
#[derive(Clone)]
pub struct Fbank {
    cfg: FbankConfig,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    mel: Array2<f64>,
}

impl std::fmt::Debug for Fbank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fbank").field("cfg", &self.cfg).finish()
    }
}

impl Fbank {
    pub fn new(cfg: FbankConfig) -> Self {
        let n = cfg.window_samples();
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size());
        // periodic Hann
        let window = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect();
        let mel = mel_filterbank(&cfg);
        Self { cfg, fft, window, mel }
    }

    pub fn config(&self) -> &FbankConfig {
        &self.cfg
    }

    pub fn compute(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        if clip.sample_rate != self.cfg.sample_rate {
            return Err(Error::Data(format!(
                "expected {} Hz audio, got {} Hz",
                self.cfg.sample_rate, clip.sample_rate
            )));
        }
        if clip.samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite);
        }
        let win = self.cfg.window_samples();
        let shift = self.cfg.shift_samples();
        let t = self.cfg.num_frames(clip.samples.len());
        if t == 0 {
            return Err(Error::TooShort {
                samples: clip.samples.len(),
                needed: win,
            });
        }
        let n_fft = self.cfg.fft_size();
        let n_bins = n_fft / 2 + 1;
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut power = Array1::zeros(n_bins);
        let mut out = Array2::zeros((t, self.cfg.n_mels));
        for (f, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let frame = &clip.samples[f * shift..f * shift + win];
            for (i, b) in buf.iter_mut().enumerate() {
                *b = if i < win {
                    Complex::new(frame[i] as f64 * self.window[i], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            self.fft.process(&mut buf);
            for k in 0..n_bins {
                power[k] = buf[k].norm_sqr();
            }
            let energies = self.mel.dot(&power);
            for (o, e) in row.iter_mut().zip(energies.iter()) {
                *o = e.max(self.cfg.log_floor).ln();
            }
        }
        Ok(FeatureMatrix::new(out))
    }

    pub fn compute_batch(&self, clips: &[AudioClip], exec: Execution) -> Vec<Result<FeatureMatrix>> {
        par::map(exec, clips, |c| self.compute(c))
    }
}

/// Log-mel features with the default configuration.
pub fn compute_fbank(clip: &AudioClip) -> Result<FeatureMatrix> {
    Fbank::new(FbankConfig::default()).compute(clip)
}

/// Per-dimension mean and variance over all training frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl FeatureStats {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn from_features<'a>(feats: impl IntoIterator<Item = &'a FeatureMatrix>) -> Result<Self> {
        let mut sum: Option<Array1<f64>> = None;
        let mut sq: Option<Array1<f64>> = None;
        let mut n = 0usize;
        for f in feats {
            let s = f.frames.sum_axis(Axis(0));
            let q = f.frames.mapv(|v| v * v).sum_axis(Axis(0));
            sum = Some(match sum {
                Some(a) => a + s,
                None => s,
            });
            sq = Some(match sq {
                Some(a) => a + q,
                None => q,
            });
            n += f.num_frames();
        }
        let (Some(sum), Some(sq)) = (sum, sq) else {
            return Err(Error::Data("cannot compute feature statistics from zero utterances".into()));
        };
        let mean = &sum / n as f64;
        let var = (&sq / n as f64 - &mean * &mean).mapv(|v| v.max(0.0));
        Ok(Self {
            mean: mean.to_vec(),
            var: var.to_vec(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("dim,mean,var\n");
        for (i, (m, v)) in self.mean.iter().zip(&self.var).enumerate() {
            s.push_str(&format!("{i},{m:e},{v:e}\n"));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut mean = Vec::new();
        let mut var = Vec::new();
        for row in r.deserialize::<(usize, f64, f64)>() {
            let (i, m, v) = row?;
            if i != mean.len() {
                return Err(Error::Data(format!("stats file: expected dim {}, found {i}", mean.len())));
            }
            mean.push(m);
            var.push(v);
        }
        Ok(Self { mean, var })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Applies `(x - mean) / sqrt(var)` per dimension. Zero-variance dimensions
/// are divided by one instead.
pub fn normalize(features: &FeatureMatrix, stats: &FeatureStats) -> FeatureMatrix {
    assert_eq!(features.dim(), stats.dim(), "feature/stat dimension mismatch");
    let scale: Vec<f64> = stats
        .var
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > 0.0 {
                1.0 / v.sqrt()
            } else {
                warn!("feature dimension {i} has zero variance; leaving it unscaled");
                1.0
            }
        })
        .collect();
    let mut out = features.frames.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (*x - stats.mean[j]) * scale[j];
        }
    }
    FeatureMatrix::new(out)
}

/// Writes per-utterance matrices to an `.npz` archive keyed by corpus path.
pub fn save_feature_cache(path: &Path, feats: &BTreeMap<String, FeatureMatrix>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut npz = ndarray_npy::NpzWriter::new(file);
    for (k, f) in feats {
        npz.add_array(k.as_str(), &f.frames)
            .map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
    }
    npz.finish().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

pub fn load_feature_cache(path: &Path) -> Result<BTreeMap<String, FeatureMatrix>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut npz = ndarray_npy::NpzReader::new(file).map_err(|e| Error::Serde(e.to_string()))?;
    let names = npz.names().map_err(|e| Error::Serde(e.to_string()))?;
    let mut out = BTreeMap::new();
    for n in names {
        let a: Array2<f64> = npz.by_name(&n).map_err(|e| Error::Serde(e.to_string()))?;
        out.insert(n, FeatureMatrix::new(a));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, n: usize) -> AudioClip {
        AudioClip::new(
            (0..n)
                .map(|i| (0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin()) as f32)
                .collect(),
            16000,
        )
    }

    #[test]
    fn one_second_gives_98_frames() {
        let cfg = FbankConfig::default();
        // independent count: step through frame starts until the window overruns
        let mut count = 0;
        let mut start = 0;
        while start + 400 <= 16000 {
            count += 1;
            start += 160;
        }
        assert_eq!(count, 98);
        assert_eq!(cfg.num_frames(16000), 98);
        let f = compute_fbank(&tone(440.0, 16000)).unwrap();
        assert_eq!((f.num_frames(), f.dim()), (98, 80));
    }

    #[test]
    fn silence_hits_the_log_floor() {
        let f = compute_fbank(&AudioClip::new(vec![0.0; 16000], 16000)).unwrap();
        let floor = 1e-10f64.ln();
        assert!(f.frames.iter().all(|&v| v == floor));
    }

    #[test]
    fn rejects_short_and_nan_audio() {
        assert!(matches!(
            compute_fbank(&AudioClip::new(vec![0.0; 399], 16000)),
            Err(Error::TooShort { needed: 400, .. })
        ));
        let mut s = vec![0.0; 1000];
        s[10] = f32::NAN;
        assert!(matches!(compute_fbank(&AudioClip::new(s, 16000)), Err(Error::NonFinite)));
        assert!(compute_fbank(&AudioClip::new(vec![0.0; 1000], 8000)).is_err());
        assert_eq!(compute_fbank(&AudioClip::new(vec![0.0; 400], 16000)).unwrap().num_frames(), 1);
    }

    #[test]
    fn tone_peak_matches_direct_dft_oracle() {
        let clip = tone(1000.0, 16000);
        let f = compute_fbank(&clip).unwrap();
        let cfg = FbankConfig::default();
        let mel = mel_filterbank(&cfg);
        // oracle: plain O(N^2) DFT of one frame, then mel weighting
        let frame: Vec<f64> = clip.samples[1600..2000]
            .iter()
            .enumerate()
            .map(|(i, &s)| s as f64 * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / 400.0).cos()))
            .collect();
        let power: Vec<f64> = (0..257)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, x) in frame.iter().enumerate() {
                    let a = -2.0 * std::f64::consts::PI * (k * n) as f64 / 512.0;
                    re += x * a.cos();
                    im += x * a.sin();
                }
                re * re + im * im
            })
            .collect();
        let oracle: Vec<f64> = (0..80)
            .map(|m| (0..257).map(|k| mel[[m, k]] * power[k]).sum::<f64>().max(1e-10).ln())
            .collect();
        for (a, b) in oracle.iter().zip(f.frames.row(10).iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        let argmax = |r: ndarray::ArrayView1<f64>| {
            r.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0
        };
        let peak = argmax(f.frames.row(0));
        assert!(f.frames.axis_iter(Axis(0)).all(|r| argmax(r) == peak));
        let oracle_peak = oracle.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0;
        assert_eq!(peak, oracle_peak);
    }

    #[test]
    fn shifting_by_one_frame_shifts_frames() {
        let clip = tone(700.0, 16000);
        let shifted = AudioClip::new(clip.samples[160..].to_vec(), 16000);
        let a = compute_fbank(&clip).unwrap();
        let b = compute_fbank(&shifted).unwrap();
        assert!(a.num_frames() - b.num_frames() <= 1);
        for t in 0..b.num_frames() {
            for j in 0..80 {
                assert!((a.frames[[t + 1, j]] - b.frames[[t, j]]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn normalization_properties() {
        let f = compute_fbank(&tone(300.0, 8000)).unwrap();
        let g = compute_fbank(&tone(2300.0, 8000)).unwrap();
        let stats = FeatureStats::from_features([&f, &g]).unwrap();
        let n = normalize(&f, &FeatureStats::from_features([&f]).unwrap());
        for m in n.frames.mean_axis(Axis(0)).unwrap().iter() {
            assert!(m.abs() < 1e-6);
        }
        assert_eq!(normalize(&f, &FeatureStats::identity(80)), f);
        assert!(normalize(&g, &stats).frames.iter().all(|v| v.is_finite()));
        let back = FeatureStats::from_csv(&stats.to_csv()).unwrap();
        for (a, b) in back.mean.iter().zip(&stats.mean) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn zero_variance_dimension_uses_unit_divisor() {
        let mut stats = FeatureStats::identity(80);
        stats.var[3] = 0.0;
        stats.mean[3] = 2.0;
        let f = FeatureMatrix::new(Array2::from_elem((2, 80), 5.0));
        assert_eq!(normalize(&f, &stats).frames[[0, 3]], 3.0);
    }

    #[test]
    fn feature_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("feats.npz");
        let mut m = BTreeMap::new();
        m.insert("yes/abc_nohash_0.wav".to_string(), compute_fbank(&tone(500.0, 4000)).unwrap());
        save_feature_cache(&p, &m).unwrap();
        assert_eq!(load_feature_cache(&p).unwrap(), m);
    }
}
