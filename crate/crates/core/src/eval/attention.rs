use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};

use crate::labels::Vocabulary;
use crate::model::{beam_decode, DecodeOptions, Model};
use crate::{Error, Result};

/// Files written for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionDump {
    pub key: String,
    pub tokens: Vec<String>,
    pub weights: Array2<f64>,
    pub csv: PathBuf,
    pub png: PathBuf,
}

/// Shannon entropy of one attention row, in nats.
pub fn row_entropy(row: ArrayView1<f64>) -> f64 {
    row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

/// `token,t0,t1,...` header then one row per emitted token. Values are
/// written with full precision so reloading is exact.
pub fn write_trace_csv(path: &Path, tokens: &[String], weights: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut header = vec!["token".to_string()];
    header.extend((0..weights.ncols()).map(|t| format!("t{t}")));
    w.write_record(&header)?;
    for (tok, row) in tokens.iter().zip(weights.rows()) {
        let mut rec = vec![tok.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace_csv(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let cols = r.headers()?.len().saturating_sub(1);
    let mut tokens = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        tokens.push(rec[0].to_string());
        for v in rec.iter().skip(1) {
            values.push(v.parse::<f64>().map_err(|e| Error::Data(format!("{}: {e}", path.display())))?);
        }
    }
    let weights = Array2::from_shape_vec((tokens.len(), cols), values).map_err(|e| Error::Data(e.to_string()))?;
    Ok((tokens, weights))
}

// 3x5 glyphs, one row per 3 bits, top row in the high bits.
fn glyph(c: char) -> u16 {
    match c.to_ascii_uppercase() {
        'A' => 0b010_101_111_101_101,
        'B' => 0b110_101_110_101_110,
        'C' => 0b011_100_100_100_011,
        'D' => 0b110_101_101_101_110,
        'E' => 0b111_100_110_100_111,
        'F' => 0b111_100_110_100_100,
        'G' => 0b011_100_101_101_011,
        'H' => 0b101_101_111_101_101,
        'I' => 0b111_010_010_010_111,
        'J' => 0b001_001_001_101_010,
        'K' => 0b101_101_110_101_101,
        'L' => 0b100_100_100_100_111,
        'M' => 0b101_111_111_101_101,
        'N' => 0b110_101_101_101_101,
        'O' => 0b010_101_101_101_010,
        'P' => 0b110_101_110_100_100,
        'Q' => 0b010_101_101_110_011,
        'R' => 0b110_101_110_101_101,
        'S' => 0b011_100_010_001_110,
        'T' => 0b111_010_010_010_010,
        'U' => 0b101_101_101_101_111,
        'V' => 0b101_101_101_101_010,
        'W' => 0b101_101_111_111_101,
        'X' => 0b101_101_010_101_101,
        'Y' => 0b101_101_010_010_010,
        'Z' => 0b111_001_010_100_111,
        '0' => 0b111_101_101_101_111,
        '1' => 0b010_110_010_010_111,
        '2' => 0b110_001_010_100_111,
        '3' => 0b110_001_010_001_110,
        '4' => 0b101_101_111_001_001,
        '5' => 0b111_100_110_001_110,
        '6' => 0b011_100_111_101_111,
        '7' => 0b111_001_010_010_010,
        '8' => 0b111_101_111_101_111,
        '9' => 0b111_101_111_001_110,
        '?' => 0b110_001_010_000_010,
        '_' => 0b000_000_000_000_111,
        '<' => 0b001_010_100_010_001,
        '>' => 0b100_010_001_010_100,
        '-' => 0b000_000_111_000_000,
        _ => 0,
    }
}

const SCALE: usize = 2;
const CELL_W: usize = 6;
const CELL_H: usize = 14;

/// Viridis-like ramp from dark blue to yellow.
fn colour(v: f64) -> [u8; 3] {
    let stops = [[68.0, 1.0, 84.0], [59.0, 82.0, 139.0], [33.0, 145.0, 140.0], [94.0, 201.0, 98.0], [253.0, 231.0, 37.0]];
    let x = v.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let i = (x.floor() as usize).min(stops.len() - 2);
    let f = x - i as f64;
    let mut out = [0u8; 3];
    for (k, o) in out.iter_mut().enumerate() {
        *o = (stops[i][k] * (1.0 - f) + stops[i + 1][k] * f).round() as u8;
    }
    out
}

/// Heatmap PNG: tokens down the left edge, encoder frames left to right.
/// Each row is scaled by its own maximum.
pub fn render_heatmap(path: &Path, tokens: &[String], weights: &Array2<f64>) -> Result<()> {
    let label_chars = tokens.iter().map(|t| t.chars().count()).max().unwrap_or(0).min(12);
    let margin = label_chars * 4 * SCALE + 4;
    let (rows, cols) = weights.dim();
    let width = margin + cols.max(1) * CELL_W;
    let height = rows.max(1) * CELL_H;
    let mut img = vec![255u8; width * height * 3];
    let mut put = |x: usize, y: usize, c: [u8; 3]| {
        let i = (y * width + x) * 3;
        img[i..i + 3].copy_from_slice(&c);
    };
    for (r, row) in weights.rows().into_iter().enumerate() {
        let peak = row.iter().cloned().fold(0.0, f64::max);
        for (t, &v) in row.iter().enumerate() {
            let c = colour(if peak > 0.0 { v / peak } else { 0.0 });
            for y in r * CELL_H..(r + 1) * CELL_H {
                for x in margin + t * CELL_W..margin + (t + 1) * CELL_W {
                    put(x, y, c);
                }
            }
        }
        let text: Vec<char> = tokens.get(r).map(|s| s.chars().take(label_chars).collect()).unwrap_or_default();
        let y0 = r * CELL_H + (CELL_H - 5 * SCALE) / 2;
        for (ci, ch) in text.iter().enumerate() {
            let g = glyph(*ch);
            for gy in 0..5 {
                for gx in 0..3 {
                    if g >> (14 - (gy * 3 + gx)) & 1 == 1 {
                        for dy in 0..SCALE {
                            for dx in 0..SCALE {
                                put(2 + (ci * 4 + gx) * SCALE + dx, y0 + gy * SCALE + dy, [0, 0, 0]);
                            }
                        }
                    }
                }
            }
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    w.write_image_data(&img)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn file_stem(key: &str) -> String {
    key.trim_end_matches(".wav")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Decodes each `(key, normalized features)` pair and writes its trace as
/// `<stem>.csv` and `<stem>.png` under `out_dir`.
pub fn dump_attention(
    model: &Model,
    vocab: &Vocabulary,
    utterances: &[(String, Array2<f64>)],
    out_dir: &Path,
    opts: &DecodeOptions,
) -> Result<Vec<AttentionDump>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut out = Vec::new();
    for (key, x) in utterances {
        let d = beam_decode(model, x, vocab, opts);
        let w = &d.trace.weights;
        if w.nrows() == 0 || w.iter().any(|v| !v.is_finite()) {
            log::warn!("skipping attention dump for {key}: decode produced no usable trace");
            continue;
        }
        if !d.complete {
            log::info!("{key}: no EOS within the length limit, dumping the partial hypothesis");
        }
        let stem = file_stem(key);
        let csv = out_dir.join(format!("{stem}.csv"));
        let png = out_dir.join(format!("{stem}.png"));
        write_trace_csv(&csv, &d.trace.tokens, w)?;
        render_heatmap(&png, &d.trace.tokens, w)?;
        out.push(AttentionDump {
            key: key.clone(),
            tokens: d.trace.tokens.clone(),
            weights: w.clone(),
            csv,
            png,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn trace_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let w = array![[0.1, 0.7, 0.2], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]];
        let toks = vec!["S".to_string(), "<eos>".to_string()];
        write_trace_csv(&p, &toks, &w).unwrap();
        let (t2, w2) = read_trace_csv(&p).unwrap();
        assert_eq!(t2, toks);
        assert_eq!(w2, w);
    }

    #[test]
    fn heatmap_has_expected_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.png");
        let w = array![[0.5, 0.5], [0.0, 1.0]];
        render_heatmap(&p, &["AA".into(), "<eos>".into()], &w).unwrap();
        let dec = png::Decoder::new(File::open(&p).unwrap());
        let reader = dec.read_info().unwrap();
        let info = reader.info();
        assert_eq!(info.height as usize, 2 * CELL_H);
        assert_eq!(info.width as usize, 5 * 4 * SCALE + 4 + 2 * CELL_W);
    }

    #[test]
    fn entropy_bounds() {
        let uniform = array![0.25, 0.25, 0.25, 0.25];
        assert!((row_entropy(uniform.view()) - 4f64.ln()).abs() < 1e-12);
        let peaked = array![0.0, 1.0, 0.0, 0.0];
        assert_eq!(row_entropy(peaked.view()), 0.0);
    }
}
