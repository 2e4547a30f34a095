use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::config::encoder_len;
use super::ctc::{CtcPrefixScorer, CtcPrefixState};
use super::network::{DecoderState, Model};
use crate::labels::Vocabulary;
use crate::nn::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeOptions {
    pub beam: usize,
    /// Weight of the CTC prefix score in the joint beam score.
    pub ctc_weight: f64,
    /// Defaults to twice the encoder length.
    pub max_len: Option<usize>,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            beam: 5,
            ctc_weight: 0.3,
            max_len: None,
        }
    }
}

impl DecodeOptions {
    pub fn greedy() -> Self {
        Self {
            beam: 1,
            ..Self::default()
        }
    }
}

/// Attention weights of the returned hypothesis: one row per emitted token
/// (EOS included), one column per encoder frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    pub tokens: Vec<String>,
    pub weights: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Token ids without SOS/EOS.
    pub ids: Vec<usize>,
    pub tokens: Vec<String>,
    pub trace: AttentionTrace,
    pub score: f64,
    /// False when no hypothesis reached EOS within the length limit.
    pub complete: bool,
}

struct Hyp {
    ids: Vec<usize>,
    att: f64,
    ctc: Option<CtcPrefixState>,
    score: f64,
    state: DecoderState,
    prev_w: Var,
    rows: Vec<Array1<f64>>,
}

struct Candidate {
    parent: usize,
    token: usize,
    att: f64,
    ctc: Option<CtcPrefixState>,
    score: f64,
}

fn joint(att: f64, ctc: Option<&CtcPrefixState>, w: f64) -> f64 {
    match ctc {
        Some(c) if w > 0.0 => (1.0 - w) * att + w * c.score,
        _ => att,
    }
}

/// Joint CTC/attention beam search.
///
/// Hypotheses are extended with every token except blank and SOS, and the
/// best `beam` candidates overall survive. Candidates ending in EOS leave the
/// beam. Scores never increase with length, so the search stops once the best
/// finished hypothesis is at least as good as every live one.
pub fn beam_decode(model: &Model, features: &Array2<f64>, vocab: &Vocabulary, opts: &DecodeOptions) -> Decoded {
    assert!(opts.beam >= 1, "beam must be >= 1");
    let mut tape = Tape::new(model.params());
    let enc = model.encoder_forward(&mut tape, features);
    debug_assert_eq!(enc.len, encoder_len(features.nrows()));
    let max_len = opts.max_len.unwrap_or(2 * enc.len).max(1);
    let ctc_logp = if opts.ctc_weight > 0.0 {
        let lp = model.ctc_log_probs(&mut tape, &enc);
        Some(tape.value(lp).clone())
    } else {
        None
    };
    let scorer = ctc_logp
        .as_ref()
        .map(|lp| CtcPrefixScorer::new(lp, Vocabulary::BLANK_ID, Vocabulary::EOS_ID));

    let state = model.initial_state(&mut tape);
    let prev_w = model.initial_weights(&mut tape, &enc);
    let mut running = vec![Hyp {
        ids: Vec::new(),
        att: 0.0,
        ctc: scorer.as_ref().map(|s| s.initial()),
        score: 0.0,
        state,
        prev_w,
        rows: Vec::new(),
    }];
    let mut ended: Vec<Hyp> = Vec::new();
    let vocab_size = model.config().vocab_size;

    for step in 0..max_len {
        let mut cands = Vec::new();
        let mut stepped = Vec::with_capacity(running.len());
        for (hi, hyp) in running.iter().enumerate() {
            let prev = hyp.ids.last().copied().unwrap_or(Vocabulary::SOS_ID);
            let (ctx, w) = model.attention_step(&mut tape, &hyp.state, &enc, hyp.prev_w);
            let (logits, next) = model.decoder_step(&mut tape, prev, &hyp.state, ctx);
            let lp = tape.log_softmax_rows(logits);
            let lp = tape.value(lp).row(0).to_owned();
            stepped.push((next, w));
            for c in 0..vocab_size {
                if c == Vocabulary::BLANK_ID || c == Vocabulary::SOS_ID {
                    continue;
                }
                let att = hyp.att + lp[c];
                let ctc = match (&scorer, &hyp.ctc) {
                    (Some(s), Some(st)) => Some(s.extend(st, c)),
                    _ => None,
                };
                let score = joint(att, ctc.as_ref(), opts.ctc_weight);
                cands.push(Candidate {
                    parent: hi,
                    token: c,
                    att,
                    ctc,
                    score,
                });
            }
        }
        // Stable sort keeps lower parent/token order first among ties.
        cands.sort_by(|a, b| b.score.total_cmp(&a.score));
        cands.truncate(opts.beam);
        let mut next_running = Vec::new();
        for cand in cands {
            let parent = &running[cand.parent];
            let (state, w) = stepped[cand.parent];
            let mut rows = parent.rows.clone();
            rows.push(tape.value(w).row(0).to_owned());
            let mut ids = parent.ids.clone();
            ids.push(cand.token);
            let hyp = Hyp {
                ids,
                att: cand.att,
                ctc: cand.ctc,
                score: cand.score,
                state,
                prev_w: w,
                rows,
            };
            if cand.token == Vocabulary::EOS_ID {
                ended.push(hyp);
            } else {
                next_running.push(hyp);
            }
        }
        running = next_running;
        let best_ended = ended.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        let best_running = running.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        if running.is_empty() || best_ended >= best_running {
            log::trace!("beam search stopped after {} steps", step + 1);
            break;
        }
    }

    let (best, complete) = if ended.is_empty() {
        (best_of(running), false)
    } else {
        (best_of(ended), true)
    };
    finish(best, vocab, complete, enc.len)
}

fn best_of(hyps: Vec<Hyp>) -> Hyp {
    let mut best: Option<Hyp> = None;
    for h in hyps {
        if best.as_ref().is_none_or(|b| h.score > b.score) {
            best = Some(h);
        }
    }
    best.expect("beam search keeps at least one hypothesis")
}

fn finish(hyp: Hyp, vocab: &Vocabulary, complete: bool, frames: usize) -> Decoded {
    let mut weights = Array2::zeros((hyp.rows.len(), frames));
    for (i, r) in hyp.rows.iter().enumerate() {
        weights.row_mut(i).assign(r);
    }
    let trace_tokens = hyp.ids.iter().map(|&i| vocab.token(i).to_string()).collect();
    let ids: Vec<usize> = hyp.ids.iter().copied().filter(|&i| i != Vocabulary::EOS_ID).collect();
    Decoded {
        tokens: vocab.decode(&ids),
        ids,
        trace: AttentionTrace {
            tokens: trace_tokens,
            weights,
        },
        score: hyp.score,
        complete,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::LabelScheme;
    use crate::model::ModelConfig;
    use crate::rng;
    use rand::Rng;

    fn vocab5() -> Vocabulary {
        Vocabulary::new(LabelScheme::Phoneme)
    }

    fn feats(t: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::seeded(seed, "decode");
        Array2::from_shape_fn((t, 80), |_| r.gen_range(-1.0..1.0))
    }

    #[test]
    fn decode_is_deterministic_and_trace_matches_output() {
        let m = Model::new(ModelConfig::micro(5), 1).unwrap();
        let v = vocab5();
        let x = feats(24, 2);
        let a = beam_decode(&m, &x, &v, &DecodeOptions::default());
        let b = beam_decode(&m, &x, &v, &DecodeOptions::default());
        assert_eq!(a, b);
        let emitted = a.ids.len() + usize::from(a.complete);
        assert_eq!(a.trace.weights.nrows(), emitted);
        assert_eq!(a.trace.weights.ncols(), encoder_len(24));
        for row in a.trace.weights.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        assert!(a.ids.iter().all(|&i| i != Vocabulary::BLANK_ID && i != Vocabulary::SOS_ID));
    }

    #[test]
    fn length_limit_yields_partial_hypothesis() {
        let m = Model::new(ModelConfig::micro(5), 1).unwrap();
        let v = vocab5();
        let opts = DecodeOptions {
            beam: 2,
            ctc_weight: 0.0,
            max_len: Some(1),
        };
        let d = beam_decode(&m, &feats(12, 3), &v, &opts);
        assert!(d.ids.len() <= 1);
        if !d.complete {
            assert_eq!(d.ids.len(), 1);
        }
    }

    /// Beam 1 with no CTC weight must pick the argmax at every step.
    #[test]
    fn beam_one_is_greedy() {
        let m = Model::new(ModelConfig::micro(6), 7).unwrap();
        let mut v = vocab5();
        v = Vocabulary::from_tokens(LabelScheme::Phoneme, &[v.tokens().to_vec(), vec!["AA".to_string()]].concat()).unwrap();
        let x = feats(20, 4);
        let opts = DecodeOptions {
            beam: 1,
            ctc_weight: 0.0,
            max_len: Some(6),
        };
        let d = beam_decode(&m, &x, &v, &opts);
        let mut tape = Tape::new(m.params());
        let enc = m.encoder_forward(&mut tape, &x);
        let mut st = m.initial_state(&mut tape);
        let mut w = m.initial_weights(&mut tape, &enc);
        let mut prev = Vocabulary::SOS_ID;
        let mut greedy = Vec::new();
        for _ in 0..6 {
            let (ctx, nw) = m.attention_step(&mut tape, &st, &enc, w);
            let (logits, ns) = m.decoder_step(&mut tape, prev, &st, ctx);
            let row = tape.value(logits).row(0).to_owned();
            let best = (2..6).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            greedy.push(best);
            if best == Vocabulary::EOS_ID {
                break;
            }
            prev = best;
            st = ns;
            w = nw;
        }
        let mut got = d.ids.clone();
        if d.complete {
            got.push(Vocabulary::EOS_ID);
        }
        assert_eq!(got, greedy);
    }
}
