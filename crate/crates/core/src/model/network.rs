use ndarray::Array2;
use rand::Rng;

use super::config::{encoder_len, ModelConfig};
use super::ctc::ctc_loss;
use crate::labels::Vocabulary;
use crate::nn::{Gradients, ParamId, ParamStore, Tape, Var};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy)]
struct LstmIds {
    w_ih: ParamId,
    w_hh: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone)]
struct ParamIds {
    conv: Vec<(ParamId, ParamId)>,
    blstm: Vec<(LstmIds, LstmIds)>,
    ctc_w: ParamId,
    ctc_b: ParamId,
    att_enc_w: ParamId,
    att_enc_b: ParamId,
    att_dec_w: ParamId,
    att_loc_conv: ParamId,
    att_loc_proj: ParamId,
    att_score: ParamId,
    embed: ParamId,
    dec_lstm: LstmIds,
    out_w: ParamId,
    out_b: ParamId,
}

/// Parameter names and shapes for a configuration, in creation order.
fn layout(cfg: &ModelConfig) -> Vec<(String, (usize, usize))> {
    let mut v = Vec::new();
    let mut cin = 1;
    for (i, &c) in cfg.conv_channels.iter().enumerate() {
        v.push((format!("enc.conv{i}.weight"), (c, cin * 9)));
        v.push((format!("enc.conv{i}.bias"), (c, 1)));
        cin = c;
    }
    let h = cfg.enc_units;
    let mut d = cfg.conv_output_dim();
    for l in 0..cfg.enc_layers {
        for dir in ["fwd", "bwd"] {
            v.push((format!("enc.blstm{l}.{dir}.w_ih"), (d, 4 * h)));
            v.push((format!("enc.blstm{l}.{dir}.w_hh"), (h, 4 * h)));
            v.push((format!("enc.blstm{l}.{dir}.bias"), (1, 4 * h)));
        }
        d = 2 * h;
    }
    let (e, a, vs, hd) = (cfg.encoder_dim(), cfg.att_dim, cfg.vocab_size, cfg.dec_units);
    v.push(("ctc.weight".into(), (e, vs)));
    v.push(("ctc.bias".into(), (1, vs)));
    v.push(("att.enc_proj.weight".into(), (e, a)));
    v.push(("att.enc_proj.bias".into(), (1, a)));
    v.push(("att.dec_proj.weight".into(), (hd, a)));
    v.push(("att.loc_conv.weight".into(), (2 * cfg.att_conv_filts + 1, cfg.att_conv_channels)));
    v.push(("att.loc_proj.weight".into(), (cfg.att_conv_channels, a)));
    v.push(("att.score.weight".into(), (a, 1)));
    v.push(("dec.embed".into(), (vs, hd)));
    v.push(("dec.lstm.w_ih".into(), (hd + e, 4 * hd)));
    v.push(("dec.lstm.w_hh".into(), (hd, 4 * hd)));
    v.push(("dec.lstm.bias".into(), (1, 4 * hd)));
    v.push(("dec.out.weight".into(), (hd, vs)));
    v.push(("dec.out.bias".into(), (1, vs)));
    v
}

impl ParamIds {
    fn resolve(cfg: &ModelConfig, p: &ParamStore) -> Result<Self> {
        let id = |n: &str| p.id(n).ok_or_else(|| Error::Checkpoint(format!("missing parameter {n}")));
        let lstm = |prefix: &str| -> Result<LstmIds> {
            Ok(LstmIds {
                w_ih: id(&format!("{prefix}.w_ih"))?,
                w_hh: id(&format!("{prefix}.w_hh"))?,
                bias: id(&format!("{prefix}.bias"))?,
            })
        };
        Ok(Self {
            conv: (0..cfg.conv_channels.len())
                .map(|i| Ok((id(&format!("enc.conv{i}.weight"))?, id(&format!("enc.conv{i}.bias"))?)))
                .collect::<Result<_>>()?,
            blstm: (0..cfg.enc_layers)
                .map(|l| Ok((lstm(&format!("enc.blstm{l}.fwd"))?, lstm(&format!("enc.blstm{l}.bwd"))?)))
                .collect::<Result<_>>()?,
            ctc_w: id("ctc.weight")?,
            ctc_b: id("ctc.bias")?,
            att_enc_w: id("att.enc_proj.weight")?,
            att_enc_b: id("att.enc_proj.bias")?,
            att_dec_w: id("att.dec_proj.weight")?,
            att_loc_conv: id("att.loc_conv.weight")?,
            att_loc_proj: id("att.loc_proj.weight")?,
            att_score: id("att.score.weight")?,
            embed: id("dec.embed")?,
            dec_lstm: lstm("dec.lstm")?,
            out_w: id("dec.out.weight")?,
            out_b: id("dec.out.bias")?,
        })
    }
}

/// Network weights plus the configuration that shapes them.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    ids: ParamIds,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

/// Encoder states (`T' × 2·enc_units`) and their attention projection.
#[derive(Debug, Clone, Copy)]
pub struct EncoderOutput {
    pub states: Var,
    pub(crate) proj: Var,
    pub len: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct DecoderState {
    pub h: Var,
    pub c: Var,
}

/// Per-branch values of one joint-loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown {
    pub total: Var,
    pub ctc: Option<f64>,
    pub attention: Option<f64>,
    pub ctc_feasible: bool,
}

impl Model {
    /// Fresh model; weights uniform in `±1/sqrt(fan_in)`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::seeded(seed, "init");
        let mut params = ParamStore::new();
        for (name, (rows, cols)) in layout(&config) {
            let fan_in = if name.starts_with("enc.conv") {
                cols
            } else if name.ends_with(".bias") || name == "dec.embed" {
                rows.max(cols)
            } else {
                rows
            };
            let bound = 1.0 / (fan_in as f64).sqrt();
            let v = Array2::from_shape_fn((rows, cols), |_| r.gen_range(-bound..bound));
            params.add(&name, v);
        }
        let ids = ParamIds::resolve(&config, &params)?;
        Ok(Self { config, params, ids })
    }

    /// Rebuilds a model from stored weights, checking names and shapes.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let expected = layout(&config);
        if expected.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter arrays, found {}",
                expected.len(),
                params.len()
            )));
        }
        for (name, shape) in &expected {
            let id = params
                .id(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))?;
            if params.get(id).dim() != *shape {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} has shape {:?}, expected {shape:?}",
                    params.get(id).dim()
                )));
            }
        }
        let ids = ParamIds::resolve(&config, &params)?;
        Ok(Self { config, params, ids })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore {
        self.params
    }

    fn lstm_direction(&self, tape: &mut Tape, x: Var, ids: LstmIds, reverse: bool) -> Var {
        let t_len = tape.value(x).nrows();
        let h = self.config.enc_units;
        let w_ih = tape.param(ids.w_ih);
        let w_hh = tape.param(ids.w_hh);
        let b = tape.param(ids.bias);
        let xp = tape.matmul(x, w_ih);
        let xp = tape.add_row(xp, b);
        let mut hs = tape.constant(Array2::zeros((1, h)));
        let mut cs = tape.constant(Array2::zeros((1, h)));
        let mut outs = vec![hs; t_len];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..t_len).rev())
        } else {
            Box::new(0..t_len)
        };
        for t in order {
            let xt = tape.slice_rows(xp, t, 1);
            let rec = tape.matmul(hs, w_hh);
            let pre = tape.add(xt, rec);
            let hc = tape.lstm_cell(pre, cs);
            hs = tape.slice_cols(hc, 0, h);
            cs = tape.slice_cols(hc, h, h);
            outs[t] = hs;
        }
        tape.concat_rows(&outs)
    }

    /// CNN front-end then BiLSTM stack over a `T × feature_dim` input.
    pub fn encoder_forward(&self, tape: &mut Tape, features: &Array2<f64>) -> EncoderOutput {
        let (t, f) = features.dim();
        assert_eq!(f, self.config.feature_dim, "feature dimension mismatch");
        assert!(t >= 1, "empty feature matrix");
        let flat = features.as_standard_layout().into_owned().into_shape_with_order((1, t * f)).expect("reshape");
        let mut x = tape.constant(flat);
        let (mut h, mut w) = (t, f);
        for (i, &(wid, bid)) in self.ids.conv.iter().enumerate() {
            let wv = tape.param(wid);
            let bv = tape.param(bid);
            let y = tape.conv3x3(x, wv, bv, h, w);
            x = tape.relu(y);
            if i == 1 || i == 3 {
                let (p, h2, w2) = tape.max_pool2(x, h, w);
                x = p;
                h = h2;
                w = w2;
            }
        }
        let mut seq = tape.channels_to_time(x, h, w);
        for &(fwd, bwd) in &self.ids.blstm {
            let a = self.lstm_direction(tape, seq, fwd, false);
            let b = self.lstm_direction(tape, seq, bwd, true);
            seq = tape.concat_cols(&[a, b]);
        }
        debug_assert_eq!(h, encoder_len(t));
        let ew = tape.param(self.ids.att_enc_w);
        let eb = tape.param(self.ids.att_enc_b);
        let proj = tape.matmul(seq, ew);
        let proj = tape.add_row(proj, eb);
        EncoderOutput {
            states: seq,
            proj,
            len: h,
        }
    }

    /// Uniform `1 × T'` alignment used before the first decoder step.
    pub fn initial_weights(&self, tape: &mut Tape, enc: &EncoderOutput) -> Var {
        tape.constant(Array2::from_elem((1, enc.len), 1.0 / enc.len as f64))
    }

    pub fn initial_state(&self, tape: &mut Tape) -> DecoderState {
        let h = tape.constant(Array2::zeros((1, self.config.dec_units)));
        let c = tape.constant(Array2::zeros((1, self.config.dec_units)));
        DecoderState { h, c }
    }

    /// Location-aware attention: scores combine the encoder projection, the
    /// decoder state and a convolution of the previous alignment. Returns the
    /// `1 × D` context and the `1 × T'` weights.
    pub fn attention_step(&self, tape: &mut Tape, state: &DecoderState, enc: &EncoderOutput, prev_weights: Var) -> (Var, Var) {
        let windows = tape.unfold(prev_weights, self.config.att_conv_filts);
        let filt = tape.param(self.ids.att_loc_conv);
        let loc = tape.matmul(windows, filt);
        let lp = tape.param(self.ids.att_loc_proj);
        let loc = tape.matmul(loc, lp);
        let dw = tape.param(self.ids.att_dec_w);
        let dec = tape.matmul(state.h, dw);
        let e = tape.add(enc.proj, loc);
        let e = tape.add_row(e, dec);
        let e = tape.tanh(e);
        let g = tape.param(self.ids.att_score);
        let scores = tape.matmul(e, g);
        let scores = tape.transpose(scores);
        let weights = tape.softmax_rows(scores);
        let context = tape.matmul(weights, enc.states);
        (context, weights)
    }

    /// One decoder LSTM step on `[embed(prev_token), context]`. Returns
    /// `1 × V` logits and the new state.
    pub fn decoder_step(&self, tape: &mut Tape, prev_token: usize, state: &DecoderState, context: Var) -> (Var, DecoderState) {
        let hd = self.config.dec_units;
        let table = tape.param(self.ids.embed);
        let emb = tape.slice_rows(table, prev_token, 1);
        let inp = tape.concat_cols(&[emb, context]);
        let w_ih = tape.param(self.ids.dec_lstm.w_ih);
        let w_hh = tape.param(self.ids.dec_lstm.w_hh);
        let b = tape.param(self.ids.dec_lstm.bias);
        let a = tape.matmul(inp, w_ih);
        let r = tape.matmul(state.h, w_hh);
        let pre = tape.add(a, r);
        let pre = tape.add_row(pre, b);
        let hc = tape.lstm_cell(pre, state.c);
        let h = tape.slice_cols(hc, 0, hd);
        let c = tape.slice_cols(hc, hd, hd);
        let ow = tape.param(self.ids.out_w);
        let ob = tape.param(self.ids.out_b);
        let logits = tape.matmul(h, ow);
        let logits = tape.add_row(logits, ob);
        (logits, DecoderState { h, c })
    }

    /// `T' × V` CTC log-probabilities.
    pub fn ctc_log_probs(&self, tape: &mut Tape, enc: &EncoderOutput) -> Var {
        let w = tape.param(self.ids.ctc_w);
        let b = tape.param(self.ids.ctc_b);
        let z = tape.matmul(enc.states, w);
        let z = tape.add_row(z, b);
        tape.log_softmax_rows(z)
    }

    /// Teacher-forced pass over `target` followed by EOS. Returns the summed
    /// token cross-entropy and the `(len+1) × T'` attention weights.
    pub fn attention_loss(&self, tape: &mut Tape, enc: &EncoderOutput, target: &[usize]) -> (Var, Array2<f64>) {
        let mut state = self.initial_state(tape);
        let mut prev_w = self.initial_weights(tape, enc);
        let mut rows = Vec::with_capacity(target.len() + 1);
        let mut weights = Vec::with_capacity(target.len() + 1);
        let inputs = std::iter::once(Vocabulary::SOS_ID).chain(target.iter().copied());
        for prev in inputs {
            let (ctx, w) = self.attention_step(tape, &state, enc, prev_w);
            let (logits, next) = self.decoder_step(tape, prev, &state, ctx);
            rows.push(tape.log_softmax_rows(logits));
            weights.push(w);
            state = next;
            prev_w = w;
        }
        let all = tape.concat_rows(&rows);
        let picks = target
            .iter()
            .copied()
            .chain(std::iter::once(Vocabulary::EOS_ID))
            .enumerate()
            .collect();
        let ll = tape.pick_sum(all, picks);
        let loss = tape.scale(ll, -1.0);
        let mut trace = Array2::zeros((weights.len(), enc.len));
        for (i, w) in weights.iter().enumerate() {
            trace.row_mut(i).assign(&tape.value(*w).row(0));
        }
        (loss, trace)
    }

    /// CTC negative log-likelihood of `target` as a tape node.
    pub fn ctc_branch(&self, tape: &mut Tape, enc: &EncoderOutput, target: &[usize]) -> (Var, bool) {
        let logp = self.ctc_log_probs(tape, enc);
        let out = ctc_loss(tape.value(logp), target, Vocabulary::BLANK_ID);
        (tape.scalar_with_grad(logp, out.loss, out.grad), out.feasible)
    }

    /// `λ·CTC + (1-λ)·CE`. A branch with zero weight is not evaluated, so the
    /// endpoints equal the single-branch losses exactly.
    pub fn joint_loss(&self, tape: &mut Tape, features: &Array2<f64>, target: &[usize], ctc_weight: f64) -> LossBreakdown {
        let enc = self.encoder_forward(tape, features);
        let (ctc, feasible) = if ctc_weight > 0.0 {
            let (v, ok) = self.ctc_branch(tape, &enc, target);
            (Some(v), ok)
        } else {
            (None, true)
        };
        let att = if ctc_weight < 1.0 {
            Some(self.attention_loss(tape, &enc, target).0)
        } else {
            None
        };
        let total = match (ctc, att) {
            (Some(c), Some(a)) => {
                let c = tape.scale(c, ctc_weight);
                let a = tape.scale(a, 1.0 - ctc_weight);
                tape.add(c, a)
            }
            (Some(c), None) => c,
            (None, Some(a)) => a,
            (None, None) => unreachable!("at least one branch has positive weight"),
        };
        LossBreakdown {
            total,
            ctc: ctc.map(|v| tape.scalar(v)),
            attention: att.map(|v| tape.scalar(v)),
            ctc_feasible: feasible,
        }
    }

    /// Joint-loss value and gradients for one utterance. When the target is
    /// too long for CTC, the CTC branch is dropped for this utterance.
    pub fn loss_and_grad(&self, features: &Array2<f64>, target: &[usize], ctc_weight: f64) -> (f64, Gradients) {
        let mut tape = Tape::new(&self.params);
        let mut out = self.joint_loss(&mut tape, features, target, ctc_weight);
        if !out.ctc_feasible && ctc_weight < 1.0 {
            log::warn!("target of length {} does not fit CTC; using attention loss only", target.len());
            tape = Tape::new(&self.params);
            out = self.joint_loss(&mut tape, features, target, 0.0);
        }
        let value = tape.scalar(out.total);
        let grads = tape.backward(out.total);
        (value, grads)
    }
}
