//! CTC loss by the forward-backward recursion, plus the prefix scorer used
//! to interpolate CTC into attention beam search. All quantities are in log
//! space; `logp` is `T × V` log-probabilities.

use ndarray::Array2;

fn lse(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Fewest frames that can emit `target`: one per label plus a blank
/// between each pair of repeated labels.
pub fn ctc_min_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtcOutcome {
    /// `-ln Σ_paths P(path)`; `+∞` when the target cannot fit.
    pub loss: f64,
    /// `∂ loss / ∂ logp`, zero when infeasible.
    pub grad: Array2<f64>,
    pub feasible: bool,
}

pub fn ctc_loss(logp: &Array2<f64>, target: &[usize], blank: usize) -> CtcOutcome {
    let (t_len, v) = logp.dim();
    if t_len == 0 || t_len < ctc_min_frames(target) {
        return CtcOutcome {
            loss: f64::INFINITY,
            grad: Array2::zeros((t_len, v)),
            feasible: false,
        };
    }
    // extended label sequence: blank, l1, blank, l2, ..., blank
    let ext: Vec<usize> = std::iter::once(blank)
        .chain(target.iter().flat_map(|&l| [l, blank]))
        .collect();
    let s_len = ext.len();
    let neg = f64::NEG_INFINITY;
    let skip_ok = |s: usize| s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];

    let mut alpha = Array2::from_elem((t_len, s_len), neg);
    alpha[[0, 0]] = logp[[0, ext[0]]];
    if s_len > 1 {
        alpha[[0, 1]] = logp[[0, ext[1]]];
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut a = alpha[[t - 1, s]];
            if s >= 1 {
                a = lse(a, alpha[[t - 1, s - 1]]);
            }
            if skip_ok(s) {
                a = lse(a, alpha[[t - 1, s - 2]]);
            }
            alpha[[t, s]] = if a == neg { neg } else { a + logp[[t, ext[s]]] };
        }
    }
    let mut beta = Array2::from_elem((t_len, s_len), neg);
    beta[[t_len - 1, s_len - 1]] = logp[[t_len - 1, ext[s_len - 1]]];
    if s_len > 1 {
        beta[[t_len - 1, s_len - 2]] = logp[[t_len - 1, ext[s_len - 2]]];
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let mut b = beta[[t + 1, s]];
            if s + 1 < s_len {
                b = lse(b, beta[[t + 1, s + 1]]);
            }
            if s + 2 < s_len && ext[s + 2] != blank && ext[s + 2] != ext[s] {
                b = lse(b, beta[[t + 1, s + 2]]);
            }
            beta[[t, s]] = if b == neg { neg } else { b + logp[[t, ext[s]]] };
        }
    }
    let mut log_p = alpha[[t_len - 1, s_len - 1]];
    if s_len > 1 {
        log_p = lse(log_p, alpha[[t_len - 1, s_len - 2]]);
    }
    if log_p == neg {
        return CtcOutcome {
            loss: f64::INFINITY,
            grad: Array2::zeros((t_len, v)),
            feasible: false,
        };
    }
    let mut grad = Array2::zeros((t_len, v));
    for t in 0..t_len {
        for s in 0..s_len {
            let ab = alpha[[t, s]] + beta[[t, s]];
            if ab > neg {
                let k = ext[s];
                grad[[t, k]] -= (ab - logp[[t, k]] - log_p).exp();
            }
        }
    }
    CtcOutcome {
        loss: -log_p,
        grad,
        feasible: true,
    }
}

/// Incremental CTC prefix probabilities for one hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcPrefixState {
    /// `log P(prefix, ending in a label at frame t)`
    r_nonblank: Vec<f64>,
    /// `log P(prefix, ending in blank at frame t)`
    r_blank: Vec<f64>,
    last: Option<usize>,
    /// Log probability that the utterance starts with this prefix (or, after
    /// EOS, equals it).
    pub score: f64,
}

pub struct CtcPrefixScorer<'a> {
    logp: &'a Array2<f64>,
    blank: usize,
    eos: usize,
}

impl<'a> CtcPrefixScorer<'a> {
    pub fn new(logp: &'a Array2<f64>, blank: usize, eos: usize) -> Self {
        Self { logp, blank, eos }
    }

    pub fn initial(&self) -> CtcPrefixState {
        let t_len = self.logp.nrows();
        let mut r_blank = vec![0.0; t_len];
        let mut acc = 0.0;
        for (t, r) in r_blank.iter_mut().enumerate() {
            acc += self.logp[[t, self.blank]];
            *r = acc;
        }
        CtcPrefixState {
            r_nonblank: vec![f64::NEG_INFINITY; t_len],
            r_blank,
            last: None,
            score: 0.0,
        }
    }

    pub fn extend(&self, st: &CtcPrefixState, c: usize) -> CtcPrefixState {
        let t_len = self.logp.nrows();
        let neg = f64::NEG_INFINITY;
        if c == self.eos {
            return CtcPrefixState {
                r_nonblank: Vec::new(),
                r_blank: Vec::new(),
                last: Some(c),
                score: lse(st.r_nonblank[t_len - 1], st.r_blank[t_len - 1]),
            };
        }
        let phi = |t: usize| {
            if st.last == Some(c) {
                st.r_blank[t]
            } else {
                lse(st.r_blank[t], st.r_nonblank[t])
            }
        };
        let mut r_n = vec![neg; t_len];
        let mut r_b = vec![neg; t_len];
        if st.last.is_none() {
            r_n[0] = self.logp[[0, c]];
        }
        let mut psi = r_n[0];
        for t in 1..t_len {
            let p = phi(t - 1);
            r_n[t] = lse(r_n[t - 1], p) + self.logp[[t, c]];
            r_b[t] = lse(r_b[t - 1], r_n[t - 1]) + self.logp[[t, self.blank]];
            psi = lse(psi, p + self.logp[[t, c]]);
        }
        CtcPrefixState {
            r_nonblank: r_n,
            r_blank: r_b,
            last: Some(c),
            score: psi,
        }
    }
}
