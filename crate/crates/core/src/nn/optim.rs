use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerKind {
    Adadelta { rho: f64, eps: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

/// Optimizer hyperparameters. `lr` scales the update of every method
/// (AdaDelta included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Optimizer {
    pub method: OptimizerKind,
    pub lr: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
}

impl Default for Optimizer {
    fn default() -> Self {
        Self {
            method: OptimizerKind::Adadelta { rho: 0.95, eps: 1e-8 },
            lr: 1.0,
            grad_clip: Some(5.0),
        }
    }
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Self {
            method: OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            lr,
            grad_clip: Some(5.0),
        }
    }
}

/// Running accumulators, one pair per parameter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
    steps: u64,
}

impl OptimizerState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Array2<f64>> = params.iter().map(|(_, _, v)| Array2::zeros(v.dim())).collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. Returns the gradient norm before clipping.
    pub fn step(&mut self, opt: &Optimizer, params: &mut ParamStore, grads: &Gradients) -> f64 {
        let mut grads = grads.clone();
        let norm = match opt.grad_clip {
            Some(c) => grads.clip_norm(c),
            None => grads.global_norm(),
        };
        self.steps += 1;
        let lr = opt.lr;
        for id in params.ids().collect::<Vec<_>>() {
            let Some(g) = grads.get(id) else { continue };
            let i = id.0;
            let p = params.get_mut(id);
            match opt.method {
                OptimizerKind::Sgd => p.zip_mut_with(g, |w, &g| *w -= lr * g),
                OptimizerKind::Adadelta { rho, eps } => {
                    let (acc_g, acc_d) = (&mut self.first[i], &mut self.second[i]);
                    ndarray::Zip::from(p).and(g).and(acc_g).and(acc_d).for_each(|w, &g, eg, ed| {
                        *eg = rho * *eg + (1.0 - rho) * g * g;
                        let d = ((*ed + eps).sqrt() / (*eg + eps).sqrt()) * g;
                        *ed = rho * *ed + (1.0 - rho) * d * d;
                        *w -= lr * d;
                    });
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let t = self.steps as i32;
                    let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
                    let (m, v) = (&mut self.first[i], &mut self.second[i]);
                    ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    });
                }
            }
        }
        norm
    }
}
