//! Mini-batch training with early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, MnpExample};
use super::model::{EpochRecord, HeadKind, Model, Prepared, DEFAULT_DIM};
use crate::dexp::{SIGMA_MAX, SIGMA_MIN};
use crate::metrics::Prediction;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Step size for the encoder's embedding tables.
    pub lr_pretrained: f64,
    /// Step size for head parameters.
    pub lr_new: f64,
    pub seed: u64,
    pub dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 10,
            patience: 3,
            lr_pretrained: 3e-5,
            lr_new: 1e-2,
            seed: 0,
            dim: DEFAULT_DIM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 || self.dim == 0 {
            return Err(Error::InvalidParam("batch_size, max_epochs, patience and dim must be positive".into()));
        }
        if self.patience >= self.max_epochs {
            return Err(Error::InvalidParam("patience must be below max_epochs".into()));
        }
        if !positive(self.lr_pretrained) || !positive(self.lr_new) {
            return Err(Error::InvalidParam("learning rates must be positive".into()));
        }
        Ok(())
    }
}

/// Adam with the usual defaults (0.9, 0.999, 1e-8).
#[derive(Debug, Clone)]
struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64, n: usize) -> Self {
        Adam { lr, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g;
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g * g;
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

fn mean_loss(model: &Model, data: &[Prepared]) -> Result<f64> {
    let mut gw = vec![0.0; model.weights.len()];
    let mut ge = vec![0.0; model.encoder()?.table().len()];
    let (mut total, mut count) = (0.0, 0usize);
    for chunk in data.chunks(256) {
        let refs: Vec<&Prepared> = chunk.iter().collect();
        let (loss, n) = model.batch_loss_grad(&refs, &mut gw, &mut ge)?;
        total += loss * n as f64;
        count += n;
    }
    Ok(if count == 0 { f64::NAN } else { total / count as f64 })
}

/// Trains `kind` on `corpus.train`, early-stopping on `corpus.dev` loss, and
/// returns the parameters of the best dev epoch. Constant heads are fitted
/// directly.
pub fn train(kind: HeadKind, config: &TrainConfig, corpus: &Corpus) -> Result<Model> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::init(kind, &corpus.train, config.dim, &mut rng)?;
    if kind.is_constant() {
        return Ok(model);
    }
    if corpus.dev.is_empty() {
        return Err(Error::InvalidInput("training needs a non-empty dev split".into()));
    }
    let prepare = |xs: &[MnpExample]| xs.iter().map(|e| model.prepare(e)).collect::<Result<Vec<_>>>();
    let train_set = prepare(&corpus.train)?;
    let dev_set = prepare(&corpus.dev)?;

    let n_emb = model.encoder()?.table().len();
    let mut opt_head = Adam::new(config.lr_new, model.weights.len());
    let mut opt_emb = Adam::new(config.lr_pretrained, n_emb);
    let mut grad_w = vec![0.0; model.weights.len()];
    let mut grad_e = vec![0.0; n_emb];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(f64, Model)> = None;
    let mut since_best = 0;
    let mut best_epoch = 0;
    let mut history = Vec::new();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let (mut epoch_loss, mut epoch_n) = (0.0, 0usize);
        for (step, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Prepared> = idx.iter().map(|&i| &train_set[i]).collect();
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            grad_e.iter_mut().for_each(|g| *g = 0.0);
            let (loss, n) = model.batch_loss_grad(&batch, &mut grad_w, &mut grad_e)?;
            if n == 0 {
                continue;
            }
            if !loss.is_finite() || grad_w.iter().chain(&grad_e).any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step,
                    detail: format!("{kind} batch loss {loss} over {n} examples"),
                });
            }
            epoch_loss += loss * n as f64;
            epoch_n += n;
            opt_head.step(&mut model.weights, &grad_w);
            let enc = model.encoder.as_mut().expect("trainable heads have an encoder");
            opt_emb.step(enc.table_mut(), &grad_e);
            if kind == HeadKind::DExp {
                let ls = model.weights.last_mut().expect("log_sigma");
                *ls = ls.clamp(SIGMA_MIN.ln(), SIGMA_MAX.ln());
            }
        }
        let dev_loss = mean_loss(&model, &dev_set)?;
        if !dev_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, step: 0, detail: format!("{kind} dev loss {dev_loss}") });
        }
        let train_loss = if epoch_n == 0 { f64::NAN } else { epoch_loss / epoch_n as f64 };
        history.push(EpochRecord { epoch, train_loss, dev_loss });
        if best.as_ref().is_none_or(|(b, _)| dev_loss < *b) {
            best = Some((dev_loss, model.clone()));
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    let (_, mut chosen) = best.expect("at least one epoch ran");
    chosen.best_epoch = best_epoch;
    chosen.history = history;
    Ok(chosen)
}

pub fn predict_all(model: &Model, examples: &[MnpExample]) -> Vec<Prediction> {
    examples.iter().map(|e| model.predict(e)).collect()
}
