//! Mean-pooled context encoder and the decoder heads on top of it.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::corpus::MnpExample;
use crate::binning::{DecadeBins, RepresentativeRule};
use crate::dexp::{dexp_grad, dexp_nll, dexp_predict, DExpParams};
use crate::metrics::Prediction;
use crate::notation::{self, NotationScheme};
use crate::numparse::{decompose, MAX_VALUE, N_EXPONENTS};
use crate::{Error, Result};

pub const DEFAULT_DIM: usize = 64;
pub const UNK: &str = "[UNK]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HeadKind {
    #[serde(rename = "const_mean")]
    ConstMean,
    #[serde(rename = "const_median")]
    ConstMedian,
    #[serde(rename = "const_mode")]
    ConstMode,
    #[serde(rename = "subword_pad8")]
    SubwordPad8,
    #[serde(rename = "digit_pad17")]
    DigitPad17,
    #[serde(rename = "scientific_pad8")]
    ScientificPad8,
    #[serde(rename = "vocab_am")]
    VocabAm,
    #[serde(rename = "vocab_gm")]
    VocabGm,
    #[serde(rename = "dexp")]
    DExp,
}

impl HeadKind {
    pub const ALL: [HeadKind; 9] = [
        HeadKind::ConstMean,
        HeadKind::ConstMedian,
        HeadKind::ConstMode,
        HeadKind::SubwordPad8,
        HeadKind::DigitPad17,
        HeadKind::ScientificPad8,
        HeadKind::VocabAm,
        HeadKind::VocabGm,
        HeadKind::DExp,
    ];

    /// Display name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            HeadKind::ConstMean => "ConstMean",
            HeadKind::ConstMedian => "ConstMedian",
            HeadKind::ConstMode => "ConstMode",
            HeadKind::SubwordPad8 => "SubwordPad8",
            HeadKind::DigitPad17 => "DigitPad17",
            HeadKind::ScientificPad8 => "ScientificPad8",
            HeadKind::VocabAm => "VocabAM",
            HeadKind::VocabGm => "VocabGM",
            HeadKind::DExp => "DExp",
        }
    }

    /// Identifier used in configs and on the command line.
    pub fn key(self) -> &'static str {
        match self {
            HeadKind::ConstMean => "const_mean",
            HeadKind::ConstMedian => "const_median",
            HeadKind::ConstMode => "const_mode",
            HeadKind::SubwordPad8 => "subword_pad8",
            HeadKind::DigitPad17 => "digit_pad17",
            HeadKind::ScientificPad8 => "scientific_pad8",
            HeadKind::VocabAm => "vocab_am",
            HeadKind::VocabGm => "vocab_gm",
            HeadKind::DExp => "dexp",
        }
    }

    pub fn is_constant(self) -> bool {
        matches!(self, HeadKind::ConstMean | HeadKind::ConstMedian | HeadKind::ConstMode)
    }

    pub fn scheme(self) -> Option<NotationScheme> {
        match self {
            HeadKind::SubwordPad8 => Some(NotationScheme::decimal()),
            HeadKind::DigitPad17 => Some(NotationScheme::digits()),
            HeadKind::ScientificPad8 => Some(NotationScheme::scientific()),
            _ => None,
        }
    }

    fn rule(self) -> Option<RepresentativeRule> {
        match self {
            HeadKind::VocabAm => Some(RepresentativeRule::Am),
            HeadKind::VocabGm => Some(RepresentativeRule::Gm),
            _ => None,
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        HeadKind::ALL
            .into_iter()
            .find(|k| k.key() == s || k.name().to_ascii_lowercase() == s)
            .ok_or_else(|| Error::Usage(format!("unknown head {s:?}")))
    }
}

/// Word embedding bag plus one embedding per input-number exponent. The
/// encoding of a sentence is the mean over its word tokens and the
/// exponents of its context numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "EncoderRepr", try_from = "EncoderRepr")]
pub struct ContextEncoder {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    /// Word rows first, then the exponent rows.
    table: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EncoderRepr {
    vocab: Vec<String>,
    dim: usize,
    embeddings: Vec<f64>,
    exponent_embeddings: Vec<f64>,
}

impl From<ContextEncoder> for EncoderRepr {
    fn from(e: ContextEncoder) -> Self {
        let split = e.vocab.len() * e.dim;
        let mut embeddings = e.table;
        let exponent_embeddings = embeddings.split_off(split);
        EncoderRepr { vocab: e.vocab, dim: e.dim, embeddings, exponent_embeddings }
    }
}

impl TryFrom<EncoderRepr> for ContextEncoder {
    type Error = Error;

    fn try_from(r: EncoderRepr) -> Result<Self> {
        if r.dim == 0
            || r.embeddings.len() != r.vocab.len() * r.dim
            || r.exponent_embeddings.len() != N_EXPONENTS * r.dim
        {
            return Err(Error::ShapeMismatch("encoder tables do not match vocab and dim".into()));
        }
        if r.vocab.first().map(String::as_str) != Some(UNK) {
            return Err(Error::InvalidInput(format!("encoder vocab must start with {UNK}")));
        }
        let index = r.vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let mut table = r.embeddings;
        table.extend(r.exponent_embeddings);
        Ok(ContextEncoder { vocab: r.vocab, index, dim: r.dim, table })
    }
}

impl ContextEncoder {
    /// Vocabulary from `examples` (sorted, `[UNK]` first) with N(0, 1)
    /// initial embeddings.
    pub fn fit<R: Rng + ?Sized>(examples: &[MnpExample], dim: usize, rng: &mut R) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("dim must be positive".into()));
        }
        let words: BTreeSet<&str> =
            examples.iter().flat_map(|e| e.template_tokens.iter().map(String::as_str)).collect();
        let vocab: Vec<String> =
            std::iter::once(UNK).chain(words.into_iter().filter(|w| *w != UNK)).map(String::from).collect();
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let rows = vocab.len() + N_EXPONENTS;
        let table = (0..rows * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Ok(ContextEncoder { vocab, index, dim, table })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub(crate) fn table(&self) -> &[f64] {
        &self.table
    }

    pub(crate) fn table_mut(&mut self) -> &mut [f64] {
        &mut self.table
    }

    /// Table rows pooled for `ex`.
    pub fn items(&self, ex: &MnpExample) -> Vec<usize> {
        let words = ex.template_tokens.iter().map(|t| self.index.get(t).copied().unwrap_or(0));
        let exps = ex.context_numbers.iter().map(|p| self.vocab.len() + p.exponent as usize);
        words.chain(exps).collect()
    }

    pub fn encode_items(&self, items: &[usize]) -> Vec<f64> {
        let d = self.dim;
        let mut h = vec![0.0; d];
        if items.is_empty() {
            return h;
        }
        for &i in items {
            for (hj, x) in h.iter_mut().zip(&self.table[i * d..(i + 1) * d]) {
                *hj += x;
            }
        }
        let scale = 1.0 / items.len() as f64;
        h.iter_mut().for_each(|x| *x *= scale);
        h
    }

    pub fn encode(&self, ex: &MnpExample) -> Vec<f64> {
        self.encode_items(&self.items(ex))
    }

    fn backprop(&self, items: &[usize], dh: &[f64], grad: &mut [f64]) {
        if items.is_empty() {
            return;
        }
        let d = self.dim;
        let scale = 1.0 / items.len() as f64;
        for &i in items {
            for (g, x) in grad[i * d..(i + 1) * d].iter_mut().zip(dh) {
                *g += x * scale;
            }
        }
    }
}

/// Training target of one example under a head.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Target {
    /// The answer cannot be rendered in the head's scheme.
    Skip,
    Tokens(Vec<usize>),
    Class(usize),
    Value(f64),
}

#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub items: Vec<usize>,
    pub target: Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
}

/// A trained decoder head. Trainable heads store a row-major linear layer
/// (`rows x (dim + 1)`, bias last) followed by head-specific extras: token
/// heads share one output layer across positions and add a `pad_len x dim`
/// table of position embeddings to the context vector; DExp keeps its
/// shared `log_sigma` last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: HeadKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<ContextEncoder>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub token_vocab: Vec<String>,
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub history: Vec<EpochRecord>,
    #[serde(default)]
    pub best_epoch: usize,
}

pub fn const_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Even-length inputs average the two middle values.
pub fn const_median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Most frequent value; ties go to the smallest.
pub fn const_mode(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (mut best, mut best_n) = (v[0], 0);
    let mut i = 0;
    while i < v.len() {
        let j = v[i..].iter().position(|x| *x != v[i]).map_or(v.len(), |p| i + p);
        if j - i > best_n {
            best = v[i];
            best_n = j - i;
        }
        i = j;
    }
    Ok(best)
}

fn softmax_ce(z: &[f64], target: usize, dz: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter().map(|x| (x - max).exp()).sum();
    let lse = max + sum.ln();
    for (g, x) in dz.iter_mut().zip(z) {
        *g = (x - lse).exp();
    }
    dz[target] -= 1.0;
    lse - z[target]
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in z.iter().enumerate() {
        if x > z[best] {
            best = i;
        }
    }
    best
}

impl Model {
    /// Fits a constant head, or initializes a trainable one (zero head
    /// weights; DExp means start at each decade's log-centre, sigma 1).
    pub fn init<R: Rng + ?Sized>(kind: HeadKind, train: &[MnpExample], dim: usize, rng: &mut R) -> Result<Self> {
        let mut model = Model {
            kind,
            constant: None,
            encoder: None,
            token_vocab: Vec::new(),
            weights: Vec::new(),
            history: Vec::new(),
            best_epoch: 0,
        };
        if kind.is_constant() {
            let answers: Vec<f64> = train.iter().map(|e| e.answer).collect();
            model.constant = Some(match kind {
                HeadKind::ConstMean => const_mean(&answers)?,
                HeadKind::ConstMedian => const_median(&answers)?,
                _ => const_mode(&answers)?,
            });
            return Ok(model);
        }
        if train.is_empty() {
            return Err(Error::EmptyInput);
        }
        model.encoder = Some(ContextEncoder::fit(train, dim, rng)?);
        if let Some(scheme) = kind.scheme() {
            model.token_vocab = scheme.vocabulary().expect("token heads use closed vocabularies");
        }
        let (rows, extra) = model.layout();
        model.weights = vec![0.0; rows * (dim + 1) + extra];
        if model.is_token() {
            for w in &mut model.weights[rows * (dim + 1)..] {
                *w = rng.sample(StandardNormal);
            }
        }
        if kind == HeadKind::DExp {
            let stride = dim + 1;
            for k in 0..N_EXPONENTS {
                model.weights[(N_EXPONENTS + k) * stride + dim] = (k as f64 + 0.5) * std::f64::consts::LN_10;
            }
        }
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.encoder.as_ref().map_or(0, ContextEncoder::dim)
    }

    /// Output rows of the linear layer and the number of extra parameters
    /// (position embeddings for token heads, `log_sigma` for DExp).
    fn layout(&self) -> (usize, usize) {
        match self.kind {
            HeadKind::SubwordPad8 | HeadKind::DigitPad17 | HeadKind::ScientificPad8 => {
                (self.token_vocab.len(), self.pad_len() * self.dim())
            }
            HeadKind::VocabAm | HeadKind::VocabGm => (N_EXPONENTS, 0),
            HeadKind::DExp => (2 * N_EXPONENTS, 1),
            _ => (0, 0),
        }
    }

    fn is_token(&self) -> bool {
        self.kind.scheme().is_some()
    }

    fn pad_len(&self) -> usize {
        self.kind.scheme().map_or(0, |s| s.pad_len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_constant() {
            return match self.constant {
                Some(c) if c.is_finite() && c > 0.0 => Ok(()),
                _ => Err(Error::InvalidInput(format!("{} needs a positive constant", self.kind))),
            };
        }
        let enc = self.encoder.as_ref().ok_or_else(|| Error::InvalidInput(format!("{} needs an encoder", self.kind)))?;
        if let Some(scheme) = self.kind.scheme() {
            if scheme.vocabulary().as_deref() != Some(self.token_vocab.as_slice()) {
                return Err(Error::InvalidInput("token vocabulary does not match the head's scheme".into()));
            }
        }
        let (rows, extra) = self.layout();
        let expected = rows * (enc.dim() + 1) + extra;
        if self.weights.len() != expected {
            return Err(Error::ShapeMismatch(format!("expected {expected} head weights, got {}", self.weights.len())));
        }
        Ok(())
    }

    pub fn encoder(&self) -> Result<&ContextEncoder> {
        self.encoder.as_ref().ok_or_else(|| Error::InvalidInput(format!("{} has no encoder", self.kind)))
    }

    pub(crate) fn target(&self, answer: f64) -> Result<Target> {
        let parsed = decompose(answer)?;
        Ok(match self.kind {
            HeadKind::SubwordPad8 | HeadKind::DigitPad17 | HeadKind::ScientificPad8 => {
                let scheme = self.kind.scheme().expect("token head");
                let rendered = match notation::render(&parsed, &scheme) {
                    Ok(t) => t,
                    Err(Error::Overflow { .. }) => return Ok(Target::Skip),
                    Err(e) => return Err(e),
                };
                let ids = rendered
                    .tokens
                    .iter()
                    .map(|t| {
                        self.token_vocab
                            .iter()
                            .position(|v| v == t)
                            .ok_or_else(|| Error::InvalidInput(format!("token {t:?} outside the head vocabulary")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Target::Tokens(ids)
            }
            HeadKind::VocabAm | HeadKind::VocabGm => Target::Class(parsed.exponent as usize),
            HeadKind::DExp => Target::Value(answer),
            _ => Target::Skip,
        })
    }

    pub(crate) fn prepare(&self, ex: &MnpExample) -> Result<Prepared> {
        Ok(Prepared { items: self.encoder()?.items(ex), target: self.target(ex.answer)? })
    }

    /// Head outputs for encoding `h`: `pad_len x vocab` logits for token
    /// heads, 17 logits for Vocab heads, 17 logits then 17 means for DExp.
    pub fn outputs(&self, h: &[f64]) -> Vec<f64> {
        let (rows, _) = self.layout();
        let d = h.len();
        let stride = d + 1;
        let linear = |x: &[f64], out: &mut Vec<f64>| {
            for r in 0..rows {
                let w = &self.weights[r * stride..(r + 1) * stride];
                out.push(w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d]);
            }
        };
        if !self.is_token() {
            let mut out = Vec::with_capacity(rows);
            linear(h, &mut out);
            return out;
        }
        let pos = &self.weights[rows * stride..];
        let mut out = Vec::with_capacity(self.pad_len() * rows);
        let mut x = vec![0.0; d];
        for p in 0..self.pad_len() {
            for j in 0..d {
                x[j] = h[j] + pos[p * d + j];
            }
            linear(&x, &mut out);
        }
        out
    }

    fn dexp_params(&self, z: &[f64]) -> DExpParams {
        DExpParams {
            exponent_logits: z[..N_EXPONENTS].to_vec(),
            mu_per_exponent: z[N_EXPONENTS..].to_vec(),
            log_sigma: *self.weights.last().expect("DExp head has log_sigma"),
        }
    }

    /// Context-conditioned mixture parameters for a DExp head.
    pub fn dexp_params_for(&self, ex: &MnpExample) -> Result<DExpParams> {
        if self.kind != HeadKind::DExp {
            return Err(Error::InvalidInput(format!("{} is not a DExp head", self.kind)));
        }
        Ok(self.dexp_params(&self.outputs(&self.encoder()?.encode(ex))))
    }

    /// Loss of one example and its gradient with respect to the outputs and
    /// the extra parameters. `None` for skipped examples.
    fn example_loss(&self, z: &[f64], target: &Target) -> Result<Option<(f64, Vec<f64>, f64)>> {
        let mut dz = vec![0.0; z.len()];
        let loss = match target {
            Target::Skip => return Ok(None),
            Target::Tokens(ids) => {
                let v = self.token_vocab.len();
                ids.iter()
                    .enumerate()
                    .map(|(p, &t)| softmax_ce(&z[p * v..(p + 1) * v], t, &mut dz[p * v..(p + 1) * v]))
                    .sum()
            }
            Target::Class(k) => softmax_ce(z, *k, &mut dz),
            Target::Value(v) => {
                let params = self.dexp_params(z);
                let loss = dexp_nll(&params, *v)?;
                let g = dexp_grad(&params, *v)?;
                dz[..N_EXPONENTS].copy_from_slice(&g.exponent_logits);
                dz[N_EXPONENTS..].copy_from_slice(&g.mu_per_exponent);
                return Ok(Some((loss, dz, g.log_sigma)));
            }
        };
        Ok(Some((loss, dz, 0.0)))
    }

    /// Mean loss over the non-skipped examples of `batch`, accumulating the
    /// matching mean gradients. Returns the loss and the number of examples
    /// that contributed.
    pub(crate) fn batch_loss_grad(
        &self,
        batch: &[&Prepared],
        grad_w: &mut [f64],
        grad_emb: &mut [f64],
    ) -> Result<(f64, usize)> {
        let enc = self.encoder()?;
        let d = enc.dim();
        let stride = d + 1;
        let mut per_example = Vec::with_capacity(batch.len());
        for p in batch {
            let h = enc.encode_items(&p.items);
            let z = self.outputs(&h);
            if let Some(r) = self.example_loss(&z, &p.target)? {
                per_example.push((p, h, r));
            }
        }
        let n = per_example.len();
        if n == 0 {
            return Ok((0.0, 0));
        }
        let scale = 1.0 / n as f64;
        let mut total = 0.0;
        let (rows, _) = self.layout();
        let extra_at = rows * stride;
        // one pass of the linear layer: input x, output gradient dz
        let linear_back = |x: &[f64], dz: &[f64], grad_w: &mut [f64], dx: &mut [f64]| {
            for (r, &g) in dz.iter().enumerate() {
                let g = g * scale;
                let row = r * stride;
                for j in 0..d {
                    grad_w[row + j] += g * x[j];
                    dx[j] += g * self.weights[row + j];
                }
                grad_w[row + d] += g;
            }
        };
        for (p, h, (loss, dz, d_extra)) in per_example {
            total += loss;
            let mut dh = vec![0.0; d];
            if self.is_token() {
                let mut x = vec![0.0; d];
                for pos in 0..self.pad_len() {
                    let e = extra_at + pos * d;
                    for j in 0..d {
                        x[j] = h[j] + self.weights[e + j];
                    }
                    let mut dx = vec![0.0; d];
                    linear_back(&x, &dz[pos * rows..(pos + 1) * rows], grad_w, &mut dx);
                    for j in 0..d {
                        dh[j] += dx[j];
                        grad_w[e + j] += dx[j];
                    }
                }
            } else {
                linear_back(&h, &dz, grad_w, &mut dh);
                if extra_at < grad_w.len() {
                    grad_w[extra_at] += d_extra * scale;
                }
            }
            enc.backprop(&p.items, &dh, grad_emb);
        }
        Ok((total * scale, n))
    }

    pub fn predict(&self, ex: &MnpExample) -> Prediction {
        if let Some(c) = self.constant {
            return Prediction::Value(c);
        }
        let Ok(enc) = self.encoder() else { return Prediction::Invalid };
        let z = self.outputs(&enc.encode(ex));
        match self.kind {
            HeadKind::SubwordPad8 | HeadKind::DigitPad17 | HeadKind::ScientificPad8 => {
                let scheme = self.kind.scheme().expect("token head");
                let v = self.token_vocab.len();
                let tokens: Vec<String> =
                    (0..scheme.pad_len).map(|p| self.token_vocab[argmax(&z[p * v..(p + 1) * v])].clone()).collect();
                match notation::parse_token_slice(&tokens, &scheme) {
                    Some(parsed) => Prediction::Value(parsed.value),
                    None => Prediction::Invalid,
                }
            }
            HeadKind::VocabAm | HeadKind::VocabGm => {
                let bins = DecadeBins::new(self.kind.rule().expect("vocab head"));
                match bins.representative(argmax(&z)) {
                    Ok(r) => Prediction::Value(r.min(MAX_VALUE)),
                    Err(_) => Prediction::Invalid,
                }
            }
            HeadKind::DExp => match dexp_predict(&self.dexp_params(&z)) {
                Ok(v) => Prediction::Value(v),
                Err(_) => Prediction::Invalid,
            },
            _ => Prediction::Invalid,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numparse::in_range;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn examples() -> Vec<MnpExample> {
        let rows = [
            ("An adult tiger can weigh [MASK] pounds.", 600.0),
            ("The city has 1,700,000 people and [MASK] parks.", 45.0),
            ("In 2015 the fund held $[MASK].", 3.2e9),
            ("The galaxy is [MASK] km away.", 1e16),
            ("A dose of [MASK] pills.", 1.5),
            ("Returns were [MASK] units after 52,300 sales.", 5230.0),
        ];
        rows.iter().map(|(t, a)| MnpExample::from_text(t, *a).unwrap()).collect()
    }

    #[test]
    fn constant_heads() {
        let v = [1.0, 2.0, 2.0, 9.0];
        assert_eq!(const_median(&v).unwrap(), 2.0);
        assert_eq!(const_mean(&v).unwrap(), 3.5);
        assert_eq!(const_mode(&v).unwrap(), 2.0);
        assert_eq!(const_mode(&[5.0, 3.0, 5.0, 3.0]).unwrap(), 3.0);
        assert_eq!(const_median(&[4.0, 1.0, 3.0]).unwrap(), 3.0);
        assert!(const_mean(&[]).is_err());
        let ex = examples();
        let m = Model::init(HeadKind::ConstMedian, &ex, 8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m.predict(&ex[0]), Prediction::Value(const_median(&ex.iter().map(|e| e.answer).collect::<Vec<_>>()).unwrap()));
    }

    #[test]
    fn head_kind_names() {
        for k in HeadKind::ALL {
            assert_eq!(k.key().parse::<HeadKind>().unwrap(), k);
            assert_eq!(k.name().parse::<HeadKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.key()));
        }
        assert!("bert".parse::<HeadKind>().is_err());
    }

    #[test]
    fn encoder_output_has_fixed_dim() {
        let ex = examples();
        let enc = ContextEncoder::fit(&ex, 16, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for e in &ex {
            assert_eq!(enc.encode(e).len(), 16);
        }
        let unseen = MnpExample::from_text("zebras weigh [MASK] kg", 300.0).unwrap();
        assert_eq!(enc.encode(&unseen).len(), 16);
        assert_eq!(enc.items(&unseen)[0], 0);
        assert_eq!(enc.vocab()[0], UNK);
    }

    #[test]
    fn encoder_json_round_trip() {
        let enc = ContextEncoder::fit(&examples(), 4, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let json = serde_json::to_value(&enc).unwrap();
        assert!(json.get("exponent_embeddings").is_some());
        let back: ContextEncoder = serde_json::from_value(json).unwrap();
        assert_eq!(enc, back);
    }

    #[test]
    fn vocab_labels_are_exponents() {
        let ex = examples();
        let m = Model::init(HeadKind::VocabAm, &ex, 8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for e in &ex {
            assert_eq!(m.target(e.answer).unwrap(), Target::Class(decompose(e.answer).unwrap().exponent as usize));
        }
    }

    #[test]
    fn subword_skips_overflowing_answers() {
        let m = Model::init(HeadKind::SubwordPad8, &examples(), 8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m.target(1e16).unwrap(), Target::Skip);
        assert!(matches!(m.target(600.0).unwrap(), Target::Tokens(ref t) if t.len() == 8));
        let d = Model::init(HeadKind::DigitPad17, &examples(), 8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(matches!(d.target(1e16).unwrap(), Target::Tokens(_)));
    }

    #[test]
    fn vocab_gm_prediction_uses_representative() {
        let ex = examples();
        let mut m = Model::init(HeadKind::VocabGm, &ex, 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        m.weights[2 * 5 + 4] = 1.0;
        let p = m.predict(&ex[0]).value().unwrap();
        assert!((p - 316.227_766_016_837_94).abs() < 1e-9);
        m.weights[2 * 5 + 4] = 0.0;
        m.weights[16 * 5 + 4] = 1.0;
        assert_eq!(m.predict(&ex[0]), Prediction::Value(MAX_VALUE));
    }

    #[test]
    fn garbled_token_output_is_invalid() {
        let ex = examples();
        let mut m = Model::init(HeadKind::ScientificPad8, &ex, 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let v = m.token_vocab.len();
        let e = m.token_vocab.iter().position(|t| t == "e").unwrap();
        let two = m.token_vocab.iter().position(|t| t == "2").unwrap();
        // position 0 reads feature 0, position 1 feature 1, the rest neither:
        // "e 2 [PAD] ..." has no mantissa
        m.weights[e * 5] = 1.0;
        m.weights[two * 5 + 1] = 1.0;
        let pos = v * 5;
        for p in 0..8 {
            let row = &mut m.weights[pos + p * 4..pos + p * 4 + 4];
            row.copy_from_slice(&[-100.0, -100.0, 0.0, 0.0]);
            if p < 2 {
                row[p] = 100.0;
            }
        }
        assert_eq!(m.predict(&ex[0]), Prediction::Invalid);
    }

    #[test]
    fn fresh_dexp_predicts_inside_its_decade() {
        let ex = examples();
        let m = Model::init(HeadKind::DExp, &ex, 8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for e in &ex {
            let p = m.predict(e).value().unwrap();
            let params = m.dexp_params_for(e).unwrap();
            assert!(in_range(p));
            assert_eq!(decompose(p).unwrap().exponent as usize, params.argmax_exponent());
        }
    }

    fn fd_check(kind: HeadKind, seed: u64) {
        let ex = examples();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Model::init(kind, &ex, 6, &mut rng).unwrap();
        for w in m.weights.iter_mut() {
            *w += 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
        let batch_size = rng.random_range(1..=ex.len());
        let chosen: Vec<Prepared> = (0..batch_size).map(|_| m.prepare(&ex[rng.random_range(0..ex.len())]).unwrap()).collect();
        let batch: Vec<&Prepared> = chosen.iter().collect();
        let loss = |m: &Model| {
            let mut gw = vec![0.0; m.weights.len()];
            let mut ge = vec![0.0; m.encoder().unwrap().table().len()];
            m.batch_loss_grad(&batch, &mut gw, &mut ge).unwrap().0
        };
        let mut gw = vec![0.0; m.weights.len()];
        let mut ge = vec![0.0; m.encoder().unwrap().table().len()];
        let (_, n) = m.batch_loss_grad(&batch, &mut gw, &mut ge).unwrap();
        if n == 0 {
            return;
        }
        let h = 1e-5;
        let check = |analytic: f64, plus: f64, minus: f64, what: &str| {
            let numeric = (plus - minus) / (2.0 * h);
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
            assert!(err < 1e-4, "{kind} {what}: analytic {analytic} numeric {numeric}");
        };
        for _ in 0..12 {
            let i = rng.random_range(0..m.weights.len());
            let mut p = m.clone();
            p.weights[i] += h;
            let mut q = m.clone();
            q.weights[i] -= h;
            check(gw[i], loss(&p), loss(&q), &format!("weight {i}"));
        }
        let used: Vec<usize> = batch.iter().flat_map(|p| p.items.iter().copied()).collect();
        for _ in 0..6 {
            let row = used[rng.random_range(0..used.len())];
            let i = row * 6 + rng.random_range(0..6);
            let mut p = m.clone();
            p.encoder.as_mut().unwrap().table_mut()[i] += h;
            let mut q = m.clone();
            q.encoder.as_mut().unwrap().table_mut()[i] -= h;
            check(ge[i], loss(&p), loss(&q), &format!("embedding {i}"));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in HeadKind::ALL.into_iter().filter(|k| !k.is_constant()) {
            for seed in 0..20 {
                fd_check(kind, seed);
            }
        }
    }
}
