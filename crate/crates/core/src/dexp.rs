//! Discrete latent exponent decoder: a categorical distribution over the 17
//! decade exponents, each decade carrying a log-normal truncated to that
//! decade.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::normal;
use crate::numparse::{in_range, pow10, N_EXPONENTS};
use crate::{Error, Result};

/// Training keeps sigma inside this band so the normalizer never degenerates.
pub const SIGMA_MIN: f64 = 1e-3;
pub const SIGMA_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncLogNormal {
    /// Location of `ln v`.
    pub mu: f64,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Standardized bounds of a truncated log-normal.
struct Standardized {
    alpha: f64,
    beta: f64,
    log_z: f64,
}

impl TruncLogNormal {
    pub fn new(mu: f64, sigma: f64, lower: f64, upper: f64) -> Result<Self> {
        let d = TruncLogNormal { mu, sigma, lower, upper };
        d.validate()?;
        Ok(d)
    }

    /// Component for decade `k`, supported on `[10^k, 10^(k+1))`.
    pub fn decade(k: usize, mu: f64, sigma: f64) -> Result<Self> {
        if k >= N_EXPONENTS {
            return Err(Error::IndexOutOfRange { index: k, len: N_EXPONENTS });
        }
        Self::new(mu, sigma, pow10(k), pow10(k + 1))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParam(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidParam(format!("mu must be finite, got {}", self.mu)));
        }
        if !(self.lower > 0.0 && self.lower < self.upper && self.upper.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "bounds must satisfy 0 < lower < upper, got [{}, {})",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    fn standardized(&self) -> Standardized {
        let alpha = (self.lower.ln() - self.mu) / self.sigma;
        let beta = (self.upper.ln() - self.mu) / self.sigma;
        Standardized { alpha, beta, log_z: normal::log_interval_mass(alpha, beta) }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v < self.upper
    }

    /// Log density; `-inf` outside `[lower, upper)`.
    pub fn log_pdf(&self, v: f64) -> f64 {
        if !self.contains(v) {
            return f64::NEG_INFINITY;
        }
        let s = self.standardized();
        let z = (v.ln() - self.mu) / self.sigma;
        normal::log_pdf(z) - v.ln() - self.sigma.ln() - s.log_z
    }

    pub fn cdf(&self, v: f64) -> f64 {
        if v <= self.lower {
            return 0.0;
        }
        if v >= self.upper {
            return 1.0;
        }
        let s = self.standardized();
        let z = (v.ln() - self.mu) / self.sigma;
        (normal::log_interval_mass(s.alpha, z) - s.log_z).exp().min(1.0)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let s = self.standardized();
        let z = normal::truncated_quantile(s.alpha, s.beta, p.clamp(0.0, 1.0));
        let v = (self.mu + self.sigma * z).exp().max(self.lower);
        if v >= self.upper {
            f64::from_bits(self.upper.to_bits() - 1)
        } else {
            v
        }
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// Partial derivatives of `log_pdf(v)` with respect to `mu` and
    /// `ln sigma`.
    fn log_pdf_grad(&self, v: f64) -> (f64, f64) {
        let s = self.standardized();
        let z = (v.ln() - self.mu) / self.sigma;
        let ratio = |x: f64| {
            if x.is_infinite() {
                0.0
            } else {
                (normal::log_pdf(x) - s.log_z).exp()
            }
        };
        let (ra, rb) = (ratio(s.alpha), ratio(s.beta));
        let d_mu = (z - (ra - rb)) / self.sigma;
        let d_log_sigma = z * z - 1.0 - (s.alpha * ra - s.beta * rb);
        (d_mu, d_log_sigma)
    }
}

pub fn tln_logpdf(d: &TruncLogNormal, v: f64) -> Result<f64> {
    d.validate()?;
    Ok(d.log_pdf(v))
}

pub fn tln_sample<R: Rng + ?Sized>(d: &TruncLogNormal, rng: &mut R) -> Result<f64> {
    d.validate()?;
    Ok(d.sample(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DExpParams {
    #[serde(rename = "logits")]
    pub exponent_logits: Vec<f64>,
    #[serde(rename = "mu")]
    pub mu_per_exponent: Vec<f64>,
    pub log_sigma: f64,
}

/// Gradient of the NLL, laid out like [`DExpParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DExpGrad {
    pub exponent_logits: Vec<f64>,
    pub mu_per_exponent: Vec<f64>,
    pub log_sigma: f64,
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

impl DExpParams {
    pub fn new(exponent_logits: Vec<f64>, mu_per_exponent: Vec<f64>, log_sigma: f64) -> Result<Self> {
        let p = DExpParams { exponent_logits, mu_per_exponent, log_sigma };
        p.validate()?;
        Ok(p)
    }

    /// Uniform exponent weights with each component centred (in log space)
    /// on its decade.
    pub fn centered(sigma: f64) -> Self {
        DExpParams {
            exponent_logits: vec![0.0; N_EXPONENTS],
            mu_per_exponent: (0..N_EXPONENTS).map(|k| (k as f64 + 0.5) * std::f64::consts::LN_10).collect(),
            log_sigma: sigma.ln(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.exponent_logits.len() != N_EXPONENTS || self.mu_per_exponent.len() != N_EXPONENTS {
            return Err(Error::ShapeMismatch(format!(
                "expected {N_EXPONENTS} logits and mus, got {} and {}",
                self.exponent_logits.len(),
                self.mu_per_exponent.len()
            )));
        }
        let finite = self.exponent_logits.iter().chain(&self.mu_per_exponent).all(|x| x.is_finite());
        if !finite || !self.log_sigma.is_finite() {
            return Err(Error::InvalidParam("DExp parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    pub fn exponent_probs(&self) -> Vec<f64> {
        log_softmax(&self.exponent_logits).into_iter().map(f64::exp).collect()
    }

    pub fn component(&self, k: usize) -> TruncLogNormal {
        TruncLogNormal {
            mu: self.mu_per_exponent[k],
            sigma: self.sigma(),
            lower: pow10(k),
            upper: pow10(k + 1),
        }
    }

    /// Most probable exponent, ties toward the smaller one.
    pub fn argmax_exponent(&self) -> usize {
        let mut best = 0;
        for (k, &l) in self.exponent_logits.iter().enumerate() {
            if l > self.exponent_logits[best] {
                best = k;
            }
        }
        best
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let probs = self.exponent_probs();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = N_EXPONENTS - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                k = i;
                break;
            }
        }
        self.component(k).sample(rng)
    }
}

/// Per-component log weight plus log density at `v`.
fn joint_terms(p: &DExpParams, v: f64) -> Vec<f64> {
    log_softmax(&p.exponent_logits)
        .into_iter()
        .enumerate()
        .map(|(k, lw)| lw + p.component(k).log_pdf(v))
        .collect()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_value(v: f64) -> Result<()> {
    if in_range(v) {
        Ok(())
    } else {
        Err(Error::OutOfRange(v))
    }
}

/// Negative log-likelihood of `v` under the mixture.
pub fn dexp_nll(p: &DExpParams, v: f64) -> Result<f64> {
    p.validate()?;
    check_value(v)?;
    Ok(-log_sum_exp(&joint_terms(p, v)))
}

pub fn dexp_grad(p: &DExpParams, v: f64) -> Result<DExpGrad> {
    p.validate()?;
    check_value(v)?;
    let terms = joint_terms(p, v);
    let lse = log_sum_exp(&terms);
    let weights = p.exponent_probs();
    let mut grad = DExpGrad {
        exponent_logits: vec![0.0; N_EXPONENTS],
        mu_per_exponent: vec![0.0; N_EXPONENTS],
        log_sigma: 0.0,
    };
    for k in 0..N_EXPONENTS {
        let resp = if terms[k] == f64::NEG_INFINITY { 0.0 } else { (terms[k] - lse).exp() };
        grad.exponent_logits[k] = weights[k] - resp;
        if resp > 0.0 {
            let (d_mu, d_ls) = p.component(k).log_pdf_grad(v);
            grad.mu_per_exponent[k] = -resp * d_mu;
            grad.log_sigma -= resp * d_ls;
        }
    }
    Ok(grad)
}

/// Median of the most probable exponent's component, capped at 1e16.
pub fn dexp_predict(p: &DExpParams) -> Result<f64> {
    p.validate()?;
    let k = p.argmax_exponent();
    Ok(p.component(k).median().min(crate::MAX_VALUE))
}
