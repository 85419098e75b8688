//! Exponent accuracy, LogMAE, confidence half-widths and bootstrap variance.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numparse::{decompose, in_range};
use crate::{Error, Result};

/// z for a two-sided 99% interval.
pub const Z_99: f64 = 2.58;
pub const BOOTSTRAP_SAMPLES: usize = 10;
pub const BOOTSTRAP_FRACTION: f64 = 0.75;
/// A report is NA when at least this fraction of predictions is invalid.
pub const NA_THRESHOLD: f64 = 0.5;

/// A decoded prediction; token decoders can emit strings that are not numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Prediction {
    Value(f64),
    Invalid,
}

impl Prediction {
    pub fn value(self) -> Option<f64> {
        match self {
            Prediction::Value(v) => Some(v),
            Prediction::Invalid => None,
        }
    }

    pub fn is_valid(self) -> bool {
        matches!(self, Prediction::Value(_))
    }
}

pub fn e_acc(pred: f64, truth: f64) -> Result<bool> {
    Ok(decompose(pred)?.exponent == decompose(truth)?.exponent)
}

/// `|log10 pred - log10 truth|`.
pub fn abs_log_error(pred: f64, truth: f64) -> Result<f64> {
    for v in [pred, truth] {
        if !in_range(v) {
            return Err(Error::OutOfRange(v));
        }
    }
    Ok((pred.log10() - truth.log10()).abs())
}

pub fn log_mae(preds: &[f64], truths: &[f64]) -> Result<f64> {
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: truths.len() });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut acc = MetricAccumulator::default();
    for (&p, &t) in preds.iter().zip(truths) {
        if !in_range(p) {
            return Err(Error::OutOfRange(p));
        }
        acc.push(Prediction::Value(p), t)?;
    }
    Ok(acc.log_mae())
}

/// `z * sqrt(a (1 - a) / n)`.
pub fn wilson_halfwidth(a: f64, n: usize, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || n == 0 || !(z > 0.0 && z.is_finite()) {
        return Err(Error::InvalidInput(format!("wilson_halfwidth(a={a}, n={n}, z={z})")));
    }
    Ok(z * (a * (1.0 - a) / n as f64).sqrt())
}

/// Sample variance (k - 1 denominator) of `metric` over `k` subsamples drawn
/// without replacement, each of size `ceil(frac * n)`.
pub fn bootstrap_variance<R, F>(
    metric: F,
    preds: &[f64],
    truths: &[f64],
    k: usize,
    frac: f64,
    rng: &mut R,
) -> Result<f64>
where
    R: Rng + ?Sized,
    F: Fn(&[f64], &[f64]) -> Result<f64>,
{
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: truths.len() });
    }
    if preds.is_empty() || k < 2 || !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "bootstrap needs data, k >= 2 and 0 < frac <= 1 (n={}, k={k}, frac={frac})",
            preds.len()
        )));
    }
    let n = preds.len();
    let m = ((frac * n as f64).ceil() as usize).clamp(1, n);
    let mut values = Vec::with_capacity(k);
    let mut sub_p = Vec::with_capacity(m);
    let mut sub_t = Vec::with_capacity(m);
    for _ in 0..k {
        let mut idx = index::sample(rng, n, m).into_vec();
        idx.sort_unstable();
        sub_p.clear();
        sub_t.clear();
        sub_p.extend(idx.iter().map(|&i| preds[i]));
        sub_t.extend(idx.iter().map(|&i| truths[i]));
        values.push(metric(&sub_p, &sub_t)?);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    Ok(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64)
}

/// Fixed-point scale for summed log errors. Integer sums make the merge of
/// shards exactly associative.
const ERR_SCALE: f64 = (1u64 << 40) as f64;

/// Running counts for one evaluation shard.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricAccumulator {
    pub total: u64,
    pub invalid: u64,
    pub exponent_hits: u64,
    pub abs_log_error_fixed: i128,
}

impl MetricAccumulator {
    pub fn push(&mut self, pred: Prediction, truth: f64) -> Result<()> {
        if !in_range(truth) {
            return Err(Error::OutOfRange(truth));
        }
        self.total += 1;
        match pred {
            Prediction::Value(p) if in_range(p) => {
                self.exponent_hits += u64::from(e_acc(p, truth)?);
                let err = abs_log_error(p, truth)?;
                self.abs_log_error_fixed += (err * ERR_SCALE).round() as i128;
            }
            _ => self.invalid += 1,
        }
        Ok(())
    }

    pub fn merge(self, other: Self) -> Self {
        MetricAccumulator {
            total: self.total + other.total,
            invalid: self.invalid + other.invalid,
            exponent_hits: self.exponent_hits + other.exponent_hits,
            abs_log_error_fixed: self.abs_log_error_fixed + other.abs_log_error_fixed,
        }
    }

    pub fn valid(&self) -> u64 {
        self.total - self.invalid
    }

    pub fn e_acc(&self) -> f64 {
        if self.valid() == 0 {
            0.0
        } else {
            self.exponent_hits as f64 / self.valid() as f64
        }
    }

    pub fn log_mae(&self) -> f64 {
        if self.valid() == 0 {
            0.0
        } else {
            self.abs_log_error_fixed as f64 / ERR_SCALE / self.valid() as f64
        }
    }

    pub fn na_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.invalid as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportStatus {
    Ok,
    Na,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub n_valid: usize,
    pub e_acc: f64,
    pub e_acc_ci_halfwidth: f64,
    pub log_mae: f64,
    pub na_fraction: f64,
    pub bootstrap_var_log_mae: f64,
    pub status: ReportStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub z: f64,
    pub bootstrap_samples: usize,
    pub bootstrap_fraction: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { z: Z_99, bootstrap_samples: BOOTSTRAP_SAMPLES, bootstrap_fraction: BOOTSTRAP_FRACTION }
    }
}

/// Aggregates predictions into a report. Invalid predictions are left out
/// of E-Acc and LogMAE and counted in `na_fraction`.
pub fn evaluate<R: Rng + ?Sized>(
    preds: &[Prediction],
    truths: &[f64],
    opts: &EvalOptions,
    rng: &mut R,
) -> Result<EvalReport> {
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: truths.len() });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut acc = MetricAccumulator::default();
    for (&p, &t) in preds.iter().zip(truths) {
        acc.push(p, t)?;
    }
    let (valid_p, valid_t): (Vec<f64>, Vec<f64>) = preds
        .iter()
        .zip(truths)
        .filter_map(|(p, &t)| p.value().filter(|v| in_range(*v)).map(|v| (v, t)))
        .unzip();
    let n_valid = valid_p.len();
    let e_acc = acc.e_acc();
    let halfwidth = if n_valid > 0 { wilson_halfwidth(e_acc, n_valid, opts.z)? } else { 0.0 };
    let bootstrap = if n_valid >= 2 {
        bootstrap_variance(log_mae, &valid_p, &valid_t, opts.bootstrap_samples, opts.bootstrap_fraction, rng)?
    } else {
        0.0
    };
    let na_fraction = acc.na_fraction();
    Ok(EvalReport {
        n: preds.len(),
        n_valid,
        e_acc,
        e_acc_ci_halfwidth: halfwidth,
        log_mae: acc.log_mae(),
        na_fraction,
        bootstrap_var_log_mae: bootstrap,
        status: if na_fraction >= NA_THRESHOLD { ReportStatus::Na } else { ReportStatus::Ok },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn e_acc_examples() {
        assert!(e_acc(600.0, 999.0).unwrap());
        assert!(!e_acc(600.0, 1000.0).unwrap());
        assert!(e_acc(316.23, 500.0).unwrap());
        assert!(e_acc(0.5, 3.0).is_err());
    }

    #[test]
    fn log_mae_examples() {
        assert_eq!(log_mae(&[100.0], &[1000.0]).unwrap(), 1.0);
        assert_eq!(log_mae(&[5.0, 70.0], &[5.0, 70.0]).unwrap(), 0.0);
        assert_eq!(log_mae(&[10.0, 100.0], &[100.0, 100.0]).unwrap(), 0.5);
        assert!(matches!(log_mae(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { left: 1, right: 2 })));
        assert!(matches!(log_mae(&[0.1], &[1.0]), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn wilson_examples() {
        assert!((wilson_halfwidth(0.5, 100, 2.58).unwrap() - 0.129).abs() < 1e-12);
        assert_eq!(wilson_halfwidth(0.0, 10, 2.58).unwrap(), 0.0);
        assert_eq!(wilson_halfwidth(1.0, 10, 2.58).unwrap(), 0.0);
        // 74.6% reported with +-0.4 at z = 2.58 implies roughly 79k observations
        let n = (2.58f64 / 0.004).powi(2) * 0.746 * 0.254;
        assert!((n - 7.9e4).abs() < 0.05e4, "{n}");
        assert!((wilson_halfwidth(0.746, n.round() as usize, 2.58).unwrap() - 0.004).abs() < 1e-5);
        assert!(wilson_halfwidth(1.2, 10, 2.58).is_err());
        assert!(wilson_halfwidth(0.5, 0, 2.58).is_err());
        assert!(wilson_halfwidth(0.5, 10, 0.0).is_err());
    }

    #[test]
    fn bootstrap_constant_metric_has_zero_variance() {
        let v: Vec<f64> = (1..=40).map(|i| i as f64 * 3.0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(bootstrap_variance(log_mae, &v, &v, 10, 0.75, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn bootstrap_is_seed_deterministic() {
        let p: Vec<f64> = (1..=200).map(|i| i as f64).collect();
        let t: Vec<f64> = (1..=200).map(|i| (i * 7 % 300 + 1) as f64).collect();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            bootstrap_variance(log_mae, &p, &t, 10, 0.75, &mut rng).unwrap()
        };
        assert_eq!(run(9).to_bits(), run(9).to_bits());
        assert_ne!(run(9).to_bits(), run(10).to_bits());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(bootstrap_variance(log_mae, &p, &t, 1, 0.75, &mut rng).is_err());
        assert!(bootstrap_variance(log_mae, &p, &t, 10, 0.0, &mut rng).is_err());
    }

    #[test]
    fn bootstrap_subsample_size_is_ceiling() {
        let p = vec![1.0; 7];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let seen = std::cell::Cell::new(0);
        bootstrap_variance(
            |a, _| {
                seen.set(a.len());
                Ok(0.0)
            },
            &p,
            &p,
            10,
            0.75,
            &mut rng,
        )
        .unwrap();
        assert_eq!(seen.get(), 6);
    }

    #[test]
    fn na_rule_and_exclusion() {
        let truths = [100.0, 200.0, 300.0, 400.0];
        let preds = [Prediction::Value(150.0), Prediction::Invalid, Prediction::Invalid, Prediction::Value(4000.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = evaluate(&preds, &truths, &EvalOptions::default(), &mut rng).unwrap();
        assert_eq!(r.status, ReportStatus::Na);
        assert_eq!(r.na_fraction, 0.5);
        assert_eq!(r.n_valid, 2);
        assert_eq!(r.e_acc, 0.5);
        assert!((r.log_mae - (1.5f64.log10() + 1.0) / 2.0).abs() < 1e-10);

        let preds = [Prediction::Value(150.0), Prediction::Invalid, Prediction::Value(3.0), Prediction::Value(4000.0)];
        let r = evaluate(&preds, &truths, &EvalOptions::default(), &mut rng).unwrap();
        assert_eq!(r.status, ReportStatus::Ok);
        assert_eq!(r.na_fraction, 0.25);
    }

    #[test]
    fn sharded_merge_equals_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs: Vec<(Prediction, f64)> = (0..1000)
            .map(|i| {
                let t = 10f64.powf(rng.random_range(0.0..16.0));
                let p = if i % 13 == 0 { Prediction::Invalid } else { Prediction::Value(10f64.powf(rng.random_range(0.0..16.0))) };
                (p, t)
            })
            .collect();
        let mut seq = MetricAccumulator::default();
        for &(p, t) in &pairs {
            seq.push(p, t).unwrap();
        }
        for shards in [2, 3, 7, 64] {
            let merged = pairs
                .chunks(pairs.len().div_ceil(shards))
                .rev()
                .map(|chunk| {
                    let mut a = MetricAccumulator::default();
                    for &(p, t) in chunk {
                        a.push(p, t).unwrap();
                    }
                    a
                })
                .fold(MetricAccumulator::default(), MetricAccumulator::merge);
            assert_eq!(merged, seq);
            assert_eq!(merged.log_mae().to_bits(), seq.log_mae().to_bits());
        }
    }

    #[test]
    fn constant_predictor_accuracy_is_decade_frequency() {
        let truths = [3.0, 40.0, 55.0, 70.0, 800.0, 12.0];
        let preds = vec![Prediction::Value(20.0); truths.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = evaluate(&preds, &truths, &EvalOptions::default(), &mut rng).unwrap();
        assert_eq!(r.e_acc, 4.0 / 6.0);
    }
}
