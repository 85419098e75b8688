//! Train every head on one corpus and compare them.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{gen_corpus, Corpus, CorpusSpec, Split};
use super::model::{HeadKind, Model};
use super::train::{predict_all, train, TrainConfig};
use crate::metrics::{evaluate, EvalOptions, EvalReport, ReportStatus};
use crate::numparse::decompose;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub corpus: CorpusSpec,
    /// `train.seed` also seeds corpus generation and bootstrap draws.
    pub train: TrainConfig,
    pub heads: Vec<HeadKind>,
    pub eval: EvalOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: CorpusSpec::default(),
            train: TrainConfig::default(),
            heads: HeadKind::ALL.to_vec(),
            eval: EvalOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadResult {
    pub head: HeadKind,
    pub name: String,
    pub report: EvalReport,
    /// Within the best head's E-Acc confidence half-width.
    pub highlighted: bool,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub test_decades: usize,
    pub results: Vec<HeadResult>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.train.validate()?;
        if self.heads.is_empty() {
            return Err(Error::InvalidSpec("no heads selected".into()));
        }
        if self.heads.iter().collect::<BTreeSet<_>>().len() != self.heads.len() {
            return Err(Error::InvalidSpec("heads must be distinct".into()));
        }
        Ok(())
    }

    /// The corpus every head is trained on.
    pub fn corpus(&self) -> Result<Corpus> {
        gen_corpus(&self.corpus, &mut ChaCha8Rng::seed_from_u64(self.train.seed))
    }
}

/// Scores a trained model on `corpus.test`. The bootstrap draw is seeded so
/// that every head sees the same subsamples.
pub fn evaluate_model(model: &Model, corpus: &Corpus, opts: &EvalOptions, seed: u64) -> Result<EvalReport> {
    let preds = predict_all(model, &corpus.test);
    evaluate(&preds, &corpus.answers(Split::Test), opts, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Marks heads whose E-Acc is within the best head's half-width. NA heads
/// are neither best nor highlighted.
pub fn highlight(results: &mut [HeadResult]) {
    let best = results
        .iter()
        .filter(|r| r.report.status == ReportStatus::Ok)
        .max_by(|a, b| a.report.e_acc.total_cmp(&b.report.e_acc))
        .map(|r| (r.report.e_acc, r.report.e_acc_ci_halfwidth));
    for r in results.iter_mut() {
        r.highlighted = match best {
            Some((acc, hw)) => r.report.status == ReportStatus::Ok && acc - r.report.e_acc <= hw,
            None => false,
        };
    }
}

pub fn run_on_corpus(config: &ExperimentConfig, corpus: &Corpus) -> Result<ExperimentReport> {
    config.validate()?;
    let mut results = Vec::with_capacity(config.heads.len());
    for &head in &config.heads {
        let model = train(head, &config.train, corpus)?;
        let report = evaluate_model(&model, corpus, &config.eval, config.train.seed)?;
        results.push(HeadResult {
            head,
            name: head.name().to_string(),
            report,
            highlighted: false,
            best_epoch: model.best_epoch,
            epochs_run: model.history.len(),
        });
    }
    highlight(&mut results);
    let test_decades = corpus
        .test
        .iter()
        .map(|e| decompose(e.answer).map(|p| p.exponent))
        .collect::<Result<BTreeSet<_>>>()?
        .len();
    Ok(ExperimentReport {
        seed: config.train.seed,
        n_train: corpus.train.len(),
        n_dev: corpus.dev.len(),
        n_test: corpus.test.len(),
        test_decades,
        results,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    run_on_corpus(config, &config.corpus()?)
}

impl ExperimentReport {
    pub fn result(&self, head: HeadKind) -> Option<&HeadResult> {
        self.results.iter().find(|r| r.head == head)
    }

    /// Tab-separated comparison table; highlighted rows carry a `*`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("head\te_acc\te_acc_ci\tlog_mae\tbootstrap_var\tna_fraction\tstatus\thighlight\n");
        for r in &self.results {
            let rep = &r.report;
            let (acc, mae) = match rep.status {
                ReportStatus::Ok => (format!("{:.2}", 100.0 * rep.e_acc), format!("{:.3}", rep.log_mae)),
                ReportStatus::Na => ("NA".to_string(), "NA".to_string()),
            };
            out.push_str(&format!(
                "{}\t{}\t{:.2}\t{}\t{:.3e}\t{:.4}\t{}\t{}\n",
                r.name,
                acc,
                100.0 * rep.e_acc_ci_halfwidth,
                mae,
                rep.bootstrap_var_log_mae,
                rep.na_fraction,
                if rep.status == ReportStatus::Ok { "ok" } else { "na" },
                if r.highlighted { "*" } else { "" },
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            corpus: CorpusSpec { n_train: 500, n_dev: 100, n_test: 200, ..CorpusSpec::default() },
            train: TrainConfig { max_epochs: 3, patience: 1, dim: 16, seed: 11, ..TrainConfig::default() },
            heads: vec![HeadKind::ConstMean, HeadKind::ConstMode, HeadKind::VocabAm, HeadKind::DExp],
            eval: EvalOptions::default(),
        }
    }

    fn report(e_acc: f64, hw: f64, status: ReportStatus) -> EvalReport {
        EvalReport {
            n: 100,
            n_valid: 100,
            e_acc,
            e_acc_ci_halfwidth: hw,
            log_mae: 0.5,
            na_fraction: 0.0,
            bootstrap_var_log_mae: 0.0,
            status,
        }
    }

    #[test]
    fn highlight_follows_best_half_width() {
        let mk = |head: HeadKind, r: EvalReport| HeadResult {
            head,
            name: head.name().into(),
            report: r,
            highlighted: false,
            best_epoch: 0,
            epochs_run: 0,
        };
        let mut rows = vec![
            mk(HeadKind::VocabAm, report(0.80, 0.03, ReportStatus::Ok)),
            mk(HeadKind::DExp, report(0.78, 0.03, ReportStatus::Ok)),
            mk(HeadKind::ConstMean, report(0.40, 0.05, ReportStatus::Ok)),
            mk(HeadKind::SubwordPad8, report(0.95, 0.01, ReportStatus::Na)),
        ];
        highlight(&mut rows);
        let flags: Vec<bool> = rows.iter().map(|r| r.highlighted).collect();
        assert_eq!(flags, vec![true, true, false, false]);
    }

    #[test]
    fn constant_baselines_match_decade_counts() {
        let config = small_config();
        let corpus = config.corpus().unwrap();
        let rep = run_on_corpus(&config, &corpus).unwrap();
        for head in [HeadKind::ConstMean, HeadKind::ConstMode] {
            let model = train(head, &config.train, &corpus).unwrap();
            let e = decompose(model.constant.unwrap()).unwrap().exponent;
            let hits = corpus.test.iter().filter(|x| decompose(x.answer).unwrap().exponent == e).count();
            assert_eq!(rep.result(head).unwrap().report.e_acc, hits as f64 / corpus.test.len() as f64);
        }
        for r in &rep.results {
            assert_eq!(r.report.na_fraction, 0.0);
        }
        assert_eq!(rep.to_tsv().lines().count(), 1 + config.heads.len());
    }

    #[test]
    fn experiment_is_reproducible() {
        let config = small_config();
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn config_json_round_trip() {
        let c = ExperimentConfig::default();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string_pretty(&c).unwrap()).unwrap();
        assert_eq!(c, back);
        let mut dup = small_config();
        dup.heads.push(HeadKind::DExp);
        assert!(dup.validate().is_err());
    }
}
