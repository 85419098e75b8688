//! Synthetic masked-number corpora.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::numparse::{self, ParsedNumber, SpanStatus, MAX_VALUE};
use crate::{Error, Result};

pub const MASK: &str = "[MASK]";
pub const NUM: &str = "[NUM]";
pub const BAD_NUM: &str = "[BADNUM]";
const CTX_SLOT: &str = "{ctx}";
const YEAR_SLOT: &str = "{year}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueModel {
    /// `log10(answer) ~ N(log10_mean, log10_sd)`.
    LogNormal { log10_mean: f64, log10_sd: f64 },
    /// Integer years from a rounded normal, clamped to `[min, max]`.
    Year { center: f64, sd: f64, min: f64, max: f64 },
    /// The text carries a context number `c` with `log10 c ~ U(ctx_min,
    /// ctx_max)`; the answer is `c * 10^N(ratio_mean, ratio_sd)`.
    Relative { ctx_log10_min: f64, ctx_log10_max: f64, ratio_log10_mean: f64, ratio_log10_sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub name: String,
    /// Sentence with one `[MASK]`; relative templates also hold `{ctx}`.
    pub text: String,
    #[serde(default = "one")]
    pub weight: f64,
    /// Decimal places kept in the answer; 0 for counts.
    #[serde(default)]
    pub max_decimals: u32,
    pub value: ValueModel,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub templates: Vec<TemplateSpec>,
    /// Optional lead-in phrases; `{year}` is replaced by a year in 1995..=2020.
    pub prefixes: Vec<String>,
    pub prefix_prob: f64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    /// Each answer keeps a uniformly drawn number of significant digits
    /// from this range.
    pub min_sig_digits: usize,
    pub max_sig_digits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnpExample {
    pub text: String,
    pub template_tokens: Vec<String>,
    pub answer: f64,
    pub context_numbers: Vec<ParsedNumber>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub train: Vec<MnpExample>,
    pub dev: Vec<MnpExample>,
    pub test: Vec<MnpExample>,
}

#[derive(Serialize, Deserialize)]
struct CorpusLine {
    text: String,
    answer: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

fn word_token(raw: &str) -> String {
    let t = raw.trim_matches(|c: char| ",.;:!?\"'()".contains(c));
    if t == MASK || t == NUM || t == BAD_NUM {
        t.to_string()
    } else {
        t.to_lowercase()
    }
}

impl MnpExample {
    /// Tokenizes a sentence: numeric literals become `[NUM]` (their values
    /// kept as context numbers), everything else is lowercased words.
    pub fn from_text(text: &str, answer: f64) -> Result<Self> {
        if !numparse::in_range(answer) {
            return Err(Error::OutOfRange(answer));
        }
        let mut rewritten = String::with_capacity(text.len() + 16);
        let mut context_numbers = Vec::new();
        let mut last = 0;
        for span in numparse::extract(text) {
            rewritten.push_str(&text[last..span.start]);
            match (span.status, span.parsed) {
                (SpanStatus::Ok, Some(p)) => {
                    rewritten.push_str(&format!(" {NUM} "));
                    context_numbers.push(p);
                }
                _ => rewritten.push_str(&format!(" {BAD_NUM} ")),
            }
            last = span.end;
        }
        rewritten.push_str(&text[last..]);
        let rewritten = rewritten.replace(MASK, &format!(" {MASK} "));
        let template_tokens: Vec<String> =
            rewritten.split_whitespace().map(word_token).filter(|t| !t.is_empty()).collect();
        let masks = template_tokens.iter().filter(|t| *t == MASK).count();
        if masks != 1 {
            return Err(Error::InvalidInput(format!("expected exactly one {MASK}, found {masks} in {text:?}")));
        }
        Ok(MnpExample { text: text.to_string(), template_tokens, answer, context_numbers })
    }
}

impl Corpus {
    pub fn split(&self, split: Split) -> &[MnpExample] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for split in [Split::Train, Split::Dev, Split::Test] {
            for ex in self.split(split) {
                let line = CorpusLine { text: ex.text.clone(), answer: ex.answer, split: Some(split) };
                out.push_str(&serde_json::to_string(&line).expect("corpus line serializes"));
                out.push('\n');
            }
        }
        out
    }

    /// Reads JSON lines `{"text", "answer", "split"?}`. Lines without a
    /// split are training data; when no line is marked dev, the last tenth
    /// of the training lines becomes the dev split.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut corpus = Corpus::default();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: CorpusLine = serde_json::from_str(line)
                .map_err(|e| Error::InvalidInput(format!("corpus line {}: {e}", i + 1)))?;
            let ex = MnpExample::from_text(&parsed.text, parsed.answer)
                .map_err(|e| Error::InvalidInput(format!("corpus line {}: {e}", i + 1)))?;
            match parsed.split.unwrap_or(Split::Train) {
                Split::Train => corpus.train.push(ex),
                Split::Dev => corpus.dev.push(ex),
                Split::Test => corpus.test.push(ex),
            }
        }
        if corpus.dev.is_empty() && corpus.train.len() >= 2 {
            let cut = corpus.train.len() - (corpus.train.len() / 10).max(1);
            corpus.dev = corpus.train.split_off(cut);
        }
        Ok(corpus)
    }

    pub fn answers(&self, split: Split) -> Vec<f64> {
        self.split(split).iter().map(|e| e.answer).collect()
    }
}

/// Rounds to `sig` significant digits through the decimal representation.
pub fn round_sig(v: f64, sig: usize) -> f64 {
    format!("{:.*e}", sig.max(1) - 1, v).parse().expect("formatted float parses")
}

/// Integers of five or more digits get thousands separators.
fn format_number(v: f64) -> String {
    let s = format!("{v}");
    if v.fract() != 0.0 || s.len() < 5 {
        return s;
    }
    let mut out = String::with_capacity(s.len() + s.len() / 3);
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn round_decimals(v: f64, decimals: u32) -> f64 {
    format!("{:.*}", decimals as usize, v).parse().expect("formatted float parses")
}

fn clamp_answer(v: f64, sig: usize, decimals: u32) -> f64 {
    round_decimals(round_sig(v, sig), decimals).clamp(1.0, MAX_VALUE)
}

fn sample_log_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let normal = Normal::new(mean, sd).expect("validated sd");
    // resample the lower tail instead of piling mass at 1
    for _ in 0..64 {
        let v = 10f64.powf(normal.sample(rng));
        if v >= 1.0 {
            return v;
        }
    }
    1.0
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.templates.len() < 5 {
            return Err(Error::InvalidSpec(format!("need at least 5 templates, got {}", self.templates.len())));
        }
        if !self.templates.iter().any(|t| matches!(t.value, ValueModel::Year { .. })) {
            return Err(Error::InvalidSpec("no year template".into()));
        }
        if self.min_sig_digits == 0 || self.min_sig_digits > self.max_sig_digits || self.max_sig_digits > 15 {
            return Err(Error::InvalidSpec("need 1 <= min_sig_digits <= max_sig_digits <= 15".into()));
        }
        if !(0.0..=1.0).contains(&self.prefix_prob) || (self.prefix_prob > 0.0 && self.prefixes.is_empty()) {
            return Err(Error::InvalidSpec("prefix_prob must be in [0, 1] and needs prefixes".into()));
        }
        if self.n_train == 0 || self.n_dev == 0 || self.n_test == 0 {
            return Err(Error::InvalidSpec("every split needs at least one example".into()));
        }
        for t in &self.templates {
            let bad = |why: &str| Err(Error::InvalidSpec(format!("template {:?}: {why}", t.name)));
            if t.text.matches(MASK).count() != 1 {
                return bad("needs exactly one [MASK]");
            }
            if t.text.chars().any(|c| c.is_ascii_digit()) {
                return bad("must not contain literal digits");
            }
            if !(t.weight > 0.0 && t.weight.is_finite()) {
                return bad("weight must be positive");
            }
            let has_ctx = t.text.contains(CTX_SLOT);
            match t.value {
                ValueModel::LogNormal { log10_sd, log10_mean } => {
                    if log10_sd.is_nan() || log10_sd <= 0.0 || !(0.0..=16.0).contains(&log10_mean) || has_ctx {
                        return bad("log-normal needs sd > 0, mean in [0, 16] and no {ctx}");
                    }
                }
                ValueModel::Year { sd, min, max, .. } => {
                    if sd.is_nan() || sd <= 0.0 || !(1.0..max).contains(&min) || has_ctx {
                        return bad("year needs sd > 0, 1 <= min < max and no {ctx}");
                    }
                }
                ValueModel::Relative { ctx_log10_min, ctx_log10_max, ratio_log10_sd, .. } => {
                    if !has_ctx || !(0.0 <= ctx_log10_min && ctx_log10_min < ctx_log10_max && ctx_log10_max <= 16.0) || ratio_log10_sd.is_nan() || ratio_log10_sd <= 0.0 {
                        return bad("relative needs {ctx}, 0 <= ctx_min < ctx_max <= 16 and sd > 0");
                    }
                }
            }
        }
        Ok(())
    }

    fn sample_example<R: Rng + ?Sized>(&self, rng: &mut R, total_weight: f64) -> Result<MnpExample> {
        let mut pick = rng.random::<f64>() * total_weight;
        let mut template = self.templates.last().expect("validated non-empty");
        for t in &self.templates {
            if pick < t.weight {
                template = t;
                break;
            }
            pick -= t.weight;
        }
        let sig = rng.random_range(self.min_sig_digits..=self.max_sig_digits);
        let dec = template.max_decimals;
        let mut text = template.text.clone();
        let answer = match template.value {
            ValueModel::LogNormal { log10_mean, log10_sd } => {
                clamp_answer(sample_log_normal(rng, log10_mean, log10_sd), sig, dec)
            }
            ValueModel::Year { center, sd, min, max } => {
                let y = Normal::new(center, sd).expect("validated sd").sample(rng);
                y.round().clamp(min, max)
            }
            ValueModel::Relative { ctx_log10_min, ctx_log10_max, ratio_log10_mean, ratio_log10_sd } => {
                let ctx = clamp_answer(10f64.powf(rng.random_range(ctx_log10_min..ctx_log10_max)), sig, 0);
                text = text.replace(CTX_SLOT, &format_number(ctx));
                let ratio = Normal::new(ratio_log10_mean, ratio_log10_sd).expect("validated sd").sample(rng);
                clamp_answer(ctx * 10f64.powf(ratio), sig, dec)
            }
        };
        if self.prefix_prob > 0.0 && rng.random::<f64>() < self.prefix_prob {
            let prefix = &self.prefixes[rng.random_range(0..self.prefixes.len())];
            let year = rng.random_range(1995..=2020);
            text = format!("{} {text}", prefix.replace(YEAR_SLOT, &year.to_string()));
        }
        MnpExample::from_text(&text, answer)
    }
}

/// Draws train, dev and test splits from `spec`. Identical seeds give
/// identical corpora.
pub fn gen_corpus<R: Rng + ?Sized>(spec: &CorpusSpec, rng: &mut R) -> Result<Corpus> {
    spec.validate()?;
    let total_weight: f64 = spec.templates.iter().map(|t| t.weight).sum();
    let mut draw = |n: usize| (0..n).map(|_| spec.sample_example(rng, total_weight)).collect::<Result<Vec<_>>>();
    let corpus = Corpus { train: draw(spec.n_train)?, dev: draw(spec.n_dev)?, test: draw(spec.n_test)? };
    let decades: BTreeSet<u32> = [Split::Train, Split::Dev, Split::Test]
        .iter()
        .flat_map(|&s| corpus.split(s).iter())
        .map(|e| numparse::decompose(e.answer).map(|p| p.exponent))
        .collect::<Result<_>>()?;
    if decades.len() < 6 {
        return Err(Error::InvalidSpec(format!("answers span only {} decades; need at least 6", decades.len())));
    }
    Ok(corpus)
}

fn log_normal(name: &str, text: &str, log10_mean: f64, log10_sd: f64) -> TemplateSpec {
    TemplateSpec {
        name: name.into(),
        text: text.into(),
        weight: 1.0,
        max_decimals: 0,
        value: ValueModel::LogNormal { log10_mean, log10_sd },
    }
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            templates: vec![
                log_normal("tiger", "An adult tiger can weigh [MASK] pounds.", 2.78, 0.2),
                TemplateSpec {
                    name: "year".into(),
                    text: "The law was passed in [MASK].".into(),
                    weight: 1.0,
                    max_decimals: 0,
                    value: ValueModel::Year { center: 2010.0, sd: 6.0, min: 1990.0, max: 2030.0 },
                },
                TemplateSpec {
                    max_decimals: 2,
                    ..log_normal("share_price", "Shares of the firm closed at $[MASK] on Friday.", 1.3, 0.35)
                },
                log_normal("population", "The city has a population of [MASK] people.", 5.9, 0.45),
                log_normal("fund_assets", "The fund manages assets of $[MASK].", 9.4, 0.5),
                log_normal("bridge", "The bridge spans [MASK] meters across the river.", 2.6, 0.35),
                log_normal("employees", "The company employs [MASK] workers worldwide.", 3.7, 0.5),
                log_normal("house_price", "A typical house in the area costs $[MASK].", 5.5, 0.25),
                log_normal("galaxy", "The nearest galaxy lies [MASK] km from Earth.", 14.2, 0.4),
                log_normal("score", "The team scored [MASK] points in the final.", 1.2, 0.3),
                log_normal("debt", "The national debt reached $[MASK] last year.", 12.6, 0.3),
                log_normal("transistors", "The new chip holds [MASK] transistors.", 8.3, 0.5),
                log_normal("dose", "The patient took [MASK] pills per day.", 0.4, 0.2),
                TemplateSpec {
                    name: "returns".into(),
                    text: "Sales rose to {ctx} units, while returns were [MASK] units.".into(),
                    weight: 1.0,
                    max_decimals: 0,
                    value: ValueModel::Relative {
                        ctx_log10_min: 2.0,
                        ctx_log10_max: 8.0,
                        ratio_log10_mean: -1.0,
                        ratio_log10_sd: 0.15,
                    },
                },
            ],
            prefixes: vec![
                "Analysts said".into(),
                "According to the report,".into(),
                "In {year},".into(),
                "Reports confirmed that".into(),
            ],
            prefix_prob: 0.5,
            n_train: 20_000,
            n_dev: 2_000,
            n_test: 2_000,
            min_sig_digits: 2,
            max_sig_digits: 6,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_spec() -> CorpusSpec {
        CorpusSpec { n_train: 400, n_dev: 50, n_test: 50, ..CorpusSpec::default() }
    }

    #[test]
    fn from_text_tokenizes_numbers() {
        let ex = MnpExample::from_text("In 2015, sales rose to 1,700,000 units, while returns were [MASK] units.", 170000.0).unwrap();
        assert_eq!(ex.context_numbers.len(), 2);
        assert_eq!(ex.context_numbers[1].value, 1_700_000.0);
        assert_eq!(ex.template_tokens.iter().filter(|t| *t == NUM).count(), 2);
        assert_eq!(ex.template_tokens[0], "in");
        assert!(ex.template_tokens.contains(&MASK.to_string()));
        assert!(MnpExample::from_text("no mask here", 5.0).is_err());
        assert!(MnpExample::from_text("[MASK] and [MASK]", 5.0).is_err());
        assert!(MnpExample::from_text("[MASK]", 0.5).is_err());
    }

    #[test]
    fn tiger_template_lands_in_decade_two() {
        let spec = CorpusSpec {
            templates: vec![log_normal("tiger", "An adult tiger can weigh [MASK] pounds.", 2.78, 0.2)],
            ..small_spec()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let total = 1.0;
        let hits = (0..1000)
            .filter(|_| {
                let ex = spec.sample_example(&mut rng, total).unwrap();
                numparse::decompose(ex.answer).unwrap().exponent == 2
            })
            .count();
        assert!(hits > 800, "{hits}");
    }

    #[test]
    fn year_template_stays_in_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let corpus = gen_corpus(&small_spec(), &mut rng).unwrap();
        let years: Vec<f64> = corpus.train.iter().filter(|e| e.text.starts_with("The law") || e.text.contains("law was passed")).map(|e| e.answer).collect();
        assert!(!years.is_empty());
        for y in years {
            assert!((1990.0..=2030.0).contains(&y) && y.fract() == 0.0);
            let m = numparse::decompose(y).unwrap().mantissa;
            assert!((1.99..=2.03).contains(&m), "{m}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_corpus(&small_spec(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = gen_corpus(&small_spec(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        let c = gen_corpus(&small_spec(), &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_ne!(a.to_jsonl(), c.to_jsonl());
    }

    #[test]
    fn jsonl_round_trip() {
        let a = gen_corpus(&small_spec(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = Corpus::from_jsonl(&a.to_jsonl()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn jsonl_without_splits_holds_out_dev() {
        let lines: String = (1..=20).map(|i| format!("{{\"text\": \"x [MASK] y\", \"answer\": {i}}}\n")).collect();
        let c = Corpus::from_jsonl(&lines).unwrap();
        assert_eq!((c.train.len(), c.dev.len(), c.test.len()), (18, 2, 0));
        assert!(Corpus::from_jsonl("{\"text\": \"x\", \"answer\": 3}").is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = small_spec();
        s.templates.truncate(4);
        assert!(matches!(s.validate(), Err(Error::InvalidSpec(_))));
        let mut s = small_spec();
        s.templates.retain(|t| !matches!(t.value, ValueModel::Year { .. }));
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.templates[0].text = "An adult tiger can weigh 5 [MASK] pounds.".into();
        assert!(s.validate().is_err());
        // narrow corpora fail the decade-coverage check
        let mut s = small_spec();
        s.templates = (0..5).map(|i| log_normal(&format!("t{i}"), "a [MASK] b", 2.0, 0.1)).collect();
        s.templates.push(TemplateSpec {
            name: "year".into(),
            text: "in [MASK]".into(),
            weight: 1.0,
            max_decimals: 0,
            value: ValueModel::Year { center: 2000.0, sd: 1.0, min: 1990.0, max: 2010.0 },
        });
        assert!(matches!(gen_corpus(&s, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn formatting_helpers() {
        assert_eq!(format_number(1234567.0), "1,234,567");
        assert_eq!(format_number(1234.0), "1234");
        assert_eq!(format_number(12.5), "12.5");
        assert_eq!(round_sig(123456.0, 3), 123000.0);
        assert_eq!(round_sig(1.6349, 3), 1.63);
        assert_eq!(clamp_answer(1234.5678, 6, 0), 1235.0);
        assert_eq!(clamp_answer(19.9549, 5, 2), 19.95);
        assert_eq!(clamp_answer(0.4, 3, 0), 1.0);
    }
}
