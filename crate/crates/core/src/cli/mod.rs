//! The `numline` command line.
//!
//! Every command reads explicit files and flags only. Results go to `--out`
//! (written atomically, with a `<out>.manifest.json` holding the resolved
//! configuration) or to stdout.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{self, Activations};
use crate::binning::{fit_freq_bins, DecadeBins, FreqBins, RepresentativeRule};
use crate::harness::experiment::{evaluate_model, run_experiment, ExperimentConfig};
use crate::harness::{train, Corpus, HeadKind, Model, Split};
use crate::metrics::{evaluate, Prediction};
use crate::notation::{self, NotationScheme, SchemeKind};
use crate::numparse::{self, decompose};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "numline", version, about = "Number representations for masked number prediction")]
pub struct Cli {
    /// Seed for every random draw; overrides the config's `train.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file. Without it, results go to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Experiment config (JSON); missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find numeric literals in JSON-lines text and emit them as TSV.
    Extract { file: PathBuf },
    /// Render one number per line under a notation scheme.
    Tokenize(TokenizeArgs),
    /// Fit or apply number-line discretizations.
    #[command(subcommand)]
    Bins(BinsCommand),
    /// Write the synthetic corpus described by the config as JSON lines.
    Corpus,
    /// Train one decoder head and write its checkpoint.
    Train(TrainArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Train and compare every configured head.
    Experiment(ExperimentArgs),
    /// Mantissa and leading-digit statistics.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Rank neurons as detectors of one exponent.
    Probe(ProbeArgs),
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    #[arg(long, default_value = "digits")]
    pub scheme: String,
    /// Pad length; defaults to the scheme's own.
    #[arg(long)]
    pub pad: Option<usize>,
    /// NumBERT only: split the lead digit from the remaining digits.
    #[arg(long)]
    pub lead_split: bool,
    pub file: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum BinsCommand {
    /// Fit equal-frequency bins to one number per line.
    Fit {
        #[arg(long, default_value_t = 21)]
        n_bins: usize,
        file: PathBuf,
    },
    /// Assign each number to a bin and its representative.
    Assign {
        /// Bins written by `bins fit`.
        #[arg(long, conflicts_with = "decade")]
        bins: Option<PathBuf>,
        /// Decade bins with this representative rule.
        #[arg(long, value_enum)]
        decade: Option<RuleArg>,
        /// The shipped 21-edge FinNews bins.
        #[arg(long, conflicts_with_all = ["bins", "decade"])]
        finnews: bool,
        file: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RuleArg {
    Am,
    Gm,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub head: HeadKind,
    /// JSON-lines corpus; generated from the config when absent.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr_pretrained: Option<f64>,
    #[arg(long)]
    pub lr_new: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predictions, one per line; anything unparseable counts as invalid.
    #[arg(long, requires = "truth", conflicts_with = "model")]
    pub pred: Option<PathBuf>,
    /// Ground truth, one per line.
    #[arg(long, requires = "pred")]
    pub truth: Option<PathBuf>,
    /// Checkpoint written by `train`; scored on the corpus test split.
    #[arg(long, requires = "corpus")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Comma-separated heads to train; defaults to the config's list.
    #[arg(long, value_delimiter = ',')]
    pub heads: Option<Vec<HeadKind>>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_dev: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Histogram of mantissas as CSV.
    Mantissa {
        #[arg(long, default_value_t = 18)]
        bins: usize,
        /// Also write an SVG bar chart here.
        #[arg(long)]
        svg: Option<PathBuf>,
        file: PathBuf,
    },
    /// Leading-digit frequencies against the Benford reference, as JSON.
    Benford { file: PathBuf },
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Activation matrix: `N D` header, then CSV rows or raw little-endian f64.
    #[arg(long)]
    pub activations: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<MatrixFormat>,
    /// One exponent label per line.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub target: u32,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    /// Leave the per-neuron PR curves out of the output.
    #[arg(long)]
    pub no_curves: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MatrixFormat {
    Csv,
    Bin,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    match dispatch(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("numline: error[{}]: {e}", e.code());
            if matches!(e, Error::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

/// Output of one command before it is written.
struct Artifact {
    body: Vec<u8>,
    /// Extra files written next to `--out` (name, contents).
    siblings: Vec<(String, Vec<u8>)>,
    config: Value,
}

impl Artifact {
    fn new(body: impl Into<Vec<u8>>, config: Value) -> Self {
        Artifact { body: body.into(), siblings: Vec::new(), config }
    }
}

pub fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let uses_config = matches!(
        cli.command,
        Command::Corpus | Command::Train(_) | Command::Eval(_) | Command::Experiment(_)
    );
    if cli.config.is_some() && !uses_config {
        return Err(Error::Usage("--config applies to corpus, train, eval and experiment".into()));
    }
    let seed = cli.seed.unwrap_or(0);
    let artifact = match &cli.command {
        Command::Extract { file } => cmd_extract(file)?,
        Command::Tokenize(a) => cmd_tokenize(a)?,
        Command::Bins(b) => cmd_bins(b)?,
        Command::Corpus => cmd_corpus(&load_config(cli)?)?,
        Command::Train(a) => cmd_train(a, load_config(cli)?)?,
        Command::Eval(a) => cmd_eval(a, &load_config(cli)?)?,
        Command::Experiment(a) => cmd_experiment(a, load_config(cli)?)?,
        Command::Analyze(a) => cmd_analyze(a)?,
        Command::Probe(a) => cmd_probe(a)?,
    };
    let Some(out) = &cli.out else {
        stdout.write_all(&artifact.body).map_err(|e| Error::io("<stdout>", e))?;
        return Ok(());
    };
    let mut written = vec![out.clone()];
    write_atomic(out, &artifact.body)?;
    for (name, body) in &artifact.siblings {
        let path = sibling(out, name);
        write_atomic(&path, body)?;
        written.push(path);
    }
    let manifest = json!({
        "command": command_name(&cli.command),
        "seed": seed,
        "config": artifact.config,
        "outputs": written,
        "numline_version": env!("CARGO_PKG_VERSION"),
        "created_unix": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    });
    write_atomic(&manifest_path(out), to_json(&manifest)?.as_bytes())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Extract { .. } => "extract",
        Command::Tokenize(_) => "tokenize",
        Command::Bins(BinsCommand::Fit { .. }) => "bins fit",
        Command::Bins(BinsCommand::Assign { .. }) => "bins assign",
        Command::Corpus => "corpus",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Experiment(_) => "experiment",
        Command::Analyze(AnalyzeCommand::Mantissa { .. }) => "analyze mantissa",
        Command::Analyze(AnalyzeCommand::Benford { .. }) => "analyze benford",
        Command::Probe(_) => "probe",
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn sibling(out: &Path, name: &str) -> PathBuf {
    out.with_file_name(name)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, body: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(body).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig = match &cli.config {
        Some(path) => serde_json::from_str(&read_text(path)?)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.train.seed = seed;
    }
    Ok(config)
}

/// Numbers from the first tab-separated field of each non-empty line. A
/// first line that does not parse is taken as a header.
fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let field = line.split('\t').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::InvalidInput(format!("{}:{}: not a number: {field:?}", path.display(), i + 1)))
            }
        }
    }
    Ok(out)
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    Corpus::from_jsonl(&read_text(path)?).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn cmd_extract(file: &Path) -> Result<Artifact> {
    #[derive(serde::Deserialize)]
    struct Line {
        text: String,
    }
    let mut out = String::from("line_no\tstart\tend\tsurface\tvalue\texponent\tmantissa\tstatus\n");
    for (i, line) in read_text(file)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(line)
            .map_err(|e| Error::InvalidInput(format!("{}:{}: {e}", file.display(), i + 1)))?;
        for span in numparse::extract(&parsed.text) {
            let (e, m) = span.parsed.map_or((String::new(), String::new()), |p| (p.exponent.to_string(), p.mantissa.to_string()));
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{e}\t{m}\t{}\n",
                i + 1,
                span.start,
                span.end,
                span.surface,
                span.value,
                span.status.as_str()
            ));
        }
    }
    Ok(Artifact::new(out, json!({ "input": file })))
}

fn cmd_tokenize(a: &TokenizeArgs) -> Result<Artifact> {
    let kind: SchemeKind = a.scheme.parse()?;
    let mut scheme = if a.lead_split {
        if kind != SchemeKind::NumBert {
            return Err(Error::Usage("--lead-split only applies to numbert".into()));
        }
        NotationScheme::numbert_lead_split()
    } else {
        NotationScheme::new(kind)
    };
    if let Some(pad) = a.pad {
        scheme = scheme.with_pad(pad);
    }
    scheme.validate()?;
    let mut out = String::from("value\tstatus\ttokens\n");
    for v in read_numbers(&a.file)? {
        let (status, tokens) = match decompose(v).and_then(|p| notation::render(&p, &scheme)) {
            Ok(t) => ("ok", t.tokens.join(" ")),
            Err(e) => (e.code(), String::new()),
        };
        out.push_str(&format!("{v}\t{status}\t{tokens}\n"));
    }
    Ok(Artifact::new(out, json!({ "input": a.file, "scheme": scheme })))
}

fn cmd_bins(b: &BinsCommand) -> Result<Artifact> {
    match b {
        BinsCommand::Fit { n_bins, file } => {
            let bins = fit_freq_bins(&read_numbers(file)?, *n_bins)?;
            Ok(Artifact::new(to_json(&bins)?, json!({ "input": file, "n_bins": n_bins })))
        }
        BinsCommand::Assign { bins, decade, finnews, file } => {
            enum Which {
                Decade(DecadeBins),
                Freq(FreqBins),
            }
            let which = match (bins, decade, finnews) {
                (Some(path), None, false) => {
                    let fb: FreqBins = serde_json::from_str(&read_text(path)?)?;
                    fb.validate()?;
                    Which::Freq(fb)
                }
                (None, Some(rule), false) => Which::Decade(DecadeBins::new(match rule {
                    RuleArg::Am => RepresentativeRule::Am,
                    RuleArg::Gm => RepresentativeRule::Gm,
                })),
                (None, None, true) => Which::Freq(FreqBins::finnews()),
                _ => return Err(Error::Usage("choose exactly one of --bins, --decade or --finnews".into())),
            };
            let mut out = String::from("value\tbin\trepresentative\n");
            for v in read_numbers(file)? {
                let (bin, rep) = match &which {
                    Which::Decade(d) => {
                        let k = d.bin_of(v)?;
                        (k, d.representative(k)?)
                    }
                    Which::Freq(f) => {
                        let k = f.bin_of(v)?;
                        (k, f.representative(k)?)
                    }
                };
                out.push_str(&format!("{v}\t{bin}\t{rep}\n"));
            }
            let config = json!({
                "input": file,
                "bins": bins,
                "decade": decade.map(|r| format!("{r:?}").to_lowercase()),
                "finnews": finnews,
            });
            Ok(Artifact::new(out, config))
        }
    }
}

fn cmd_corpus(config: &ExperimentConfig) -> Result<Artifact> {
    let corpus = config.corpus()?;
    Ok(Artifact::new(corpus.to_jsonl(), json!({ "corpus": config.corpus, "seed": config.train.seed })))
}

fn cmd_train(a: &TrainArgs, mut config: ExperimentConfig) -> Result<Artifact> {
    let t = &mut config.train;
    let overrides = [(&mut t.batch_size, a.batch_size), (&mut t.max_epochs, a.max_epochs), (&mut t.patience, a.patience), (&mut t.dim, a.dim)];
    for (slot, value) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(lr) = a.lr_pretrained {
        t.lr_pretrained = lr;
    }
    if let Some(lr) = a.lr_new {
        t.lr_new = lr;
    }
    let corpus = match &a.corpus {
        Some(path) => read_corpus(path)?,
        None => config.corpus()?,
    };
    let model = train(a.head, &config.train, &corpus)?;
    let resolved = json!({
        "head": a.head,
        "train": config.train,
        "corpus": match &a.corpus { Some(p) => json!(p), None => json!(config.corpus) },
    });
    Ok(Artifact::new(to_json(&model)?, resolved))
}

fn parse_prediction(s: &str) -> Prediction {
    match s.trim().parse::<f64>() {
        Ok(v) if numparse::in_range(v) => Prediction::Value(v),
        _ => Prediction::Invalid,
    }
}

fn cmd_eval(a: &EvalArgs, config: &ExperimentConfig) -> Result<Artifact> {
    let seed = config.train.seed;
    let report = match (&a.pred, &a.truth, &a.model, &a.corpus) {
        (Some(pred), Some(truth), None, _) => {
            let preds: Vec<Prediction> = read_text(pred)?.lines().filter(|l| !l.trim().is_empty()).map(parse_prediction).collect();
            let truths = read_numbers(truth)?;
            evaluate(&preds, &truths, &config.eval, &mut ChaCha8Rng::seed_from_u64(seed))?
        }
        (None, None, Some(model), Some(corpus)) => {
            let model: Model = serde_json::from_str(&read_text(model)?)?;
            model.validate()?;
            let corpus = read_corpus(corpus)?;
            if corpus.split(Split::Test).is_empty() {
                return Err(Error::InvalidInput("corpus has no test split".into()));
            }
            evaluate_model(&model, &corpus, &config.eval, seed)?
        }
        _ => return Err(Error::Usage("eval needs --pred and --truth, or --model and --corpus".into())),
    };
    let resolved = json!({
        "pred": a.pred, "truth": a.truth, "model": a.model, "corpus": a.corpus,
        "eval": config.eval, "seed": seed,
    });
    Ok(Artifact::new(to_json(&report)?, resolved))
}

fn cmd_experiment(a: &ExperimentArgs, mut config: ExperimentConfig) -> Result<Artifact> {
    if let Some(heads) = &a.heads {
        config.heads = heads.clone();
    }
    let c = &mut config.corpus;
    for (slot, value) in [(&mut c.n_train, a.n_train), (&mut c.n_dev, a.n_dev), (&mut c.n_test, a.n_test)] {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(e) = a.max_epochs {
        config.train.max_epochs = e;
    }
    let report = run_experiment(&config)?;
    let mut artifact = Artifact::new(to_json(&report)?, serde_json::to_value(&config)?);
    artifact.siblings.push(("table.tsv".into(), report.to_tsv().into_bytes()));
    Ok(artifact)
}

fn cmd_analyze(a: &AnalyzeCommand) -> Result<Artifact> {
    match a {
        AnalyzeCommand::Mantissa { bins, svg, file } => {
            let hist = analysis::mantissa_histogram(&read_numbers(file)?, *bins)?;
            if let Some(path) = svg {
                write_atomic(path, hist.to_svg().as_bytes())?;
            }
            Ok(Artifact::new(hist.to_csv(), json!({ "input": file, "bins": bins, "svg": svg })))
        }
        AnalyzeCommand::Benford { file } => {
            let report = analysis::benford_deviation(&read_numbers(file)?)?;
            Ok(Artifact::new(to_json(&report)?, json!({ "input": file })))
        }
    }
}

fn cmd_probe(a: &ProbeArgs) -> Result<Artifact> {
    let bytes = fs::read(&a.activations).map_err(|e| Error::io(&a.activations, e))?;
    let format = a.format.unwrap_or(match a.activations.extension().and_then(|e| e.to_str()) {
        Some("bin") => MatrixFormat::Bin,
        _ => MatrixFormat::Csv,
    });
    let acts = match format {
        MatrixFormat::Bin => Activations::from_binary(&bytes)?,
        MatrixFormat::Csv => Activations::from_csv(
            std::str::from_utf8(&bytes).map_err(|_| Error::InvalidInput("activations are not UTF-8 CSV".into()))?,
        )?,
    };
    let labels = read_text(&a.labels)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.trim().parse::<u32>().map_err(|_| Error::InvalidInput(format!("label {}: {l:?} is not an exponent", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut probe = analysis::neuron_pr(&acts, &labels, a.target, a.k)?;
    if a.no_curves {
        probe.curves.clear();
    }
    let config = json!({
        "activations": a.activations, "labels": a.labels, "target": a.target, "k": a.k,
        "format": format!("{format:?}").to_lowercase(),
    });
    Ok(Artifact::new(to_json(&probe)?, config))
}
