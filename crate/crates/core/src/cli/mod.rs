//! The `polcov` command line: train, evaluate, tune, embed and analyze.
//!
//! Every flag can also come from a `POLCOV_*` environment variable; flags
//! take precedence. Exit codes are 0 on success, 1 for usage errors, 2 for
//! data errors and 3 for model errors.

mod coverage;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

pub use coverage::{analyze_policy, read_policy, render_report, split_blocks, CoverageReport, ReportFormat, SegmentPrediction};

use crate::corpus::{load_corpus, Dataset, Schema};
use crate::embeddings::{save_word2vec_text, train_embeddings, Algorithm, EmbeddingConfig};
use crate::error::{Error, Result};
use crate::evalharness::{render_flat_table, render_json, render_table, SearchSpace};
use crate::features::build_vocabulary;
use crate::pipeline::{self, fit, tokenize_dataset, EmbeddingChoice, ModelType, PipelineConfig, Strategy};

#[derive(Parser, Debug)]
#[command(name = "polcov", version, about = "Data-practice classification and coverage analysis for privacy policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train one model on a corpus and write its artifact.
    Train(TrainArgs),
    /// Stratified k-fold cross-validation with a metrics report.
    Evaluate(EvaluateArgs),
    /// Grid or random hyperparameter search.
    Tune(TuneArgs),
    /// Train word2vec vectors on corpus text.
    Embed(EmbedArgs),
    /// Report which data practices a policy covers.
    Analyze(AnalyzeArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelTypeArg {
    Mnb,
    Svm,
    Lr,
    Cnn,
    Lstm,
    #[value(alias = "bi-lstm")]
    Bilstm,
    #[value(alias = "cnn-lstm")]
    Cnnlstm,
}

impl From<ModelTypeArg> for ModelType {
    fn from(m: ModelTypeArg) -> Self {
        match m {
            ModelTypeArg::Mnb => ModelType::Mnb,
            ModelTypeArg::Svm => ModelType::Svm,
            ModelTypeArg::Lr => ModelType::Lr,
            ModelTypeArg::Cnn => ModelType::Cnn,
            ModelTypeArg::Lstm => ModelType::Lstm,
            ModelTypeArg::Bilstm => ModelType::Bilstm,
            ModelTypeArg::Cnnlstm => ModelType::Cnnlstm,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemaArg {
    CanonicalJson,
    Opp115Raw,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Grid,
    Random,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Cbow,
    Skipgram,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Text,
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    #[arg(long, env = "POLCOV_CORPUS")]
    pub corpus: PathBuf,
    #[arg(long, env = "POLCOV_SCHEMA", value_enum, default_value = "canonical-json")]
    pub schema: SchemaArg,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, env = "POLCOV_MODEL_TYPE", value_enum)]
    pub model_type: ModelTypeArg,
    /// word2vec text file for the neural models; without it vectors are
    /// trained on the corpus.
    #[arg(long, env = "POLCOV_EMBEDDINGS")]
    pub embeddings: Option<PathBuf>,
    /// JSON object of dotted overrides, e.g. {"lr.c": 1.0}.
    #[arg(long, env = "POLCOV_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "POLCOV_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, env = "POLCOV_OUT")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, env = "POLCOV_FOLDS", default_value_t = 10)]
    pub folds: usize,
    /// JSON report; a `.csv` metrics table and a `.timings.json` file are
    /// written next to it.
    #[arg(long, env = "POLCOV_REPORT")]
    pub report: PathBuf,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, env = "POLCOV_STRATEGY", value_enum)]
    pub strategy: StrategyArg,
    /// JSON object mapping dotted parameter names to candidate lists.
    /// Defaults to the built-in space for lr and the recurrent models.
    #[arg(long, env = "POLCOV_SPACE")]
    pub space: Option<PathBuf>,
    #[arg(long, env = "POLCOV_BUDGET")]
    pub budget: Option<usize>,
    #[arg(long, env = "POLCOV_FOLDS", default_value_t = 10)]
    pub folds: usize,
    /// JSON outcome; per-trial runtimes go to a `.trials.jsonl` file next
    /// to it.
    #[arg(long, env = "POLCOV_REPORT")]
    pub report: PathBuf,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    #[arg(long, env = "POLCOV_ALGO", value_enum, default_value = "cbow")]
    pub algo: AlgoArg,
    #[arg(long, env = "POLCOV_DIM", default_value_t = 300)]
    pub dim: usize,
    #[arg(long, env = "POLCOV_WINDOW", default_value_t = 5)]
    pub window: usize,
    #[arg(long, env = "POLCOV_EPOCHS", default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, env = "POLCOV_MIN_COUNT", default_value_t = 1)]
    pub min_count: usize,
    #[arg(long, env = "POLCOV_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, env = "POLCOV_OUT")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long, env = "POLCOV_MODEL")]
    pub model: PathBuf,
    /// Plain text (blank lines separate segments) or a pre-segmented
    /// `.json` policy.
    #[arg(long, env = "POLCOV_POLICY")]
    pub policy: PathBuf,
    #[arg(long, env = "POLCOV_FORMAT", value_enum, default_value = "text")]
    pub format: FormatArg,
    /// Write here instead of stdout.
    #[arg(long, env = "POLCOV_OUT")]
    pub out: Option<PathBuf>,
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Io { .. } | Error::Malformed { .. } | Error::MissingFile(_) | Error::MissingSegment { .. } | Error::Data(_) | Error::Json(_) => 2,
        Error::Model(_) | Error::Diverged { .. } | Error::DimensionMismatch { .. } | Error::Numeric(_) => 3,
        Error::Fold { source, .. } => exit_code(source),
    }
}

fn load(c: &CorpusArgs) -> Result<Dataset> {
    let schema = match c.schema {
        SchemaArg::CanonicalJson => Schema::CanonicalJson,
        SchemaArg::Opp115Raw => Schema::Opp115Raw,
    };
    let ds = load_corpus(&c.corpus, schema)?;
    info!("loaded {} segments from {} policies", ds.len(), ds.policies.len());
    Ok(ds)
}

fn pipeline_config(m: &ModelArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::new(m.model_type.into());
    if let Some(path) = &m.config {
        cfg = cfg.with_overrides_file(path)?;
    }
    if let Some(path) = &m.embeddings {
        cfg.embeddings = EmbeddingChoice::Pretrained {
            path: path.clone(),
            binary: path.extension().is_some_and(|e| e == "bin"),
        };
    }
    Ok(cfg)
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn train(a: &TrainArgs) -> Result<()> {
    let cfg = pipeline_config(&a.model)?;
    let ds = load(&a.corpus)?;
    let resources = if cfg.model_type.is_neural() {
        Some(pipeline::build_resources(&cfg, &tokenize_dataset(&ds), a.model.seed)?)
    } else {
        None
    };
    let artifact = fit(&cfg, &ds, resources.as_ref(), a.model.seed)?;
    artifact.save(&a.out)?;
    println!("wrote {} model to {}", artifact.model_type(), a.out.display());
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let cfg = pipeline_config(&a.model)?;
    let ds = load(&a.corpus)?;
    let (report, timings) = pipeline::evaluate(&cfg, &ds, a.folds, a.model.seed)?;
    write(&a.report, &render_json(&report)?)?;
    write(&sibling(&a.report, ".csv"), &render_flat_table(&report)?)?;
    write(&sibling(&a.report, ".timings.json"), &serde_json::to_string_pretty(&timings)?)?;
    print!("{}", render_table(&report));
    Ok(())
}

fn tune(a: &TuneArgs) -> Result<()> {
    let cfg = pipeline_config(&a.model)?;
    let space = match &a.space {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None if cfg.model_type == ModelType::Lr => SearchSpace::logistic_regression(),
        None if cfg.model_type.is_neural() => SearchSpace::recurrent(),
        None => return Err(Error::Config(format!("no built-in search space for {}; pass --space", cfg.model_type))),
    };
    let strategy = match (a.strategy, a.budget) {
        (StrategyArg::Grid, _) => Strategy::Grid,
        (StrategyArg::Random, Some(budget)) => Strategy::Random { budget },
        (StrategyArg::Random, None) => return Err(Error::Config("random search needs --budget".into())),
    };
    let ds = load(&a.corpus)?;
    let outcome = pipeline::tune(&cfg, &space, strategy, &ds, a.folds, a.model.seed)?;
    write(&a.report, &serde_json::to_string_pretty(&outcome)?)?;
    write(&sibling(&a.report, ".trials.jsonl"), &outcome.trial_log()?)?;
    match outcome.best_trial() {
        Some(t) => println!(
            "best micro-F {:.4} with {} ({} trials)",
            t.objective.unwrap_or_default(),
            serde_json::to_string(&t.config)?,
            outcome.trials.len()
        ),
        None => return Err(Error::Model("every trial failed".into())),
    }
    Ok(())
}

fn embed(a: &EmbedArgs) -> Result<()> {
    let ds = load(&a.corpus)?;
    let tokens = tokenize_dataset(&ds);
    let vocab = build_vocabulary(&tokens, a.min_count)?;
    let config = EmbeddingConfig {
        dimension: a.dim,
        window: a.window,
        epochs: a.epochs,
        algorithm: match a.algo {
            AlgoArg::Cbow => Algorithm::Cbow,
            AlgoArg::Skipgram => Algorithm::Skipgram,
        },
        seed: a.seed,
        ..EmbeddingConfig::default()
    };
    let table = train_embeddings(&tokens, &vocab, &config)?;
    save_word2vec_text(&table, &vocab, &a.out)?;
    println!("wrote {} x {} vectors to {}", table.rows(), table.dimension, a.out.display());
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let model = pipeline::ModelArtifact::load(&a.model).map_err(|e| match e {
        Error::Io { path, source } => Error::Model(format!("cannot read model {}: {source}", path.display())),
        other => other,
    })?;
    let (id, segments) = read_policy(&a.policy)?;
    let report = analyze_policy(&id, &segments, &model)?;
    let format = match a.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Text => ReportFormat::Text,
    };
    let body = render_report(&report, format)?;
    match &a.out {
        Some(p) => write(p, &body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Tune(a) => tune(a),
        Command::Embed(a) => embed(a),
        Command::Analyze(a) => analyze(a),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::Data("x".into())), 2);
        assert_eq!(exit_code(&Error::MissingFile("x".into())), 2);
        assert_eq!(exit_code(&Error::Model("x".into())), 3);
        let nested = Error::Fold {
            fold: 2,
            source: Box::new(Error::Diverged { epoch: 1, loss: f64::NAN }),
        };
        assert_eq!(exit_code(&nested), 3);
    }

    #[test]
    fn parsing_and_sibling_paths() {
        let cli = Cli::try_parse_from(["polcov", "evaluate", "--model-type", "cnn-lstm", "--corpus", "c", "--report", "r.json"]).unwrap();
        match cli.command {
            Command::Evaluate(a) => {
                assert_eq!(a.model.model_type, ModelTypeArg::Cnnlstm);
                assert_eq!(a.folds, 10);
                assert_eq!(a.corpus.schema, SchemaArg::CanonicalJson);
            }
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["polcov", "train", "--model-type", "gru"]).is_err());
        assert_eq!(sibling(Path::new("out/r.json"), ".csv"), PathBuf::from("out/r.csv"));
    }
}
