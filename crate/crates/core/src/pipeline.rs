//! End-to-end training, cross-validation and tuning for every model type
//! behind a single serializable configuration.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classical::{train_lr, train_mnb, train_svm, ClassicalArtifact, ClassicalModel, FeatureMode, LrConfig, SvmConfig};
use crate::corpus::{DataPractice, Dataset};
use crate::embeddings::{load_pretrained, load_pretrained_binary, train_embeddings, EmbeddingConfig, EmbeddingTable};
use crate::error::{Error, Result};
use crate::evalharness::{fingerprint, grid_search, random_search, run_cv, Config, CvReport, CvTimings, SearchOutcome, SearchSpace};
use crate::features::{build_vocabulary, fit_tfidf, length_percentile, tokenize, transform_tfidf, Vocabulary};
use crate::neural::{build_model, train_model, Architecture, ModelConfig, NeuralArtifact};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Mnb,
    Svm,
    Lr,
    Cnn,
    Lstm,
    Bilstm,
    Cnnlstm,
}

impl ModelType {
    pub const ALL: [ModelType; 7] = [
        ModelType::Mnb,
        ModelType::Svm,
        ModelType::Lr,
        ModelType::Cnn,
        ModelType::Lstm,
        ModelType::Bilstm,
        ModelType::Cnnlstm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelType::Mnb => "mnb",
            ModelType::Svm => "svm",
            ModelType::Lr => "lr",
            ModelType::Cnn => "cnn",
            ModelType::Lstm => "lstm",
            ModelType::Bilstm => "bilstm",
            ModelType::Cnnlstm => "cnnlstm",
        }
    }

    pub fn architecture(self) -> Option<Architecture> {
        match self {
            ModelType::Cnn => Some(Architecture::Cnn),
            ModelType::Lstm => Some(Architecture::Lstm),
            ModelType::Bilstm => Some(Architecture::Bilstm),
            ModelType::Cnnlstm => Some(Architecture::Cnnlstm),
            _ => None,
        }
    }

    pub fn is_neural(self) -> bool {
        self.architecture().is_some()
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        ModelType::ALL
            .into_iter()
            .find(|m| m.as_str() == lower)
            .or_else(|| lower.parse::<Architecture>().ok().and_then(|a| ModelType::ALL.into_iter().find(|m| m.architecture() == Some(a))))
            .ok_or_else(|| Error::Config(format!("unknown model type {s:?}")))
    }
}

/// Where the neural models' word vectors come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbeddingChoice {
    /// word2vec trained on the unlabeled text of the whole corpus.
    Trained { config: EmbeddingConfig },
    /// A word2vec file; `binary` selects the binary layout.
    Pretrained { path: PathBuf, binary: bool },
    Random { dimension: usize },
}

impl Default for EmbeddingChoice {
    fn default() -> Self {
        EmbeddingChoice::Trained {
            config: EmbeddingConfig {
                full_softmax_max_vocab: 0,
                ..EmbeddingConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub model_type: ModelType,
    pub feature_mode: FeatureMode,
    pub mnb_alpha: f64,
    pub lr: LrConfig,
    pub svm: SvmConfig,
    pub neural: ModelConfig,
    pub embeddings: EmbeddingChoice,
    pub min_count: usize,
    /// Sequence length is this nearest-rank percentile of training lengths.
    pub length_percentile: f64,
}

impl PipelineConfig {
    pub fn new(model_type: ModelType) -> Self {
        Self {
            model_type,
            feature_mode: if model_type == ModelType::Mnb { FeatureMode::Counts } else { FeatureMode::Tfidf },
            mnb_alpha: 1.0,
            lr: LrConfig::default(),
            svm: SvmConfig::default(),
            neural: ModelConfig::defaults_for(model_type.architecture().unwrap_or(Architecture::Lstm)),
            embeddings: EmbeddingChoice::default(),
            min_count: 1,
            length_percentile: 0.95,
        }
    }

    /// Copy with dotted-path overrides such as `"lr.c"` or
    /// `"neural.lstm_units"` applied.
    pub fn with_overrides(&self, overrides: &Config) -> Result<Self> {
        let mut root = serde_json::to_value(self)?;
        for (key, value) in overrides {
            let mut node = &mut root;
            for part in key.split('.') {
                node = node
                    .as_object_mut()
                    .and_then(|o| o.get_mut(part))
                    .ok_or_else(|| Error::Config(format!("unknown parameter {key:?}")))?;
            }
            *node = value.clone();
        }
        let mut out: Self = serde_json::from_value(root).map_err(|e| Error::Config(format!("bad override: {e}")))?;
        if let Some(a) = out.model_type.architecture() {
            out.neural.architecture = a;
        }
        Ok(out)
    }

    /// Reads a JSON object of dotted overrides and applies it.
    pub fn with_overrides_file(&self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let overrides: Config = serde_json::from_str(&text)?;
        self.with_overrides(&overrides)
    }
}

/// Vocabulary and embedding table shared by every neural fit.
#[derive(Clone, Debug)]
pub struct Resources {
    pub vocab: Vocabulary,
    pub table: EmbeddingTable,
    pub provenance: String,
}

pub fn tokenize_dataset(dataset: &Dataset) -> Vec<Vec<String>> {
    dataset.segments.iter().map(|s| tokenize(&s.text)).collect()
}

pub fn build_resources(config: &PipelineConfig, corpus: &[Vec<String>], seed: u64) -> Result<Resources> {
    let vocab = build_vocabulary(corpus, config.min_count)?;
    let (table, provenance) = match &config.embeddings {
        EmbeddingChoice::Trained { config: ec } => {
            let ec = EmbeddingConfig { seed, ..ec.clone() };
            let table = train_embeddings(corpus, &vocab, &ec)?;
            let algo = format!("{:?}", ec.algorithm).to_lowercase();
            (table, format!("{algo} trained on corpus text, dim {}, {} epochs", ec.dimension, ec.epochs))
        }
        EmbeddingChoice::Pretrained { path, binary } => {
            let table = if *binary {
                load_pretrained_binary(path, &vocab, None, seed)?
            } else {
                load_pretrained(path, &vocab, None, seed)?
            };
            (table, format!("pretrained {}", path.display()))
        }
        EmbeddingChoice::Random { dimension } => (EmbeddingTable::random(vocab.len(), *dimension, seed), format!("random, dim {dimension}")),
    };
    Ok(Resources { vocab, table, provenance })
}

/// A trained model of any family, as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelArtifact {
    Classical(ClassicalArtifact),
    Neural(NeuralArtifact),
}

impl ModelArtifact {
    pub fn model_type(&self) -> &str {
        match self {
            ModelArtifact::Classical(a) => a.model.kind(),
            ModelArtifact::Neural(a) => a.model.config.architecture.as_str(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let a: Self = serde_json::from_str(&text).map_err(|e| Error::Model(format!("{}: {e}", path.display())))?;
        let (found, expected) = match &a {
            ModelArtifact::Classical(c) => (c.format_version, crate::classical::CLASSICAL_FORMAT_VERSION),
            ModelArtifact::Neural(n) => (n.format_version, crate::neural::NEURAL_FORMAT_VERSION),
        };
        if found != expected {
            return Err(Error::Model(format!("{}: unsupported format version {found}", path.display())));
        }
        Ok(a)
    }

    /// Predicted practice and, where the model has one, its probability.
    pub fn classify(&self, token_streams: &[Vec<String>]) -> Result<Vec<(DataPractice, Option<f64>)>> {
        match self {
            ModelArtifact::Classical(a) => token_streams.iter().map(|t| a.classify(t)).collect(),
            ModelArtifact::Neural(a) => {
                let m = &a.model;
                let encoded: Vec<_> = token_streams.iter().map(|t| m.encode(t)).collect();
                Ok(m.predict_batch(&encoded)?
                    .into_iter()
                    .map(|p| {
                        let i = crate::classical::argmax(&p);
                        (DataPractice::ALL[i], Some(p[i]))
                    })
                    .collect())
            }
        }
    }

    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<DataPractice>> {
        Ok(self.classify(&tokenize_dataset(dataset))?.into_iter().map(|(p, _)| p).collect())
    }
}

/// Trains one model on `train`. Neural models need `resources`.
pub fn fit(config: &PipelineConfig, train: &Dataset, resources: Option<&Resources>, seed: u64) -> Result<ModelArtifact> {
    if train.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let tokens = tokenize_dataset(train);
    let labels = train.labels();
    if let Some(arch) = config.model_type.architecture() {
        let res = resources.ok_or_else(|| Error::Config("neural models need a vocabulary and embedding table".into()))?;
        let mut mc = config.neural.clone();
        mc.architecture = arch;
        mc.seed = seed;
        let lengths: Vec<usize> = tokens.iter().map(Vec::len).collect();
        let max_len = length_percentile(&lengths, config.length_percentile).max(mc.min_sequence_length());
        let mut model = build_model(&mc, &res.table, &res.vocab, max_len)?;
        let encoded: Vec<_> = tokens.iter().map(|t| model.encode(t)).collect();
        train_model(&mut model, &encoded, &labels)?;
        return Ok(ModelArtifact::Neural(NeuralArtifact::new(model, res.provenance.clone())));
    }
    let tfidf = fit_tfidf(&tokens)?;
    let rows: Vec<_> = tokens
        .iter()
        .map(|t| match config.feature_mode {
            FeatureMode::Counts => tfidf.counts(t),
            FeatureMode::Tfidf => transform_tfidf(&tfidf, t),
        })
        .collect();
    let width = tfidf.width();
    let model = match config.model_type {
        ModelType::Mnb => ClassicalModel::Mnb(train_mnb(&rows, &labels, width, config.mnb_alpha)?),
        ModelType::Lr => ClassicalModel::Lr(train_lr(&rows, &labels, width, &config.lr)?),
        ModelType::Svm => {
            let sc = SvmConfig { seed, ..config.svm.clone() };
            ClassicalModel::Svm(train_svm(&rows, &labels, width, &sc)?)
        }
        _ => unreachable!("neural types handled above"),
    };
    Ok(ModelArtifact::Classical(ClassicalArtifact::new(config.feature_mode, tfidf, model)))
}

/// Stratified k-fold cross-validation of `config` on `dataset`.
pub fn evaluate(config: &PipelineConfig, dataset: &Dataset, k: usize, seed: u64) -> Result<(CvReport, CvTimings)> {
    let resources = if config.model_type.is_neural() {
        Some(build_resources(config, &tokenize_dataset(dataset), seed)?)
    } else {
        None
    };
    evaluate_with(config, dataset, k, seed, resources.as_ref())
}

pub fn evaluate_with(config: &PipelineConfig, dataset: &Dataset, k: usize, seed: u64, resources: Option<&Resources>) -> Result<(CvReport, CvTimings)> {
    let fp = fingerprint(&(config, k, seed))?;
    run_cv(dataset, k, seed, config.model_type.as_str(), fp, |train, test, fold_seed| {
        fit(config, train, resources, fold_seed)?.predict_dataset(test)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Grid,
    Random { budget: usize },
}

/// Hyperparameter search maximizing pooled micro-F under k-fold CV.
pub fn tune(config: &PipelineConfig, space: &SearchSpace, strategy: Strategy, dataset: &Dataset, k: usize, seed: u64) -> Result<SearchOutcome> {
    let touches_resources = space.0.keys().any(|key| key.starts_with("embeddings") || key == "min_count");
    let shared = if config.model_type.is_neural() && !touches_resources {
        Some(build_resources(config, &tokenize_dataset(dataset), seed)?)
    } else {
        None
    };
    let objective = |overrides: &Config, trial_seed: u64| -> Result<f64> {
        let cfg = config.with_overrides(overrides)?;
        let report = match &shared {
            Some(res) => evaluate_with(&cfg, dataset, k, trial_seed, Some(res))?.0,
            None => evaluate(&cfg, dataset, k, trial_seed)?.0,
        };
        Ok(report.micro.f_measure)
    };
    match strategy {
        Strategy::Grid => grid_search(space, seed, objective),
        Strategy::Random { budget } => random_search(space, budget, seed, objective),
    }
}

/// Applies a search outcome's best configuration, if any trial succeeded.
pub fn best_config(config: &PipelineConfig, outcome: &SearchOutcome) -> Result<Option<PipelineConfig>> {
    outcome.best_trial().map(|t| config.with_overrides(&t.config)).transpose()
}
