use std::fs;
use std::path::Path;

use ndcore::functional::{dropout_mask, softmax_slice};
use ndcore::{gather_rows, OptimizerKind, ParamId, ParamSet, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cells::{lstm_step_tape, LstmVars};
use crate::corpus::NUM_PRACTICES;
use crate::embeddings::{EmbeddingSource, EmbeddingTable};
use crate::error::{Error, Result};
use crate::features::{encode_sequence, EncodedSequence, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Cnn,
    Lstm,
    Bilstm,
    Cnnlstm,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [Architecture::Cnn, Architecture::Lstm, Architecture::Bilstm, Architecture::Cnnlstm];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Cnn => "cnn",
            Architecture::Lstm => "lstm",
            Architecture::Bilstm => "bilstm",
            Architecture::Cnnlstm => "cnnlstm",
        }
    }

    pub fn uses_conv(self) -> bool {
        matches!(self, Architecture::Cnn | Architecture::Cnnlstm)
    }

    pub fn uses_lstm(self) -> bool {
        !matches!(self, Architecture::Cnn)
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(Architecture::Cnn),
            "lstm" => Ok(Architecture::Lstm),
            "bilstm" | "bi-lstm" => Ok(Architecture::Bilstm),
            "cnnlstm" | "cnn-lstm" => Ok(Architecture::Cnnlstm),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub dropout_rate: f64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            filter_widths: vec![3, 4, 5],
            filters_per_width: 100,
            dropout_rate: 0.5,
        }
    }
}

impl CnnConfig {
    pub fn max_width(&self) -> usize {
        self.filter_widths.iter().copied().max().unwrap_or(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub embedding_dropout: f64,
    pub input_dropout: f64,
    pub recurrent_dropout: f64,
    pub lstm_units: usize,
    pub lstm_blocks: usize,
    pub optimizer: OptimizerKind,
    /// Overrides the optimizer's default rate.
    pub learning_rate: Option<f64>,
    /// Upper bound; early stopping usually ends training sooner.
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
    pub cnn: CnnConfig,
    pub peepholes: bool,
    pub train_embeddings: bool,
    /// Train only the output layer.
    pub freeze_body: bool,
}

impl ModelConfig {
    /// Default hyperparameters, identical for all four architectures apart
    /// from the tag.
    pub fn defaults_for(architecture: Architecture) -> Self {
        Self {
            architecture,
            embedding_dropout: 0.0,
            input_dropout: 0.0,
            recurrent_dropout: 0.5,
            lstm_units: 100,
            lstm_blocks: 1,
            optimizer: OptimizerKind::Adam,
            learning_rate: None,
            epochs: 100,
            batch_size: 32,
            patience: 5,
            seed: 0,
            cnn: CnnConfig::default(),
            peepholes: true,
            train_embeddings: false,
            freeze_body: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| (0.0..1.0).contains(&r);
        let bad = |m: String| Err(Error::Config(m));
        if !rate_ok(self.embedding_dropout) || !rate_ok(self.input_dropout) || !rate_ok(self.recurrent_dropout) || !rate_ok(self.cnn.dropout_rate) {
            return bad("dropout rates must lie in [0, 1)".into());
        }
        if self.architecture.uses_lstm() && (self.lstm_units == 0 || self.lstm_blocks == 0) {
            return bad("lstm_units and lstm_blocks must be at least 1".into());
        }
        if self.architecture.uses_conv()
            && (self.cnn.filter_widths.is_empty() || self.cnn.filter_widths.contains(&0) || self.cnn.filters_per_width == 0)
        {
            return bad("convolution needs at least one positive filter width and one filter".into());
        }
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return bad("epochs, batch_size and patience must be at least 1".into());
        }
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("learning rate must be positive, got {lr}"));
            }
        }
        Ok(())
    }

    /// Smallest sequence length the architecture can consume.
    pub fn min_sequence_length(&self) -> usize {
        if self.architecture.uses_conv() {
            self.cnn.max_width()
        } else {
            1
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::defaults_for(Architecture::Lstm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct LstmLayout {
    pub w_x: usize,
    pub w_h: usize,
    pub b: usize,
    pub peepholes: Option<[usize; 3]>,
    pub units: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct ConvLayout {
    pub width: usize,
    pub w: usize,
    pub b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Layout {
    pub embedding: usize,
    pub convs: Vec<ConvLayout>,
    pub forward: Vec<LstmLayout>,
    pub backward: Vec<LstmLayout>,
    pub head_w: usize,
    pub head_b: usize,
}

/// A built (and possibly trained) deep model with its vocabulary and
/// embedding table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub max_len: usize,
    pub embedding_source: EmbeddingSource,
    pub params: ParamSet,
    pub(crate) layout: Layout,
}

fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::uniform(&[rows, cols], -limit, limit, rng)
}

fn add_lstm<R: Rng>(params: &mut ParamSet, rng: &mut R, prefix: &str, input: usize, units: usize, peepholes: bool) -> LstmLayout {
    let w_x = params.insert(format!("{prefix}.w_x"), glorot(rng, input, 4 * units)).0;
    let w_h = params.insert(format!("{prefix}.w_h"), glorot(rng, units, 4 * units)).0;
    let mut b = Tensor::zeros(&[4 * units]);
    b.data_mut()[units..2 * units].fill(1.0);
    let b = params.insert(format!("{prefix}.b"), b).0;
    let peepholes = peepholes.then(|| {
        ["w_ci", "w_cf", "w_co"].map(|n| params.insert(format!("{prefix}.{n}"), Tensor::zeros(&[units])).0)
    });
    LstmLayout {
        w_x,
        w_h,
        b,
        peepholes,
        units,
    }
}

/// Allocates and initializes the parameters for `config`.
pub fn build_model(config: &ModelConfig, embeddings: &EmbeddingTable, vocab: &Vocabulary, max_len: usize) -> Result<NeuralModel> {
    config.validate()?;
    embeddings.check_vocabulary(vocab)?;
    if max_len < config.min_sequence_length() {
        return Err(Error::Config(format!(
            "max sequence length {max_len} is shorter than the widest filter ({})",
            config.min_sequence_length()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ParamSet::new();
    let d = embeddings.dimension;
    let embedding = params.insert("embedding", embeddings.vectors.clone()).0;
    let mut convs = Vec::new();
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    let mut features = d;
    if config.architecture.uses_conv() {
        let f = config.cnn.filters_per_width;
        for &w in &config.cnn.filter_widths {
            let wid = params.insert(format!("conv{w}.w"), glorot(&mut rng, w * d, f)).0;
            let bid = params.insert(format!("conv{w}.b"), Tensor::zeros(&[f])).0;
            convs.push(ConvLayout { width: w, w: wid, b: bid });
        }
        features = f * config.cnn.filter_widths.len();
    }
    if config.architecture.uses_lstm() {
        let h = config.lstm_units;
        for k in 0..config.lstm_blocks {
            let input = if k == 0 { features } else { h };
            forward.push(add_lstm(&mut params, &mut rng, &format!("lstm{k}.fwd"), input, h, config.peepholes));
        }
        if config.architecture == Architecture::Bilstm {
            for k in 0..config.lstm_blocks {
                let input = if k == 0 { features } else { h };
                backward.push(add_lstm(&mut params, &mut rng, &format!("lstm{k}.bwd"), input, h, config.peepholes));
            }
        }
        features = h;
    }
    let head_w = params.insert("head.w", glorot(&mut rng, features, NUM_PRACTICES)).0;
    let head_b = params.insert("head.b", Tensor::zeros(&[NUM_PRACTICES])).0;
    Ok(NeuralModel {
        config: config.clone(),
        vocab: vocab.clone(),
        max_len,
        embedding_source: embeddings.source,
        params,
        layout: Layout {
            embedding,
            convs,
            forward,
            backward,
            head_w,
            head_b,
        },
    })
}

/// Pooled activations and winning window starts of one filter bank.
pub(crate) struct ConvTrace {
    pub width: usize,
    pub pooled: Var,
    /// Row-major `batch x filters` window offsets.
    pub argmax: Vec<usize>,
}

pub(crate) struct Forward {
    pub logits: Var,
    pub conv: Vec<ConvTrace>,
}

fn step_mask(lengths: &[usize], t: usize, units: usize) -> (Tensor, usize) {
    let mut m = Tensor::zeros(&[lengths.len(), units]);
    let mut active = 0;
    for (b, &len) in lengths.iter().enumerate() {
        if t < len {
            m.row_mut(b).fill(1.0);
            active += 1;
        }
    }
    (m, active)
}

impl NeuralModel {
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> EncodedSequence {
        encode_sequence(tokens, &self.vocab, self.max_len)
    }

    /// Number of trainable weights outside the embedding table.
    pub fn parameter_count(&self) -> usize {
        self.params
            .iter()
            .filter(|(id, _, _)| id.0 != self.layout.embedding)
            .map(|(_, _, t)| t.len())
            .sum()
    }

    pub fn embedding_table(&self) -> &Tensor {
        self.params.get(ParamId(self.layout.embedding))
    }

    pub(crate) fn trainable_mask(&self) -> Vec<bool> {
        (0..self.params.len())
            .map(|i| {
                if self.config.freeze_body {
                    i == self.layout.head_w || i == self.layout.head_b
                } else {
                    i != self.layout.embedding || self.config.train_embeddings
                }
            })
            .collect()
    }

    pub(crate) fn head(&self) -> (&Tensor, &Tensor) {
        (self.params.get(ParamId(self.layout.head_w)), self.params.get(ParamId(self.layout.head_b)))
    }

    fn embed(&self, tape: &mut Tape<'_>, batch: &[&EncodedSequence], time_major: bool) -> Result<Var> {
        let (b, l) = (batch.len(), self.max_len);
        let idx: Vec<usize> = if time_major {
            (0..l).flat_map(|t| batch.iter().map(move |s| s.indices[t])).collect()
        } else {
            batch.iter().flat_map(|s| s.indices.iter().copied()).collect()
        };
        debug_assert_eq!(idx.len(), b * l);
        let id = ParamId(self.layout.embedding);
        if self.config.train_embeddings && !self.config.freeze_body {
            let table = tape.param(id);
            Ok(tape.select_rows(table, idx)?)
        } else {
            Ok(tape.constant(gather_rows(self.params.get(id), &idx)?))
        }
    }

    /// Runs a stack of LSTM blocks over a time-major input and returns the
    /// final hidden state of the top block.
    #[allow(clippy::too_many_arguments)]
    fn lstm_stack<R: Rng>(
        &self,
        tape: &mut Tape<'_>,
        layers: &[LstmLayout],
        input: Var,
        steps: usize,
        lengths: &[usize],
        reverse: bool,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let batch = lengths.len();
        let mut x = input;
        let mut last = None;
        for (k, layer) in layers.iter().enumerate() {
            let hn = layer.units;
            if training && self.config.input_dropout > 0.0 {
                let in_dim = tape.value(x).cols();
                let m = dropout_mask(&[batch, in_dim], self.config.input_dropout, rng)?;
                let mut full = Vec::with_capacity(steps * batch * in_dim);
                for _ in 0..steps {
                    full.extend_from_slice(m.data());
                }
                x = tape.mul_const(x, Tensor::matrix(steps * batch, in_dim, full)?)?;
            }
            let wx = tape.param(ParamId(layer.w_x));
            let xw = tape.matmul(x, wx)?;
            let bias = tape.param(ParamId(layer.b));
            let xw = tape.add_row(xw, bias)?;
            let rec_mask = if training && self.config.recurrent_dropout > 0.0 {
                Some(dropout_mask(&[batch, hn], self.config.recurrent_dropout, rng)?)
            } else {
                None
            };
            let cell = LstmVars {
                w_h: tape.param(ParamId(layer.w_h)),
                peepholes: layer.peepholes.map(|p| p.map(|i| tape.param(ParamId(i)))),
                units: hn,
            };
            let mut h = tape.constant(Tensor::zeros(&[batch, hn]));
            let mut c = tape.constant(Tensor::zeros(&[batch, hn]));
            let mut outs = vec![h; steps];
            let order: Vec<usize> = if reverse { (0..steps).rev().collect() } else { (0..steps).collect() };
            for t in order {
                let (mask, active) = step_mask(lengths, t, hn);
                if active > 0 {
                    let xw_t = tape.slice_rows(xw, t * batch, batch)?;
                    let (hn_v, cn_v) = lstm_step_tape(tape, &cell, xw_t, h, c, rec_mask.as_ref())?;
                    if active == batch {
                        h = hn_v;
                        c = cn_v;
                    } else {
                        let dh = tape.sub(hn_v, h)?;
                        let dh = tape.mul_const(dh, mask.clone())?;
                        h = tape.add(h, dh)?;
                        let dc = tape.sub(cn_v, c)?;
                        let dc = tape.mul_const(dc, mask)?;
                        c = tape.add(c, dc)?;
                    }
                }
                outs[t] = h;
            }
            last = Some(h);
            if k + 1 < layers.len() {
                x = tape.concat_rows(&outs)?;
            }
        }
        Ok(last.expect("at least one block"))
    }

    fn conv_features(&self, tape: &mut Tape<'_>, x: Var, batch: usize) -> Result<Vec<(usize, Var)>> {
        let mut out = Vec::new();
        for conv in &self.layout.convs {
            let u = tape.unfold(x, batch, self.max_len, conv.width)?;
            let w = tape.param(ParamId(conv.w));
            let z = tape.matmul(u, w)?;
            let b = tape.param(ParamId(conv.b));
            let z = tape.add_row(z, b)?;
            out.push((conv.width, tape.relu(z)));
        }
        Ok(out)
    }

    pub(crate) fn forward<R: Rng>(&self, tape: &mut Tape<'_>, batch: &[&EncodedSequence], training: bool, rng: &mut R) -> Result<Forward> {
        for s in batch {
            if s.indices.len() != self.max_len {
                return Err(Error::DimensionMismatch {
                    expected: self.max_len,
                    got: s.indices.len(),
                });
            }
        }
        let bsz = batch.len();
        let l = self.max_len;
        let lengths: Vec<usize> = batch.iter().map(|s| s.true_length).collect();
        let mut conv = Vec::new();
        let hidden = match self.config.architecture {
            Architecture::Cnn => {
                let x = self.embed(tape, batch, false)?;
                let x = tape.dropout(x, self.config.embedding_dropout, training, rng)?;
                let mut pooled = Vec::new();
                for (width, r) in self.conv_features(tape, x, bsz)? {
                    let (p, argmax) = tape.max_pool_groups(r, l - width + 1)?;
                    pooled.push(p);
                    conv.push(ConvTrace { width, pooled: p, argmax });
                }
                let feats = tape.concat_cols(&pooled)?;
                tape.dropout(feats, self.config.cnn.dropout_rate, training, rng)?
            }
            Architecture::Lstm | Architecture::Bilstm => {
                let x = self.embed(tape, batch, true)?;
                let x = tape.dropout(x, self.config.embedding_dropout, training, rng)?;
                let fwd = self.lstm_stack(tape, &self.layout.forward, x, l, &lengths, false, training, rng)?;
                if self.config.architecture == Architecture::Bilstm {
                    let bwd = self.lstm_stack(tape, &self.layout.backward, x, l, &lengths, true, training, rng)?;
                    tape.add(fwd, bwd)?
                } else {
                    fwd
                }
            }
            Architecture::Cnnlstm => {
                let x = self.embed(tape, batch, false)?;
                let x = tape.dropout(x, self.config.embedding_dropout, training, rng)?;
                let max_w = self.config.cnn.max_width();
                let steps = l - max_w + 1;
                let mut parts = Vec::new();
                for (width, r) in self.conv_features(tape, x, bsz)? {
                    let windows = l - width + 1;
                    let idx: Vec<usize> = (0..steps).flat_map(|t| (0..bsz).map(move |b| b * windows + t)).collect();
                    parts.push(tape.select_rows(r, idx)?);
                }
                let seq = tape.concat_cols(&parts)?;
                let seq = tape.dropout(seq, self.config.cnn.dropout_rate, training, rng)?;
                let win_lengths: Vec<usize> = lengths.iter().map(|&n| (n + 1).saturating_sub(max_w).clamp(1, steps)).collect();
                self.lstm_stack(tape, &self.layout.forward, seq, steps, &win_lengths, false, training, rng)?
            }
        };
        let hw = tape.param(ParamId(self.layout.head_w));
        let hb = tape.param(ParamId(self.layout.head_b));
        let logits = tape.matmul(hidden, hw)?;
        let logits = tape.add_row(logits, hb)?;
        Ok(Forward { logits, conv })
    }

    /// Class distributions in inference mode, in input order.
    pub fn predict_batch(&self, seqs: &[EncodedSequence]) -> Result<Vec<[f64; NUM_PRACTICES]>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut out = Vec::with_capacity(seqs.len());
        for chunk in seqs.chunks(64) {
            let refs: Vec<&EncodedSequence> = chunk.iter().collect();
            let mut tape = Tape::with_params(&self.params);
            let fwd = self.forward(&mut tape, &refs, false, &mut rng)?;
            let logits = tape.value(fwd.logits);
            for r in 0..logits.rows() {
                let mut p = [0.0; NUM_PRACTICES];
                softmax_slice(logits.row(r), &mut p);
                out.push(p);
            }
        }
        Ok(out)
    }

    pub fn predict(&self, seq: &EncodedSequence) -> Result<[f64; NUM_PRACTICES]> {
        Ok(self.predict_batch(std::slice::from_ref(seq))?[0])
    }
}

pub const NEURAL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralArtifact {
    pub format_version: u32,
    /// Where the embedding table came from, e.g. a pretrained file or the
    /// training corpus itself.
    pub provenance: String,
    pub model: NeuralModel,
}

impl NeuralArtifact {
    pub fn new(model: NeuralModel, provenance: impl Into<String>) -> Self {
        Self {
            format_version: NEURAL_FORMAT_VERSION,
            provenance: provenance.into(),
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string(self)?;
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let a: Self = serde_json::from_str(&text)?;
        if a.format_version != NEURAL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported neural artifact version {} (expected {NEURAL_FORMAT_VERSION})",
                a.format_version
            )));
        }
        Ok(a)
    }
}
