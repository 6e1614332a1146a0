//! Miniature pre-norm transformer encoder with a `[CLS]` relevance head.
//!
//! Input vectors are `token + position + segment`, where entity tokens take
//! their vector from an [`EntityInputs`] provider instead of the token table.
//! Each layer is `x + MHA(LN(x))` followed by `h + FFN(LN(h))`; a final layer
//! norm feeds a single affine unit on the `[CLS]` position whose logistic
//! output is the relevance probability. Training minimizes binary
//! cross-entropy with plain SGD and hand-written backpropagation.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::alignment::AlignedEntities;
use crate::corpus;
use crate::error::{Error, Result};
use crate::tokenizer::ModelInput;

const LN_EPS: f64 = 1e-5;

/// Source of input vectors for entity token ids.
pub trait EntityInputs {
    fn entity_input(&self, token_id: usize) -> Option<&[f64]>;
}

impl EntityInputs for AlignedEntities {
    fn entity_input(&self, token_id: usize) -> Option<&[f64]> {
        self.get(token_id)
    }
}

/// Provider for inputs that contain no entity tokens.
pub struct NoEntities;

impl EntityInputs for NoEntities {
    fn entity_input(&self, _: usize) -> Option<&[f64]> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_positions: usize,
    /// Rows of the token table (word pieces and specials).
    pub vocab_size: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl EncoderConfig {
    /// Default desk-scale shape: 64 wide, 2 layers of 4 heads.
    pub fn desk(vocab_size: usize) -> Self {
        EncoderConfig {
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 256,
            max_positions: 512,
            vocab_size,
            dropout: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.d_ff == 0 || self.vocab_size == 0 || self.max_positions == 0 {
            return Err(Error::Config(
                "d_ff, vocab_size and max_positions must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub ln1_gamma: Vec<f64>,
    pub ln1_beta: Vec<f64>,
    pub wq: Vec<f64>,
    pub bq: Vec<f64>,
    pub wk: Vec<f64>,
    pub bk: Vec<f64>,
    pub wv: Vec<f64>,
    pub bv: Vec<f64>,
    pub wo: Vec<f64>,
    pub bo: Vec<f64>,
    pub ln2_gamma: Vec<f64>,
    pub ln2_beta: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Layer {
    fn tensors(&self) -> [(&'static str, &Vec<f64>); 16] {
        [
            ("ln1_gamma", &self.ln1_gamma),
            ("ln1_beta", &self.ln1_beta),
            ("wq", &self.wq),
            ("bq", &self.bq),
            ("wk", &self.wk),
            ("bk", &self.bk),
            ("wv", &self.wv),
            ("bv", &self.bv),
            ("wo", &self.wo),
            ("bo", &self.bo),
            ("ln2_gamma", &self.ln2_gamma),
            ("ln2_beta", &self.ln2_beta),
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w2", &self.w2),
            ("b2", &self.b2),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut Vec<f64>); 16] {
        [
            ("ln1_gamma", &mut self.ln1_gamma),
            ("ln1_beta", &mut self.ln1_beta),
            ("wq", &mut self.wq),
            ("bq", &mut self.bq),
            ("wk", &mut self.wk),
            ("bk", &mut self.bk),
            ("wv", &mut self.wv),
            ("bv", &mut self.bv),
            ("wo", &mut self.wo),
            ("bo", &mut self.bo),
            ("ln2_gamma", &mut self.ln2_gamma),
            ("ln2_beta", &mut self.ln2_beta),
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("w2", &mut self.w2),
            ("b2", &mut self.b2),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    pub config: EncoderConfig,
    pub token_embeddings: Vec<f64>,
    pub position_embeddings: Vec<f64>,
    pub segment_embeddings: Vec<f64>,
    pub layers: Vec<Layer>,
    pub final_ln_gamma: Vec<f64>,
    pub final_ln_beta: Vec<f64>,
    pub classifier_w: Vec<f64>,
    pub classifier_b: Vec<f64>,
}

const TOKEN_STD: f64 = 0.1;
const POSITION_STD: f64 = 0.02;

impl EncoderWeights {
    /// Seeded initialization: normal token/position/segment tables, scaled
    /// normal projections (std `1/sqrt(fan_in)`), unit layer-norm gains and
    /// zero biases. Each layer's key projection starts as a copy of its query
    /// projection, so similar tokens attend to each other from the first step.
    pub fn init(config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.d_model;
        let f = config.d_ff;
        let mut normal = |n: usize, std: f64| -> Vec<f64> {
            let dist = Normal::new(0.0, std).expect("positive std");
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        };
        let token_embeddings = normal(config.vocab_size * d, TOKEN_STD);
        let position_embeddings = normal(config.max_positions * d, POSITION_STD);
        let segment_embeddings = normal(2 * d, POSITION_STD);
        let proj = 1.0 / (d as f64).sqrt();
        let layers = (0..config.n_layers)
            .map(|_| {
                let wq = normal(d * d, proj);
                Layer {
                    ln1_gamma: vec![1.0; d],
                    ln1_beta: vec![0.0; d],
                    wk: wq.clone(),
                    wq,
                    bq: vec![0.0; d],
                    bk: vec![0.0; d],
                    wv: normal(d * d, proj),
                    bv: vec![0.0; d],
                    wo: normal(d * d, proj),
                    bo: vec![0.0; d],
                    ln2_gamma: vec![1.0; d],
                    ln2_beta: vec![0.0; d],
                    w1: normal(d * f, proj),
                    b1: vec![0.0; f],
                    w2: normal(f * d, 1.0 / (f as f64).sqrt()),
                    b2: vec![0.0; d],
                }
            })
            .collect();
        let classifier_w = normal(d, proj);
        Ok(EncoderWeights {
            config: config.clone(),
            token_embeddings,
            position_embeddings,
            segment_embeddings,
            layers,
            final_ln_gamma: vec![1.0; d],
            final_ln_beta: vec![0.0; d],
            classifier_w,
            classifier_b: vec![0.0],
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.iter_mut().for_each(|x| *x = 0.0);
        }
        z
    }

    /// All parameter tensors with stable names, in file order.
    pub fn tensors(&self) -> Vec<(String, &Vec<f64>)> {
        let mut out = vec![
            ("token_embeddings".to_string(), &self.token_embeddings),
            ("position_embeddings".to_string(), &self.position_embeddings),
            ("segment_embeddings".to_string(), &self.segment_embeddings),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (n, t) in l.tensors() {
                out.push((format!("layer{i}.{n}"), t));
            }
        }
        out.push(("final_ln_gamma".into(), &self.final_ln_gamma));
        out.push(("final_ln_beta".into(), &self.final_ln_beta));
        out.push(("classifier_w".into(), &self.classifier_w));
        out.push(("classifier_b".into(), &self.classifier_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out = vec![
            ("token_embeddings".to_string(), &mut self.token_embeddings),
            (
                "position_embeddings".to_string(),
                &mut self.position_embeddings,
            ),
            (
                "segment_embeddings".to_string(),
                &mut self.segment_embeddings,
            ),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            for (n, t) in l.tensors_mut() {
                out.push((format!("layer{i}.{n}"), t));
            }
        }
        out.push(("final_ln_gamma".into(), &mut self.final_ln_gamma));
        out.push(("final_ln_beta".into(), &mut self.final_ln_beta));
        out.push(("classifier_w".into(), &mut self.classifier_w));
        out.push(("classifier_b".into(), &mut self.classifier_b));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn token_row(&self, id: usize) -> &[f64] {
        let d = self.config.d_model;
        &self.token_embeddings[id * d..(id + 1) * d]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    /// Sets the query/key projections (and biases) of every layer to zero,
    /// making all attention distributions uniform.
    pub fn zero_attention_projections(&mut self) {
        for l in &mut self.layers {
            for t in [&mut l.wq, &mut l.bq, &mut l.wk, &mut l.bk] {
                t.iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::from("embert-encoder v1\n");
        let _ = writeln!(s, "d_model {}", c.d_model);
        let _ = writeln!(s, "n_layers {}", c.n_layers);
        let _ = writeln!(s, "n_heads {}", c.n_heads);
        let _ = writeln!(s, "d_ff {}", c.d_ff);
        let _ = writeln!(s, "max_positions {}", c.max_positions);
        let _ = writeln!(s, "vocab_size {}", c.vocab_size);
        let _ = writeln!(s, "dropout {}", c.dropout);
        let _ = writeln!(s, "seed {}", c.seed);
        for (name, t) in self.tensors() {
            let cols = self.row_width(&name);
            let _ = writeln!(s, "#tensor {name} {} {cols}", t.len() / cols);
            for row in t.chunks(cols) {
                let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                s.push_str(&line.join(" "));
                s.push('\n');
            }
        }
        s
    }

    fn row_width(&self, name: &str) -> usize {
        let c = &self.config;
        if name.ends_with(".w1") || name.ends_with(".b1") {
            c.d_ff
        } else if name == "classifier_b" {
            1
        } else {
            c.d_model
        }
    }

    pub fn parse(name: &str, content: &str) -> Result<Self> {
        let mut lines = content.lines().enumerate();
        match lines.next() {
            Some((_, "embert-encoder v1")) => {}
            _ => return Err(Error::parse(name, 1, "not an `embert-encoder v1` file")),
        }
        let mut header = std::collections::HashMap::new();
        let mut tensors: Vec<(String, usize, usize, Vec<f64>)> = Vec::new();
        for (i, line) in lines {
            let ln = i + 1;
            if let Some(rest) = line.strip_prefix("#tensor ") {
                let parts: Vec<&str> = rest.split(' ').collect();
                let [tname, r, c] = parts.as_slice() else {
                    return Err(Error::parse(name, ln, "expected `#tensor name rows cols`"));
                };
                let r: usize = r
                    .parse()
                    .map_err(|_| Error::parse(name, ln, "bad row count"))?;
                let c: usize = c
                    .parse()
                    .map_err(|_| Error::parse(name, ln, "bad column count"))?;
                tensors.push((tname.to_string(), r, c, Vec::with_capacity(r * c)));
            } else if let Some(t) = tensors.last_mut() {
                for tok in line.split_whitespace() {
                    t.3.push(
                        tok.parse()
                            .map_err(|_| Error::parse(name, ln, format!("bad number `{tok}`")))?,
                    );
                }
            } else if let Some((k, v)) = line.split_once(' ') {
                header.insert(k.to_string(), v.to_string());
            } else if !line.is_empty() {
                return Err(Error::parse(name, ln, "expected `key value`"));
            }
        }
        let get = |k: &str| -> Result<&String> {
            header
                .get(k)
                .ok_or_else(|| Error::parse(name, 1, format!("missing header field `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::parse(name, 1, format!("bad header field `{k}`")))
        };
        let config = EncoderConfig {
            d_model: num("d_model")?,
            n_layers: num("n_layers")?,
            n_heads: num("n_heads")?,
            d_ff: num("d_ff")?,
            max_positions: num("max_positions")?,
            vocab_size: num("vocab_size")?,
            dropout: get("dropout")?
                .parse()
                .map_err(|_| Error::parse(name, 1, "bad dropout"))?,
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::parse(name, 1, "bad seed"))?,
        };
        let mut w = EncoderWeights::init(&EncoderConfig {
            seed: 0,
            ..config.clone()
        })?;
        w.config = config;
        let mut slots = w.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::parse(
                name,
                1,
                format!("expected {} tensors, found {}", slots.len(), tensors.len()),
            ));
        }
        for ((sname, slot), (tname, r, c, data)) in slots.iter_mut().zip(tensors) {
            if *sname != tname || data.len() != r * c || data.len() != slot.len() {
                return Err(Error::parse(
                    name,
                    1,
                    format!("tensor `{tname}` does not match `{sname}` ({r}x{c})"),
                ));
            }
            **slot = data;
        }
        Ok(w)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (name, content) = corpus::read_file(path)?;
        Self::parse(&name, &content)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        corpus::write_file(path, &self.to_text())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutput {
    pub probability: f64,
    pub logit: f64,
    /// Final-layer (post layer norm) vectors, `n x d_model` row-major.
    pub final_hidden: Vec<f64>,
    /// `attentions[layer][head]` is an `n x n` row-stochastic matrix.
    pub attentions: Vec<Vec<Vec<f64>>>,
    pub len: usize,
}

impl ScoreOutput {
    pub fn hidden(&self, pos: usize) -> &[f64] {
        let d = self.final_hidden.len() / self.len.max(1);
        &self.final_hidden[pos * d..(pos + 1) * d]
    }

    /// Attention weights of row `row` for one layer and head.
    pub fn attention_row(&self, layer: usize, head: usize, row: usize) -> &[f64] {
        &self.attentions[layer][head][row * self.len..(row + 1) * self.len]
    }
}

#[derive(Debug, Clone)]
pub struct TrainingBatch {
    pub inputs: Vec<ModelInput>,
    pub labels: Vec<u8>,
}

impl TrainingBatch {
    pub fn new(inputs: Vec<ModelInput>, labels: Vec<u8>) -> Result<Self> {
        if inputs.len() != labels.len() || labels.iter().any(|&l| l > 1) {
            return Err(Error::Invalid(
                "batch labels must be 0/1 and aligned with inputs".into(),
            ));
        }
        Ok(TrainingBatch { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Linear warm-up over this many SGD steps (0 disables).
    pub warmup_steps: usize,
    /// Seed for dropout masks.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            learning_rate: 0.05,
            epochs: 1,
            warmup_steps: 0,
            seed: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// dense kernels (row-major)

/// `out (n x m) = a (n x k) * b (k x m) + bias`.
fn linear(a: &[f64], b: &[f64], bias: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * m);
    for _ in 0..n {
        out.extend_from_slice(bias);
    }
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let x = a[i * k + p];
            if x == 0.0 {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, w) in row.iter_mut().zip(brow) {
                *o += x * w;
            }
        }
    }
    out
}

/// `dw (k x m) += a^T (k x n) * dy (n x m)`; `db += column sums of dy`.
fn linear_backward_params(
    a: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    n: usize,
    k: usize,
    m: usize,
) {
    for i in 0..n {
        let dyr = &dy[i * m..(i + 1) * m];
        for (d, g) in db.iter_mut().zip(dyr) {
            *d += g;
        }
        for p in 0..k {
            let x = a[i * k + p];
            if x == 0.0 {
                continue;
            }
            let dwr = &mut dw[p * m..(p + 1) * m];
            for (d, g) in dwr.iter_mut().zip(dyr) {
                *d += x * g;
            }
        }
    }
}

/// `da (n x k) = dy (n x m) * w^T`.
fn linear_backward_input(dy: &[f64], w: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut da = vec![0.0; n * k];
    for i in 0..n {
        let dyr = &dy[i * m..(i + 1) * m];
        for p in 0..k {
            let wr = &w[p * m..(p + 1) * m];
            da[i * k + p] = dyr.iter().zip(wr).map(|(a, b)| a * b).sum();
        }
    }
    da
}

struct LnCache {
    xhat: Vec<f64>,
    rstd: Vec<f64>,
}

fn layer_norm(x: &[f64], gamma: &[f64], beta: &[f64], n: usize, d: usize) -> (Vec<f64>, LnCache) {
    let mut y = vec![0.0; n * d];
    let mut xhat = vec![0.0; n * d];
    let mut rstd = vec![0.0; n];
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        rstd[i] = r;
        for j in 0..d {
            let h = (row[j] - mean) * r;
            xhat[i * d + j] = h;
            y[i * d + j] = gamma[j] * h + beta[j];
        }
    }
    (y, LnCache { xhat, rstd })
}

/// Returns `dx`; accumulates `dgamma`, `dbeta`. Only rows in `rows` carry
/// gradient.
fn layer_norm_backward(
    dy: &[f64],
    cache: &LnCache,
    gamma: &[f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
    n: usize,
    d: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0; n * d];
    let mut dxhat = vec![0.0; d];
    for i in 0..n {
        let dyr = &dy[i * d..(i + 1) * d];
        if dyr.iter().all(|&g| g == 0.0) {
            continue;
        }
        let xh = &cache.xhat[i * d..(i + 1) * d];
        for j in 0..d {
            dgamma[j] += dyr[j] * xh[j];
            dbeta[j] += dyr[j];
            dxhat[j] = dyr[j] * gamma[j];
        }
        let mean_dxhat = dxhat.iter().sum::<f64>() / d as f64;
        let mean_dxhat_xhat = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        for j in 0..d {
            dx[i * d + j] = cache.rstd[i] * (dxhat[j] - mean_dxhat - xh[j] * mean_dxhat_xhat);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Binary cross-entropy of one example from its logit.
pub fn example_loss(logit: f64, label: u8) -> f64 {
    if label == 1 {
        softplus(-logit)
    } else {
        softplus(logit)
    }
}

/// `-sum_pos ln s - sum_neg ln(1 - s)` over probabilities.
pub fn ranking_loss(probabilities: &[f64], labels: &[u8]) -> f64 {
    probabilities
        .iter()
        .zip(labels)
        .map(|(&s, &y)| if y == 1 { -s.ln() } else { -(1.0 - s).ln() })
        .sum()
}

// ---------------------------------------------------------------------------
// forward / backward

struct LayerCache {
    x_in: Vec<f64>,
    ln1: LnCache,
    a: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<Vec<f64>>,
    ctx: Vec<f64>,
    attn_mask: Option<Vec<f64>>,
    ln2: LnCache,
    c: Vec<f64>,
    f1: Vec<f64>,
    g: Vec<f64>,
    ffn_mask: Option<Vec<f64>>,
}

struct Cache {
    ids: Vec<usize>,
    segs: Vec<u8>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
    z: Vec<f64>,
    n: usize,
}

fn dropout_mask(rng: &mut ChaCha8Rng, len: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| {
            if rng.gen::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
        .collect()
}

impl EncoderWeights {
    fn embed(&self, input: &ModelInput, entities: &dyn EntityInputs) -> Result<Vec<f64>> {
        let c = &self.config;
        let d = c.d_model;
        let n = input.len();
        if n > c.max_positions {
            return Err(Error::Invalid(format!(
                "input length {n} exceeds {} positions",
                c.max_positions
            )));
        }
        if input.segment_ids.len() != n {
            return Err(Error::Invalid("segment ids misaligned with tokens".into()));
        }
        let mut x = vec![0.0; n * d];
        for (i, (&id, &seg)) in input.token_ids.iter().zip(&input.segment_ids).enumerate() {
            let tok: &[f64] = if id < c.vocab_size {
                self.token_row(id)
            } else {
                let v = entities
                    .entity_input(id)
                    .ok_or_else(|| Error::MissingEmbedding(format!("token id {id}")))?;
                if v.len() != d {
                    return Err(Error::Invalid(format!(
                        "entity vector of width {} for d_model {d}",
                        v.len()
                    )));
                }
                v
            };
            let pos = &self.position_embeddings[i * d..(i + 1) * d];
            let sg = &self.segment_embeddings[seg as usize * d..(seg as usize + 1) * d];
            for j in 0..d {
                x[i * d + j] = tok[j] + pos[j] + sg[j];
            }
        }
        Ok(x)
    }

    fn forward_cached(
        &self,
        input: &ModelInput,
        entities: &dyn EntityInputs,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(ScoreOutput, Cache)> {
        let c = &self.config;
        let (d, f, h, dh) = (c.d_model, c.d_ff, c.n_heads, c.head_dim());
        let n = input.len();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut x = self.embed(input, entities)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut attentions = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (a, ln1) = layer_norm(&x, &l.ln1_gamma, &l.ln1_beta, n, d);
            let q = linear(&a, &l.wq, &l.bq, n, d, d);
            let k = linear(&a, &l.wk, &l.bk, n, d, d);
            let v = linear(&a, &l.wv, &l.bv, n, d, d);
            let mut ctx = vec![0.0; n * d];
            let mut probs = Vec::with_capacity(h);
            for head in 0..h {
                let off = head * dh;
                let mut p = vec![0.0; n * n];
                for i in 0..n {
                    let qi = &q[i * d + off..i * d + off + dh];
                    let row = &mut p[i * n..(i + 1) * n];
                    for (j, r) in row.iter_mut().enumerate() {
                        let kj = &k[j * d + off..j * d + off + dh];
                        *r = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                    }
                    let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for r in row.iter_mut() {
                        *r = (*r - mx).exp();
                        sum += *r;
                    }
                    for r in row.iter_mut() {
                        *r /= sum;
                    }
                    let out = &mut ctx[i * d + off..i * d + off + dh];
                    for (j, &pij) in row.iter().enumerate() {
                        let vj = &v[j * d + off..j * d + off + dh];
                        for (o, vv) in out.iter_mut().zip(vj) {
                            *o += pij * vv;
                        }
                    }
                }
                probs.push(p);
            }
            let mut o = linear(&ctx, &l.wo, &l.bo, n, d, d);
            let attn_mask = match (c.dropout > 0.0, dropout_rng.as_deref_mut()) {
                (true, Some(rng)) => {
                    let m = dropout_mask(rng, n * d, c.dropout);
                    o.iter_mut().zip(&m).for_each(|(x, m)| *x *= m);
                    Some(m)
                }
                _ => None,
            };
            let hres: Vec<f64> = x.iter().zip(&o).map(|(a, b)| a + b).collect();
            let (cc, ln2) = layer_norm(&hres, &l.ln2_gamma, &l.ln2_beta, n, d);
            let f1 = linear(&cc, &l.w1, &l.b1, n, d, f);
            let g: Vec<f64> = f1.iter().map(|&v| gelu(v)).collect();
            let mut f2 = linear(&g, &l.w2, &l.b2, n, f, d);
            let ffn_mask = match (c.dropout > 0.0, dropout_rng.as_deref_mut()) {
                (true, Some(rng)) => {
                    let m = dropout_mask(rng, n * d, c.dropout);
                    f2.iter_mut().zip(&m).for_each(|(x, m)| *x *= m);
                    Some(m)
                }
                _ => None,
            };
            let x_out: Vec<f64> = hres.iter().zip(&f2).map(|(a, b)| a + b).collect();
            attentions.push(probs.clone());
            caches.push(LayerCache {
                x_in: x,
                ln1,
                a,
                q,
                k,
                v,
                probs,
                ctx,
                attn_mask,
                ln2,
                c: cc,
                f1,
                g,
                ffn_mask,
            });
            x = x_out;
        }
        let (z, lnf) = layer_norm(&x, &self.final_ln_gamma, &self.final_ln_beta, n, d);
        let logit = self.classifier_b[0]
            + z[..d]
                .iter()
                .zip(&self.classifier_w)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        let out = ScoreOutput {
            probability: sigmoid(logit),
            logit,
            final_hidden: z.clone(),
            attentions,
            len: n,
        };
        let cache = Cache {
            ids: input.token_ids.clone(),
            segs: input.segment_ids.clone(),
            layers: caches,
            lnf,
            z,
            n,
        };
        Ok((out, cache))
    }

    /// Relevance probability and introspection outputs for one input.
    pub fn forward(&self, input: &ModelInput, entities: &dyn EntityInputs) -> Result<ScoreOutput> {
        if input.is_empty() {
            return Err(Error::Invalid("empty model input".into()));
        }
        self.forward_cached(input, entities, None).map(|(o, _)| o)
    }

    /// Accumulate into `grads` the gradient of `dlogit * logit`.
    fn backward(&self, cache: &Cache, dlogit: f64, grads: &mut EncoderWeights) {
        let c = &self.config;
        let (d, f, h, dh) = (c.d_model, c.d_ff, c.n_heads, c.head_dim());
        let n = cache.n;
        let scale = 1.0 / (dh as f64).sqrt();

        grads.classifier_b[0] += dlogit;
        let mut dz = vec![0.0; n * d];
        for j in 0..d {
            grads.classifier_w[j] += dlogit * cache.z[j];
            dz[j] = dlogit * self.classifier_w[j];
        }
        let mut dx = layer_norm_backward(
            &dz,
            &cache.lnf,
            &self.final_ln_gamma,
            &mut grads.final_ln_gamma,
            &mut grads.final_ln_beta,
            n,
            d,
        );

        for (li, (l, lc)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let gl = &mut grads.layers[li];
            // FFN branch: x_out = h + f2
            let mut df2 = dx.clone();
            if let Some(m) = &lc.ffn_mask {
                df2.iter_mut().zip(m).for_each(|(g, m)| *g *= m);
            }
            linear_backward_params(&lc.g, &df2, &mut gl.w2, &mut gl.b2, n, f, d);
            let dg = linear_backward_input(&df2, &l.w2, n, f, d);
            let df1: Vec<f64> = dg
                .iter()
                .zip(&lc.f1)
                .map(|(g, &x)| g * gelu_grad(x))
                .collect();
            linear_backward_params(&lc.c, &df1, &mut gl.w1, &mut gl.b1, n, d, f);
            let dc = linear_backward_input(&df1, &l.w1, n, d, f);
            let dh_ln = layer_norm_backward(
                &dc,
                &lc.ln2,
                &l.ln2_gamma,
                &mut gl.ln2_gamma,
                &mut gl.ln2_beta,
                n,
                d,
            );
            let dhres: Vec<f64> = dx.iter().zip(&dh_ln).map(|(a, b)| a + b).collect();

            // attention branch: h = x + o
            let mut do_ = dhres.clone();
            if let Some(m) = &lc.attn_mask {
                do_.iter_mut().zip(m).for_each(|(g, m)| *g *= m);
            }
            linear_backward_params(&lc.ctx, &do_, &mut gl.wo, &mut gl.bo, n, d, d);
            let dctx = linear_backward_input(&do_, &l.wo, n, d, d);
            let mut dq = vec![0.0; n * d];
            let mut dk = vec![0.0; n * d];
            let mut dv = vec![0.0; n * d];
            let mut dp = vec![0.0; n];
            for head in 0..h {
                let off = head * dh;
                let p = &lc.probs[head];
                for i in 0..n {
                    let dci = &dctx[i * d + off..i * d + off + dh];
                    let prow = &p[i * n..(i + 1) * n];
                    for j in 0..n {
                        let vj = &lc.v[j * d + off..j * d + off + dh];
                        dp[j] = dci.iter().zip(vj).map(|(a, b)| a * b).sum();
                        let dvj = &mut dv[j * d + off..j * d + off + dh];
                        for (g, x) in dvj.iter_mut().zip(dci) {
                            *g += prow[j] * x;
                        }
                    }
                    let dot: f64 = prow.iter().zip(&dp).map(|(a, b)| a * b).sum();
                    for j in 0..n {
                        let ds = prow[j] * (dp[j] - dot) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        for t in 0..dh {
                            dq[i * d + off + t] += ds * lc.k[j * d + off + t];
                            dk[j * d + off + t] += ds * lc.q[i * d + off + t];
                        }
                    }
                }
            }
            linear_backward_params(&lc.a, &dq, &mut gl.wq, &mut gl.bq, n, d, d);
            linear_backward_params(&lc.a, &dk, &mut gl.wk, &mut gl.bk, n, d, d);
            linear_backward_params(&lc.a, &dv, &mut gl.wv, &mut gl.bv, n, d, d);
            let mut da = linear_backward_input(&dq, &l.wq, n, d, d);
            for (acc, part) in [(&l.wk, &dk), (&l.wv, &dv)] {
                let g = linear_backward_input(part, acc, n, d, d);
                da.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            let dx_ln = layer_norm_backward(
                &da,
                &lc.ln1,
                &l.ln1_gamma,
                &mut gl.ln1_gamma,
                &mut gl.ln1_beta,
                n,
                d,
            );
            let _ = &lc.x_in;
            dx = dhres.iter().zip(&dx_ln).map(|(a, b)| a + b).collect();
        }

        for i in 0..n {
            let g = &dx[i * d..(i + 1) * d];
            let id = cache.ids[i];
            // entity inputs are constants
            if id < c.vocab_size {
                let row = &mut grads.token_embeddings[id * d..(id + 1) * d];
                row.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            let row = &mut grads.position_embeddings[i * d..(i + 1) * d];
            row.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            let s = cache.segs[i] as usize;
            let row = &mut grads.segment_embeddings[s * d..(s + 1) * d];
            row.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
    }

    /// Loss of one example and its gradient accumulated into `grads`.
    pub fn loss_and_gradient(
        &self,
        input: &ModelInput,
        label: u8,
        entities: &dyn EntityInputs,
        grads: &mut EncoderWeights,
    ) -> Result<f64> {
        let (out, cache) = self.forward_cached(input, entities, None)?;
        self.backward(&cache, out.probability - label as f64, grads);
        Ok(example_loss(out.logit, label))
    }
}

/// Point-wise training: one SGD step per batch on the mean gradient.
/// Returns the mean example loss of every epoch.
pub fn train_pointwise(
    weights: &mut EncoderWeights,
    batches: &[TrainingBatch],
    entities: &dyn EntityInputs,
    opts: &TrainOptions,
) -> Result<Vec<f64>> {
    if batches.is_empty() || batches.iter().all(|b| b.is_empty()) {
        return Err(Error::Invalid("no training examples".into()));
    }
    if weights.config.dropout > 0.0 {
        log::warn!(
            "dropout {} enabled: training is no longer bitwise reproducible across configurations",
            weights.config.dropout
        );
    }
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut grads = weights.zeros_like();
    let mut trace = Vec::with_capacity(opts.epochs);
    let mut step = 0usize;
    for epoch in 0..opts.epochs {
        let mut total = 0.0;
        let mut count = 0usize;
        for batch in batches.iter().filter(|b| !b.is_empty()) {
            for (_, t) in grads.tensors_mut() {
                t.iter_mut().for_each(|x| *x = 0.0);
            }
            for (ex, (input, &label)) in batch.inputs.iter().zip(&batch.labels).enumerate() {
                let rng = (weights.config.dropout > 0.0).then_some(&mut dropout_rng);
                let (out, cache) = weights.forward_cached(input, entities, rng)?;
                let loss = example_loss(out.logit, label);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        example: count + ex,
                        detail: format!("logit {} label {label} len {}", out.logit, input.len()),
                    });
                }
                weights.backward(&cache, out.probability - label as f64, &mut grads);
                total += loss;
            }
            count += batch.len();
            let warm = if opts.warmup_steps > 0 {
                ((step + 1) as f64 / opts.warmup_steps as f64).min(1.0)
            } else {
                1.0
            };
            let lr = opts.learning_rate * warm / batch.len() as f64;
            if lr != 0.0 {
                for ((_, w), (_, g)) in weights.tensors_mut().into_iter().zip(grads.tensors()) {
                    w.iter_mut().zip(g.iter()).for_each(|(w, g)| *w -= lr * g);
                }
            }
            step += 1;
        }
        trace.push(total / count as f64);
    }
    if !weights.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: opts.epochs.saturating_sub(1),
            example: 0,
            detail: "weights diverged".into(),
        });
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSubset {
    /// Every parameter the input touches (all dense tensors plus the used
    /// rows of the embedding tables), minus the key biases.
    Active,
    ClassifierOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Name and flat index of the worst parameter.
    pub worst: (String, usize),
}

/// Denominator floor of the relative error `|a - n| / max(|a|, |n|, floor)`.
pub const GRAD_CHECK_FLOOR: f64 = 1e-7;
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Compare the analytic gradient of the example loss with central finite
/// differences on `samples` randomly drawn parameters.
pub fn grad_check(
    weights: &EncoderWeights,
    input: &ModelInput,
    label: u8,
    entities: &dyn EntityInputs,
    samples: usize,
    subset: ParamSubset,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut grads = weights.zeros_like();
    weights.loss_and_gradient(input, label, entities, &mut grads)?;
    let d = weights.config.d_model;

    // candidate (tensor index, flat index) pairs
    let names: Vec<String> = weights.tensors().into_iter().map(|(n, _)| n).collect();
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (ti, (name, t)) in weights.tensors().into_iter().enumerate() {
        let rows: Option<Vec<usize>> = match name.as_str() {
            "token_embeddings" => Some(
                input
                    .token_ids
                    .iter()
                    .copied()
                    .filter(|&id| id < weights.config.vocab_size)
                    .collect(),
            ),
            "position_embeddings" => Some((0..input.len()).collect()),
            "segment_embeddings" => Some(input.segment_ids.iter().map(|&s| s as usize).collect()),
            _ => None,
        };
        let is_classifier = name.starts_with("classifier");
        if subset == ParamSubset::ClassifierOnly && !is_classifier {
            continue;
        }
        // softmax is shift invariant per row, so the key bias gradient is 0
        if name.ends_with(".bk") {
            continue;
        }
        match rows {
            Some(mut rows) => {
                rows.sort_unstable();
                rows.dedup();
                for r in rows {
                    candidates.extend((r * d..(r + 1) * d).map(|i| (ti, i)));
                }
            }
            None => candidates.extend((0..t.len()).map(|i| (ti, i))),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = weights.clone();
    let loss_at = |w: &EncoderWeights| -> Result<f64> {
        let out = w.forward(input, entities)?;
        Ok(example_loss(out.logit, label))
    };
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        worst: (String::new(), 0),
    };
    let n = samples.min(candidates.len());
    let picks: Vec<(usize, usize)> = if n == candidates.len() {
        candidates
    } else {
        rand::seq::index::sample(&mut rng, candidates.len(), n)
            .into_iter()
            .map(|i| candidates[i])
            .collect()
    };
    for (ti, idx) in picks {
        let original = weights.tensors()[ti].1[idx];
        let set = |w: &mut EncoderWeights, v: f64| {
            w.tensors_mut()[ti].1[idx] = v;
        };
        set(&mut probe, original + GRAD_CHECK_STEP);
        let up = loss_at(&probe)?;
        set(&mut probe, original - GRAD_CHECK_STEP);
        let down = loss_at(&probe)?;
        set(&mut probe, original);
        let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
        let analytic = grads.tensors()[ti].1[idx];
        let err =
            (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        if err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = (names[ti].clone(), idx);
        }
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{build_input, wordpiece_tokenize, InputLimits, Vocabulary};

    fn small_config(vocab: usize, seed: u64) -> EncoderConfig {
        EncoderConfig {
            d_model: 16,
            n_layers: 2,
            n_heads: 4,
            d_ff: 32,
            max_positions: 64,
            vocab_size: vocab,
            dropout: 0.0,
            seed,
        }
    }

    fn input(v: &Vocabulary, q: &str, doc: &str) -> ModelInput {
        build_input(
            &wordpiece_tokenize(q, v),
            &wordpiece_tokenize(doc, v),
            v,
            InputLimits::default(),
        )
    }

    #[test]
    fn init_is_seeded() {
        let v = Vocabulary::fixture();
        let a = EncoderWeights::init(&small_config(v.num_pieces(), 3)).unwrap();
        let b = EncoderWeights::init(&small_config(v.num_pieces(), 3)).unwrap();
        let c = EncoderWeights::init(&small_config(v.num_pieces(), 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bad = EncoderConfig {
            d_model: 65,
            ..small_config(10, 0)
        };
        assert!(matches!(EncoderWeights::init(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn forward_is_pure_and_rows_are_stochastic() {
        let v = Vocabulary::fixture();
        let w = EncoderWeights::init(&small_config(v.num_pieces(), 1)).unwrap();
        let inp = input(&v, "rivers in africa", "the weser is a river in europe");
        let a = w.forward(&inp, &NoEntities).unwrap();
        let b = w.forward(&inp, &NoEntities).unwrap();
        assert_eq!(a, b);
        assert!(a.probability > 0.0 && a.probability < 1.0);
        assert_eq!(a.final_hidden.len(), inp.len() * 16);
        for layer in &a.attentions {
            for head in layer {
                for row in head.chunks(inp.len()) {
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn zero_classifier_gives_half() {
        let v = Vocabulary::fixture();
        let mut w = EncoderWeights::init(&small_config(v.num_pieces(), 1)).unwrap();
        w.classifier_w.iter_mut().for_each(|x| *x = 0.0);
        let out = w
            .forward(&input(&v, "france", "paris"), &NoEntities)
            .unwrap();
        assert_eq!(out.probability, 0.5);
    }

    #[test]
    fn position_embeddings_make_order_matter() {
        let v = Vocabulary::fixture();
        let w = EncoderWeights::init(&small_config(v.num_pieces(), 2)).unwrap();
        let a = w
            .forward(&input(&v, "city", "capital of senegal"), &NoEntities)
            .unwrap();
        let b = w
            .forward(&input(&v, "city", "senegal of capital"), &NoEntities)
            .unwrap();
        assert_ne!(a.probability, b.probability);
    }

    #[test]
    fn missing_entity_vector_is_reported() {
        let v = Vocabulary::fixture().with_entities(["X"]).unwrap();
        let w = EncoderWeights::init(&small_config(v.num_pieces(), 2)).unwrap();
        let mut inp = input(&v, "city", "x");
        inp.token_ids[3] = v.entity_token_id("X").unwrap();
        assert!(matches!(
            w.forward(&inp, &NoEntities),
            Err(Error::MissingEmbedding(_))
        ));
    }

    #[test]
    fn loss_closed_form_at_half() {
        let l = ranking_loss(&[0.5, 0.5], &[1, 0]);
        assert!((l - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!(
            (example_loss(0.0, 1) + example_loss(0.0, 0) - 2.0 * std::f64::consts::LN_2).abs()
                < 1e-12
        );
    }

    #[test]
    fn gradients_match_finite_differences() {
        let v = Vocabulary::fixture();
        let w = EncoderWeights::init(&small_config(v.num_pieces(), 5)).unwrap();
        let inp = input(
            &v,
            "capital of senegal",
            "dakar is the capital and largest city",
        );
        let r = grad_check(&w, &inp, 1, &NoEntities, 300, ParamSubset::Active, 7).unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");
        let r = grad_check(
            &w,
            &inp,
            0,
            &NoEntities,
            300,
            ParamSubset::ClassifierOnly,
            7,
        )
        .unwrap();
        assert!(r.max_relative_error < 1e-6, "{r:?}");
        assert_eq!(r.checked, 17);
        let empty_doc = input(&v, "city", "");
        assert_eq!(empty_doc.doc_len, 0);
        let r = grad_check(&w, &empty_doc, 1, &NoEntities, 200, ParamSubset::Active, 8).unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");
    }

    #[test]
    fn zero_lr_leaves_weights() {
        let v = Vocabulary::fixture();
        let mut w = EncoderWeights::init(&small_config(v.num_pieces(), 5)).unwrap();
        let before = w.clone();
        let batch = TrainingBatch::new(
            vec![input(&v, "city", "dakar"), input(&v, "city", "river")],
            vec![1, 0],
        )
        .unwrap();
        let opts = TrainOptions {
            learning_rate: 0.0,
            epochs: 3,
            ..Default::default()
        };
        let trace = train_pointwise(&mut w, &[batch], &NoEntities, &opts).unwrap();
        assert_eq!(w, before);
        assert!(trace.iter().all(|&l| l == trace[0]));
    }

    #[test]
    fn training_is_reproducible_and_file_round_trips() {
        let v = Vocabulary::fixture();
        let batch = TrainingBatch::new(
            vec![input(&v, "city", "dakar"), input(&v, "city", "river")],
            vec![1, 0],
        )
        .unwrap();
        let run = || {
            let mut w = EncoderWeights::init(&small_config(v.num_pieces(), 5)).unwrap();
            let t = train_pointwise(
                &mut w,
                std::slice::from_ref(&batch),
                &NoEntities,
                &TrainOptions::default(),
            )
            .unwrap();
            (w, t)
        };
        let (a, ta) = run();
        let (b, tb) = run();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let back = EncoderWeights::parse("w", &a.to_text()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn dropout_trains_and_scores_deterministically() {
        let v = Vocabulary::fixture();
        let mut cfg = small_config(v.num_pieces(), 5);
        cfg.dropout = 0.1;
        let mut w = EncoderWeights::init(&cfg).unwrap();
        let batch = TrainingBatch::new(vec![input(&v, "city", "dakar")], vec![1]).unwrap();
        train_pointwise(&mut w, &[batch], &NoEntities, &TrainOptions::default()).unwrap();
        let inp = input(&v, "city", "dakar");
        assert_eq!(
            w.forward(&inp, &NoEntities).unwrap(),
            w.forward(&inp, &NoEntities).unwrap()
        );
    }

    #[test]
    fn uniform_attention_with_zero_projections() {
        let v = Vocabulary::fixture();
        let mut w = EncoderWeights::init(&small_config(v.num_pieces(), 5)).unwrap();
        w.zero_attention_projections();
        let inp = input(&v, "city", "dakar is a city");
        let out = w.forward(&inp, &NoEntities).unwrap();
        let n = inp.len() as f64;
        assert!(out
            .attention_row(0, 0, 0)
            .iter()
            .all(|&a| (a - 1.0 / n).abs() < 1e-6));
    }
}
