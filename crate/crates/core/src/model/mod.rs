//! Desk-scale decoder-only sequence model.
//!
//! Trained on serialized prompts with the loss restricted to completion
//! tokens, sampled autoregressively, and averaged over repeated runs.

mod linalg;
mod net;
pub mod remote;

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Targets;
use crate::prompting::{self, PromptError, PromptInstance, SerializedPrompt, Tokenizer, END_MARKER};

pub use linalg::Scalar;
use net::Layout;

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_RUNS: usize = 20;

/// Completion length cap for generation; a full completion is under 40 characters.
pub const DEFAULT_MAX_TOKENS: usize = 64;

const CHECKPOINT_MAGIC: &[u8; 8] = b"RPLCKPT\0";
const CHECKPOINT_VERSION: u32 = 1;
const CLIP_NORM: f64 = 1.0;
const DIVERGENCE_FACTOR: f64 = 10.0;
const DIVERGENCE_STEPS: usize = 20;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("no training instances")]
    EmptyTrainingSet,
    #[error("instance {index} needs {tokens} tokens but the context holds {max_context}")]
    ContextOverflow { index: usize, tokens: usize, max_context: usize },
    #[error("instance {index} has an empty completion")]
    EmptyCompletion { index: usize },
    #[error("training diverged at step {step}: loss {loss:.4} stayed above {factor}x the initial {initial:.4} for {steps} steps")]
    Diverged {
        step: usize,
        loss: f64,
        initial: f64,
        factor: f64,
        steps: usize,
        report: TrainReport,
    },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize, report: TrainReport },
    #[error("n_runs must be at least 1")]
    NoRuns,
    #[error("temperature must be finite and non-negative, got {0}")]
    Temperature(f64),
    #[error("prediction failed: all {runs} runs were unparseable")]
    PredictionFailed { runs: usize, first_output: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("remote provider not configured: {0}")]
    RemoteConfig(String),
    #[error("remote provider: {0}")]
    Remote(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub embed_dim: usize,
    pub max_context: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 4,
            heads: 4,
            embed_dim: 128,
            max_context: 1024,
            vocab_size: Tokenizer::default().vocab_size(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.layers == 0 || self.heads == 0 || self.embed_dim == 0 {
            return bad("layers, heads and embed_dim must be positive".into());
        }
        if self.embed_dim % self.heads != 0 {
            return bad(format!("embed_dim {} not divisible by heads {}", self.embed_dim, self.heads));
        }
        if self.max_context < 2 {
            return bad(format!("max_context {} too small", self.max_context));
        }
        if self.vocab_size < 2 {
            return bad(format!("vocab_size {} too small", self.vocab_size));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        Layout::new(self).total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub base_learning_rate: f64,
    pub lr_multiplier: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { base_learning_rate: 3e-4, lr_multiplier: 1.5, batch_size: 5, epochs: 5, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidTrainConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.base_learning_rate) || !finite_pos(self.lr_multiplier) {
            return bad(format!(
                "learning rates must be positive, got base {} multiplier {}",
                self.base_learning_rate, self.lr_multiplier
            ));
        }
        Ok(())
    }

    pub fn learning_rate(&self) -> f64 {
        self.base_learning_rate * self.lr_multiplier
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// `(step, mean completion cross-entropy in nats/token)`, steps from 1.
    pub loss_per_step: Vec<(usize, f64)>,
    pub epochs_completed: usize,
}

impl TrainReport {
    /// Trailing mean over up to `window` steps ending at each step.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        let w = window.max(1);
        let losses: Vec<f64> = self.loss_per_step.iter().map(|&(_, l)| l).collect();
        (0..losses.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(w);
                losses[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,loss\n");
        for (step, loss) in &self.loss_per_step {
            s.push_str(&format!("{step},{}\n", crate::numfmt::csv_num(*loss)));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// One entry per run; `None` marks an unparseable completion.
    pub per_run: Vec<Option<Targets>>,
    pub mean: Targets,
    pub n_valid: usize,
    pub raw: Vec<String>,
}

impl Prediction {
    /// Averages the parseable runs component-wise.
    pub fn from_outputs(raw: Vec<String>) -> Result<Self, ModelError> {
        let per_run: Vec<Option<Targets>> = raw.iter().map(|t| parse_generated(t)).collect();
        let valid: Vec<[f64; 3]> = per_run.iter().flatten().map(Targets::as_array).collect();
        if valid.is_empty() {
            return Err(ModelError::PredictionFailed {
                runs: raw.len(),
                first_output: raw.first().cloned().unwrap_or_default(),
            });
        }
        let mut sum = [0.0; 3];
        for v in &valid {
            for i in 0..3 {
                sum[i] += v[i];
            }
        }
        let n = valid.len() as f64;
        Ok(Prediction {
            n_valid: valid.len(),
            mean: Targets::from_array(sum.map(|s| s / n)),
            per_run,
            raw,
        })
    }

    pub fn n_failed(&self) -> usize {
        self.per_run.len() - self.n_valid
    }
}

/// Parses a generated completion; anything but a finite triple is a failure.
pub fn parse_generated(text: &str) -> Option<Targets> {
    prompting::parse_completion(text)
        .ok()
        .filter(|t| t.as_array().iter().all(|v| v.is_finite()))
}

/// A tokenized training instance with its loss mask.
struct Encoded {
    tokens: Vec<u32>,
    mask: Vec<bool>,
    n_loss: usize,
}

fn encode(tok: &Tokenizer, max_context: usize, index: usize, p: &SerializedPrompt) -> Result<Encoded, ModelError> {
    let prompt = tok.tokenize(&p.prompt_text)?;
    let completion = tok.tokenize(&p.completion_text)?;
    if completion.is_empty() {
        return Err(ModelError::EmptyCompletion { index });
    }
    let n = prompt.len() + completion.len();
    if n > max_context {
        return Err(ModelError::ContextOverflow { index, tokens: n, max_context });
    }
    let mut mask = vec![false; prompt.len()];
    mask.resize(n, true);
    if prompt.is_empty() {
        mask[0] = false;
    }
    let n_loss = mask.iter().filter(|m| **m).count();
    let mut tokens = prompt;
    tokens.extend(completion);
    Ok(Encoded { tokens, mask, n_loss })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub tokenizer: Tokenizer,
    params: Vec<f32>,
}

impl Model {
    /// A randomly initialized model: normal(0, 0.02) weights, residual
    /// projections scaled by `1/sqrt(2 * layers)`, unit gains, zero biases.
    pub fn new(config: ModelConfig, tokenizer: Tokenizer) -> Result<Self, ModelError> {
        config.validate()?;
        if tokenizer.vocab_size() != config.vocab_size {
            return Err(ModelError::InvalidConfig(format!(
                "vocab_size {} does not match tokenizer vocabulary of {}",
                config.vocab_size,
                tokenizer.vocab_size()
            )));
        }
        let tokenizer = Tokenizer::new(tokenizer.vocabulary, config.max_context);
        Ok(Model { params: init_params(&config), config, tokenizer })
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    /// Mean completion cross-entropy (nats/token) over `instances`.
    pub fn loss(&self, instances: &[SerializedPrompt]) -> Result<f64, ModelError> {
        let enc = self.encode_all(instances)?;
        let lay = self.layout();
        let (mut sum, mut n) = (0.0, 0);
        for e in &enc {
            let acts = net::forward(&lay, &self.params, &e.tokens);
            let (s, k) = net::masked_loss(&acts, lay.v, &e.tokens, &e.mask);
            sum += s;
            n += k;
        }
        Ok(sum / n as f64)
    }

    fn encode_all(&self, instances: &[SerializedPrompt]) -> Result<Vec<Encoded>, ModelError> {
        if instances.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        instances
            .iter()
            .enumerate()
            .map(|(i, p)| encode(&self.tokenizer, self.config.max_context, i, p))
            .collect()
    }

    /// Next-token distribution at every position of `text`.
    pub fn next_token_probs(&self, text: &str) -> Result<Vec<Vec<f64>>, ModelError> {
        let tokens = self.tokenizer.tokenize(text)?;
        if tokens.is_empty() || tokens.len() > self.config.max_context {
            return Err(ModelError::ContextOverflow {
                index: 0,
                tokens: tokens.len(),
                max_context: self.config.max_context,
            });
        }
        let acts = net::forward(&self.layout(), &self.params, &tokens);
        Ok(acts.probs.chunks_exact(self.config.vocab_size).map(|r| r.iter().map(|&p| p as f64).collect()).collect())
    }

    /// Trains in place; see [`train`].
    pub fn fit(
        &mut self,
        instances: &[SerializedPrompt],
        tc: &TrainConfig,
        mut on_step: impl FnMut(usize, usize, f64),
    ) -> Result<TrainReport, ModelError> {
        tc.validate()?;
        let enc = self.encode_all(instances)?;
        let lay = self.layout();
        let lr = tc.learning_rate();
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8f64);
        let mut m = vec![0f32; self.params.len()];
        let mut v = vec![0f32; self.params.len()];
        let mut grad = vec![0f32; self.params.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
        let mut order: Vec<usize> = (0..enc.len()).collect();
        let steps_per_epoch = enc.len().div_ceil(tc.batch_size);
        let total_steps = steps_per_epoch * tc.epochs;
        let mut report = TrainReport { loss_per_step: Vec::with_capacity(total_steps), epochs_completed: 0 };
        let mut initial = None;
        let mut above = 0usize;
        let mut step = 0usize;
        for _ in 0..tc.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(tc.batch_size) {
                step += 1;
                let n_loss: usize = batch.iter().map(|&i| enc[i].n_loss).sum();
                let scale = 1.0 / n_loss as f32;
                grad.fill(0.0);
                let mut loss_sum = 0.0;
                for &i in batch {
                    let e = &enc[i];
                    let acts = net::forward(&lay, &self.params, &e.tokens);
                    loss_sum += net::masked_loss(&acts, lay.v, &e.tokens, &e.mask).0;
                    net::backward(&lay, &self.params, &mut grad, &acts, &e.tokens, &e.mask, scale);
                }
                let loss = loss_sum / n_loss as f64;
                report.loss_per_step.push((step, loss));
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(ModelError::NonFiniteLoss { step, report });
                }
                let init = *initial.get_or_insert(loss);
                if loss > DIVERGENCE_FACTOR * init {
                    above += 1;
                    if above >= DIVERGENCE_STEPS {
                        return Err(ModelError::Diverged {
                            step,
                            loss,
                            initial: init,
                            factor: DIVERGENCE_FACTOR,
                            steps: DIVERGENCE_STEPS,
                            report,
                        });
                    }
                } else {
                    above = 0;
                }

                let norm = grad.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>().sqrt();
                let clip = if norm > CLIP_NORM { CLIP_NORM / norm } else { 1.0 };
                let bc1 = 1.0 - b1.powi(step as i32);
                let bc2 = 1.0 - b2.powi(step as i32);
                let step_size = (lr / bc1) as f32;
                let (b1f, b2f) = (b1 as f32, b2 as f32);
                let inv_bc2 = (1.0 / bc2) as f32;
                let clip = clip as f32;
                for (((p, g), m), v) in self.params.iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                    let g = *g * clip;
                    *m = b1f * *m + (1.0 - b1f) * g;
                    *v = b2f * *v + (1.0 - b2f) * g * g;
                    *p -= step_size * *m / ((*v * inv_bc2).sqrt() + eps as f32);
                }
                on_step(step, total_steps, loss);
            }
            report.epochs_completed += 1;
        }
        Ok(report)
    }

    /// Samples a completion for `prompt_text`. Temperature 0 is greedy.
    /// Stops after the end marker or `max_tokens` tokens, or when the context
    /// is full.
    pub fn generate(&self, prompt_text: &str, temperature: f64, max_tokens: usize, seed: u64) -> Result<String, ModelError> {
        check_temperature(temperature)?;
        let (cache, logits) = self.prefill(prompt_text)?;
        self.decode(cache, logits, temperature, max_tokens, seed)
    }

    fn prefill(&self, prompt_text: &str) -> Result<(net::KvCache<f32>, Vec<f32>), ModelError> {
        let tokens = self.tokenizer.tokenize(prompt_text)?;
        if tokens.is_empty() || tokens.len() > self.config.max_context {
            return Err(ModelError::ContextOverflow {
                index: 0,
                tokens: tokens.len(),
                max_context: self.config.max_context,
            });
        }
        Ok(net::prefill(&self.layout(), &self.params, &tokens))
    }

    fn decode(
        &self,
        mut cache: net::KvCache<f32>,
        mut logits: Vec<f32>,
        temperature: f64,
        max_tokens: usize,
        seed: u64,
    ) -> Result<String, ModelError> {
        let lay = self.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        let end = self.tokenizer.id_of(END_MARKER);
        for _ in 0..max_tokens {
            let next = sample_token(&logits, temperature, &mut rng);
            out.push(next);
            if Some(next) == end || cache.len >= self.config.max_context {
                break;
            }
            logits = net::step(&lay, &self.params, &mut cache, next);
        }
        Ok(self.tokenizer.detokenize(&out)?)
    }

    /// Generates `n_runs` completions for the serialized instance and
    /// averages the parseable ones. Run `r` samples with seed
    /// `run_seed(seed, r)`.
    pub fn predict_mean(
        &self,
        instance: &PromptInstance,
        digits: usize,
        n_runs: usize,
        temperature: f64,
        seed: u64,
    ) -> Result<Prediction, ModelError> {
        if n_runs == 0 {
            return Err(ModelError::NoRuns);
        }
        check_temperature(temperature)?;
        let mut query = instance.clone();
        query.target = None;
        let prompt = prompting::serialize(&query, digits)?;
        let (cache, logits) = self.prefill(&prompt.prompt_text)?;
        let raw = (0..n_runs)
            .into_par_iter()
            .map(|r| self.decode(cache.clone(), logits.clone(), temperature, DEFAULT_MAX_TOKENS, run_seed(seed, r)))
            .collect::<Result<Vec<String>, ModelError>>()?;
        Prediction::from_outputs(raw)
    }

    pub fn save(&self, w: &mut impl Write) -> Result<(), ModelError> {
        let header = serde_json::to_vec(&CheckpointHeader {
            config: self.config,
            tokenizer: self.tokenizer.clone(),
            n_params: self.params.len(),
        })
        .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.params.len() * 4);
        for p in &self.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn load(r: &mut impl Read) -> Result<Self, ModelError> {
        let bad = |m: String| ModelError::Checkpoint(m);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        if len > 1 << 20 {
            return Err(bad(format!("header of {len} bytes is implausible")));
        }
        let mut header = vec![0u8; len];
        r.read_exact(&mut header)?;
        let h: CheckpointHeader = serde_json::from_slice(&header).map_err(|e| bad(e.to_string()))?;
        h.config.validate()?;
        let expected = h.config.n_params();
        if h.n_params != expected {
            return Err(bad(format!("header declares {} parameters, config implies {expected}", h.n_params)));
        }
        let mut bytes = vec![0u8; expected * 4];
        r.read_exact(&mut bytes)?;
        let params = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(bad("trailing bytes after parameters".into()));
        }
        Ok(Model { config: h.config, tokenizer: h.tokenizer, params })
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config: ModelConfig,
    tokenizer: Tokenizer,
    n_params: usize,
}

/// Builds a fresh model from `model_config` and trains it.
pub fn train(
    model_config: ModelConfig,
    tokenizer: Tokenizer,
    instances: &[SerializedPrompt],
    train_config: &TrainConfig,
) -> Result<(Model, TrainReport), ModelError> {
    let mut model = Model::new(model_config, tokenizer)?;
    let report = model.fit(instances, train_config, |_, _, _| {})?;
    Ok((model, report))
}

/// Seed for run `r` of a multi-run prediction.
pub fn run_seed(seed: u64, r: usize) -> u64 {
    let mut z = seed ^ (r as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_temperature(t: f64) -> Result<(), ModelError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::Temperature(t))
    }
}

fn sample_token(logits: &[f32], temperature: f64, rng: &mut ChaCha8Rng) -> u32 {
    let argmax = || {
        let mut best = 0;
        for (i, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = i;
            }
        }
        best as u32
    };
    if temperature == 0.0 {
        return argmax();
    }
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &l| a.max(l as f64));
    let w: Vec<f64> = logits.iter().map(|&l| ((l as f64 - max) / temperature).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return argmax();
    }
    let mut u = rng.random::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        u -= wi;
        if u < 0.0 {
            return i as u32;
        }
    }
    (w.len() - 1) as u32
}

/// Result of [`gradient_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub worst_relative_error: f64,
    pub checked: usize,
}

/// Compares the analytic gradient of the masked completion loss with central
/// differences, in f64, on every `stride`-th parameter. Parameters start from
/// the usual initialization plus uniform noise of width `jitter`.
pub fn gradient_check(
    config: &ModelConfig,
    sequences: &[(Vec<u32>, Vec<bool>)],
    jitter: f64,
    stride: usize,
    h: f64,
) -> Result<GradientCheck, ModelError> {
    config.validate()?;
    let lay = Layout::new(config);
    for (i, (t, m)) in sequences.iter().enumerate() {
        if t.len() != m.len() || t.len() > config.max_context || t.iter().any(|&x| x as usize >= config.vocab_size) {
            return Err(ModelError::InvalidConfig(format!("sequence {i} does not fit the model")));
        }
    }
    let n_loss: usize = sequences.iter().map(|(_, m)| m[1..].iter().filter(|x| **x).count()).sum();
    if n_loss == 0 || stride == 0 {
        return Err(ModelError::EmptyCompletion { index: 0 });
    }
    let mut p: Vec<f64> = init_params(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9);
    for x in p.iter_mut() {
        *x += jitter * (rng.random::<f64>() - 0.5);
    }
    let loss = |p: &[f64]| {
        sequences.iter().map(|(t, m)| net::masked_loss(&net::forward(&lay, p, t), lay.v, t, m).0).sum::<f64>()
            / n_loss as f64
    };
    let mut g = vec![0.0; p.len()];
    for (t, m) in sequences {
        let acts = net::forward(&lay, &p, t);
        net::backward(&lay, &p, &mut g, &acts, t, m, 1.0 / n_loss as f64);
    }
    let mut worst = 0.0f64;
    let mut checked = 0;
    for i in (0..p.len()).step_by(stride) {
        let orig = p[i];
        p[i] = orig + h;
        let lp = loss(&p);
        p[i] = orig - h;
        let lm = loss(&p);
        p[i] = orig;
        let fd = (lp - lm) / (2.0 * h);
        let denom = fd.abs().max(g[i].abs()).max(1e-6);
        worst = worst.max((fd - g[i]).abs() / denom);
        checked += 1;
    }
    Ok(GradientCheck { worst_relative_error: worst, checked })
}

fn init_params<T: Scalar>(config: &ModelConfig) -> Vec<T> {
    let lay = Layout::new(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 0.02).expect("valid sigma");
    let mut p: Vec<T> = (0..lay.total).map(|_| T::of(normal.sample(&mut rng))).collect();
    let proj_scale = T::of(1.0 / (2.0 * config.layers as f64).sqrt());
    for r in lay.projection_ranges() {
        for x in &mut p[r] {
            *x = *x * proj_scale;
        }
    }
    for r in lay.gain_ranges() {
        p[r].fill(T::one());
    }
    for r in lay.bias_ranges() {
        p[r].fill(T::zero());
    }
    p
}
