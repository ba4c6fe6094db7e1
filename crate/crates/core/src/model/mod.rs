//! Encoder-only transformer binary classifiers, trained from scratch.
//!
//! One independent model per integration method. Classification reads
//! the `[CLS]` position through a linear head with sigmoid; training is
//! Adam + BCE with reduce-on-plateau and early stopping. The network is
//! generic over f32/f64: training and checkpoints use f32, while the
//! finite-difference gradient checks instantiate the identical code in
//! f64.

use std::time::{Duration, Instant};

use ndarray::{Array2, ArrayViewD};
use num_traits::ToPrimitive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod ckpt;
mod net;
mod train;

pub use ckpt::{load, save, widen};
pub use net::{backward_sample, embed, forward_sample, Linear, Mode, Params, SampleCache};
pub use train::{train, EpochStats, TrainSet};

/// Scalar element: f32 in production, f64 under numeric tests.
pub trait Scalar: ndarray::NdFloat + ToPrimitive {
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(v: f64) -> f32 {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(v: f64) -> f64 {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("vocabulary hash mismatch: model {model}, data {data}")]
    VocabMismatch { model: String, data: String },
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Positional encoding flavor; only learned embeddings are implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PositionalKind {
    #[default]
    Learned,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    /// Defaults to 4·model_dim when absent.
    #[serde(default)]
    pub ff_dim: Option<usize>,
    pub dropout_p: f64,
    pub max_len: usize,
    pub vocab_size: usize,
    #[serde(default)]
    pub positional: PositionalKind,
    pub seed: u64,
}

impl ModelConfig {
    /// The full-scale architecture: 4 layers, 4 heads, dimension 128,
    /// dropout 0.3, max length 1024.
    pub fn standard(vocab_size: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            layers: 4,
            heads: 4,
            model_dim: 128,
            ff_dim: None,
            dropout_p: 0.3,
            max_len: 1024,
            vocab_size,
            positional: PositionalKind::Learned,
            seed,
        }
    }

    /// A small configuration for desk-scale experiments and tests.
    pub fn desk(vocab_size: usize, max_len: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            layers: 2,
            heads: 2,
            model_dim: 32,
            ff_dim: Some(64),
            dropout_p: 0.1,
            max_len,
            vocab_size,
            positional: PositionalKind::Learned,
            seed,
        }
    }

    pub fn ff(&self) -> usize {
        self.ff_dim.unwrap_or(4 * self.model_dim)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.model_dim == 0 || self.heads == 0 || self.model_dim % self.heads != 0 {
            return Err(ModelError::ShapeMismatch(format!(
                "model_dim {} not divisible by heads {}",
                self.model_dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(ModelError::ShapeMismatch(format!(
                "dropout_p {} outside [0, 1)",
                self.dropout_p
            )));
        }
        Ok(())
    }
}

/// Positive-class weighting for imbalanced methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PosWeight {
    /// No weighting.
    None,
    /// min(negatives/positives, cap), computed from the training set.
    #[default]
    Auto,
    Fixed(f64),
}

/// Optimization hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Reduce-on-plateau multiplier applied to the learning rate.
    pub plateau_factor: f64,
    /// Epochs without validation improvement before a reduction.
    pub plateau_patience: usize,
    pub early_stop_patience: usize,
    #[serde(default)]
    pub pos_weight: PosWeight,
    /// Cap for the automatic positive-class weight.
    pub pos_weight_cap: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            max_epochs: 100,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            plateau_factor: 0.05,
            plateau_patience: 3,
            early_stop_patience: 10,
            pos_weight: PosWeight::Auto,
            pos_weight_cap: 20.0,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.batch_size == 0 {
            return Err(ModelError::ShapeMismatch("batch_size must be >= 1".into()));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(ModelError::ShapeMismatch(format!(
                "plateau factor {} outside (0, 1)",
                self.plateau_factor
            )));
        }
        Ok(())
    }
}

/// One encoded input sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSample {
    pub ids: Vec<u32>,
    pub mask: Vec<bool>,
}

impl EncodedSample {
    pub fn new(ids: Vec<u32>, mask: Vec<bool>) -> EncodedSample {
        EncodedSample { ids, mask }
    }

    /// Number of real (unmasked) tokens.
    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Trained-model container: parameters plus everything needed to refuse
/// mismatched inputs later.
#[derive(Debug, Clone)]
pub struct ModelState<F: Scalar> {
    pub config: ModelConfig,
    pub train_config: TrainConfig,
    pub params: Params<F>,
    pub vocab_hash: String,
    pub history: Vec<EpochStats>,
}

impl<F: Scalar> ModelState<F> {
    /// Freshly initialized parameters from `config.seed`.
    pub fn init(config: ModelConfig, train_config: TrainConfig, vocab_hash: &str) -> ModelState<F> {
        let mut rng = rand::SeedableRng::seed_from_u64(config.seed);
        ModelState {
            params: Params::init(&config, &mut rng),
            config,
            train_config,
            vocab_hash: vocab_hash.to_string(),
            history: Vec::new(),
        }
    }
}

fn check_batch<F: Scalar>(
    state: &ModelState<F>,
    batch: &[EncodedSample],
) -> Result<(), ModelError> {
    for s in batch {
        if s.ids.len() != s.mask.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "ids length {} != mask length {}",
                s.ids.len(),
                s.mask.len()
            )));
        }
        if s.ids.is_empty() || s.ids.len() > state.config.max_len {
            return Err(ModelError::ShapeMismatch(format!(
                "sequence length {} outside 1..={}",
                s.ids.len(),
                state.config.max_len
            )));
        }
        if let Some(&id) = s.ids.iter().find(|&&id| id as usize >= state.config.vocab_size) {
            return Err(ModelError::ShapeMismatch(format!(
                "token id {id} >= vocab size {}",
                state.config.vocab_size
            )));
        }
        if !s.mask.first().copied().unwrap_or(false) {
            return Err(ModelError::ShapeMismatch(
                "[CLS] position must be unmasked".into(),
            ));
        }
    }
    Ok(())
}

/// Forward a batch; returns pre-sigmoid logits and per-sample caches.
pub fn forward_batch<F: Scalar>(
    state: &ModelState<F>,
    batch: &[EncodedSample],
    mode: &mut Mode<'_>,
) -> Result<(Vec<F>, Vec<SampleCache<F>>), ModelError> {
    check_batch(state, batch)?;
    let mut logits = Vec::with_capacity(batch.len());
    let mut caches = Vec::with_capacity(batch.len());
    for s in batch {
        let emb = embed(&state.params, &s.ids);
        let (logit, cache) =
            forward_sample(&state.params, &state.config, &s.ids, &s.mask, emb, mode);
        logits.push(logit);
        caches.push(cache);
    }
    Ok((logits, caches))
}

/// Probabilities in (0, 1) for a batch, eval mode.
pub fn forward_probs<F: Scalar>(
    state: &ModelState<F>,
    batch: &[EncodedSample],
) -> Result<Vec<F>, ModelError> {
    let (logits, _) = forward_batch(state, batch, &mut Mode::Eval)?;
    Ok(logits.into_iter().map(sigmoid).collect())
}

/// Backward a batch from per-sample logit gradients. Returns parameter
/// gradients and the per-sample embedding-output gradients.
pub fn backward_batch<F: Scalar>(
    state: &ModelState<F>,
    caches: &[SampleCache<F>],
    dlogits: &[F],
) -> (Params<F>, Vec<Array2<F>>) {
    assert_eq!(caches.len(), dlogits.len());
    let mut grad = Params::zeros_like(&state.params);
    let mut demb = Vec::with_capacity(caches.len());
    for (cache, &dl) in caches.iter().zip(dlogits) {
        demb.push(backward_sample(
            &state.params,
            &state.config,
            cache,
            dl,
            &mut grad,
        ));
    }
    (grad, demb)
}

pub fn sigmoid<F: Scalar>(z: F) -> F {
    let one = F::one();
    if z >= F::zero() {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    }
}

/// Numerically stable BCE on a logit: `max(z,0) - z·y + ln(1+e^-|z|)`.
pub fn bce_on_logit<F: Scalar>(logit: F, target: bool) -> F {
    let z = logit;
    let y = if target { F::one() } else { F::zero() };
    z.max(F::zero()) - z * y + (F::one() + (-z.abs()).exp()).ln()
}

/// Prediction output with wall-time accounting.
#[derive(Debug, Clone)]
pub struct PredictOutput {
    pub probs: Vec<f64>,
    pub labels: Vec<bool>,
    pub batch_latencies: Vec<Duration>,
    pub mean_batch_latency: Duration,
    pub median_batch_latency: Duration,
}

/// Batched deterministic inference with threshold 0.5 and latency stats.
pub fn predict<F: Scalar>(
    state: &ModelState<F>,
    data: &[EncodedSample],
    batch_size: usize,
    data_vocab_hash: &str,
) -> Result<PredictOutput, ModelError> {
    if state.vocab_hash != data_vocab_hash {
        return Err(ModelError::VocabMismatch {
            model: state.vocab_hash.clone(),
            data: data_vocab_hash.to_string(),
        });
    }
    let mut probs = Vec::with_capacity(data.len());
    let mut latencies = Vec::new();
    for chunk in data.chunks(batch_size.max(1)) {
        let started = Instant::now();
        let p = forward_probs(state, chunk)?;
        latencies.push(started.elapsed());
        probs.extend(p.into_iter().map(Scalar::as_f64));
    }
    let labels = probs.iter().map(|&p| p >= 0.5).collect();
    let (mean, median) = latency_stats(&latencies);
    Ok(PredictOutput {
        probs,
        labels,
        batch_latencies: latencies,
        mean_batch_latency: mean,
        median_batch_latency: median,
    })
}

fn latency_stats(latencies: &[Duration]) -> (Duration, Duration) {
    if latencies.is_empty() {
        return (Duration::ZERO, Duration::ZERO);
    }
    let total: Duration = latencies.iter().sum();
    let mut sorted = latencies.to_vec();
    sorted.sort();
    (total / latencies.len() as u32, sorted[sorted.len() / 2])
}

/// Flatten all parameters into one f64 vector (test and tooling aid).
pub fn flatten_params<F: Scalar>(params: &Params<F>) -> Vec<f64> {
    let mut out = Vec::new();
    params.visit(&mut |_, t: ArrayViewD<'_, F>| {
        out.extend(t.iter().map(|&v| v.as_f64()));
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn tiny_state(seed: u64) -> ModelState<f64> {
        let config = ModelConfig {
            layers: 1,
            heads: 2,
            model_dim: 8,
            ff_dim: Some(16),
            dropout_p: 0.2,
            max_len: 16,
            vocab_size: 28,
            positional: PositionalKind::Learned,
            seed,
        };
        ModelState::init(config, TrainConfig::default(), "testhash")
    }

    fn sample(ids: &[u32]) -> EncodedSample {
        EncodedSample::new(ids.to_vec(), vec![true; ids.len()])
    }

    #[test]
    fn probabilities_strictly_inside_unit_interval() {
        let state = tiny_state(3);
        let batch = vec![sample(&[1, 10, 11]), sample(&[1, 4])];
        let probs = forward_probs(&state, &batch).unwrap();
        for p in probs {
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn eval_mode_is_deterministic_and_rowwise() {
        let state = tiny_state(4);
        let a = sample(&[1, 10, 12, 5]);
        let b = sample(&[1, 7]);
        let p1 = forward_probs(&state, &[a.clone(), b.clone(), a.clone()]).unwrap();
        assert_eq!(p1[0], p1[2], "duplicate rows must agree");
        // Permuting batch order permutes outputs.
        let p2 = forward_probs(&state, &[b, a]).unwrap();
        assert_eq!(p2[1], p1[0]);
        assert_eq!(p2[0], p1[1]);
    }

    #[test]
    fn padding_never_reaches_cls() {
        let state = tiny_state(5);
        let short = sample(&[1, 10, 11]);
        let mut padded_ids = short.ids.clone();
        let mut padded_mask = short.mask.clone();
        padded_ids.extend([0, 0, 0, 0]);
        padded_mask.extend([false, false, false, false]);
        let padded = EncodedSample::new(padded_ids, padded_mask);
        let p = forward_probs(&state, &[short, padded]).unwrap();
        assert!(
            (p[0] - p[1]).abs() <= 1e-12,
            "pad tokens changed the output: {} vs {}",
            p[0],
            p[1]
        );
    }

    #[test]
    fn shape_violations_are_rejected()  {
        let state = tiny_state(6);
        // id out of vocab
        let bad = EncodedSample::new(vec![1, 99], vec![true, true]);
        assert!(matches!(
            forward_probs(&state, &[bad]),
            Err(ModelError::ShapeMismatch(_))
        ));
        // mask length mismatch
        let bad = EncodedSample::new(vec![1, 2], vec![true]);
        assert!(matches!(
            forward_probs(&state, &[bad]),
            Err(ModelError::ShapeMismatch(_))
        ));
        // too long
        let bad = sample(&vec![1; 17]);
        assert!(matches!(
            forward_probs(&state, &[bad]),
            Err(ModelError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn predict_thresholds_and_checks_vocab() {
        let state = tiny_state(7);
        let data = vec![sample(&[1, 10]), sample(&[1, 11, 12])];
        let out = predict(&state, &data, 2, "testhash").unwrap();
        assert_eq!(out.probs.len(), 2);
        for (p, l) in out.probs.iter().zip(&out.labels) {
            assert_eq!(*l, *p >= 0.5);
        }
        assert!(matches!(
            predict(&state, &data, 2, "otherhash"),
            Err(ModelError::VocabMismatch { .. })
        ));
        // Empty dataset: empty output, no timing rows.
        let out = predict(&state, &[], 4, "testhash").unwrap();
        assert!(out.probs.is_empty());
        assert!(out.batch_latencies.is_empty());
    }

    #[test]
    fn train_mode_dropout_uses_the_rng() {
        use rand::SeedableRng;
        let state = tiny_state(8);
        let batch = vec![sample(&[1, 10, 11, 12])];
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let (a, _) = forward_batch(&state, &batch, &mut Mode::Train(&mut r1)).unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(1);
        let (b, _) = forward_batch(&state, &batch, &mut Mode::Train(&mut r2)).unwrap();
        assert_eq!(a[0], b[0], "same dropout seed, same output");
        let mut r3 = ChaCha8Rng::seed_from_u64(2);
        let (c, _) = forward_batch(&state, &batch, &mut Mode::Train(&mut r3)).unwrap();
        assert_ne!(a[0], c[0], "different dropout seed should differ");
    }
}
