//! Training loop: Adam, BCE with optional positive-class weighting,
//! reduce-on-plateau, early stopping, best-checkpoint return.

use ndarray::ArrayD;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    backward_batch, bce_on_logit, forward_batch, sigmoid, EncodedSample, Mode, ModelConfig,
    ModelError, ModelState, Params, PosWeight, Scalar, TrainConfig,
};

/// Encoded samples with binary targets.
#[derive(Debug, Clone, Default)]
pub struct TrainSet {
    pub samples: Vec<EncodedSample>,
    pub targets: Vec<bool>,
}

impl TrainSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positive_rate(&self) -> f64 {
        if self.targets.is_empty() {
            return 0.0;
        }
        self.targets.iter().filter(|&&t| t).count() as f64 / self.targets.len() as f64
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub lr: f64,
}

struct Adam<F> {
    m: Vec<ArrayD<F>>,
    v: Vec<ArrayD<F>>,
    t: i32,
}

impl<F: Scalar> Adam<F> {
    fn new(params: &Params<F>) -> Adam<F> {
        let mut m = Vec::new();
        params.visit(&mut |_, t| m.push(ArrayD::zeros(t.raw_dim())));
        let v = m.clone();
        Adam { m, v, t: 0 }
    }

    fn step(&mut self, params: &mut Params<F>, grads: &Params<F>, lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let b1 = F::of(cfg.beta1);
        let b2 = F::of(cfg.beta2);
        let eps = F::of(cfg.eps);
        let one = F::one();
        let bias1 = one - b1.powi(self.t);
        let bias2 = one - b2.powi(self.t);
        let step = F::of(lr);
        let mut gtensors = Vec::with_capacity(self.m.len());
        grads.visit(&mut |_, t| gtensors.push(t.to_owned()));
        let mut i = 0;
        params.visit_mut(&mut |_, mut p| {
            let g = &gtensors[i];
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(&mut p)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|pv, &gv, mv, vv| {
                    *mv = b1 * *mv + (one - b1) * gv;
                    *vv = b2 * *vv + (one - b2) * gv * gv;
                    let mhat = *mv / bias1;
                    let vhat = *vv / bias2;
                    *pv = *pv - step * mhat / (vhat.sqrt() + eps);
                });
            i += 1;
        });
    }
}

fn resolve_pos_weight(cfg: &TrainConfig, set: &TrainSet) -> f64 {
    match cfg.pos_weight {
        PosWeight::None => 1.0,
        PosWeight::Fixed(w) => w,
        PosWeight::Auto => {
            let pos = set.targets.iter().filter(|&&t| t).count();
            let neg = set.targets.len() - pos;
            if pos == 0 || neg == 0 {
                1.0
            } else {
                (neg as f64 / pos as f64).min(cfg.pos_weight_cap)
            }
        }
    }
}

/// Unweighted validation loss and accuracy at threshold 0.5.
pub fn evaluate<F: Scalar>(
    state: &ModelState<F>,
    set: &TrainSet,
    batch_size: usize,
) -> Result<(f64, f64), ModelError> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (chunk, targets) in set
        .samples
        .chunks(batch_size)
        .zip(set.targets.chunks(batch_size))
    {
        let (logits, _) = forward_batch(state, chunk, &mut Mode::Eval)?;
        for (&z, &y) in logits.iter().zip(targets) {
            loss += bce_on_logit(z, y).as_f64();
            if (sigmoid(z).as_f64() >= 0.5) == y {
                correct += 1;
            }
        }
    }
    let n = set.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Train one binary classifier.
///
/// Returns the best-validation-loss checkpoint with per-epoch history.
/// `max_epochs = 0` returns the freshly initialized state with empty
/// history. NaN loss aborts with `Diverged`.
pub fn train<F: Scalar>(
    train_set: &TrainSet,
    val_set: &TrainSet,
    config: ModelConfig,
    tcfg: TrainConfig,
    vocab_hash: &str,
) -> Result<ModelState<F>, ModelError> {
    config.validate()?;
    tcfg.validate()?;
    let mut state: ModelState<F> = ModelState::init(config, tcfg.clone(), vocab_hash);
    if tcfg.max_epochs == 0 {
        return Ok(state);
    }
    if train_set.is_empty() || val_set.is_empty() {
        return Err(ModelError::ShapeMismatch(
            "training and validation sets must be non-empty".into(),
        ));
    }
    assert_eq!(train_set.samples.len(), train_set.targets.len());
    assert_eq!(val_set.samples.len(), val_set.targets.len());

    let pos_weight = resolve_pos_weight(&tcfg, train_set);
    let mut adam = Adam::new(&state.params);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(tcfg.shuffle_seed);
    let mut dropout_rng =
        ChaCha8Rng::seed_from_u64(tcfg.shuffle_seed ^ 0xD1B5_4A32_D192_ED03);
    let mut lr = tcfg.lr;

    let mut best_val = f64::INFINITY;
    let mut best_params: Option<Params<F>> = None;
    let mut since_improve = 0usize;
    let mut plateau_count = 0usize;
    let mut history = Vec::new();

    let n = train_set.len();
    for epoch in 1..=tcfg.max_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(tcfg.batch_size) {
            let batch: Vec<EncodedSample> = chunk
                .iter()
                .map(|&i| train_set.samples[i].clone())
                .collect();
            let (logits, caches) =
                forward_batch(&state, &batch, &mut Mode::Train(&mut dropout_rng))?;
            let inv_b = 1.0 / batch.len() as f64;
            let mut dlogits = Vec::with_capacity(batch.len());
            for (&z, &i) in logits.iter().zip(chunk) {
                let y = train_set.targets[i];
                let w = if y { pos_weight } else { 1.0 };
                let sample_loss = w * bce_on_logit(z, y).as_f64();
                if !sample_loss.is_finite() {
                    return Err(ModelError::Diverged {
                        epoch,
                        detail: format!("non-finite training loss (logit {})", z.as_f64()),
                    });
                }
                epoch_loss += sample_loss;
                let target = if y { F::one() } else { F::zero() };
                dlogits.push(F::of(w * inv_b) * (sigmoid(z) - target));
            }
            let (grads, _) = backward_batch(&state, &caches, &dlogits);
            adam.step(&mut state.params, &grads, lr, &tcfg);
        }
        let train_loss = epoch_loss / n as f64;
        let (val_loss, val_acc) = evaluate(&state, val_set, tcfg.batch_size)?;
        if !val_loss.is_finite() {
            return Err(ModelError::Diverged {
                epoch,
                detail: "non-finite validation loss".into(),
            });
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_acc,
            lr,
        });
        log::debug!(
            "epoch {epoch}: train_loss {train_loss:.5} val_loss {val_loss:.5} val_acc {val_acc:.4} lr {lr:.2e}"
        );
        if val_loss < best_val {
            best_val = val_loss;
            best_params = Some(state.params.clone());
            since_improve = 0;
            plateau_count = 0;
        } else {
            since_improve += 1;
            plateau_count += 1;
        }
        if plateau_count >= tcfg.plateau_patience {
            lr *= tcfg.plateau_factor;
            plateau_count = 0;
        }
        if since_improve >= tcfg.early_stop_patience {
            break;
        }
    }
    if let Some(best) = best_params {
        state.params = best;
    }
    state.history = history;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PositionalKind;

    fn tiny_config(seed: u64) -> ModelConfig {
        ModelConfig {
            layers: 1,
            heads: 2,
            model_dim: 16,
            ff_dim: Some(32),
            dropout_p: 0.0,
            max_len: 12,
            vocab_size: 28,
            positional: PositionalKind::Learned,
            seed,
        }
    }

    /// Token 19 ("abs") present -> positive.
    fn toy_set(n: usize, seed: u64) -> TrainSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..n {
            let len = 3 + (rand::Rng::gen_range(&mut rng, 0..6usize));
            let mut ids = vec![1u32];
            let positive = rand::Rng::gen_bool(&mut rng, 0.5);
            for _ in 1..len {
                ids.push(rand::Rng::gen_range(&mut rng, 10..18u32));
            }
            if positive {
                let pos = rand::Rng::gen_range(&mut rng, 1..ids.len());
                ids[pos] = 19;
            }
            samples.push(EncodedSample::new(ids.clone(), vec![true; ids.len()]));
            targets.push(positive);
        }
        TrainSet { samples, targets }
    }

    #[test]
    fn zero_epochs_returns_initialized_state() {
        let set = toy_set(8, 1);
        let tcfg = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        let state: ModelState<f64> =
            train(&set, &set, tiny_config(1), tcfg, "h").unwrap();
        assert!(state.history.is_empty());
        let fresh: ModelState<f64> =
            ModelState::init(tiny_config(1), TrainConfig::default(), "h");
        assert_eq!(state.params, fresh.params);
    }

    #[test]
    fn memorizes_a_tiny_token_presence_task() {
        let train_set = toy_set(64, 2);
        let val_set = toy_set(32, 3);
        let tcfg = TrainConfig {
            batch_size: 16,
            max_epochs: 200,
            lr: 3e-3,
            early_stop_patience: 200,
            plateau_patience: 200,
            pos_weight: PosWeight::None,
            ..TrainConfig::default()
        };
        let state: ModelState<f64> =
            train(&train_set, &val_set, tiny_config(7), tcfg.clone(), "h").unwrap();
        let (train_loss, _) = evaluate(&state, &train_set, tcfg.batch_size).unwrap();
        assert!(
            train_loss < 0.01,
            "capacity sanity: loss {train_loss} >= 0.01 after {} epochs",
            state.history.len()
        );
    }

    #[test]
    fn training_is_reproducible() {
        let train_set = toy_set(48, 4);
        let val_set = toy_set(24, 5);
        let tcfg = TrainConfig {
            batch_size: 16,
            max_epochs: 5,
            ..TrainConfig::default()
        };
        let a: ModelState<f64> =
            train(&train_set, &val_set, tiny_config(9), tcfg.clone(), "h").unwrap();
        let b: ModelState<f64> =
            train(&train_set, &val_set, tiny_config(9), tcfg, "h").unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn plateau_reduces_lr() {
        let train_set = toy_set(16, 6);
        let val_set = toy_set(16, 7);
        let tcfg = TrainConfig {
            batch_size: 8,
            max_epochs: 30,
            plateau_patience: 2,
            plateau_factor: 0.05,
            early_stop_patience: 30,
            ..TrainConfig::default()
        };
        let state: ModelState<f64> =
            train(&train_set, &val_set, tiny_config(11), tcfg, "h").unwrap();
        let lrs: Vec<f64> = state.history.iter().map(|e| e.lr).collect();
        assert!(
            lrs.iter().any(|&lr| lr < 1e-3),
            "learning rate never reduced: {lrs:?}"
        );
    }
}
