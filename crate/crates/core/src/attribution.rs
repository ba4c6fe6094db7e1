//! Layer integrated gradients over the embedding output.
//!
//! For embedding output `x` and baseline `x'`, the attribution of
//! position `i` is `Σ_dims (x_i - x'_i) · (1/m) Σ_{k=1..m} ∂F(x' +
//! (k/m)(x - x'))/∂x_i` — a right-Riemann approximation of the path
//! integral, targeting the pre-sigmoid `[CLS]` logit. The completeness
//! residual `|Σ_i score_i - (F(x) - F(x'))|` is recorded on every
//! report.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    backward_sample, embed, forward_sample, EncodedSample, Mode, ModelState, Params, Scalar,
};
use crate::preprocess::Vocabulary;

#[derive(Debug, Error, PartialEq)]
pub enum AttributionError {
    #[error("token `{0}` occurs in no report")]
    TokenAbsent(String),
}

/// Interpolation baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Zero embedding vector at every position (positions retained).
    #[default]
    ZeroEmbedding,
    /// The `[PAD]` token's embedding at every position.
    PadSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionConfig {
    pub steps: usize,
    #[serde(default)]
    pub baseline: BaselineKind,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        AttributionConfig {
            steps: 50,
            baseline: BaselineKind::ZeroEmbedding,
        }
    }
}

/// Per-token attribution scores for one sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionReport {
    pub sample_id: usize,
    pub tokens: Vec<String>,
    pub scores: Vec<f64>,
    /// F(x) - F(baseline), on the logit scale.
    pub delta: f64,
    pub completeness_residual: f64,
}

/// Attribute one sample's prediction to its input tokens.
///
/// The sample is evaluated at its real (unpadded) length; eval mode, so
/// the result is deterministic.
pub fn lig<F: Scalar>(
    state: &ModelState<F>,
    sample: &EncodedSample,
    sample_id: usize,
    vocab: &Vocabulary,
    cfg: &AttributionConfig,
) -> AttributionReport {
    assert!(cfg.steps >= 1, "steps must be at least 1");
    let real_len = sample.real_len();
    let ids: Vec<u32> = sample.ids[..real_len].to_vec();
    let mask = vec![true; real_len];
    let tokens: Vec<String> = ids
        .iter()
        .map(|&id| {
            vocab
                .token(id)
                .map(str::to_string)
                .unwrap_or_else(|| format!("#{id}"))
        })
        .collect();

    let x = embed(&state.params, &ids);
    let baseline: Array2<F> = match cfg.baseline {
        BaselineKind::ZeroEmbedding => Array2::zeros(x.raw_dim()),
        BaselineKind::PadSequence => embed(&state.params, &vec![0u32; real_len]),
    };
    let diff = &x - &baseline;

    let logit_at = |emb: Array2<F>| -> F {
        let (logit, _) =
            forward_sample(&state.params, &state.config, &ids, &mask, emb, &mut Mode::Eval);
        logit
    };
    let delta = (logit_at(x.clone()) - logit_at(baseline.clone())).as_f64();

    let m = cfg.steps;
    let mut grad_sum: Array2<F> = Array2::zeros(x.raw_dim());
    let mut scratch: Params<F> = Params::zeros_like(&state.params);
    for k in 1..=m {
        let alpha = F::of(k as f64 / m as f64);
        let z = &baseline + &diff.mapv(|v| v * alpha);
        let (_, cache) =
            forward_sample(&state.params, &state.config, &ids, &mask, z, &mut Mode::Eval);
        let demb = backward_sample(&state.params, &state.config, &cache, F::one(), &mut scratch);
        grad_sum += &demb;
    }
    let inv_m = F::of(1.0 / m as f64);
    let scores: Vec<f64> = (0..real_len)
        .map(|i| {
            let mut s = F::zero();
            for j in 0..x.ncols() {
                s = s + diff[[i, j]] * grad_sum[[i, j]] * inv_m;
            }
            s.as_f64()
        })
        .collect();
    let total: f64 = scores.iter().sum();
    AttributionReport {
        sample_id,
        tokens,
        scores,
        delta,
        completeness_residual: (total - delta).abs(),
    }
}

/// Corpus-level statistics for one vocabulary token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub token: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

/// Aggregate scores over every position where each token occurs.
pub fn aggregate(reports: &[AttributionReport]) -> Vec<TokenStats> {
    let mut per_token: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
    for r in reports {
        for (tok, &score) in r.tokens.iter().zip(&r.scores) {
            per_token.entry(tok).or_default().push(score);
        }
    }
    per_token
        .into_iter()
        .map(|(token, scores)| {
            let n = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / n;
            let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
            TokenStats {
                token: token.to_string(),
                count: scores.len(),
                mean,
                std: var.sqrt(),
            }
        })
        .collect()
}

/// Statistics for a single token; `TokenAbsent` when it never occurs.
pub fn aggregate_token(
    reports: &[AttributionReport],
    token: &str,
) -> Result<TokenStats, AttributionError> {
    aggregate(reports)
        .into_iter()
        .find(|t| t.token == token)
        .ok_or_else(|| AttributionError::TokenAbsent(token.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, ModelState, PositionalKind, TrainConfig};

    fn tiny_state(seed: u64) -> ModelState<f64> {
        let config = ModelConfig {
            layers: 1,
            heads: 2,
            model_dim: 8,
            ff_dim: Some(16),
            dropout_p: 0.0,
            max_len: 16,
            vocab_size: 28,
            positional: PositionalKind::Learned,
            seed,
        };
        ModelState::init(config, TrainConfig::default(), "h")
    }

    fn sample(ids: &[u32]) -> EncodedSample {
        EncodedSample::new(ids.to_vec(), vec![true; ids.len()])
    }

    #[test]
    fn pad_baseline_on_all_pad_input_gives_zero_scores() {
        // With the pad-sequence baseline, a [CLS]-free all-pad sample is
        // its own baseline: x = x' so every score and the residual are 0.
        let state = tiny_state(1);
        let vocab = Vocabulary::standard();
        let cfg = AttributionConfig {
            steps: 8,
            baseline: BaselineKind::PadSequence,
        };
        let s = sample(&[0, 0, 0]);
        let r = lig(&state, &s, 0, &vocab, &cfg);
        assert!(r.scores.iter().all(|&s| s == 0.0));
        assert_eq!(r.completeness_residual, 0.0);
        assert_eq!(r.delta, 0.0);
    }

    #[test]
    fn riemann_refinement_shrinks_the_residual() {
        let state = tiny_state(2);
        let vocab = Vocabulary::standard();
        let s = sample(&[1, 10, 19, 12, 11]);
        let coarse = lig(
            &state,
            &s,
            0,
            &vocab,
            &AttributionConfig {
                steps: 1,
                baseline: BaselineKind::ZeroEmbedding,
            },
        );
        let fine = lig(
            &state,
            &s,
            0,
            &vocab,
            &AttributionConfig {
                steps: 50,
                baseline: BaselineKind::ZeroEmbedding,
            },
        );
        assert!(
            fine.completeness_residual <= coarse.completeness_residual,
            "steps=50 residual {} > steps=1 residual {}",
            fine.completeness_residual,
            coarse.completeness_residual
        );
    }

    #[test]
    fn report_length_matches_sequence_and_is_deterministic() {
        let state = tiny_state(3);
        let vocab = Vocabulary::standard();
        let mut ids = vec![1u32, 10, 11, 12];
        let mut mask = vec![true; 4];
        ids.extend([0, 0]);
        mask.extend([false, false]);
        let s = EncodedSample::new(ids, mask);
        let cfg = AttributionConfig::default();
        let a = lig(&state, &s, 7, &vocab, &cfg);
        let b = lig(&state, &s, 7, &vocab, &cfg);
        assert_eq!(a.scores.len(), 4, "padded positions are not attributed");
        assert_eq!(a.tokens, vec!["[CLS]", "x", "add", "mul"]);
        assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn aggregation_counts_positions() {
        let r1 = AttributionReport {
            sample_id: 0,
            tokens: vec!["[CLS]".into(), "abs".into()],
            scores: vec![0.1, -0.4],
            delta: 0.0,
            completeness_residual: 0.0,
        };
        let stats = aggregate_token(&[r1.clone()], "abs").unwrap();
        assert_eq!(stats.count, 1);
        assert!((stats.mean + 0.4).abs() < 1e-12);
        assert_eq!(
            aggregate_token(&[r1], "sin"),
            Err(AttributionError::TokenAbsent("sin".into()))
        );
    }

    #[test]
    fn completeness_holds_at_fifty_steps() {
        let state = tiny_state(4);
        let vocab = Vocabulary::standard();
        let cfg = AttributionConfig::default();
        for ids in [vec![1u32, 10], vec![1, 19, 19, 10, 12, 16], vec![1, 5]] {
            let r = lig(&state, &sample(&ids), 0, &vocab, &cfg);
            assert!(
                r.completeness_residual <= 0.02 * r.delta.abs() + 1e-3,
                "residual {} vs delta {}",
                r.completeness_residual,
                r.delta
            );
        }
    }
}
