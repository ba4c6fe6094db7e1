//! Metrics, model-vs-guard comparison, filtered evaluation, dispatch
//! simulation and latency measurement.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::guards::{guard_for, GuardVerdict};
use crate::labeling::MethodName;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("guard passes no samples; filtered set is empty")]
    EmptyFilteredSet,
    #[error("policy requires probabilities but none were given")]
    MissingProbabilities,
    #[error("policy requires guard verdicts but none were given")]
    MissingGuards,
    #[error("order is not a permutation of the methods")]
    BadOrder,
    #[error("empty batch")]
    EmptyBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// Binary classification metrics. `precision` is NaN (with the flag set)
/// when there are no positive predictions; `recall` is NaN when there
/// are no positive labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
    pub no_positive_predictions: bool,
}

pub fn metrics(preds: &[bool], labels: &[bool]) -> Result<Metrics, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: preds.len(),
            right: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::EmptyBatch);
    }
    let mut c = ConfusionCounts {
        true_pos: 0,
        false_pos: 0,
        true_neg: 0,
        false_neg: 0,
    };
    for (&p, &y) in preds.iter().zip(labels) {
        match (p, y) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    let n = c.total() as f64;
    let accuracy = (c.true_pos + c.true_neg) as f64 / n;
    let predicted_pos = c.true_pos + c.false_pos;
    let precision = if predicted_pos == 0 {
        f64::NAN
    } else {
        c.true_pos as f64 / predicted_pos as f64
    };
    let actual_pos = c.true_pos + c.false_neg;
    let recall = if actual_pos == 0 {
        f64::NAN
    } else {
        c.true_pos as f64 / actual_pos as f64
    };
    let f1 = if precision.is_nan() || recall.is_nan() || precision + recall == 0.0 {
        f64::NAN
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        accuracy,
        precision,
        recall,
        f1,
        counts: c,
        no_positive_predictions: predicted_pos == 0,
    })
}

/// One row of the model-vs-guard comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub model: Metrics,
    pub guard: Metrics,
}

/// Side-by-side per-method comparison; one row per method.
pub fn compare(
    methods: &[MethodName],
    model_preds: &[Vec<bool>],
    guard_preds: &[Vec<bool>],
    labels: &[Vec<bool>],
) -> Result<Vec<ComparisonRow>, EvalError> {
    let mut rows = Vec::with_capacity(methods.len());
    for (i, m) in methods.iter().enumerate() {
        rows.push(ComparisonRow {
            method: m.name().to_string(),
            model: metrics(&model_preds[i], &labels[i])?,
            guard: metrics(&guard_preds[i], &labels[i])?,
        });
    }
    Ok(rows)
}

/// Metrics restricted to the guard-positive subset, plus the identity
/// between the guard's filtered accuracy and its full-set precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredEval {
    pub sample_count: usize,
    /// Model metrics on the guard-positive subset.
    pub model: Metrics,
    /// Guard accuracy on the subset (it predicts positive throughout).
    pub guard_filtered_accuracy: f64,
    /// Guard precision on the full set.
    pub guard_full_precision: f64,
    /// |filtered accuracy - full precision|; exactly 0 for any guard.
    pub identity_gap: f64,
}

pub fn filtered_eval(
    guard_preds: &[bool],
    model_preds: &[bool],
    labels: &[bool],
) -> Result<FilteredEval, EvalError> {
    if guard_preds.len() != labels.len() || model_preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: model_preds.len(),
            right: labels.len(),
        });
    }
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| guard_preds[i]).collect();
    if keep.is_empty() {
        return Err(EvalError::EmptyFilteredSet);
    }
    let sub_preds: Vec<bool> = keep.iter().map(|&i| model_preds[i]).collect();
    let sub_labels: Vec<bool> = keep.iter().map(|&i| labels[i]).collect();
    let model = metrics(&sub_preds, &sub_labels)?;
    let positives_in_subset = sub_labels.iter().filter(|&&y| y).count();
    let guard_filtered_accuracy = positives_in_subset as f64 / keep.len() as f64;
    let guard_full = metrics(guard_preds, labels)?;
    let identity_gap = (guard_filtered_accuracy - guard_full.precision).abs();
    Ok(FilteredEval {
        sample_count: keep.len(),
        model,
        guard_filtered_accuracy,
        guard_full_precision: guard_full.precision,
        identity_gap,
    })
}

/// Method-ordering policy for the dispatch meta-algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchPolicy {
    /// Deterministic order; `order[j]` is the method index tried j-th.
    FixedOrder { order: Vec<usize> },
    /// Per-sample descending model probability, ties by method index.
    ProbabilityDescending,
    /// Fixed order with guard-false methods deferred to the end.
    GuardGatedFixedOrder { order: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchOutcome {
    pub mean_attempts: f64,
    pub success_rate: f64,
    pub mean_cost: f64,
    /// Per-sample attempt counts.
    pub attempts: Vec<usize>,
}

/// Walk methods in policy order per sample until one succeeds.
///
/// A sample where no ordered method succeeds records the full attempt
/// count and a failure. Costs come from the per-method cost model.
pub fn simulate_dispatch(
    policy: &DispatchPolicy,
    labels: &[Vec<bool>],
    probs: Option<&[Vec<f64>]>,
    guard_pass: Option<&[Vec<bool>]>,
    costs: &[f64],
) -> Result<DispatchOutcome, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::EmptyBatch);
    }
    let width = labels[0].len();
    if costs.len() != width {
        return Err(EvalError::LengthMismatch {
            left: costs.len(),
            right: width,
        });
    }
    if let DispatchPolicy::FixedOrder { order } | DispatchPolicy::GuardGatedFixedOrder { order } =
        policy
    {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (0..width).collect::<Vec<_>>() {
            return Err(EvalError::BadOrder);
        }
    }

    let mut attempts = Vec::with_capacity(labels.len());
    let mut successes = 0usize;
    let mut total_cost = 0.0;
    for (i, row) in labels.iter().enumerate() {
        let order: Vec<usize> = match policy {
            DispatchPolicy::FixedOrder { order } => order.clone(),
            DispatchPolicy::ProbabilityDescending => {
                let p = probs.ok_or(EvalError::MissingProbabilities)?;
                let mut idx: Vec<usize> = (0..width).collect();
                idx.sort_by(|&a, &b| {
                    p[i][b]
                        .partial_cmp(&p[i][a])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.cmp(&b))
                });
                idx
            }
            DispatchPolicy::GuardGatedFixedOrder { order } => {
                let g = guard_pass.ok_or(EvalError::MissingGuards)?;
                let (pass, skip): (Vec<usize>, Vec<usize>) =
                    order.iter().copied().partition(|&m| g[i][m]);
                // Skipped-but-guarded methods are appended at the end.
                pass.into_iter().chain(skip).collect()
            }
        };
        let mut tried = 0usize;
        let mut won = false;
        for m in order {
            tried += 1;
            total_cost += costs[m];
            if row[m] {
                won = true;
                break;
            }
        }
        successes += won as usize;
        attempts.push(tried);
    }
    let n = labels.len() as f64;
    Ok(DispatchOutcome {
        mean_attempts: attempts.iter().sum::<usize>() as f64 / n,
        success_rate: successes as f64 / n,
        mean_cost: total_cost / n,
        attempts,
    })
}

/// A latency table row, nanoseconds per sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyRow {
    pub name: String,
    pub mean_ns: f64,
    pub median_ns: f64,
    pub samples: usize,
}

pub fn latency_row(name: &str, mut costs_ns: Vec<u64>) -> LatencyRow {
    let samples = costs_ns.len();
    let mean = costs_ns.iter().sum::<u64>() as f64 / samples.max(1) as f64;
    costs_ns.sort_unstable();
    let median = costs_ns.get(samples / 2).copied().unwrap_or(0) as f64;
    LatencyRow {
        name: name.to_string(),
        mean_ns: mean,
        median_ns: median,
        samples,
    }
}

/// Per-sample wall time of each method's guard over a batch of
/// expressions.
pub fn time_guards(methods: &[MethodName], exprs: &[Expr]) -> Result<Vec<LatencyRow>, EvalError> {
    if exprs.is_empty() {
        return Err(EvalError::EmptyBatch);
    }
    let mut rows = Vec::new();
    for &m in methods {
        let guard = guard_for(m);
        let costs: Vec<u64> = exprs
            .iter()
            .map(|e| {
                let GuardVerdict { cost_ns, .. } = guard(e);
                cost_ns
            })
            .collect();
        rows.push(latency_row(&format!("guard_{}", m.name()), costs));
    }
    Ok(rows)
}

/// Time an arbitrary per-sample closure (used for model rows).
pub fn time_closure(name: &str, n: usize, mut f: impl FnMut(usize)) -> LatencyRow {
    let costs: Vec<u64> = (0..n)
        .map(|i| {
            let t = Instant::now();
            f(i);
            t.elapsed().as_nanos() as u64
        })
        .collect();
    latency_row(name, costs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_arithmetic() {
        let m = metrics(
            &[true, true, false, false],
            &[true, false, false, false],
        )
        .unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.counts.total(), 4);
    }

    #[test]
    fn all_positive_accuracy_equals_positive_rate() {
        // 82.15% positives -> the always-positive guard scores 82.15%.
        let n = 10_000;
        let positives = 8215;
        let labels: Vec<bool> = (0..n).map(|i| i < positives).collect();
        let preds = vec![true; n];
        let m = metrics(&preds, &labels).unwrap();
        assert!((m.accuracy - 0.8215).abs() < 1e-12);
        assert!((m.precision - 0.8215).abs() < 1e-12);
    }

    #[test]
    fn no_positive_predictions_flags_nan_precision() {
        let m = metrics(&[false, false], &[true, false]).unwrap();
        assert!(m.precision.is_nan());
        assert!(m.no_positive_predictions);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert_eq!(
            metrics(&[true], &[true, false]),
            Err(EvalError::LengthMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn filtered_identity_for_a_perfect_negative_guard() {
        // Guard false => label false (zero false negatives), while some
        // negatives still pass the guard.
        let labels = vec![true, false, true, false, false, true];
        let guard = vec![true, true, true, false, true, true];
        let model = vec![true, false, true, true, false, false];
        let f = filtered_eval(&guard, &model, &labels).unwrap();
        assert_eq!(f.identity_gap, 0.0);
        assert_eq!(f.guard_filtered_accuracy, f.guard_full_precision);
        assert_eq!(f.sample_count, 5);
    }

    #[test]
    fn guard_passing_everything_reproduces_full_metrics() {
        let labels = vec![true, false, true];
        let model = vec![true, true, false];
        let full = metrics(&model, &labels).unwrap();
        let f = filtered_eval(&[true, true, true], &model, &labels).unwrap();
        assert_eq!(f.sample_count, 3);
        assert_eq!(f.model.accuracy, full.accuracy);
    }

    #[test]
    fn guard_passing_nothing_is_empty() {
        assert_eq!(
            filtered_eval(&[false, false], &[true, false], &[true, false]),
            Err(EvalError::EmptyFilteredSet)
        );
    }

    #[test]
    fn dispatch_counts_attempts() {
        let labels = vec![vec![true, false, true]];
        let fixed = DispatchPolicy::FixedOrder {
            order: vec![0, 1, 2],
        };
        let out = simulate_dispatch(&fixed, &labels, None, None, &[1.0; 3]).unwrap();
        assert_eq!(out.attempts, vec![1]);
        assert_eq!(out.success_rate, 1.0);

        let labels = vec![vec![false, false, true]];
        let probs = vec![vec![0.1, 0.2, 0.9]];
        let desc = DispatchPolicy::ProbabilityDescending;
        let out = simulate_dispatch(&desc, &labels, Some(&probs), None, &[1.0; 3]).unwrap();
        assert_eq!(out.attempts, vec![1]);
        let out = simulate_dispatch(&fixed, &labels, None, None, &[1.0; 3]).unwrap();
        assert_eq!(out.attempts, vec![3]);
    }

    #[test]
    fn dispatch_failure_counts_every_method() {
        let labels = vec![vec![false, false]];
        let fixed = DispatchPolicy::FixedOrder { order: vec![0, 1] };
        let out = simulate_dispatch(&fixed, &labels, None, None, &[2.0, 3.0]).unwrap();
        assert_eq!(out.attempts, vec![2]);
        assert_eq!(out.success_rate, 0.0);
        assert_eq!(out.mean_cost, 5.0);
    }

    #[test]
    fn guard_gated_defers_guarded_methods() {
        // Method 0 is guard-blocked but the only success.
        let labels = vec![vec![true, false]];
        let guards = vec![vec![false, true]];
        let gated = DispatchPolicy::GuardGatedFixedOrder { order: vec![0, 1] };
        let out = simulate_dispatch(&gated, &labels, None, Some(&guards), &[1.0; 2]).unwrap();
        // Tries 1 (guard-true) first, then falls back to 0.
        assert_eq!(out.attempts, vec![2]);
        assert_eq!(out.success_rate, 1.0);
    }

    #[test]
    fn oracle_probabilities_reach_the_minimum() {
        let labels: Vec<Vec<bool>> = vec![
            vec![false, true, false],
            vec![true, true, false],
            vec![false, false, false],
        ];
        let oracle_probs: Vec<Vec<f64>> = labels
            .iter()
            .map(|row| row.iter().map(|&b| b as u8 as f64).collect())
            .collect();
        let out = simulate_dispatch(
            &DispatchPolicy::ProbabilityDescending,
            &labels,
            Some(&oracle_probs),
            None,
            &[1.0; 3],
        )
        .unwrap();
        // Brute-force minimum: 1 attempt where any method succeeds, all
        // methods where none does.
        assert_eq!(out.attempts, vec![1, 1, 3]);
    }

    #[test]
    fn bad_order_is_rejected() {
        let labels = vec![vec![true, false]];
        let bad = DispatchPolicy::FixedOrder { order: vec![0, 0] };
        assert_eq!(
            simulate_dispatch(&bad, &labels, None, None, &[1.0; 2]),
            Err(EvalError::BadOrder)
        );
    }
}
