use intguard_core::model::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn loss_of(state: &ModelState<f64>, batch: &[EncodedSample], targets: &[bool], w: f64) -> f64 {
    let (logits, _) = forward_batch(state, batch, &mut Mode::Eval).unwrap();
    let n = batch.len() as f64;
    logits
        .iter()
        .zip(targets)
        .map(|(&z, &y)| (if y { w } else { 1.0 }) * bce_on_logit(z, y))
        .sum::<f64>()
        / n
}

fn main() {
    let config = ModelConfig {
        layers: 1,
        heads: 2,
        model_dim: 8,
        ff_dim: Some(16),
        dropout_p: 0.0,
        max_len: 12,
        vocab_size: 28,
        positional: PositionalKind::Learned,
        seed: 1234,
    };
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut failures = 0usize;
    for batch_idx in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(batch_idx + 1);
        let mut state: ModelState<f64> =
            ModelState::init(ModelConfig { seed: 55 + batch_idx, ..config.clone() }, TrainConfig::default(), "h");
        // random batch of 4
        let mut batch = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..4 {
            let len = rng.gen_range(2..=8usize);
            let mut ids = vec![1u32];
            for _ in 1..len {
                ids.push(rng.gen_range(2..28u32));
            }
            batch.push(EncodedSample::new(ids.clone(), vec![true; len]));
            targets.push(rng.gen_bool(0.5));
        }
        let w = 2.5; // exercise the pos-weight path
        // analytic
        let (logits, caches) = forward_batch(&state, &batch, &mut Mode::Eval).unwrap();
        let n = batch.len() as f64;
        let dlogits: Vec<f64> = logits
            .iter()
            .zip(&targets)
            .map(|(&z, &y)| (if y { w } else { 1.0 }) / n * (sigmoid(z) - if y { 1.0 } else { 0.0 }))
            .collect();
        let (grads, _) = backward_batch(&state, &caches, &dlogits);
        let mut ga = Vec::new();
        grads.visit(&mut |_, t| ga.extend(t.iter().copied()));
        // numeric: perturb every parameter
        let mut gn = vec![0.0f64; ga.len()];
        let count = ga.len();
        for k in 0..count {
            let mut idx = 0usize;
            let mut orig = 0.0;
            state.params.visit_mut(&mut |_, mut t| {
                let sl = t.as_slice_mut().unwrap();
                if k >= idx && k < idx + sl.len() {
                    orig = sl[k - idx];
                    let h = 1e-6 * orig.abs().max(1.0);
                    sl[k - idx] = orig + h;
                }
                idx += sl.len();
            });
            let h = 1e-6 * orig.abs().max(1.0);
            let lp = loss_of(&state, &batch, &targets, w);
            let mut idx = 0usize;
            state.params.visit_mut(&mut |_, mut t| {
                let sl = t.as_slice_mut().unwrap();
                if k >= idx && k < idx + sl.len() {
                    sl[k - idx] = orig - h;
                }
                idx += sl.len();
            });
            let lm = loss_of(&state, &batch, &targets, w);
            let mut idx = 0usize;
            state.params.visit_mut(&mut |_, mut t| {
                let sl = t.as_slice_mut().unwrap();
                if k >= idx && k < idx + sl.len() {
                    sl[k - idx] = orig;
                }
                idx += sl.len();
            });
            gn[k] = (lp - lm) / (2.0 * h);
        }
        for k in 0..count {
            let denom = ga[k].abs().max(gn[k].abs());
            let err = (ga[k] - gn[k]).abs();
            let rel = if denom > 1e-8 { err / denom } else { 0.0 };
            if rel > worst { worst = rel }
            checked += 1;
            if err > 1e-4 * denom + 1e-8 {
                failures += 1;
                if failures < 10 {
                    println!("batch {batch_idx} param {k}: analytic {} numeric {}", ga[k], gn[k]);
                }
            }
        }
    }
    println!("checked {checked} params over 20 batches in {:?}", t0.elapsed());
    println!("worst relative error: {worst:.3e}, failures: {failures}");
}
