use intguard_core::datagen::{random_expr, ExprWeights};
use intguard_core::labeling::{class_balance, MethodName, SyntheticLabeler, SyntheticLabelerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let labeler = SyntheticLabeler::new(SyntheticLabelerConfig::default_config()).unwrap();
    let w = ExprWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let n = 4000;
    let t0 = Instant::now();
    let exprs: Vec<_> = (0..n).map(|_| random_expr(&mut rng, 6, &w)).collect();
    println!("gen {n}: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let labels: Vec<_> = exprs.iter().map(|e| labeler.label(e, &mut rng)).collect();
    println!("label {n}: {:?}", t0.elapsed());
    let freqs = class_balance(&labels).unwrap();
    for (m, f) in MethodName::ALL.iter().zip(&freqs) {
        println!("{:15} {:.3}", m.name(), f);
    }
    let lens: Vec<usize> = exprs.iter().map(|e| intguard_core::expr::to_prefix(e).len() + 1).collect();
    let maxlen = lens.iter().max().unwrap();
    let mean: f64 = lens.iter().sum::<usize>() as f64 / n as f64;
    println!("token len mean {:.1} max {}", mean, maxlen);
}
