//! Weighted random expression sampling.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::expr::{Expr, Function};

/// Operator distribution for recursive-descent sampling.
///
/// Weights are relative; a dedicated `leaf` weight controls how often a
/// branch terminates early, so trees of varying depth come out of the
/// same budget.
#[derive(Debug, Clone)]
pub struct ExprWeights {
    pub leaf: f64,
    pub add: f64,
    pub mul: f64,
    pub div: f64,
    pub pow: f64,
    pub neg: f64,
    pub functions: Vec<(Function, f64)>,
    /// Probability that a leaf is `x` rather than an integer.
    pub leaf_var_prob: f64,
}

impl Default for ExprWeights {
    fn default() -> Self {
        ExprWeights {
            leaf: 1.2,
            add: 3.0,
            mul: 3.0,
            div: 1.2,
            pow: 1.4,
            neg: 0.8,
            functions: vec![
                (Function::Exp, 0.55),
                (Function::Ln, 0.45),
                (Function::Sqrt, 0.12),
                (Function::Abs, 0.35),
                (Function::Sin, 0.50),
                (Function::Cos, 0.50),
                (Function::Tan, 0.15),
                (Function::Asin, 0.08),
                (Function::Atan, 0.12),
                (Function::Sinh, 0.08),
                (Function::Cosh, 0.08),
                (Function::Tanh, 0.08),
            ],
            leaf_var_prob: 0.65,
        }
    }
}

/// Sample an expression of depth at most `max_depth` (a leaf has depth 1).
///
/// Deterministic for a given RNG state.
pub fn random_expr(rng: &mut impl Rng, max_depth: usize, weights: &ExprWeights) -> Expr {
    assert!(max_depth >= 1, "max_depth must be at least 1");
    draw(rng, max_depth, weights)
}

fn draw(rng: &mut impl Rng, budget: usize, w: &ExprWeights) -> Expr {
    if budget <= 1 {
        return leaf(rng, w);
    }
    // 0 leaf, 1 add, 2 mul, 3 div, 4 pow, 5 neg, 6 func
    let func_total: f64 = w.functions.iter().map(|&(_, x)| x).sum();
    let dist = WeightedIndex::new([w.leaf, w.add, w.mul, w.div, w.pow, w.neg, func_total])
        .expect("weights are non-negative with a positive sum");
    match dist.sample(rng) {
        0 => leaf(rng, w),
        1 => Expr::add(draw(rng, budget - 1, w), draw(rng, budget - 1, w)),
        2 => Expr::mul(draw(rng, budget - 1, w), draw(rng, budget - 1, w)),
        3 => Expr::div(draw(rng, budget - 1, w), draw(rng, budget - 1, w)),
        4 => Expr::pow(draw(rng, budget - 1, w), exponent(rng, budget - 1)),
        5 => Expr::neg(draw(rng, budget - 1, w)),
        _ => {
            let fdist = WeightedIndex::new(w.functions.iter().map(|&(_, x)| x))
                .expect("function weights are valid");
            let f = w.functions[fdist.sample(rng)].0;
            Expr::func(f, draw(rng, budget - 1, w))
        }
    }
}

fn leaf(rng: &mut impl Rng, w: &ExprWeights) -> Expr {
    if rng.gen_bool(w.leaf_var_prob) {
        return Expr::Var;
    }
    Expr::Integer(random_int(rng))
}

/// Magnitude buckets chosen so single-, double- and triple-digit
/// literals all occur: the token abstraction needs all of 0-2, CONST,
/// CONST2 and CONST3 in real data.
fn random_int(rng: &mut impl Rng) -> i64 {
    let bucket = rng.gen_range(0..100u32);
    let magnitude = match bucket {
        0..=54 => rng.gen_range(0..=2),
        55..=84 => rng.gen_range(3..=9),
        85..=95 => rng.gen_range(10..=99),
        _ => rng.gen_range(100..=999),
    };
    if magnitude != 0 && rng.gen_bool(0.35) {
        -magnitude
    } else {
        magnitude
    }
}

/// Exponents are kept small: mostly squares and cubes, occasionally a
/// fourth power or a half (radical) power. The fractional form is a
/// depth-2 subtree, so it needs budget.
fn exponent(rng: &mut impl Rng, budget: usize) -> Expr {
    match rng.gen_range(0..100u32) {
        0..=59 => Expr::Integer(2),
        60..=84 => Expr::Integer(3),
        85..=94 => Expr::Integer(4),
        _ if budget >= 2 => Expr::div(Expr::Integer(1), Expr::Integer(2)),
        _ => Expr::Integer(2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn depth_one_forces_a_leaf() {
        let w = ExprWeights::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let e = random_expr(&mut rng, 1, &w);
            assert_eq!(e.depth(), 1);
        }
    }

    #[test]
    fn same_seed_same_expression() {
        let w = ExprWeights::default();
        let a = random_expr(&mut ChaCha8Rng::seed_from_u64(99), 5, &w);
        let b = random_expr(&mut ChaCha8Rng::seed_from_u64(99), 5, &w);
        assert_eq!(a, b);
    }

    #[test]
    fn depth_budget_respected_over_many_draws() {
        let w = ExprWeights::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let e = random_expr(&mut rng, 4, &w);
            assert!(e.depth() <= 4, "depth {} for {e}", e.depth());
        }
    }
}
