//! Structural classification of expressions.
//!
//! These predicates are exactly what the guard heuristics consume:
//! rational / algebraic membership, radical and abs containment, and the
//! raw token multiset.

use std::collections::BTreeMap;

use super::{prefix::to_prefix, Expr, Function};

/// Structural facts about one expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralProfile {
    /// Built from integers and `x` under `+`, `-`, `·`, `/` and integer
    /// powers.
    pub is_rational: bool,
    /// Rational closure extended with radicals: `sqrt` and powers with
    /// rational constant exponents.
    pub is_algebraic: bool,
    /// A `sqrt` node or fractional constant power occurs anywhere
    /// (syntactic containment).
    pub contains_radical: bool,
    /// No `abs` node anywhere.
    pub is_elementary: bool,
    pub contains_abs: bool,
    /// Raw prefix token -> occurrence count.
    pub token_multiset: BTreeMap<String, usize>,
    pub depth: usize,
    pub size: usize,
}

/// Compute the structural profile of `e`.
pub fn profile(e: &Expr) -> StructuralProfile {
    let mut token_multiset = BTreeMap::new();
    for tok in to_prefix(e) {
        *token_multiset.entry(tok).or_insert(0) += 1;
    }
    let contains_abs = token_multiset.contains_key("abs");
    StructuralProfile {
        is_rational: is_rational(e),
        is_algebraic: is_algebraic(e),
        contains_radical: contains_radical(e),
        is_elementary: !contains_abs,
        contains_abs,
        token_multiset,
        depth: e.depth(),
        size: e.size(),
    }
}

fn is_rational(e: &Expr) -> bool {
    match e {
        Expr::Integer(_) | Expr::Var => true,
        Expr::Neg(c) => is_rational(c),
        Expr::Add(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => is_rational(l) && is_rational(r),
        Expr::Pow(b, x) => is_rational(b) && x.as_int_const().is_some(),
        Expr::Func(..) => false,
    }
}

fn is_algebraic(e: &Expr) -> bool {
    match e {
        Expr::Integer(_) | Expr::Var => true,
        Expr::Neg(c) => is_algebraic(c),
        Expr::Add(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => is_algebraic(l) && is_algebraic(r),
        Expr::Pow(b, x) => is_algebraic(b) && is_rational_const(x),
        Expr::Func(Function::Sqrt, c) => is_algebraic(c),
        Expr::Func(..) => false,
    }
}

/// Constant with an exact rational value: integer literals and `Neg` /
/// `Div` combinations of them.
fn is_rational_const(e: &Expr) -> bool {
    match e {
        Expr::Integer(_) => true,
        Expr::Neg(c) => is_rational_const(c),
        Expr::Div(n, d) => is_rational_const(n) && is_rational_const(d),
        _ => false,
    }
}

fn contains_radical(e: &Expr) -> bool {
    let mut found = false;
    e.for_each_node(&mut |n| match n {
        Expr::Func(Function::Sqrt, _) => found = true,
        Expr::Pow(_, x) if is_rational_const(x) && x.as_int_const().is_none() => found = true,
        _ => {}
    });
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_quotient() {
        let e = Expr::div(
            Expr::add(Expr::var(), Expr::int(1)),
            Expr::sub(Expr::var(), Expr::int(1)),
        );
        let p = profile(&e);
        assert!(p.is_rational);
        assert!(p.is_algebraic);
        assert!(!p.contains_abs);
        assert!(!p.contains_radical);
    }

    #[test]
    fn radical_is_algebraic_not_rational() {
        let e = Expr::func(Function::Sqrt, Expr::add(Expr::var(), Expr::int(1)));
        let p = profile(&e);
        assert!(!p.is_rational);
        assert!(p.is_algebraic);
        assert!(p.contains_radical);
    }

    #[test]
    fn abs_breaks_elementarity() {
        let e = Expr::mul(
            Expr::func(Function::Abs, Expr::var()),
            Expr::func(Function::Exp, Expr::var()),
        );
        let p = profile(&e);
        assert!(!p.is_elementary);
        assert!(p.contains_abs);
        assert_eq!(p.token_multiset.get("abs"), Some(&1));
    }

    #[test]
    fn fractional_power_counts_as_radical() {
        let half = Expr::div(Expr::int(1), Expr::int(2));
        let e = Expr::pow(Expr::var(), half);
        let p = profile(&e);
        assert!(p.contains_radical);
        assert!(p.is_algebraic);
        assert!(!p.is_rational);
    }

    #[test]
    fn radical_containment_is_syntactic() {
        let e = Expr::func(Function::Exp, Expr::func(Function::Sqrt, Expr::var()));
        let p = profile(&e);
        assert!(p.contains_radical);
        assert!(!p.is_algebraic);
    }

    #[test]
    fn token_multiset_matches_prefix_tokens() {
        let e = Expr::add(Expr::var(), Expr::int(2));
        let p = profile(&e);
        assert_eq!(p.token_multiset.get("add"), Some(&1));
        assert_eq!(p.token_multiset.get("x"), Some(&1));
        assert_eq!(p.token_multiset.get("INT+"), Some(&1));
        assert_eq!(p.token_multiset.get("2"), Some(&1));
    }
}
