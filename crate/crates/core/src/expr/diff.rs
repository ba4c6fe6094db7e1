//! Symbolic differentiation with respect to `x`.

use super::{Expr, Function};

/// Differentiate `e` with respect to `x`.
///
/// Total on the grammar; the result is left un-simplified apart from
/// dropping chain-rule factors that are literally `1`. `d|u|/dx` is taken
/// as `(u/|u|)·u'`, so derivatives of abs-containing trees stay
/// abs-containing.
pub fn differentiate(e: &Expr) -> Expr {
    match e {
        Expr::Integer(_) => Expr::Integer(0),
        Expr::Var => Expr::Integer(1),
        Expr::Neg(c) => Expr::neg(differentiate(c)),
        Expr::Add(l, r) => Expr::add(differentiate(l), differentiate(r)),
        Expr::Mul(l, r) => Expr::add(
            Expr::mul(differentiate(l), (**r).clone()),
            Expr::mul((**l).clone(), differentiate(r)),
        ),
        Expr::Div(n, d) => Expr::div(
            Expr::sub(
                Expr::mul(differentiate(n), (**d).clone()),
                Expr::mul((**n).clone(), differentiate(d)),
            ),
            Expr::pow((**d).clone(), Expr::Integer(2)),
        ),
        Expr::Pow(b, x) => diff_pow(b, x),
        Expr::Func(f, u) => diff_func(*f, u),
    }
}

fn diff_pow(base: &Expr, exponent: &Expr) -> Expr {
    if let Some(n) = exponent.as_int_const() {
        // d(b^n) = n·b^(n-1)·b'
        let term = Expr::mul(
            Expr::Integer(n),
            Expr::pow(base.clone(), Expr::Integer(n - 1)),
        );
        return chain(term, differentiate(base));
    }
    if !exponent.contains_var() {
        // Constant but not an integer literal, e.g. a fractional power.
        let shifted = Expr::add(exponent.clone(), Expr::Integer(-1));
        let term = Expr::mul(exponent.clone(), Expr::pow(base.clone(), shifted));
        return chain(term, differentiate(base));
    }
    // General case: b^e · (e'·ln b + e·b'/b).
    Expr::mul(
        Expr::pow(base.clone(), exponent.clone()),
        Expr::add(
            Expr::mul(
                differentiate(exponent),
                Expr::func(Function::Ln, base.clone()),
            ),
            Expr::div(
                Expr::mul(exponent.clone(), differentiate(base)),
                base.clone(),
            ),
        ),
    )
}

fn diff_func(f: Function, u: &Expr) -> Expr {
    let du = differentiate(u);
    let u = u.clone();
    match f {
        Function::Exp => chain(Expr::func(Function::Exp, u), du),
        Function::Ln => Expr::div(du, u),
        Function::Sqrt => Expr::div(
            du,
            Expr::mul(Expr::Integer(2), Expr::func(Function::Sqrt, u)),
        ),
        Function::Abs => chain(
            Expr::div(u.clone(), Expr::func(Function::Abs, u)),
            du,
        ),
        Function::Sin => chain(Expr::func(Function::Cos, u), du),
        Function::Cos => chain(Expr::neg(Expr::func(Function::Sin, u)), du),
        Function::Tan => chain(
            Expr::add(
                Expr::Integer(1),
                Expr::pow(Expr::func(Function::Tan, u), Expr::Integer(2)),
            ),
            du,
        ),
        Function::Asin => Expr::div(
            du,
            Expr::func(
                Function::Sqrt,
                Expr::sub(Expr::Integer(1), Expr::pow(u, Expr::Integer(2))),
            ),
        ),
        Function::Atan => Expr::div(
            du,
            Expr::add(Expr::Integer(1), Expr::pow(u, Expr::Integer(2))),
        ),
        Function::Sinh => chain(Expr::func(Function::Cosh, u), du),
        Function::Cosh => chain(Expr::func(Function::Sinh, u), du),
        Function::Tanh => chain(
            Expr::sub(
                Expr::Integer(1),
                Expr::pow(Expr::func(Function::Tanh, u), Expr::Integer(2)),
            ),
            du,
        ),
    }
}

/// Multiply by the chain-rule factor, skipping a literal `1`.
fn chain(outer: Expr, du: Expr) -> Expr {
    if du == Expr::Integer(1) {
        outer
    } else {
        Expr::mul(outer, du)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_rule() {
        let e = Expr::pow(Expr::var(), Expr::Integer(2));
        assert_eq!(
            differentiate(&e),
            Expr::mul(Expr::Integer(2), Expr::pow(Expr::var(), Expr::Integer(1)))
        );
    }

    #[test]
    fn constants_vanish() {
        assert_eq!(differentiate(&Expr::Integer(5)), Expr::Integer(0));
    }

    #[test]
    fn log_rule() {
        let e = Expr::func(Function::Ln, Expr::var());
        assert_eq!(differentiate(&e), Expr::div(Expr::Integer(1), Expr::var()));
    }

    #[test]
    fn abs_derivative_keeps_abs() {
        let e = Expr::func(Function::Abs, Expr::var());
        let d = differentiate(&e);
        let mut saw_abs = false;
        d.for_each_node(&mut |n| {
            if matches!(n, Expr::Func(Function::Abs, _)) {
                saw_abs = true;
            }
        });
        assert!(saw_abs);
    }
}
