//! IEEE-double numeric evaluation.

use super::{Expr, Function};

/// Evaluate at `x = at`.
///
/// Returns `None` (Undefined) on any pole or domain violation: division
/// by zero, `ln` of a non-positive value, `sqrt` of a negative value,
/// `asin` outside `[-1, 1]`, `0` raised to a negative power, and any
/// non-finite intermediate result.
pub fn eval_numeric(e: &Expr, at: f64) -> Option<f64> {
    let v = eval(e, at)?;
    v.is_finite().then_some(v)
}

fn eval(e: &Expr, x: f64) -> Option<f64> {
    let v = match e {
        Expr::Integer(n) => *n as f64,
        Expr::Var => x,
        Expr::Neg(c) => -eval(c, x)?,
        Expr::Add(l, r) => eval(l, x)? + eval(r, x)?,
        Expr::Mul(l, r) => eval(l, x)? * eval(r, x)?,
        Expr::Div(n, d) => {
            let den = eval(d, x)?;
            if den == 0.0 {
                return None;
            }
            eval(n, x)? / den
        }
        Expr::Pow(b, e) => {
            let base = eval(b, x)?;
            let exp = eval(e, x)?;
            if base == 0.0 && exp < 0.0 {
                return None;
            }
            base.powf(exp)
        }
        Expr::Func(f, c) => {
            let u = eval(c, x)?;
            match f {
                Function::Exp => u.exp(),
                Function::Ln => {
                    if u <= 0.0 {
                        return None;
                    }
                    u.ln()
                }
                Function::Sqrt => {
                    if u < 0.0 {
                        return None;
                    }
                    u.sqrt()
                }
                Function::Abs => u.abs(),
                Function::Sin => u.sin(),
                Function::Cos => u.cos(),
                Function::Tan => u.tan(),
                Function::Asin => {
                    if !(-1.0..=1.0).contains(&u) {
                        return None;
                    }
                    u.asin()
                }
                Function::Atan => u.atan(),
                Function::Sinh => u.sinh(),
                Function::Cosh => u.cosh(),
                Function::Tanh => u.tanh(),
            }
        }
    };
    if v.is_nan() {
        None
    } else {
        Some(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let e = Expr::pow(Expr::var(), Expr::Integer(2));
        assert_eq!(eval_numeric(&e, 3.0), Some(9.0));
    }

    #[test]
    fn pole_is_undefined() {
        let e = Expr::div(Expr::Integer(1), Expr::var());
        assert_eq!(eval_numeric(&e, 0.0), None);
        assert_eq!(eval_numeric(&e, 2.0), Some(0.5));
    }

    #[test]
    fn exp_of_zero_everywhere_one() {
        let e = Expr::func(Function::Exp, Expr::Integer(0));
        for t in [-3.0, 0.0, 1.7] {
            assert_eq!(eval_numeric(&e, t), Some(1.0));
        }
    }

    #[test]
    fn domain_violations_are_undefined() {
        assert_eq!(
            eval_numeric(&Expr::func(Function::Ln, Expr::var()), -1.0),
            None
        );
        assert_eq!(
            eval_numeric(&Expr::func(Function::Sqrt, Expr::var()), -4.0),
            None
        );
        assert_eq!(
            eval_numeric(&Expr::func(Function::Asin, Expr::var()), 2.0),
            None
        );
    }

    #[test]
    fn overflow_is_undefined() {
        // exp(exp(x)) at x = 10 overflows f64.
        let e = Expr::func(Function::Exp, Expr::func(Function::Exp, Expr::var()));
        assert_eq!(eval_numeric(&e, 10.0), None);
    }
}
