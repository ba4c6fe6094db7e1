//! Hand-written guard heuristics.
//!
//! A guard is a cheap predicate run before an integration method to
//! decide whether attempting it is worthwhile. Four methods have real
//! guards; everything else gets the always-true guard, which is also the
//! baseline the classifiers are compared against.

use std::time::Instant;

use crate::expr::{differentiate, profile, simplify, Expr};
use crate::labeling::MethodName;

/// A guard's boolean prediction, the predicate branch that fired, and
/// the measured wall time of the decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardVerdict {
    pub prediction: bool,
    pub reason: &'static str,
    pub cost_ns: u64,
}

fn verdict(prediction: bool, reason: &'static str, started: Instant) -> GuardVerdict {
    GuardVerdict {
        prediction,
        reason,
        cost_ns: started.elapsed().as_nanos() as u64,
    }
}

/// Trager: a radical algebraic function. Pure polynomials are excluded;
/// the method targets algebraic extensions, so an actual radical must be
/// present.
pub fn guard_trager(e: &Expr) -> GuardVerdict {
    let t = Instant::now();
    let p = profile(e);
    if !p.is_algebraic {
        verdict(false, "not_algebraic", t)
    } else if !p.contains_radical {
        verdict(false, "no_radical", t)
    } else {
        verdict(true, "radical_algebraic", t)
    }
}

/// MeijerG: special function or algebraic; with no special functions in
/// this grammar only the algebraic condition remains.
pub fn guard_meijerg(e: &Expr) -> GuardVerdict {
    let t = Instant::now();
    if profile(e).is_algebraic {
        verdict(true, "algebraic", t)
    } else {
        verdict(false, "not_algebraic", t)
    }
}

/// PseudoElliptic: a radical function (syntactic containment).
pub fn guard_pseudoelliptic(e: &Expr) -> GuardVerdict {
    let t = Instant::now();
    if profile(e).contains_radical {
        verdict(true, "radical", t)
    } else {
        verdict(false, "no_radical", t)
    }
}

/// Gosper: the hyperexponential test. `H` qualifies iff `H'/H`
/// normalizes to a rational function of `x`; failure to normalize (or a
/// zero input) is a conservative `false`.
pub fn guard_gosper(e: &Expr) -> GuardVerdict {
    let t = Instant::now();
    match simplify(e) {
        Ok(Expr::Integer(0)) => return verdict(false, "zero", t),
        Ok(_) => {}
        Err(_) => return verdict(false, "unnormalizable", t),
    }
    let certificate = Expr::div(differentiate(e), e.clone());
    match simplify(&certificate) {
        Ok(q) if profile(&q).is_rational => verdict(true, "rational_certificate", t),
        Ok(_) => verdict(false, "nonrational_certificate", t),
        Err(_) => verdict(false, "unnormalizable", t),
    }
}

/// The hypothetical guard for unguarded methods: always attempt.
pub fn guard_always(_e: &Expr) -> GuardVerdict {
    let t = Instant::now();
    verdict(true, "always", t)
}

/// The guard associated with a method; unguarded methods map to
/// [`guard_always`].
pub fn guard_for(method: MethodName) -> fn(&Expr) -> GuardVerdict {
    match method {
        MethodName::Trager => guard_trager,
        MethodName::MeijerG => guard_meijerg,
        MethodName::PseudoElliptic => guard_pseudoelliptic,
        MethodName::Gosper => guard_gosper,
        _ => guard_always,
    }
}

/// True when the method has a real (non-trivial) guard.
pub fn has_real_guard(method: MethodName) -> bool {
    matches!(
        method,
        MethodName::Trager | MethodName::MeijerG | MethodName::PseudoElliptic | MethodName::Gosper
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Function;

    fn x() -> Expr {
        Expr::var()
    }

    #[test]
    fn trager_wants_an_actual_radical() {
        assert!(guard_trager(&Expr::func(Function::Sqrt, Expr::add(x(), Expr::int(1)))).prediction);
        assert!(!guard_trager(&Expr::func(Function::Exp, x())).prediction);
        // Algebraic but radical-free: polynomial.
        let poly = Expr::add(Expr::pow(x(), Expr::int(2)), Expr::int(1));
        let v = guard_trager(&poly);
        assert!(!v.prediction);
        assert_eq!(v.reason, "no_radical");
    }

    #[test]
    fn meijerg_accepts_algebraic() {
        let rat = Expr::div(Expr::add(x(), Expr::int(1)), Expr::sub(x(), Expr::int(1)));
        assert!(guard_meijerg(&rat).prediction);
        assert!(!guard_meijerg(&Expr::func(Function::Sin, x())).prediction);
        assert!(guard_meijerg(&Expr::func(Function::Sqrt, x())).prediction);
    }

    #[test]
    fn pseudoelliptic_is_syntactic() {
        assert!(
            guard_pseudoelliptic(&Expr::func(
                Function::Sqrt,
                Expr::add(Expr::pow(x(), Expr::int(3)), Expr::int(1))
            ))
            .prediction
        );
        assert!(!guard_pseudoelliptic(&Expr::pow(x(), Expr::int(3))).prediction);
        // Radical buried under a transcendental still counts.
        let e = Expr::func(Function::Exp, Expr::func(Function::Sqrt, x()));
        assert!(guard_pseudoelliptic(&e).prediction);
    }

    #[test]
    fn gosper_certificates() {
        // exp(x^2): certificate 2x.
        let e = Expr::func(Function::Exp, Expr::pow(x(), Expr::int(2)));
        let v = guard_gosper(&e);
        assert!(v.prediction, "{}", v.reason);
        // sin(x): certificate cos/sin.
        assert!(!guard_gosper(&Expr::func(Function::Sin, x())).prediction);
        // x^3: certificate 3/x; rational functions are hyperexponential.
        assert!(guard_gosper(&Expr::pow(x(), Expr::int(3))).prediction);
    }

    #[test]
    fn gosper_zero_input_is_degenerate() {
        let zero = Expr::sub(x(), x());
        let v = guard_gosper(&zero);
        assert!(!v.prediction);
        assert_eq!(v.reason, "zero");
    }

    #[test]
    fn always_guard_is_constant_true() {
        for e in [x(), Expr::func(Function::Abs, x()), Expr::int(0)] {
            assert!(guard_always(&e).prediction);
        }
    }

    #[test]
    fn negative_verdicts_carry_reasons() {
        let cases = [
            guard_trager(&Expr::func(Function::Sin, x())),
            guard_meijerg(&Expr::func(Function::Sin, x())),
            guard_pseudoelliptic(&x()),
            guard_gosper(&Expr::func(Function::Sin, x())),
        ];
        for v in cases {
            assert!(!v.prediction);
            assert!(!v.reason.is_empty());
        }
    }
}
