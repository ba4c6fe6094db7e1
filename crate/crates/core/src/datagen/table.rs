//! Known-integral table and the rule-based mini integrator.
//!
//! This is the toolkit's stand-in for a CAS integration call: linearity,
//! the power rule, and lookup in a table that starts from a fixed rule
//! set and grows with every verified pair a dataset build accepts.

use std::collections::HashMap;

use crate::expr::{simplify, Expr, Function};

/// Canonicalized integrand -> antiderivative.
#[derive(Debug, Clone, Default)]
pub struct KnownIntegralTable {
    map: HashMap<Expr, Expr>,
}

impl KnownIntegralTable {
    /// The fixed seed rules.
    pub fn seeded() -> KnownIntegralTable {
        let x = Expr::var;
        let mut t = KnownIntegralTable::default();
        let rules: Vec<(Expr, Expr)> = vec![
            (Expr::func(Function::Exp, x()), Expr::func(Function::Exp, x())),
            (
                Expr::func(Function::Ln, x()),
                Expr::sub(Expr::mul(x(), Expr::func(Function::Ln, x())), x()),
            ),
            (
                Expr::func(Function::Sin, x()),
                Expr::neg(Expr::func(Function::Cos, x())),
            ),
            (Expr::func(Function::Cos, x()), Expr::func(Function::Sin, x())),
            (
                Expr::func(Function::Tan, x()),
                Expr::neg(Expr::func(Function::Ln, Expr::func(Function::Cos, x()))),
            ),
            (Expr::func(Function::Sinh, x()), Expr::func(Function::Cosh, x())),
            (Expr::func(Function::Cosh, x()), Expr::func(Function::Sinh, x())),
            (
                Expr::func(Function::Tanh, x()),
                Expr::func(Function::Ln, Expr::func(Function::Cosh, x())),
            ),
            // 1/(1+x^2) -> atan(x)
            (
                Expr::div(
                    Expr::int(1),
                    Expr::add(Expr::int(1), Expr::pow(x(), Expr::int(2))),
                ),
                Expr::func(Function::Atan, x()),
            ),
            // 1/sqrt(1-x^2) -> asin(x)
            (
                Expr::div(
                    Expr::int(1),
                    Expr::func(
                        Function::Sqrt,
                        Expr::sub(Expr::int(1), Expr::pow(x(), Expr::int(2))),
                    ),
                ),
                Expr::func(Function::Asin, x()),
            ),
            // sqrt(x) -> (2/3)·x^(3/2)
            (
                Expr::func(Function::Sqrt, x()),
                Expr::mul(
                    Expr::div(Expr::int(2), Expr::int(3)),
                    Expr::pow(x(), Expr::div(Expr::int(3), Expr::int(2))),
                ),
            ),
            // |x| -> x·|x|/2
            (
                Expr::func(Function::Abs, x()),
                Expr::div(
                    Expr::mul(x(), Expr::func(Function::Abs, x())),
                    Expr::int(2),
                ),
            ),
            (
                Expr::func(Function::Asin, x()),
                Expr::add(
                    Expr::mul(x(), Expr::func(Function::Asin, x())),
                    Expr::func(
                        Function::Sqrt,
                        Expr::sub(Expr::int(1), Expr::pow(x(), Expr::int(2))),
                    ),
                ),
            ),
            (
                Expr::func(Function::Atan, x()),
                Expr::sub(
                    Expr::mul(x(), Expr::func(Function::Atan, x())),
                    Expr::div(
                        Expr::func(
                            Function::Ln,
                            Expr::add(Expr::int(1), Expr::pow(x(), Expr::int(2))),
                        ),
                        Expr::int(2),
                    ),
                ),
            ),
        ];
        for (f, big_f) in rules {
            t.insert_pair(&f, &big_f);
        }
        t
    }

    /// Insert keyed by the canonical (simplified) integrand; first entry
    /// wins. Unsimplifiable integrands are skipped.
    pub fn insert_pair(&mut self, integrand: &Expr, integral: &Expr) {
        if let Ok(key) = simplify(integrand) {
            self.map.entry(key).or_insert_with(|| integral.clone());
        }
    }

    /// Lookup by canonical form; the key must already be simplified.
    pub fn lookup(&self, canonical: &Expr) -> Option<&Expr> {
        self.map.get(canonical)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Integrate by linearity, power rule and table lookup; `None` when no
/// rule chain applies. Any returned antiderivative is simplified.
pub fn mini_integrate(f: &Expr, table: &KnownIntegralTable) -> Option<Expr> {
    let canonical = simplify(f).ok()?;
    let raw = integrate_canonical(&canonical, table)?;
    simplify(&raw).ok()
}

fn integrate_canonical(e: &Expr, table: &KnownIntegralTable) -> Option<Expr> {
    if let Some(big_f) = table.lookup(e) {
        return Some(big_f.clone());
    }
    if !e.contains_var() {
        return Some(Expr::mul(e.clone(), Expr::var()));
    }
    match e {
        Expr::Var => Some(Expr::div(Expr::pow(Expr::var(), Expr::int(2)), Expr::int(2))),
        Expr::Neg(c) => Some(Expr::neg(integrate_canonical(c, table)?)),
        Expr::Add(l, r) => Some(Expr::add(
            integrate_canonical(l, table)?,
            integrate_canonical(r, table)?,
        )),
        Expr::Mul(l, r) if !l.contains_var() => {
            Some(Expr::mul((**l).clone(), integrate_canonical(r, table)?))
        }
        Expr::Mul(l, r) if !r.contains_var() => {
            Some(Expr::mul((**r).clone(), integrate_canonical(l, table)?))
        }
        Expr::Div(n, d) if !d.contains_var() => Some(Expr::div(
            integrate_canonical(n, table)?,
            (**d).clone(),
        )),
        // c / x^n for n >= 1: power rule on the negative side.
        Expr::Div(n, d) if !n.contains_var() => {
            // c/d with 1/d in the table is c·∫(1/d).
            if let Ok(unit) = simplify(&Expr::div(Expr::int(1), (**d).clone())) {
                if let Some(big_f) = table.lookup(&unit) {
                    return Some(Expr::mul((**n).clone(), big_f.clone()));
                }
            }
            let (base_is_x, k) = match &**d {
                Expr::Var => (true, 1),
                Expr::Pow(b, x) if **b == Expr::Var => match x.as_int_const() {
                    Some(k) if k >= 1 => (true, k),
                    _ => (false, 0),
                },
                _ => (false, 0),
            };
            if !base_is_x {
                return None;
            }
            let inner = if k == 1 {
                // ∫ 1/x = ln(x)
                Expr::func(Function::Ln, Expr::var())
            } else {
                // ∫ x^-k = x^(1-k)/(1-k)
                Expr::div(
                    Expr::int(-1),
                    Expr::mul(
                        Expr::int(k - 1),
                        Expr::pow(Expr::var(), Expr::int(k - 1)),
                    ),
                )
            };
            Some(Expr::mul((**n).clone(), inner))
        }
        Expr::Pow(b, x) if **b == Expr::Var => {
            let (p, q) = rational_const(x)?;
            if q == 0 || p == -q {
                return None; // x^-1 arrives as Div(1, x), not here
            }
            // x^r -> x^(r+1)/(r+1) with r+1 = (p+q)/q
            let next = Expr::div(Expr::int(p + q), Expr::int(q));
            Some(Expr::div(
                Expr::pow(Expr::var(), next.clone()),
                next,
            ))
        }
        _ => None,
    }
}

/// Exact rational value `(p, q)` of a constant subtree, `q > 0`.
fn rational_const(e: &Expr) -> Option<(i64, i64)> {
    match e {
        Expr::Integer(v) => Some((*v, 1)),
        Expr::Neg(c) => rational_const(c).map(|(p, q)| (-p, q)),
        Expr::Div(n, d) => {
            let (pn, qn) = rational_const(n)?;
            let (pd, qd) = rational_const(d)?;
            if pd == 0 {
                return None;
            }
            let (mut p, mut q) = (pn.checked_mul(qd)?, qn.checked_mul(pd)?);
            if q < 0 {
                p = -p;
                q = -q;
            }
            Some((p, q))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::verify_pair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn power_rule_with_linearity() {
        let table = KnownIntegralTable::seeded();
        // 3x^2 -> x^3
        let e = Expr::mul(Expr::int(3), Expr::pow(Expr::var(), Expr::int(2)));
        assert_eq!(
            mini_integrate(&e, &table),
            Some(Expr::pow(Expr::var(), Expr::int(3)))
        );
    }

    #[test]
    fn table_seed_rules_apply() {
        let table = KnownIntegralTable::seeded();
        let e = Expr::func(Function::Cos, Expr::var());
        assert_eq!(
            mini_integrate(&e, &table),
            Some(Expr::func(Function::Sin, Expr::var()))
        );
    }

    #[test]
    fn misses_return_none() {
        let table = KnownIntegralTable::seeded();
        let e = Expr::func(Function::Exp, Expr::pow(Expr::var(), Expr::int(2)));
        assert_eq!(mini_integrate(&e, &table), None);
    }

    #[test]
    fn all_seed_rules_are_verified_pairs() {
        let table = KnownIntegralTable::seeded();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (f, big_f) in table.map.iter() {
            assert!(
                verify_pair(f, big_f, &mut rng),
                "seed rule for {f} fails verification"
            );
        }
    }

    #[test]
    fn reciprocal_powers_integrate() {
        let table = KnownIntegralTable::seeded();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        // 1/x -> ln(x)
        let inv = Expr::div(Expr::int(1), Expr::var());
        let big_f = mini_integrate(&inv, &table).unwrap();
        assert!(verify_pair(&inv, &big_f, &mut rng));
        // 5/x^3
        let e = Expr::div(Expr::int(5), Expr::pow(Expr::var(), Expr::int(3)));
        let big_f = mini_integrate(&e, &table).unwrap();
        assert!(verify_pair(&e, &big_f, &mut rng));
    }

    #[test]
    fn fractional_powers_integrate() {
        let table = KnownIntegralTable::seeded();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let e = Expr::pow(Expr::var(), Expr::div(Expr::int(1), Expr::int(2)));
        let big_f = mini_integrate(&e, &table).unwrap();
        assert!(verify_pair(&e, &big_f, &mut rng));
    }

    #[test]
    fn integration_is_invariant_to_input_form() {
        let table = KnownIntegralTable::seeded();
        // cos(x)·1 and cos(x) share a canonical form.
        let e = Expr::mul(Expr::func(Function::Cos, Expr::var()), Expr::int(1));
        assert_eq!(
            mini_integrate(&e, &table),
            Some(Expr::func(Function::Sin, Expr::var()))
        );
    }
}
