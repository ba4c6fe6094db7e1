//! The LIOUVILLE generator.
//!
//! Builds an integral of the shape an elementary antiderivative must
//! take: a rational part `N/D` plus inner logs `Σ cᵢ·ln(aᵢ)` with every
//! `aᵢ` a factor of `D`, plus outer logs `Σ dᵢ·ln(bᵢ)` with every `bᵢ`
//! coprime to `D`. Differentiating that yields a rational integrand.

use num_bigint::BigInt;
use rand::Rng;

use crate::expr::poly::{unipoly_gcd, UniPoly};
use crate::expr::{differentiate, simplify, Expr, Function};

use super::{verify_pair_at, DatagenError, GeneratorTag, IntegrandPair};

/// The structured components behind one LIOUVILLE draw.
#[derive(Debug, Clone)]
pub struct LiouvilleParts {
    /// Polynomial numerator `N`.
    pub numerator: Expr,
    /// `D` as a product of its factors.
    pub denominator: Expr,
    /// The factors `D` was built from.
    pub denominator_factors: Vec<Expr>,
    /// `(cᵢ, aᵢ)` with `aᵢ` drawn from the factors of `D`.
    pub inner_logs: Vec<(i64, Expr)>,
    /// `(dᵢ, bᵢ)` with `gcd(bᵢ, D) = 1`.
    pub outer_logs: Vec<(i64, Expr)>,
}

impl LiouvilleParts {
    /// Assemble `g = N/D + Σ cᵢ·ln(aᵢ) + Σ dᵢ·ln(bᵢ)`.
    pub fn assemble(&self) -> Expr {
        let mut g = Expr::div(self.numerator.clone(), self.denominator.clone());
        for (c, a) in self.inner_logs.iter().chain(&self.outer_logs) {
            g = Expr::add(
                g,
                Expr::mul(Expr::int(*c), Expr::func(Function::Ln, a.clone())),
            );
        }
        g
    }
}

/// A random monic linear or quadratic factor with coefficients in [-5, 5].
fn random_factor(rng: &mut impl Rng) -> (Expr, UniPoly) {
    if rng.gen_bool(0.6) {
        // x - r with integer root r
        let r: i64 = rng.gen_range(-5..=5);
        let expr = if r == 0 {
            Expr::var()
        } else {
            Expr::add(Expr::var(), Expr::int(-r))
        };
        (expr, UniPoly::new(vec![BigInt::from(-r), BigInt::from(1)]))
    } else {
        // x^2 + b·x + c
        let b: i64 = rng.gen_range(-5..=5);
        let c: i64 = rng.gen_range(-5..=5);
        let mut expr = Expr::pow(Expr::var(), Expr::int(2));
        if b != 0 {
            expr = Expr::add(expr, Expr::mul(Expr::int(b), Expr::var()));
        }
        if c != 0 {
            expr = Expr::add(expr, Expr::int(c));
        }
        (
            expr,
            UniPoly::new(vec![BigInt::from(c), BigInt::from(b), BigInt::from(1)]),
        )
    }
}

fn nonzero_coeff(rng: &mut impl Rng) -> i64 {
    let c: i64 = rng.gen_range(1..=5);
    if rng.gen_bool(0.5) {
        -c
    } else {
        c
    }
}

/// Sample the structured parts.
///
/// Fails with `RetryExhausted` when 100 consecutive candidates for an
/// outer-log argument share a factor with `D`.
pub fn liouville_parts(rng: &mut impl Rng) -> Result<LiouvilleParts, DatagenError> {
    let factor_count = rng.gen_range(1..=3usize);
    let mut factor_exprs = Vec::with_capacity(factor_count);
    let mut factor_polys = Vec::with_capacity(factor_count);
    for _ in 0..factor_count {
        let (e, p) = random_factor(rng);
        factor_exprs.push(e);
        factor_polys.push(p);
    }
    let denominator = factor_exprs
        .iter()
        .cloned()
        .reduce(Expr::mul)
        .expect("at least one factor");
    let d_poly = factor_polys
        .iter()
        .fold(UniPoly::constant(1), |acc, p| acc.mul(p));

    // N: nonzero, degree below deg(D).
    let nominal_deg = d_poly.degree().max(1);
    let numerator = loop {
        let coeffs: Vec<i64> = (0..nominal_deg).map(|_| rng.gen_range(-5..=5)).collect();
        if coeffs.iter().any(|&c| c != 0) {
            break poly_to_expr(&coeffs);
        }
    };

    // Inner logs over a subset of D's factors.
    let mut inner_logs = Vec::new();
    for e in &factor_exprs {
        if rng.gen_bool(0.6) {
            inner_logs.push((nonzero_coeff(rng), e.clone()));
        }
    }

    // Outer logs, each coprime to D.
    let outer_count = rng.gen_range(0..=2usize);
    let mut outer_logs = Vec::new();
    for _ in 0..outer_count {
        let mut found = false;
        for _ in 0..100 {
            let (e, p) = random_factor(rng);
            if unipoly_gcd(&p, &d_poly).is_constant() {
                outer_logs.push((nonzero_coeff(rng), e));
                found = true;
                break;
            }
        }
        if !found {
            return Err(DatagenError::RetryExhausted);
        }
    }

    Ok(LiouvilleParts {
        numerator,
        denominator,
        denominator_factors: factor_exprs,
        inner_logs,
        outer_logs,
    })
}

/// Draw parts, differentiate the assembled integral, verify, retry until
/// a pair sticks.
pub fn gen_liouville(rng: &mut impl Rng) -> Result<IntegrandPair, DatagenError> {
    for _ in 0..1000 {
        let parts = liouville_parts(rng)?;
        let integral = parts.assemble();
        let Ok(integrand) = simplify(&differentiate(&integral)) else {
            continue;
        };
        if !integrand.contains_var() {
            continue;
        }
        if verify_pair_at(&integrand, &integral, rng, 8, 1e-9) {
            return Ok(IntegrandPair {
                integrand,
                integral,
                tag: GeneratorTag::Liouville,
            });
        }
    }
    Err(DatagenError::RetryExhausted)
}

/// Dense coefficients (lowest first) to a canonical-ish polynomial Expr.
fn poly_to_expr(coeffs: &[i64]) -> Expr {
    let mut terms = Vec::new();
    for (deg, &c) in coeffs.iter().enumerate().rev() {
        if c == 0 {
            continue;
        }
        let base = match deg {
            0 => Expr::int(c),
            1 if c == 1 => Expr::var(),
            1 => Expr::mul(Expr::int(c), Expr::var()),
            _ if c == 1 => Expr::pow(Expr::var(), Expr::int(deg as i64)),
            _ => Expr::mul(Expr::int(c), Expr::pow(Expr::var(), Expr::int(deg as i64))),
        };
        terms.push(base);
    }
    Expr::sum(terms).expect("nonzero polynomial")
}
