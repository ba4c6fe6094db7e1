//! Rational-function normalization.
//!
//! An expression is rewritten as a single fraction of polynomials whose
//! variables are `x` and interned opaque atoms (function applications and
//! non-integer powers, with their children simplified first). The
//! fraction is reduced — monomial gcd, univariate polynomial gcd when
//! only one variable is live, integer content, denominator sign — and
//! rendered back in a canonical term order, which makes the whole pass
//! idempotent.
//!
//! Folding that would overflow the 2^31 integer cap (or blow up the term
//! count) abandons normalization and returns the input unchanged rather
//! than failing.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::poly::{gcd_bigint, unipoly_gcd, AtomId, Mono, MultiPoly};
use super::{Expr, Function, MAX_INT_MAGNITUDE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimplifyError {
    /// A literal zero denominator was produced during normalization.
    #[error("division by zero constant")]
    DivisionByZeroConstant,
}

/// Largest integer exponent expanded into repeated multiplication.
const EXPAND_CAP: i64 = 64;
/// Term-count guard; beyond this the input is returned unchanged.
const TERM_LIMIT: usize = 20_000;

/// Simplify `e`: constant folding, 0/1 identities, collection over a
/// common denominator with gcd cancellation. Idempotent.
pub fn simplify(e: &Expr) -> Result<Expr, SimplifyError> {
    let mut nz = Normalizer::default();
    match nz.normalize(e) {
        Ok(out) => Ok(out),
        Err(NormError::DivZero) => Err(SimplifyError::DivisionByZeroConstant),
        Err(NormError::TooBig) => Ok(e.clone()),
    }
}

enum NormError {
    DivZero,
    TooBig,
}

/// Numerator/denominator pair; the denominator is never the zero
/// polynomial (polynomials over Z form an integral domain, so products
/// of nonzero denominators stay nonzero).
struct Frac {
    num: MultiPoly,
    den: MultiPoly,
}

impl Frac {
    fn from_poly(p: MultiPoly) -> Frac {
        Frac {
            num: p,
            den: MultiPoly::one(),
        }
    }

    fn one() -> Frac {
        Frac::from_poly(MultiPoly::one())
    }
}

#[derive(Default)]
struct Normalizer {
    atoms: Vec<Expr>,
    index: HashMap<Expr, AtomId>,
}

impl Normalizer {
    fn normalize(&mut self, e: &Expr) -> Result<Expr, NormError> {
        let f = self.to_frac(e)?;
        let f = self.reduce(f);
        self.render(&f)
    }

    fn intern(&mut self, e: Expr) -> AtomId {
        if let Some(&id) = self.index.get(&e) {
            return id;
        }
        let id = self.atoms.len();
        self.atoms.push(e.clone());
        self.index.insert(e, id);
        id
    }

    fn atom_frac(&mut self, e: Expr) -> Frac {
        Frac::from_poly(MultiPoly::var(self.intern(e)))
    }

    fn to_frac(&mut self, e: &Expr) -> Result<Frac, NormError> {
        match e {
            Expr::Integer(v) => Ok(Frac::from_poly(MultiPoly::constant(*v))),
            Expr::Var => Ok(self.atom_frac(Expr::Var)),
            Expr::Neg(c) => {
                let f = self.to_frac(c)?;
                Ok(Frac {
                    num: f.num.neg(),
                    den: f.den,
                })
            }
            Expr::Add(l, r) => {
                let a = self.to_frac(l)?;
                let b = self.to_frac(r)?;
                let num = checked(a.num.mul(&b.den).add(&b.num.mul(&a.den)))?;
                let den = checked(a.den.mul(&b.den))?;
                Ok(Frac { num, den })
            }
            Expr::Mul(l, r) => {
                let a = self.to_frac(l)?;
                let b = self.to_frac(r)?;
                Ok(Frac {
                    num: checked(a.num.mul(&b.num))?,
                    den: checked(a.den.mul(&b.den))?,
                })
            }
            Expr::Div(n, d) => {
                let a = self.to_frac(n)?;
                let b = self.to_frac(d)?;
                if b.num.is_zero() {
                    return Err(NormError::DivZero);
                }
                Ok(Frac {
                    num: checked(a.num.mul(&b.den))?,
                    den: checked(a.den.mul(&b.num))?,
                })
            }
            Expr::Pow(base, exponent) => self.pow_frac(base, exponent),
            Expr::Func(f, c) => self.func_frac(*f, c),
        }
    }

    fn pow_frac(&mut self, base: &Expr, exponent: &Expr) -> Result<Frac, NormError> {
        let fe = self.to_frac(exponent)?;
        if let Some(k) = frac_as_integer(&fe) {
            let Some(k) = k.to_i64().filter(|v| v.abs() <= MAX_INT_MAGNITUDE) else {
                return Err(NormError::TooBig);
            };
            if k.abs() <= EXPAND_CAP {
                let fb = self.to_frac(base)?;
                return self.int_pow(fb, k);
            }
            // Too large to expand; keep as an opaque power atom.
            let sb = self.normalize(base)?;
            return Ok(self.atom_frac(Expr::pow(sb, Expr::Integer(k))));
        }
        let sb = self.normalize(base)?;
        let se = self.normalize(exponent)?;
        Ok(self.atom_frac(Expr::pow(sb, se)))
    }

    fn int_pow(&mut self, fb: Frac, k: i64) -> Result<Frac, NormError> {
        if k == 0 {
            // 0^0 = 1, matching IEEE powf.
            return Ok(Frac::one());
        }
        let p = k.unsigned_abs() as u32;
        let num = checked(fb.num.pow(p))?;
        let den = checked(fb.den.pow(p))?;
        if k > 0 {
            Ok(Frac { num, den })
        } else if num.is_zero() {
            Err(NormError::DivZero)
        } else {
            Ok(Frac { num: den, den: num })
        }
    }

    fn func_frac(&mut self, f: Function, child: &Expr) -> Result<Frac, NormError> {
        let sc = self.normalize(child)?;
        if let Some(v) = sc.as_int_const() {
            if let Some(folded) = fold_func(f, v) {
                return Ok(Frac::from_poly(MultiPoly::constant(folded)));
            }
        }
        // ln(exp(u)) = u for every real u.
        if f == Function::Ln {
            if let Expr::Func(Function::Exp, u) = &sc {
                return self.to_frac(&u.clone());
            }
        }
        Ok(self.atom_frac(Expr::func(f, sc)))
    }

    fn reduce(&self, f: Frac) -> Frac {
        if f.num.is_zero() {
            return Frac::from_poly(MultiPoly::zero());
        }
        // Shared monomial factor.
        let g = mono_min(&f.num.monomial_gcd(), &f.den.monomial_gcd());
        let mut num = f.num.div_mono(&g);
        let mut den = f.den.div_mono(&g);

        // Polynomial gcd when a single variable is live overall.
        let mut live = num.atoms();
        live.extend(den.atoms());
        live.sort_unstable();
        live.dedup();
        if live.len() <= 1 {
            let atom = live.first().copied();
            let (_, un) = num.to_univariate().expect("at most one atom");
            let (_, ud) = den.to_univariate().expect("at most one atom");
            let g = unipoly_gcd(&un, &ud);
            if g.degree() >= 1 {
                let qn = un.exact_div(&g).expect("gcd divides numerator");
                let qd = ud.exact_div(&g).expect("gcd divides denominator");
                num = MultiPoly::from_univariate(&qn, atom);
                den = MultiPoly::from_univariate(&qd, atom);
            }
        }

        // Integer content.
        let c = gcd_bigint(&num.content(), &den.content());
        if !c.is_one() && !c.is_zero() {
            num = num.div_content(&c);
            den = den.div_content(&c);
        }

        // Positive leading coefficient in the denominator.
        if self
            .leading_coeff(&den)
            .is_some_and(|c| c.is_negative())
        {
            num = num.neg();
            den = den.neg();
        }
        Frac { num, den }
    }

    /// Coefficient of the first term under the canonical render order.
    fn leading_coeff<'p>(&self, p: &'p MultiPoly) -> Option<&'p BigInt> {
        self.sorted_terms(p).first().map(|&(_, c)| c)
    }

    /// Terms sorted by descending total degree, then by the atom
    /// expressions themselves — an intrinsic order, independent of the
    /// interning sequence, so re-normalizing a rendered result reproduces
    /// the same layout.
    fn sorted_terms<'p>(&self, p: &'p MultiPoly) -> Vec<(&'p Mono, &'p BigInt)> {
        let mut terms: Vec<(&Mono, &BigInt)> = p.terms.iter().collect();
        terms.sort_by(|(a, _), (b, _)| {
            b.total_degree()
                .cmp(&a.total_degree())
                .then_with(|| self.mono_key(a).cmp(&self.mono_key(b)))
        });
        terms
    }

    fn mono_key<'s>(&'s self, m: &Mono) -> Vec<(&'s Expr, u32)> {
        let mut key: Vec<(&Expr, u32)> = m
            .0
            .iter()
            .map(|&(a, e)| (&self.atoms[a], e))
            .collect();
        key.sort();
        key
    }

    fn render(&self, f: &Frac) -> Result<Expr, NormError> {
        if f.num.is_zero() {
            return Ok(Expr::Integer(0));
        }
        let num = self.render_poly(&f.num)?;
        if f.den.is_one() {
            Ok(num)
        } else {
            Ok(Expr::div(num, self.render_poly(&f.den)?))
        }
    }

    fn render_poly(&self, p: &MultiPoly) -> Result<Expr, NormError> {
        let terms = self.sorted_terms(p);
        let mut acc: Option<Expr> = None;
        for (mono, coeff) in terms {
            let term = self.render_term(mono, coeff)?;
            acc = Some(match acc {
                None => term,
                Some(prev) => Expr::add(prev, term),
            });
        }
        Ok(acc.unwrap_or(Expr::Integer(0)))
    }

    fn render_term(&self, mono: &Mono, coeff: &BigInt) -> Result<Expr, NormError> {
        let c = coeff
            .to_i64()
            .filter(|v| v.abs() <= MAX_INT_MAGNITUDE)
            .ok_or(NormError::TooBig)?;
        let mut factors: Vec<Expr> = Vec::with_capacity(mono.0.len());
        for (atom_expr, exp) in self.mono_key(mono) {
            factors.push(if exp == 1 {
                atom_expr.clone()
            } else {
                Expr::pow(atom_expr.clone(), Expr::Integer(exp as i64))
            });
        }
        if factors.is_empty() {
            return Ok(Expr::Integer(c));
        }
        let product = factors
            .into_iter()
            .reduce(Expr::mul)
            .expect("nonempty factors");
        Ok(match c {
            1 => product,
            -1 => Expr::neg(product),
            _ => Expr::mul(Expr::Integer(c), product),
        })
    }
}

fn checked(p: MultiPoly) -> Result<MultiPoly, NormError> {
    if p.term_count() > TERM_LIMIT {
        Err(NormError::TooBig)
    } else {
        Ok(p)
    }
}

/// Exact integer value of a constant fraction, if it is one.
fn frac_as_integer(f: &Frac) -> Option<BigInt> {
    let num = if f.num.is_zero() {
        BigInt::zero()
    } else {
        f.num.as_constant()?.clone()
    };
    let den = f.den.as_constant()?;
    if (&num % den).is_zero() {
        Some(num / den)
    } else {
        None
    }
}

fn mono_min(a: &Mono, b: &Mono) -> Mono {
    let mut out = Vec::new();
    for &(atom, ea) in &a.0 {
        let eb = b.exponent(atom);
        if eb > 0 {
            out.push((atom, ea.min(eb)));
        }
    }
    Mono(out)
}

fn fold_func(f: Function, v: i64) -> Option<i64> {
    match (f, v) {
        (Function::Exp, 0) => Some(1),
        (Function::Ln, 1) => Some(0),
        (Function::Abs, v) => Some(v.abs()),
        (Function::Sqrt, v) if v >= 0 => {
            let r = (v as f64).sqrt().round() as i64;
            (r * r == v).then_some(r)
        }
        (Function::Sin | Function::Tan | Function::Asin | Function::Atan, 0) => Some(0),
        (Function::Sinh | Function::Tanh, 0) => Some(0),
        (Function::Cos | Function::Cosh, 0) => Some(1),
        _ => None,
    }
}
