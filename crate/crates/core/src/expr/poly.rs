//! Sparse polynomial arithmetic used by rational-function normalization.
//!
//! Two layers: [`MultiPoly`], a multivariate polynomial over `BigInt`
//! whose variables are interned atoms (`x` plus opaque transcendental
//! subtrees), and [`UniPoly`], a dense univariate form used for
//! divisibility checks and the primitive-PRS gcd.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

pub type AtomId = usize;

/// Exponent vector: sorted `(atom, power)` pairs, powers strictly positive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Mono(pub Vec<(AtomId, u32)>);

impl Mono {
    pub fn one() -> Mono {
        Mono(Vec::new())
    }

    pub fn var(atom: AtomId) -> Mono {
        Mono(vec![(atom, 1)])
    }

    pub fn total_degree(&self) -> u64 {
        self.0.iter().map(|&(_, e)| e as u64).sum()
    }

    pub fn exponent(&self, atom: AtomId) -> u32 {
        self.0
            .iter()
            .find(|&&(a, _)| a == atom)
            .map_or(0, |&(_, e)| e)
    }

    pub fn mul(&self, other: &Mono) -> Mono {
        let mut out: Vec<(AtomId, u32)> = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, ea) = self.0[i];
            let (b, eb) = other.0[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => {
                    out.push((a, ea));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((b, eb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Mono(out)
    }

    /// Divide by `other`; `None` when any exponent would go negative.
    pub fn div(&self, other: &Mono) -> Option<Mono> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut rest = self.0.iter().copied().collect::<BTreeMap<_, _>>();
        for &(a, e) in &other.0 {
            let have = rest.remove(&a)?;
            if have < e {
                return None;
            }
            if have > e {
                rest.insert(a, have - e);
            }
        }
        out.extend(rest);
        Some(Mono(out))
    }
}

/// Multivariate polynomial with `BigInt` coefficients; no zero terms stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MultiPoly {
    pub terms: BTreeMap<Mono, BigInt>,
}

impl MultiPoly {
    pub fn zero() -> MultiPoly {
        MultiPoly::default()
    }

    pub fn constant(c: impl Into<BigInt>) -> MultiPoly {
        let c = c.into();
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Mono::one(), c);
        }
        MultiPoly { terms }
    }

    pub fn one() -> MultiPoly {
        MultiPoly::constant(1)
    }

    pub fn var(atom: AtomId) -> MultiPoly {
        let mut terms = BTreeMap::new();
        terms.insert(Mono::var(atom), BigInt::one());
        MultiPoly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn as_constant(&self) -> Option<&BigInt> {
        match self.terms.len() {
            0 => None, // zero is handled by is_zero
            1 => self
                .terms
                .get_key_value(&Mono::one())
                .map(|(_, c)| c),
            _ => None,
        }
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Atoms appearing with nonzero exponent anywhere.
    pub fn atoms(&self) -> Vec<AtomId> {
        let mut out: Vec<AtomId> = self
            .terms
            .keys()
            .flat_map(|m| m.0.iter().map(|&(a, _)| a))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn add(&self, other: &MultiPoly) -> MultiPoly {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            let entry = terms.entry(m.clone()).or_insert_with(BigInt::zero);
            *entry += c;
            if entry.is_zero() {
                terms.remove(m);
            }
        }
        MultiPoly { terms }
    }

    pub fn neg(&self) -> MultiPoly {
        MultiPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn mul(&self, other: &MultiPoly) -> MultiPoly {
        let mut terms: BTreeMap<Mono, BigInt> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                let entry = terms.entry(m.clone()).or_insert_with(BigInt::zero);
                *entry += ca * cb;
                if entry.is_zero() {
                    terms.remove(&m);
                }
            }
        }
        MultiPoly { terms }
    }

    pub fn pow(&self, k: u32) -> MultiPoly {
        let mut acc = MultiPoly::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Positive gcd of all coefficients; zero for the zero polynomial.
    pub fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in self.terms.values() {
            g = gcd_bigint(&g, c);
            if g.is_one() {
                break;
            }
        }
        g
    }

    /// Divide every coefficient by `d` (must divide exactly).
    pub fn div_content(&self, d: &BigInt) -> MultiPoly {
        MultiPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c / d))
                .collect(),
        }
    }

    /// Componentwise minimum exponent over all terms; the monomial gcd.
    pub fn monomial_gcd(&self) -> Mono {
        let mut iter = self.terms.keys();
        let Some(first) = iter.next() else {
            return Mono::one();
        };
        let mut acc: BTreeMap<AtomId, u32> = first.0.iter().copied().collect();
        for m in iter {
            acc.retain(|&a, e| {
                let other = m.exponent(a);
                if other == 0 {
                    return false;
                }
                *e = (*e).min(other);
                true
            });
            if acc.is_empty() {
                break;
            }
        }
        Mono(acc.into_iter().collect())
    }

    /// Divide every term by `m` (each term must be divisible).
    pub fn div_mono(&self, m: &Mono) -> MultiPoly {
        MultiPoly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.div(m).expect("monomial gcd divides all terms"), c.clone()))
                .collect(),
        }
    }

    /// Dense univariate view when at most one atom occurs.
    pub fn to_univariate(&self) -> Option<(Option<AtomId>, UniPoly)> {
        let atoms = self.atoms();
        if atoms.len() > 1 {
            return None;
        }
        let atom = atoms.first().copied();
        let mut coeffs = Vec::new();
        for (m, c) in &self.terms {
            let deg = m.total_degree() as usize;
            if coeffs.len() <= deg {
                coeffs.resize(deg + 1, BigInt::zero());
            }
            coeffs[deg] = c.clone();
        }
        Some((atom, UniPoly::new(coeffs)))
    }

    pub fn from_univariate(p: &UniPoly, atom: Option<AtomId>) -> MultiPoly {
        let mut terms = BTreeMap::new();
        for (deg, c) in p.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mono = if deg == 0 {
                Mono::one()
            } else {
                let a = atom.expect("nonconstant univariate needs an atom");
                Mono(vec![(a, deg as u32)])
            };
            terms.insert(mono, c.clone());
        }
        MultiPoly { terms }
    }
}

/// Dense univariate polynomial over `BigInt`, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniPoly {
    pub coeffs: Vec<BigInt>,
}

impl UniPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> UniPoly {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        UniPoly { coeffs }
    }

    pub fn zero() -> UniPoly {
        UniPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: impl Into<BigInt>) -> UniPoly {
        UniPoly::new(vec![c.into()])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> &BigInt {
        self.coeffs.last().expect("leading coeff of nonzero poly")
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn mul(&self, other: &UniPoly) -> UniPoly {
        if self.is_zero() || other.is_zero() {
            return UniPoly::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UniPoly::new(out)
    }

    pub fn scale(&self, c: &BigInt) -> UniPoly {
        UniPoly::new(self.coeffs.iter().map(|k| k * c).collect())
    }

    pub fn sub(&self, other: &UniPoly) -> UniPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.coeffs.get(i).cloned().unwrap_or_else(BigInt::zero);
            let b = other.coeffs.get(i).cloned().unwrap_or_else(BigInt::zero);
            out.push(a - b);
        }
        UniPoly::new(out)
    }

    /// Positive gcd of coefficients; zero polynomial has content 0.
    pub fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in &self.coeffs {
            g = gcd_bigint(&g, c);
            if g.is_one() {
                break;
            }
        }
        g
    }

    /// Content-free part with positive leading coefficient.
    pub fn primitive(&self) -> UniPoly {
        if self.is_zero() {
            return UniPoly::zero();
        }
        let mut c = self.content();
        if self.leading().is_negative() {
            c = -c;
        }
        UniPoly::new(self.coeffs.iter().map(|k| k / &c).collect())
    }

    /// Exact division; `None` unless `d` divides `self` over the integers.
    pub fn exact_div(&self, d: &UniPoly) -> Option<UniPoly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(UniPoly::zero());
        }
        if self.degree() < d.degree() {
            return None;
        }
        let mut rem = self.coeffs.clone();
        let mut q = vec![BigInt::zero(); self.degree() - d.degree() + 1];
        let dl = d.leading();
        for k in (0..q.len()).rev() {
            let lead = rem[k + d.degree()].clone();
            if lead.is_zero() {
                continue;
            }
            if (&lead % dl) != BigInt::zero() {
                return None;
            }
            let c = &lead / dl;
            for (j, dc) in d.coeffs.iter().enumerate() {
                rem[k + j] -= &c * dc;
            }
            q[k] = c;
        }
        if rem.iter().all(Zero::is_zero) {
            Some(UniPoly::new(q))
        } else {
            None
        }
    }

    /// Pseudo-remainder of `self` by `d`; leading terms cancel exactly at
    /// every step, so each iteration lowers the degree.
    fn pseudo_rem(&self, d: &UniPoly) -> UniPoly {
        let mut r = self.clone();
        let dl = d.leading().clone();
        while !r.is_zero() && r.degree() >= d.degree() {
            let shift = r.degree() - d.degree();
            let lead = r.leading().clone();
            let mut shifted = vec![BigInt::zero(); shift];
            shifted.extend(d.coeffs.iter().cloned());
            r = r.scale(&dl).sub(&UniPoly::new(shifted).scale(&lead));
        }
        r
    }

}

/// Primitive gcd via the primitive polynomial remainder sequence.
///
/// Result is primitive with positive leading coefficient; the gcd of the
/// zero polynomial with `p` is `p.primitive()`.
pub fn unipoly_gcd(a: &UniPoly, b: &UniPoly) -> UniPoly {
    let mut p = a.primitive();
    let mut q = b.primitive();
    if p.is_zero() {
        return q;
    }
    while !q.is_zero() {
        if p.degree() < q.degree() {
            std::mem::swap(&mut p, &mut q);
            continue;
        }
        let r = p.pseudo_rem(&q).primitive();
        p = q;
        q = r;
    }
    p.primitive()
}

/// Positive gcd; `gcd(0, b) = |b|`.
pub fn gcd_bigint(a: &BigInt, b: &BigInt) -> BigInt {
    let mut a = a.abs();
    let mut b = b.abs();
    while !b.is_zero() {
        let r = &a % &b;
        a = b;
        b = r;
    }
    a
}
