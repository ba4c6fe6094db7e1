//! Verified (integrand, integral) pair generation.
//!
//! Five generators: FWD integrates a random expression through the
//! rule table, BWD differentiates, IBP applies integration by parts,
//! SUB applies the substitution rule, and LIOUVILLE assembles a
//! rational-plus-logs integral and differentiates it. Every emitted
//! pair is verified numerically before it enters a dataset.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{
    differentiate, eval_numeric, parse_prefix, simplify, to_prefix, Expr,
};

mod liouville;
mod random;
mod table;

pub use liouville::{gen_liouville, liouville_parts, LiouvilleParts};
pub use random::{random_expr, ExprWeights};
pub use table::{mini_integrate, KnownIntegralTable};

#[derive(Debug, Error)]
pub enum DatagenError {
    /// Constraint sampling failed repeatedly (e.g. Liouville coprimality).
    #[error("retry budget exhausted while sampling a constrained component")]
    RetryExhausted,
    /// A generator's accept rate fell below 0.1% over its attempt window.
    #[error("generator {0} stalled: accept rate below 0.1%")]
    GenerationStalled(GeneratorTag),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dataset line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Which generator produced a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GeneratorTag {
    #[serde(rename = "FWD")]
    Fwd,
    #[serde(rename = "BWD")]
    Bwd,
    #[serde(rename = "IBP")]
    Ibp,
    #[serde(rename = "SUB")]
    Sub,
    #[serde(rename = "LIOUVILLE")]
    Liouville,
    #[serde(rename = "INGESTED")]
    Ingested,
}

impl GeneratorTag {
    /// The five built-in generators, in dataset order.
    pub const GENERATORS: [GeneratorTag; 5] = [
        GeneratorTag::Fwd,
        GeneratorTag::Bwd,
        GeneratorTag::Ibp,
        GeneratorTag::Sub,
        GeneratorTag::Liouville,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorTag::Fwd => "FWD",
            GeneratorTag::Bwd => "BWD",
            GeneratorTag::Ibp => "IBP",
            GeneratorTag::Sub => "SUB",
            GeneratorTag::Liouville => "LIOUVILLE",
            GeneratorTag::Ingested => "INGESTED",
        }
    }
}

impl fmt::Display for GeneratorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "FWD" => Ok(GeneratorTag::Fwd),
            "BWD" => Ok(GeneratorTag::Bwd),
            "IBP" => Ok(GeneratorTag::Ibp),
            "SUB" => Ok(GeneratorTag::Sub),
            "LIOUVILLE" => Ok(GeneratorTag::Liouville),
            "INGESTED" => Ok(GeneratorTag::Ingested),
            other => Err(format!("unknown generator tag `{other}`")),
        }
    }
}

/// A verified (integrand, integral) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegrandPair {
    pub integrand: Expr,
    pub integral: Expr,
    pub tag: GeneratorTag,
}

/// Numeric verification that `d(integral)/dx == integrand`.
///
/// Looks for `points` evaluation points in `[-3, 3]` where both sides are
/// defined and moderate, resampling past poles (up to 50 attempts per
/// point), and demands agreement within `tol` relative.
pub fn verify_pair_at(
    integrand: &Expr,
    integral: &Expr,
    rng: &mut impl Rng,
    points: usize,
    tol: f64,
) -> bool {
    let derivative = differentiate(integral);
    let mut found = 0usize;
    let mut attempts = 0usize;
    while found < points {
        attempts += 1;
        if attempts > 50 * points {
            return false;
        }
        let t: f64 = rng.gen_range(-3.0..3.0);
        let (Some(lhs), Some(rhs)) = (eval_numeric(&derivative, t), eval_numeric(integrand, t))
        else {
            continue;
        };
        if lhs.abs() > 1e6 || rhs.abs() > 1e6 {
            continue; // treat near-singular points like singular ones
        }
        if (lhs - rhs).abs() > tol * (1.0 + rhs.abs()) {
            return false;
        }
        found += 1;
    }
    true
}

/// The dataset-facing verification: 5 points at 1e-6 relative.
pub fn verify_pair(integrand: &Expr, integral: &Expr, rng: &mut impl Rng) -> bool {
    verify_pair_at(integrand, integral, rng, 5, 1e-6)
}

/// Stricter gate applied at generation time, so emitted pairs clear the
/// dataset-facing check with margin under fresh evaluation points.
fn verify_strict(integrand: &Expr, integral: &Expr, rng: &mut impl Rng) -> bool {
    verify_pair_at(integrand, integral, rng, 8, 1e-9)
}

/// Sampling knobs shared by the generators.
#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Depth budget for FWD/BWD draws.
    pub max_depth: usize,
    /// Depth budget for IBP and SUB component draws.
    pub part_depth: usize,
    pub weights: ExprWeights,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_depth: 6,
            part_depth: 3,
            weights: ExprWeights::default(),
        }
    }
}

/// FWD: integrate a random expression through the table; `None` when no
/// rule chain applies.
pub fn gen_fwd(
    rng: &mut impl Rng,
    table: &KnownIntegralTable,
    cfg: &GenConfig,
) -> Option<IntegrandPair> {
    let f = random_expr(rng, cfg.max_depth, &cfg.weights);
    let f = simplify(&f).ok()?;
    if !f.contains_var() {
        return None;
    }
    let integral = mini_integrate(&f, table)?;
    verify_strict(&f, &integral, rng).then_some(IntegrandPair {
        integrand: f,
        integral,
        tag: GeneratorTag::Fwd,
    })
}

/// BWD: differentiate a random expression; total, retrying internally
/// past degenerate draws.
pub fn gen_bwd(rng: &mut impl Rng, cfg: &GenConfig) -> IntegrandPair {
    for _ in 0..100_000 {
        let f = random_expr(rng, cfg.max_depth, &cfg.weights);
        if !f.contains_var() {
            continue;
        }
        let Ok(integrand) = simplify(&differentiate(&f)) else {
            continue;
        };
        if verify_strict(&integrand, &f, rng) {
            return IntegrandPair {
                integrand,
                integral: f,
                tag: GeneratorTag::Bwd,
            };
        }
    }
    unreachable!("BWD accepts a draw well within the retry budget");
}

/// IBP: for random `f`, `g` with a known integral of `f'·g`, emit
/// `(f·g', f·g - ∫f'·g)`.
pub fn gen_ibp(
    rng: &mut impl Rng,
    table: &KnownIntegralTable,
    cfg: &GenConfig,
) -> Option<IntegrandPair> {
    let f = random_expr(rng, cfg.part_depth, &cfg.weights);
    let g = random_expr(rng, cfg.part_depth, &cfg.weights);
    if !f.contains_var() || !g.contains_var() {
        return None;
    }
    let known = simplify(&Expr::mul(differentiate(&f), g.clone())).ok()?;
    let partial = mini_integrate(&known, table)?;
    let integrand = simplify(&Expr::mul(f.clone(), differentiate(&g))).ok()?;
    if !integrand.contains_var() {
        return None;
    }
    let integral = simplify(&Expr::sub(Expr::mul(f, g), partial)).ok()?;
    verify_strict(&integrand, &integral, rng).then_some(IntegrandPair {
        integrand,
        integral,
        tag: GeneratorTag::Ibp,
    })
}

/// SUB: for outer `f` with known integral Φ and inner `g`, emit
/// `(f(g)·g', Φ(g))`.
pub fn gen_sub(
    rng: &mut impl Rng,
    table: &KnownIntegralTable,
    cfg: &GenConfig,
) -> Option<IntegrandPair> {
    let outer = random_expr(rng, cfg.part_depth, &cfg.weights);
    let outer = simplify(&outer).ok()?;
    let phi = mini_integrate(&outer, table)?;
    let inner = random_expr(rng, cfg.part_depth, &cfg.weights);
    if !inner.contains_var() {
        return None;
    }
    let dg = simplify(&differentiate(&inner)).ok()?;
    if dg == Expr::Integer(0) {
        return None;
    }
    let integrand = simplify(&Expr::mul(outer.substitute(&inner), dg)).ok()?;
    if !integrand.contains_var() {
        return None;
    }
    let integral = simplify(&phi.substitute(&inner)).ok()?;
    verify_strict(&integrand, &integral, rng).then_some(IntegrandPair {
        integrand,
        integral,
        tag: GeneratorTag::Sub,
    })
}

/// Build a dataset with exactly `quota` pairs per generator.
///
/// Deterministic for a given seed: each generator runs on its own seeded
/// stream, in a fixed order, sharing one integral table that grows with
/// every accepted pair.
pub fn build_dataset(quota: usize, seed: u64) -> Result<Vec<IntegrandPair>, DatagenError> {
    build_dataset_with(quota, seed, &GenConfig::default())
}

pub fn build_dataset_with(
    quota: usize,
    seed: u64,
    cfg: &GenConfig,
) -> Result<Vec<IntegrandPair>, DatagenError> {
    assert!(quota >= 1, "quota must be at least 1");
    let mut table = KnownIntegralTable::seeded();
    let mut out = Vec::with_capacity(quota * GeneratorTag::GENERATORS.len());
    for (i, tag) in GeneratorTag::GENERATORS.iter().copied().enumerate() {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut accepted = 0usize;
        let mut attempts = 0usize;
        while accepted < quota {
            attempts += 1;
            if attempts >= 2000 && (accepted as f64) < 0.001 * attempts as f64 {
                return Err(DatagenError::GenerationStalled(tag));
            }
            let pair = match tag {
                GeneratorTag::Fwd => gen_fwd(&mut rng, &table, cfg),
                GeneratorTag::Bwd => Some(gen_bwd(&mut rng, cfg)),
                GeneratorTag::Ibp => gen_ibp(&mut rng, &table, cfg),
                GeneratorTag::Sub => gen_sub(&mut rng, &table, cfg),
                GeneratorTag::Liouville => match gen_liouville(&mut rng) {
                    Ok(p) => Some(p),
                    Err(DatagenError::RetryExhausted) => None,
                    Err(e) => return Err(e),
                },
                GeneratorTag::Ingested => unreachable!(),
            };
            if let Some(pair) = pair {
                table.insert_pair(&pair.integrand, &pair.integral);
                out.push(pair);
                accepted += 1;
            }
        }
    }
    Ok(out)
}

/// One dataset line on disk.
#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: usize,
    pub generator: String,
    pub integrand_prefix: Vec<String>,
    pub integral_prefix: Vec<String>,
}

impl DatasetRecord {
    pub fn from_pair(id: usize, pair: &IntegrandPair) -> DatasetRecord {
        DatasetRecord {
            id,
            generator: pair.tag.name().to_string(),
            integrand_prefix: to_prefix(&pair.integrand),
            integral_prefix: to_prefix(&pair.integral),
        }
    }
}

/// Write pairs as JSON lines; ids are assigned by position.
pub fn write_dataset(path: &Path, pairs: &[IntegrandPair]) -> Result<(), DatagenError> {
    let mut w = BufWriter::new(File::create(path)?);
    for (id, pair) in pairs.iter().enumerate() {
        serde_json::to_writer(&mut w, &DatasetRecord::from_pair(id, pair))
            .map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a dataset file back into pairs keyed by id.
pub fn read_dataset(path: &Path) -> Result<Vec<(usize, IntegrandPair)>, DatagenError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut seen = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord =
            serde_json::from_str(&line).map_err(|e| DatagenError::Malformed {
                line: lineno + 1,
                reason: e.to_string(),
            })?;
        let tag = rec
            .generator
            .parse::<GeneratorTag>()
            .map_err(|reason| DatagenError::Malformed {
                line: lineno + 1,
                reason,
            })?;
        let integrand =
            parse_prefix(&rec.integrand_prefix).map_err(|e| DatagenError::Malformed {
                line: lineno + 1,
                reason: format!("integrand: {e}"),
            })?;
        let integral = parse_prefix(&rec.integral_prefix).map_err(|e| DatagenError::Malformed {
            line: lineno + 1,
            reason: format!("integral: {e}"),
        })?;
        if seen.insert(rec.id, lineno).is_some() {
            return Err(DatagenError::Malformed {
                line: lineno + 1,
                reason: format!("duplicate id {}", rec.id),
            });
        }
        out.push((
            rec.id,
            IntegrandPair {
                integrand,
                integral,
                tag,
            },
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Function;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn bwd_emits_verified_pairs() {
        let cfg = GenConfig::default();
        let mut r = rng(7);
        for _ in 0..50 {
            let pair = gen_bwd(&mut r, &cfg);
            assert!(verify_pair(&pair.integrand, &pair.integral, &mut r));
            assert_eq!(pair.tag, GeneratorTag::Bwd);
        }
    }

    #[test]
    fn bwd_of_sin_is_cos() {
        // Construct directly: BWD on f = sin(x) yields (cos(x), sin(x)).
        let f = Expr::func(Function::Sin, Expr::var());
        let integrand = simplify(&differentiate(&f)).unwrap();
        assert_eq!(integrand, Expr::func(Function::Cos, Expr::var()));
    }

    #[test]
    fn fwd_rejects_table_misses() {
        let table = KnownIntegralTable::seeded();
        // exp(x^2) has no rule chain.
        let e = Expr::func(Function::Exp, Expr::pow(Expr::var(), Expr::int(2)));
        assert_eq!(mini_integrate(&e, &table), None);
    }

    #[test]
    fn ibp_example_x_times_cos() {
        // f = x, g = sin(x): integrand x·cos(x), integral x·sin(x)+cos(x).
        let table = KnownIntegralTable::seeded();
        let f = Expr::var();
        let g = Expr::func(Function::Sin, Expr::var());
        let known = simplify(&Expr::mul(differentiate(&f), g.clone())).unwrap();
        let partial = mini_integrate(&known, &table).unwrap();
        let integrand = simplify(&Expr::mul(f.clone(), differentiate(&g))).unwrap();
        let integral = simplify(&Expr::sub(Expr::mul(f, g), partial)).unwrap();
        let mut r = rng(3);
        assert!(verify_pair(&integrand, &integral, &mut r));
        let expected = simplify(&Expr::add(
            Expr::mul(Expr::var(), Expr::func(Function::Sin, Expr::var())),
            Expr::func(Function::Cos, Expr::var()),
        ))
        .unwrap();
        assert_eq!(integral, expected);
    }

    #[test]
    fn generators_accept_within_budget() {
        let table = KnownIntegralTable::seeded();
        let cfg = GenConfig::default();
        let mut r = rng(11);
        let mut fwd = 0;
        let mut ibp = 0;
        let mut sub = 0;
        for _ in 0..400 {
            fwd += gen_fwd(&mut r, &table, &cfg).is_some() as usize;
            ibp += gen_ibp(&mut r, &table, &cfg).is_some() as usize;
            sub += gen_sub(&mut r, &table, &cfg).is_some() as usize;
        }
        assert!(fwd > 4, "FWD accept rate too low: {fwd}/400");
        assert!(ibp > 4, "IBP accept rate too low: {ibp}/400");
        assert!(sub > 4, "SUB accept rate too low: {sub}/400");
    }

    #[test]
    fn build_dataset_meets_quota_and_is_deterministic() {
        let a = build_dataset(4, 42).unwrap();
        let b = build_dataset(4, 42).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a, b);
        for tag in GeneratorTag::GENERATORS {
            assert_eq!(a.iter().filter(|p| p.tag == tag).count(), 4);
        }
    }

    #[test]
    fn dataset_roundtrip_through_file() {
        let pairs = build_dataset(2, 5).unwrap();
        let dir = std::env::temp_dir().join("intguard-datagen-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ds.jsonl");
        write_dataset(&path, &pairs).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.len(), pairs.len());
        for (idx, ((id, pair), orig)) in back.iter().zip(&pairs).enumerate() {
            assert_eq!(*id, idx);
            assert_eq!(pair, orig);
        }
    }
}
