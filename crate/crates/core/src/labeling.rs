//! Per-method success labels.
//!
//! Labels either come from an external CAS run via the JSON-lines
//! ingestion format, or from built-in synthetic labelers: per-method
//! predicates over structural profiles, with optional label noise, which
//! give desk-scale experiments a controllable ground truth.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{mini_integrate, GeneratorTag, KnownIntegralTable};
use crate::expr::{parse_prefix, profile, Expr, StructuralProfile};
use crate::guards::guard_gosper;
use crate::preprocess::TokenSeq;

#[derive(Debug, Error)]
pub enum LabelingError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid labeler config: {0}")]
    InvalidConfig(String),
    #[error("schema error at line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The 11 user-visible integration methods, in label-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodName {
    Default,
    DDivides,
    Parts,
    Risch,
    Norman,
    Orering,
    ParallelRisch,
    Trager,
    MeijerG,
    PseudoElliptic,
    Gosper,
}

impl MethodName {
    pub const ALL: [MethodName; 11] = [
        MethodName::Default,
        MethodName::DDivides,
        MethodName::Parts,
        MethodName::Risch,
        MethodName::Norman,
        MethodName::Orering,
        MethodName::ParallelRisch,
        MethodName::Trager,
        MethodName::MeijerG,
        MethodName::PseudoElliptic,
        MethodName::Gosper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodName::Default => "Default",
            MethodName::DDivides => "DDivides",
            MethodName::Parts => "Parts",
            MethodName::Risch => "Risch",
            MethodName::Norman => "Norman",
            MethodName::Orering => "Orering",
            MethodName::ParallelRisch => "ParallelRisch",
            MethodName::Trager => "Trager",
            MethodName::MeijerG => "MeijerG",
            MethodName::PseudoElliptic => "PseudoElliptic",
            MethodName::Gosper => "Gosper",
        }
    }

    pub fn from_name(s: &str) -> Option<MethodName> {
        MethodName::ALL.iter().copied().find(|m| m.name() == s)
    }

    /// Position in the full label vector.
    pub fn index(self) -> usize {
        MethodName::ALL
            .iter()
            .position(|&m| m == self)
            .expect("member of ALL")
    }
}

impl std::fmt::Display for MethodName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One success bit per method, in a fixed method order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(pub Vec<bool>);

impl LabelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> LabelVector {
        LabelVector(bytes.iter().map(|&b| b != 0).collect())
    }
}

/// A labeled training/evaluation sample.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub id: usize,
    pub generator: GeneratorTag,
    pub tokens: TokenSeq,
    /// Raw (parseable) integrand prefix, when known; guards need it.
    pub raw_prefix: Option<Vec<String>>,
    pub labels: LabelVector,
}

impl LabeledSample {
    pub fn integrand(&self) -> Option<Expr> {
        let raw = self.raw_prefix.as_ref()?;
        parse_prefix(raw).ok()
    }
}

/// Boolean formula over structural-profile facts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfilePredicate {
    IsRational,
    IsAlgebraic,
    ContainsRadical,
    IsElementary,
    ContainsAbs,
    /// Delegates to the Gosper certificate test.
    Hyperexponential,
    /// The mini-integrator resolves the expression.
    TableIntegrable,
    Always(bool),
    Not(Box<ProfilePredicate>),
    And(Vec<ProfilePredicate>),
    Or(Vec<ProfilePredicate>),
}

impl ProfilePredicate {
    fn needs_hyperexp(&self) -> bool {
        match self {
            ProfilePredicate::Hyperexponential => true,
            ProfilePredicate::Not(p) => p.needs_hyperexp(),
            ProfilePredicate::And(ps) | ProfilePredicate::Or(ps) => {
                ps.iter().any(|p| p.needs_hyperexp())
            }
            _ => false,
        }
    }

    fn needs_table(&self) -> bool {
        match self {
            ProfilePredicate::TableIntegrable => true,
            ProfilePredicate::Not(p) => p.needs_table(),
            ProfilePredicate::And(ps) | ProfilePredicate::Or(ps) => {
                ps.iter().any(|p| p.needs_table())
            }
            _ => false,
        }
    }

    fn eval(&self, facts: &SampleFacts) -> bool {
        match self {
            ProfilePredicate::IsRational => facts.profile.is_rational,
            ProfilePredicate::IsAlgebraic => facts.profile.is_algebraic,
            ProfilePredicate::ContainsRadical => facts.profile.contains_radical,
            ProfilePredicate::IsElementary => facts.profile.is_elementary,
            ProfilePredicate::ContainsAbs => facts.profile.contains_abs,
            ProfilePredicate::Hyperexponential => facts.hyperexponential,
            ProfilePredicate::TableIntegrable => facts.table_integrable,
            ProfilePredicate::Always(b) => *b,
            ProfilePredicate::Not(p) => !p.eval(facts),
            ProfilePredicate::And(ps) => ps.iter().all(|p| p.eval(facts)),
            ProfilePredicate::Or(ps) => ps.iter().any(|p| p.eval(facts)),
        }
    }
}

struct SampleFacts {
    profile: StructuralProfile,
    hyperexponential: bool,
    table_integrable: bool,
}

/// One method's labeling rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRule {
    pub method: MethodName,
    pub rule: ProfilePredicate,
}

/// Synthetic labeler configuration: ordered method rules plus a noise
/// rate in `[0, 0.5)` applied as an independent label flip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLabelerConfig {
    pub methods: Vec<MethodRule>,
    #[serde(default)]
    pub noise: f64,
}

impl SyntheticLabelerConfig {
    /// The default desk-scale configuration.
    ///
    /// Risch-family methods succeed exactly on elementary (abs-free)
    /// input; Gosper on hyperexponential input; Trager on radical
    /// algebraic input (mirroring its guard, which keeps that guard
    /// perfect-negative); PseudoElliptic on any radical; MeijerG on
    /// algebraic input; the general-purpose methods wherever the rule
    /// table reaches.
    pub fn default_config() -> SyntheticLabelerConfig {
        use MethodName::*;
        use ProfilePredicate::*;
        let rule = |method, rule| MethodRule { method, rule };
        SyntheticLabelerConfig {
            methods: vec![
                rule(Default, TableIntegrable),
                rule(DDivides, TableIntegrable),
                rule(Parts, TableIntegrable),
                rule(Risch, IsElementary),
                rule(Norman, IsElementary),
                rule(Orering, TableIntegrable),
                rule(ParallelRisch, IsElementary),
                rule(Trager, And(vec![ContainsRadical, IsAlgebraic])),
                rule(MeijerG, IsAlgebraic),
                rule(PseudoElliptic, ContainsRadical),
                rule(Gosper, Hyperexponential),
            ],
            noise: 0.0,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> SyntheticLabelerConfig {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<(), LabelingError> {
        if !(0.0..0.5).contains(&self.noise) {
            return Err(LabelingError::InvalidConfig(format!(
                "noise rate {} outside [0, 0.5)",
                self.noise
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for r in &self.methods {
            if !seen.insert(r.method) {
                return Err(LabelingError::InvalidConfig(format!(
                    "method {} listed twice",
                    r.method
                )));
            }
        }
        if self.methods.is_empty() {
            return Err(LabelingError::InvalidConfig("no methods".to_string()));
        }
        Ok(())
    }

    pub fn method_names(&self) -> Vec<MethodName> {
        self.methods.iter().map(|r| r.method).collect()
    }
}

/// Applies a [`SyntheticLabelerConfig`], computing each sample's facts
/// once.
pub struct SyntheticLabeler {
    cfg: SyntheticLabelerConfig,
    table: KnownIntegralTable,
    needs_hyperexp: bool,
    needs_table: bool,
}

impl SyntheticLabeler {
    pub fn new(cfg: SyntheticLabelerConfig) -> Result<SyntheticLabeler, LabelingError> {
        cfg.validate()?;
        let needs_hyperexp = cfg.methods.iter().any(|r| r.rule.needs_hyperexp());
        let needs_table = cfg.methods.iter().any(|r| r.rule.needs_table());
        Ok(SyntheticLabeler {
            cfg,
            table: KnownIntegralTable::seeded(),
            needs_hyperexp,
            needs_table,
        })
    }

    pub fn config(&self) -> &SyntheticLabelerConfig {
        &self.cfg
    }

    pub fn methods(&self) -> Vec<MethodName> {
        self.cfg.method_names()
    }

    /// Label one expression; with noise 0 this is a pure function of the
    /// expression's structural facts.
    pub fn label(&self, e: &Expr, rng: &mut impl Rng) -> LabelVector {
        let facts = SampleFacts {
            profile: profile(e),
            hyperexponential: self.needs_hyperexp && guard_gosper(e).prediction,
            table_integrable: self.needs_table && mini_integrate(e, &self.table).is_some(),
        };
        let bits = self
            .cfg
            .methods
            .iter()
            .map(|r| {
                let bit = r.rule.eval(&facts);
                if self.cfg.noise > 0.0 && rng.gen_bool(self.cfg.noise) {
                    !bit
                } else {
                    bit
                }
            })
            .collect();
        LabelVector(bits)
    }
}

/// Per-method positive frequency over a dataset.
pub fn class_balance(labels: &[LabelVector]) -> Result<Vec<f64>, LabelingError> {
    let Some(first) = labels.first() else {
        return Err(LabelingError::EmptyDataset);
    };
    let n = labels.len() as f64;
    let width = first.len();
    let mut counts = vec![0usize; width];
    for lv in labels {
        debug_assert_eq!(lv.len(), width);
        for (i, &b) in lv.0.iter().enumerate() {
            counts[i] += b as usize;
        }
    }
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Header object on line 1 of a labeled file.
#[derive(Debug, Serialize, Deserialize)]
struct LabeledHeader {
    methods: Vec<String>,
}

/// One labeled line on disk.
#[derive(Debug, Serialize, Deserialize)]
pub struct LabeledRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    pub tokens: Vec<String>,
    pub labels: Vec<u8>,
    /// Raw prefix form, kept so guards can re-parse the integrand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrand_prefix: Option<Vec<String>>,
}

/// Result of ingesting a labeled file.
pub struct IngestOutcome {
    pub methods: Vec<MethodName>,
    pub samples: Vec<LabeledSample>,
    /// Lines dropped for label-length mismatch.
    pub skipped: usize,
}

/// Read a labeled JSON-lines file.
///
/// Line 1 must be `{"methods": [...]}`; when `expected` is given the
/// header must match it exactly. Rows with a label vector of the wrong
/// length are logged and skipped; structural problems are fatal.
pub fn ingest_labels(
    path: &Path,
    expected: Option<&[MethodName]>,
) -> Result<IngestOutcome, LabelingError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let header = loop {
        match lines.next() {
            None => {
                // Empty file: empty dataset.
                return Ok(IngestOutcome {
                    methods: expected.map(<[_]>::to_vec).unwrap_or_default(),
                    samples: Vec::new(),
                    skipped: 0,
                });
            }
            Some((lineno, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let header: LabeledHeader =
                    serde_json::from_str(&line).map_err(|e| LabelingError::Schema {
                        line: lineno + 1,
                        reason: format!("expected methods header: {e}"),
                    })?;
                break (lineno + 1, header);
            }
        }
    };
    let (header_line, header) = header;
    let mut methods = Vec::with_capacity(header.methods.len());
    for name in &header.methods {
        methods.push(
            MethodName::from_name(name).ok_or_else(|| LabelingError::Schema {
                line: header_line,
                reason: format!("unknown method `{name}`"),
            })?,
        );
    }
    if let Some(expected) = expected {
        if methods != expected {
            return Err(LabelingError::Schema {
                line: header_line,
                reason: format!(
                    "method list mismatch: file declares {:?}, expected {:?}",
                    header.methods,
                    expected.iter().map(|m| m.name()).collect::<Vec<_>>()
                ),
            });
        }
    }

    let mut samples = Vec::new();
    let mut skipped = 0usize;
    for (lineno, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabeledRecord =
            serde_json::from_str(&line).map_err(|e| LabelingError::Schema {
                line: lineno + 1,
                reason: e.to_string(),
            })?;
        if rec.labels.len() != methods.len() {
            log::warn!(
                "line {}: label vector length {} != method count {}; skipping",
                lineno + 1,
                rec.labels.len(),
                methods.len()
            );
            skipped += 1;
            continue;
        }
        let sample = record_to_sample(rec, lineno + 1, samples.len())?;
        samples.push(sample);
    }
    Ok(IngestOutcome {
        methods,
        samples,
        skipped,
    })
}

fn record_to_sample(
    rec: LabeledRecord,
    lineno: usize,
    fallback_id: usize,
) -> Result<LabeledSample, LabelingError> {
    let schema = |reason: String| LabelingError::Schema {
        line: lineno,
        reason,
    };
    let (tokens, raw_from_tokens) = if rec.tokens.first().map(String::as_str) == Some("[CLS]") {
        (
            TokenSeq::from_tokens(rec.tokens.clone()).map_err(|e| schema(e.to_string()))?,
            None,
        )
    } else {
        // Raw prefix form: abstract it ourselves and keep the raw tokens.
        (
            TokenSeq::from_raw(&rec.tokens).map_err(|e| schema(e.to_string()))?,
            Some(rec.tokens.clone()),
        )
    };
    let raw_prefix = rec.integrand_prefix.or(raw_from_tokens);
    if let Some(raw) = &raw_prefix {
        parse_prefix(raw).map_err(|e| schema(format!("integrand prefix: {e}")))?;
    }
    let generator = match &rec.generator {
        None => GeneratorTag::Ingested,
        Some(g) => g.parse::<GeneratorTag>().map_err(schema)?,
    };
    Ok(LabeledSample {
        id: rec.id.unwrap_or(fallback_id),
        generator,
        tokens,
        raw_prefix,
        labels: LabelVector::from_bytes(&rec.labels),
    })
}

/// Write a labeled file: methods header then one record per sample.
pub fn write_labeled(
    path: &Path,
    methods: &[MethodName],
    samples: &[LabeledSample],
) -> Result<(), LabelingError> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = LabeledHeader {
        methods: methods.iter().map(|m| m.name().to_string()).collect(),
    };
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::other)?;
    w.write_all(b"\n")?;
    for s in samples {
        let rec = LabeledRecord {
            id: Some(s.id),
            generator: Some(s.generator.name().to_string()),
            tokens: s.tokens.tokens().to_vec(),
            labels: s.labels.to_bytes(),
            integrand_prefix: s.raw_prefix.clone(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Function;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x() -> Expr {
        Expr::var()
    }

    #[test]
    fn method_indices_are_contiguous() {
        for (i, m) in MethodName::ALL.iter().enumerate() {
            assert_eq!(m.index(), i);
            assert_eq!(MethodName::from_name(m.name()), Some(*m));
        }
    }

    #[test]
    fn abs_kills_risch_family() {
        let labeler = SyntheticLabeler::new(SyntheticLabelerConfig::default_config()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = Expr::mul(Expr::func(Function::Abs, x()), x());
        let lv = labeler.label(&e, &mut rng);
        assert!(!lv.get(MethodName::Risch.index()));
        assert!(!lv.get(MethodName::Norman.index()));
        assert!(!lv.get(MethodName::ParallelRisch.index()));
    }

    #[test]
    fn gosper_label_follows_certificate() {
        let labeler = SyntheticLabeler::new(SyntheticLabelerConfig::default_config()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = Expr::func(Function::Exp, Expr::pow(x(), Expr::int(2)));
        let lv = labeler.label(&e, &mut rng);
        assert!(lv.get(MethodName::Gosper.index()));
        let e = Expr::func(Function::Sin, x());
        let lv = labeler.label(&e, &mut rng);
        assert!(!lv.get(MethodName::Gosper.index()));
    }

    #[test]
    fn noiseless_labeling_is_deterministic() {
        let labeler = SyntheticLabeler::new(SyntheticLabelerConfig::default_config()).unwrap();
        let e = Expr::add(Expr::func(Function::Sqrt, x()), x());
        let a = labeler.label(&e, &mut ChaCha8Rng::seed_from_u64(5));
        let b = labeler.label(&e, &mut ChaCha8Rng::seed_from_u64(999));
        assert_eq!(a, b);
    }

    #[test]
    fn noise_bound_is_validated() {
        let cfg = SyntheticLabelerConfig::default_config().with_noise(0.5);
        assert!(SyntheticLabeler::new(cfg).is_err());
    }

    #[test]
    fn class_balance_arithmetic() {
        let labels = vec![
            LabelVector(vec![true]),
            LabelVector(vec![false]),
        ];
        assert_eq!(class_balance(&labels).unwrap(), vec![0.5]);
        let all_ones = vec![LabelVector(vec![true, true]); 3];
        assert_eq!(class_balance(&all_ones).unwrap(), vec![1.0, 1.0]);
        assert!(matches!(
            class_balance(&[]),
            Err(LabelingError::EmptyDataset)
        ));
    }

    #[test]
    fn ingest_roundtrip_and_skip() {
        let dir = std::env::temp_dir().join("intguard-labeling-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("labeled.jsonl");
        let methods: Vec<String> = MethodName::ALL.iter().map(|m| m.name().to_string()).collect();
        let mut text = format!("{}\n", serde_json::json!({ "methods": methods }));
        // A processed-form row.
        text.push_str(&format!(
            "{}\n",
            serde_json::json!({
                "tokens": ["[CLS]", "x"],
                "labels": [1,0,0,0,0,0,0,0,0,0,0],
            })
        ));
        // A raw-form row.
        text.push_str(&format!(
            "{}\n",
            serde_json::json!({
                "tokens": ["add", "x", "INT+", "7"],
                "labels": [0,0,0,0,0,0,0,0,0,0,1],
            })
        ));
        // Wrong label length: skipped with a warning.
        text.push_str(&format!(
            "{}\n",
            serde_json::json!({ "tokens": ["[CLS]", "x"], "labels": [1, 0] })
        ));
        std::fs::write(&path, text).unwrap();

        let out = ingest_labels(&path, Some(&MethodName::ALL)).unwrap();
        assert_eq!(out.samples.len(), 2);
        assert_eq!(out.skipped, 1);
        assert_eq!(out.methods.len(), 11);
        // The raw-form row keeps a parseable integrand.
        let parsed = out.samples[1].integrand().unwrap();
        assert_eq!(parsed, Expr::add(x(), Expr::int(7)));
        assert_eq!(
            out.samples[1].tokens.tokens(),
            ["[CLS]", "add", "x", "INT+", "CONST"]
        );
    }

    #[test]
    fn ingest_empty_file_is_empty_dataset() {
        let dir = std::env::temp_dir().join("intguard-labeling-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let out = ingest_labels(&path, Some(&MethodName::ALL)).unwrap();
        assert!(out.samples.is_empty());
        assert_eq!(out.skipped, 0);
    }

    #[test]
    fn header_mismatch_is_fatal() {
        let dir = std::env::temp_dir().join("intguard-labeling-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mismatch.jsonl");
        std::fs::write(&path, "{\"methods\": [\"Risch\"]}\n").unwrap();
        assert!(matches!(
            ingest_labels(&path, Some(&MethodName::ALL)),
            Err(LabelingError::Schema { line: 1, .. })
        ));
        // But with no expectation the shorter list is accepted.
        let out = ingest_labels(&path, None).unwrap();
        assert_eq!(out.methods, vec![MethodName::Risch]);
    }

    #[test]
    fn labeled_file_roundtrip() {
        let dir = std::env::temp_dir().join("intguard-labeling-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.jsonl");
        let labeler = SyntheticLabeler::new(SyntheticLabelerConfig::default_config()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let e = Expr::mul(Expr::int(3), Expr::pow(x(), Expr::int(2)));
        let raw = crate::expr::to_prefix(&e);
        let sample = LabeledSample {
            id: 0,
            generator: GeneratorTag::Fwd,
            tokens: TokenSeq::from_raw(&raw).unwrap(),
            raw_prefix: Some(raw),
            labels: labeler.label(&e, &mut rng),
        };
        write_labeled(&path, &MethodName::ALL, &[sample.clone()]).unwrap();
        let out = ingest_labels(&path, Some(&MethodName::ALL)).unwrap();
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.samples[0].labels, sample.labels);
        assert_eq!(out.samples[0].tokens, sample.tokens);
        assert_eq!(out.samples[0].generator, GeneratorTag::Fwd);
    }
}
