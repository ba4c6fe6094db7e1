//! Raw prefix tokens -> classifier input.
//!
//! Integer abstraction keeps -2..2 literally and collapses everything
//! else to CONST/CONST2/CONST3 by digit count, a `[CLS]` token is
//! prepended, exact duplicates (post-abstraction) are dropped, and
//! sequences are encoded against a fixed 28-token vocabulary with
//! `[PAD]` at index 0.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    /// Malformed integer encoding in a raw token stream.
    #[error("bad token at position {position}: {reason}")]
    BadToken { position: usize, reason: String },
    /// Sequence longer than the model's maximum; callers skip and log.
    #[error("sequence length {len} exceeds max_len {max_len}")]
    TooLong { len: usize, max_len: usize },
    #[error("token `{0}` is not in the vocabulary")]
    UnknownToken(String),
    #[error("token sequence must start with [CLS]")]
    MissingCls,
}

pub const PAD: &str = "[PAD]";
pub const CLS: &str = "[CLS]";

/// The fixed vocabulary, in index order.
pub const VOCAB_TOKENS: [&str; 28] = [
    PAD, CLS, "INT+", "INT-", "0", "1", "2", "CONST", "CONST2", "CONST3", "x", "add", "mul",
    "pow", "div", "neg", "exp", "ln", "sqrt", "abs", "sin", "cos", "tan", "asin", "atan", "sinh",
    "cosh", "tanh",
];

/// Ordered token set with a bijective token -> index map.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn standard() -> Vocabulary {
        Vocabulary::from_tokens(VOCAB_TOKENS.iter().map(|s| s.to_string()).collect())
    }

    pub fn from_tokens(tokens: Vec<String>) -> Vocabulary {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn pad_id(&self) -> u32 {
        0
    }

    pub fn cls_id(&self) -> u32 {
        self.id(CLS).expect("vocabulary contains [CLS]")
    }

    /// Content hash used to pair checkpoints with datasets.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        hex_string(&h.finalize())
    }

    /// One token per line.
    pub fn write_file(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.tokens.join("\n") + "\n")
    }

    pub fn read_file(path: &Path) -> std::io::Result<Vocabulary> {
        let text = fs::read_to_string(path)?;
        Ok(Vocabulary::from_tokens(
            text.lines().map(|l| l.to_string()).collect(),
        ))
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Abstract integers in a raw prefix token stream.
///
/// Each integer is a sign marker followed by digit tokens; the digits
/// collapse to a literal `0`/`1`/`2`, `CONST` (other single digit),
/// `CONST2` (two digits) or `CONST3` (three or more). Idempotent:
/// already-abstracted streams pass through unchanged.
pub fn abstract_integers(raw: &[String]) -> Result<Vec<String>, PreprocessError> {
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0usize;
    while i < raw.len() {
        let tok = raw[i].as_str();
        if tok == "INT+" || tok == "INT-" {
            out.push(tok.to_string());
            i += 1;
            // Already-abstracted magnitude token?
            match raw.get(i).map(String::as_str) {
                Some(m @ ("CONST" | "CONST2" | "CONST3")) => {
                    out.push(m.to_string());
                    i += 1;
                    continue;
                }
                _ => {}
            }
            let start = i;
            while i < raw.len() && is_digit_token(&raw[i]) {
                i += 1;
            }
            let digits = i - start;
            if digits == 0 {
                return Err(PreprocessError::BadToken {
                    position: start,
                    reason: "sign marker not followed by digits".to_string(),
                });
            }
            out.push(match digits {
                1 => match raw[start].as_str() {
                    d @ ("0" | "1" | "2") => d.to_string(),
                    _ => "CONST".to_string(),
                },
                2 => "CONST2".to_string(),
                _ => "CONST3".to_string(),
            });
        } else if is_digit_token(tok) {
            return Err(PreprocessError::BadToken {
                position: i,
                reason: format!("digit `{tok}` outside an integer encoding"),
            });
        } else {
            out.push(tok.to_string());
            i += 1;
        }
    }
    Ok(out)
}

fn is_digit_token(tok: &str) -> bool {
    tok.len() == 1 && tok.chars().next().is_some_and(|c| c.is_ascii_digit())
}

/// An abstracted, `[CLS]`-prefixed token sequence over the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    /// Abstract a raw prefix stream and prepend `[CLS]`.
    pub fn from_raw(raw: &[String]) -> Result<TokenSeq, PreprocessError> {
        let mut tokens = vec![CLS.to_string()];
        tokens.extend(abstract_integers(raw)?);
        TokenSeq::from_tokens(tokens)
    }

    /// Validate an already-processed token list (leading `[CLS]`, all
    /// tokens known, no raw digits).
    pub fn from_tokens(tokens: Vec<String>) -> Result<TokenSeq, PreprocessError> {
        if tokens.first().map(String::as_str) != Some(CLS) {
            return Err(PreprocessError::MissingCls);
        }
        let vocab = Vocabulary::standard();
        for t in &tokens {
            if vocab.id(t).is_none() {
                return Err(PreprocessError::UnknownToken(t.clone()));
            }
        }
        Ok(TokenSeq { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Keep the first occurrence of each distinct token list, preserving
/// order otherwise. The key is exact (post-abstraction) equality.
pub fn dedup_by_tokens<T>(items: Vec<T>, key: impl Fn(&T) -> &[String]) -> Vec<T> {
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    items
        .into_iter()
        .filter(|item| seen.insert(key(item).to_vec()))
        .collect()
}

/// Encode to index array plus padding mask.
pub fn encode(
    seq: &TokenSeq,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<(Vec<u32>, Vec<bool>), PreprocessError> {
    if seq.len() > max_len {
        return Err(PreprocessError::TooLong {
            len: seq.len(),
            max_len,
        });
    }
    let mut ids = Vec::with_capacity(max_len);
    let mut mask = Vec::with_capacity(max_len);
    for t in seq.tokens() {
        ids.push(
            vocab
                .id(t)
                .ok_or_else(|| PreprocessError::UnknownToken(t.clone()))?,
        );
        mask.push(true);
    }
    ids.resize(max_len, vocab.pad_id());
    mask.resize(max_len, false);
    Ok((ids, mask))
}

/// Strip padding and map indices back to tokens.
pub fn decode(ids: &[u32], vocab: &Vocabulary) -> Result<TokenSeq, PreprocessError> {
    let mut tokens = Vec::new();
    for &id in ids {
        if id == vocab.pad_id() {
            break;
        }
        tokens.push(
            vocab
                .token(id)
                .ok_or_else(|| PreprocessError::UnknownToken(format!("#{id}")))?
                .to_string(),
        );
    }
    TokenSeq::from_tokens(tokens)
}

/// Deterministic stratified split: within each tag group the test picks
/// `round(fraction·count)` members, so every tag lands within ±1 of its
/// proportional share. Original order is preserved inside each side.
pub fn split<T>(
    samples: Vec<T>,
    tag: impl Fn(&T) -> String,
    test_fraction: f64,
    seed: u64,
) -> (Vec<T>, Vec<T>) {
    assert!(
        test_fraction > 0.0 && test_fraction < 1.0,
        "test fraction must be in (0, 1)"
    );
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        groups.entry(tag(s)).or_default().push(i);
    }
    let mut in_test = vec![false; samples.len()];
    for (name, mut idx) in groups {
        let take = ((idx.len() as f64) * test_fraction).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stable_hash(&name));
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(take) {
            in_test[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, s) in samples.into_iter().enumerate() {
        if in_test[i] {
            test.push(s);
        } else {
            train.push(s);
        }
    }
    (train, test)
}

fn stable_hash(s: &str) -> u64 {
    // FNV-1a; must not vary across runs the way RandomState does.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_digit_rules() {
        assert_eq!(
            abstract_integers(&toks(&["INT+", "5"])).unwrap(),
            toks(&["INT+", "CONST"])
        );
        assert_eq!(
            abstract_integers(&toks(&["INT+", "2"])).unwrap(),
            toks(&["INT+", "2"])
        );
        assert_eq!(
            abstract_integers(&toks(&["INT-", "1", "2"])).unwrap(),
            toks(&["INT-", "CONST2"])
        );
        assert_eq!(
            abstract_integers(&toks(&["INT+", "1", "0", "2", "4"])).unwrap(),
            toks(&["INT+", "CONST3"])
        );
    }

    #[test]
    fn abstraction_is_idempotent() {
        let raw = toks(&["mul", "INT-", "4", "2", "pow", "x", "INT+", "2"]);
        let once = abstract_integers(&raw).unwrap();
        let twice = abstract_integers(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn stray_digit_is_rejected() {
        let err = abstract_integers(&toks(&["add", "3", "x"])).unwrap_err();
        assert!(matches!(err, PreprocessError::BadToken { position: 1, .. }));
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let items = vec![toks(&["a1"]), toks(&["b"]), toks(&["a1"])];
        let kept = dedup_by_tokens(items, |t| t);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn coefficient_variants_collapse() {
        // (x+3)^1 and (x+7)^1 abstract identically.
        let a = TokenSeq::from_raw(&toks(&["pow", "add", "x", "INT+", "3", "INT+", "1"])).unwrap();
        let b = TokenSeq::from_raw(&toks(&["pow", "add", "x", "INT+", "7", "INT+", "1"])).unwrap();
        assert_eq!(a, b);
        let kept = dedup_by_tokens(vec![a.clone(), b], |t| t.tokens());
        assert_eq!(kept, vec![a]);
    }

    #[test]
    fn encode_pads_and_masks() {
        let vocab = Vocabulary::standard();
        let seq = TokenSeq::from_tokens(toks(&["[CLS]", "x"])).unwrap();
        let (ids, mask) = encode(&seq, &vocab, 4).unwrap();
        assert_eq!(ids, vec![1, vocab.id("x").unwrap(), 0, 0]);
        assert_eq!(mask, vec![true, true, false, false]);
    }

    #[test]
    fn too_long_is_an_error() {
        let vocab = Vocabulary::standard();
        let mut tokens = toks(&["[CLS]"]);
        tokens.extend(std::iter::repeat_with(|| "x".to_string()).take(2000));
        let seq = TokenSeq::from_tokens(tokens).unwrap();
        assert!(matches!(
            encode(&seq, &vocab, 1024),
            Err(PreprocessError::TooLong { len: 2001, .. })
        ));
        // 1013 tokens fit in 1024.
        let mut tokens = toks(&["[CLS]"]);
        tokens.extend(std::iter::repeat_with(|| "x".to_string()).take(1012));
        let seq = TokenSeq::from_tokens(tokens).unwrap();
        assert!(encode(&seq, &vocab, 1024).is_ok());
    }

    #[test]
    fn decode_inverts_encode() {
        let vocab = Vocabulary::standard();
        let seq = TokenSeq::from_raw(&toks(&["add", "x", "INT+", "7"])).unwrap();
        let (ids, _) = encode(&seq, &vocab, 16).unwrap();
        assert_eq!(decode(&ids, &vocab).unwrap(), seq);
    }

    #[test]
    fn vocabulary_layout() {
        let v = Vocabulary::standard();
        assert_eq!(v.len(), 28);
        assert_eq!(v.id(PAD), Some(0));
        assert_eq!(v.id(CLS), Some(1));
        // Bijective.
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.id(t), Some(i as u32));
            assert_eq!(v.token(i as u32), Some(t.as_str()));
        }
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let samples: Vec<(String, usize)> = (0..100)
            .map(|i| {
                let tag = if i % 2 == 0 { "FWD" } else { "BWD" };
                (tag.to_string(), i)
            })
            .collect();
        let (train_a, test_a) = split(samples.clone(), |s| s.0.clone(), 0.2, 9);
        let (train_b, test_b) = split(samples, |s| s.0.clone(), 0.2, 9);
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        assert_eq!(train_a.len(), 80);
        assert_eq!(test_a.len(), 20);
        let fwd_in_test = test_a.iter().filter(|s| s.0 == "FWD").count();
        assert!((fwd_in_test as i64 - 10).abs() <= 1);
    }
}
