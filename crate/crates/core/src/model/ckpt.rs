//! Versioned checkpoint container.
//!
//! Layout: 8-byte magic, u32 version, u32 header length, JSON header
//! (configs, vocab hash, history, section table), then raw little-endian
//! f32 parameter blobs. Each section carries its byte offset, length and
//! a truncated SHA-256 checksum; any mismatch names the failing section.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EpochStats, ModelConfig, ModelError, ModelState, Scalar, TrainConfig};

const MAGIC: &[u8; 8] = b"IGRDCKPT";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SectionEntry {
    name: String,
    offset: u64,
    len: u64,
    sha: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    train_config: TrainConfig,
    vocab_hash: String,
    history: Vec<EpochStats>,
    sections: Vec<SectionEntry>,
}

fn section_sha(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Serialize parameters as f32 blobs (wider scalars are truncated).
pub fn save<F: Scalar>(state: &ModelState<F>, path: &Path) -> Result<(), ModelError> {
    let mut sections = Vec::new();
    let mut blob: Vec<u8> = Vec::new();
    state.params.visit(&mut |name, tensor| {
        let offset = blob.len() as u64;
        let start = blob.len();
        for &v in tensor.iter() {
            blob.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        sections.push(SectionEntry {
            name,
            offset,
            len: (blob.len() - start) as u64,
            sha: section_sha(&blob[start..]),
        });
    });
    let header = Header {
        config: state.config.clone(),
        train_config: state.train_config.clone(),
        vocab_hash: state.vocab_hash.clone(),
        history: state.history.clone(),
        sections,
    };
    let header_json = serde_json::to_vec(&header).map_err(std::io::Error::other)?;
    let mut w = File::create(path)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header_json.len() as u32).to_le_bytes())?;
    w.write_all(&header_json)?;
    w.write_all(&blob)?;
    Ok(())
}

/// Load an f32 checkpoint, verifying version, section table and
/// checksums.
pub fn load(path: &Path) -> Result<ModelState<f32>, ModelError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[0..8] != MAGIC {
        return Err(ModelError::CorruptCheckpoint("magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(ModelError::CorruptCheckpoint("version".into()));
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let header_end = 16 + header_len;
    if bytes.len() < header_end {
        return Err(ModelError::CorruptCheckpoint("header".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|_| ModelError::CorruptCheckpoint("header".into()))?;
    header
        .config
        .validate()
        .map_err(|_| ModelError::CorruptCheckpoint("config".into()))?;
    let blob = &bytes[header_end..];

    // Rebuild parameter shapes from the config, then fill from sections.
    let mut state: ModelState<f32> = ModelState::init(
        header.config.clone(),
        header.train_config.clone(),
        &header.vocab_hash,
    );
    state.history = header.history.clone();

    let mut expected_names = Vec::new();
    state
        .params
        .visit(&mut |name, _| expected_names.push(name));
    if expected_names.len() != header.sections.len() {
        return Err(ModelError::CorruptCheckpoint(format!(
            "section count {} != expected {}",
            header.sections.len(),
            expected_names.len()
        )));
    }

    let mut idx = 0usize;
    let mut failure: Option<ModelError> = None;
    state.params.visit_mut(&mut |name, mut tensor| {
        if failure.is_some() {
            return;
        }
        let section = &header.sections[idx];
        idx += 1;
        if section.name != name {
            failure = Some(ModelError::CorruptCheckpoint(name));
            return;
        }
        let start = section.offset as usize;
        let end = start + section.len as usize;
        if end > blob.len() || section.len as usize != tensor.len() * 4 {
            failure = Some(ModelError::CorruptCheckpoint(section.name.clone()));
            return;
        }
        let raw = &blob[start..end];
        if section_sha(raw) != section.sha {
            failure = Some(ModelError::CorruptCheckpoint(section.name.clone()));
            return;
        }
        for (i, v) in tensor.iter_mut().enumerate() {
            *v = f32::from_le_bytes(raw[i * 4..i * 4 + 4].try_into().unwrap());
        }
    });
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(state)
}

/// Widen a checkpointed model to f64 (for attribution math).
pub fn widen(state: &ModelState<f32>) -> ModelState<f64> {
    let mut wide: ModelState<f64> = ModelState::init(
        state.config.clone(),
        state.train_config.clone(),
        &state.vocab_hash,
    );
    wide.history = state.history.clone();
    let mut values: Vec<f64> = Vec::new();
    state
        .params
        .visit(&mut |_, t| values.extend(t.iter().map(|&v| v as f64)));
    let mut i = 0usize;
    wide.params.visit_mut(&mut |_, mut t| {
        for v in t.iter_mut() {
            *v = values[i];
            i += 1;
        }
    });
    wide
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_probs, EncodedSample, PositionalKind};

    fn state() -> ModelState<f32> {
        let config = ModelConfig {
            layers: 1,
            heads: 2,
            model_dim: 8,
            ff_dim: Some(16),
            dropout_p: 0.1,
            max_len: 8,
            vocab_size: 28,
            positional: PositionalKind::Learned,
            seed: 21,
        };
        ModelState::init(config, TrainConfig::default(), "vhash")
    }

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("intguard-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let s = state();
        let path = tmp("rt.ckpt");
        save(&s, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.params, s.params);
        assert_eq!(loaded.vocab_hash, s.vocab_hash);
        assert_eq!(loaded.config, s.config);
        // Same forward outputs on a fixed batch.
        let batch = vec![EncodedSample::new(vec![1, 10, 11], vec![true; 3])];
        assert_eq!(
            forward_probs(&s, &batch).unwrap(),
            forward_probs(&loaded, &batch).unwrap()
        );
    }

    #[test]
    fn truncation_is_detected() {
        let s = state();
        let path = tmp("trunc.ckpt");
        save(&s, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            load(&path),
            Err(ModelError::CorruptCheckpoint(_))
        ));
    }

    #[test]
    fn version_mismatch_is_named() {
        let s = state();
        let path = tmp("ver.ckpt");
        save(&s, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 9; // bump version field
        std::fs::write(&path, &bytes).unwrap();
        match load(&path) {
            Err(ModelError::CorruptCheckpoint(which)) => assert_eq!(which, "version"),
            other => panic!("expected version corruption, got {other:?}"),
        }
    }

    #[test]
    fn flipped_payload_bit_fails_checksum() {
        let s = state();
        let path = tmp("bit.ckpt");
        save(&s, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 3] ^= 0x40;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load(&path),
            Err(ModelError::CorruptCheckpoint(_))
        ));
    }

    #[test]
    fn widen_preserves_values() {
        let s = state();
        let w = widen(&s);
        let mut narrow = Vec::new();
        s.params.visit(&mut |_, t| narrow.extend(t.iter().copied()));
        let mut wide = Vec::new();
        w.params.visit(&mut |_, t| wide.extend(t.iter().copied()));
        assert_eq!(narrow.len(), wide.len());
        for (a, b) in narrow.iter().zip(&wide) {
            assert_eq!(*a as f64, *b);
        }
    }
}
