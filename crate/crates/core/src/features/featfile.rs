//! FEAT container for externally computed per-frame embeddings.
//!
//! Layout (little-endian): magic `FEAT`, version `u32 = 1`, dim `u32`,
//! n_frames `u32`, hop_ms `f32`, then `n_frames * dim` `f32` values row-major.

use std::fs;
use std::path::Path;

use super::{FeatureError, FeatureMatrix, FeatureSource};

pub const FEAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

pub fn encode_feature_file(m: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.data().len());
    out.extend_from_slice(b"FEAT");
    out.extend_from_slice(&FEAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(m.n_frames() as u32).to_le_bytes());
    out.extend_from_slice(&(m.hop_ms() as f32).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_feature_file(bytes: &[u8]) -> Result<FeatureMatrix, FeatureError> {
    if bytes.len() < HEADER_LEN {
        return Err(FeatureError::SizeMismatch {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if &magic != b"FEAT" {
        return Err(FeatureError::BadMagic(magic));
    }
    let version = word(4);
    if version != FEAT_VERSION {
        return Err(FeatureError::VersionUnsupported(version));
    }
    let dim = word(8) as usize;
    let n_frames = word(12) as usize;
    let hop = f32::from_le_bytes(bytes[16..20].try_into().unwrap());
    let expected = HEADER_LEN + 4 * dim * n_frames;
    if bytes.len() != expected {
        return Err(FeatureError::SizeMismatch {
            expected,
            found: bytes.len(),
        });
    }
    let hop_ms = if hop == 10.0 {
        10
    } else if hop == 20.0 {
        20
    } else {
        return Err(FeatureError::BadHop(hop));
    };
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(data, dim, hop_ms, FeatureSource::External)
}

pub fn load_feature_file(path: impl AsRef<Path>) -> Result<FeatureMatrix, FeatureError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_feature_file(&bytes)
}

pub fn save_feature_file(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<(), FeatureError> {
    let path = path.as_ref();
    fs::write(path, encode_feature_file(m)).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })
}
