//! Per-frame acoustic features: MFCC stacks, externally computed embeddings
//! and a deterministic embedding stand-in.

mod featfile;
mod mfcc;
mod stub;

pub use featfile::{decode_feature_file, encode_feature_file, load_feature_file, save_feature_file, FEAT_VERSION};
pub use mfcc::{extract_mfcc, MfccConfig, MFCC_DIM};
pub use stub::{stub_features, StubProjector};

use thiserror::Error;

use crate::audio::AudioError;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("audio holds {samples} samples, shorter than one {window} sample window")]
    TooShort { samples: usize, window: usize },
    #[error("invalid MFCC configuration: {0}")]
    BadConfig(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad magic {0:?}, expected \"FEAT\"")]
    BadMagic([u8; 4]),
    #[error("FEAT version {0} is not supported")]
    VersionUnsupported(u32),
    #[error("payload size mismatch: header announces {expected} bytes, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("hop of {0} ms is not supported (10 or 20 ms)")]
    BadHop(f32),
    #[error("feature matrix contains a non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("feature data has {len} values, not a multiple of dim {dim}")]
    Ragged { len: usize, dim: usize },
    #[error("expected {expected} ms frames, got {found} ms")]
    WrongHop { expected: u32, found: u32 },
    #[error("stub embedding dimension must be 768 or 1024, got {0}")]
    BadStubDim(usize),
}

/// Where a feature matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSource {
    Mfcc,
    External,
    Stub,
}

/// Frames × dimensions of real features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f32>,
    dim: usize,
    hop_ms: u32,
    source: FeatureSource,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f32>, dim: usize, hop_ms: u32, source: FeatureSource) -> Result<Self, FeatureError> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(FeatureError::Ragged { len: data.len(), dim });
        }
        if hop_ms != 10 && hop_ms != 20 {
            return Err(FeatureError::BadHop(hop_ms as f32));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                row: i / dim,
                col: i % dim,
            });
        }
        Ok(Self {
            data,
            dim,
            hop_ms,
            source,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hop_ms(&self) -> u32 {
        self.hop_ms
    }

    pub fn source(&self) -> FeatureSource {
        self.source
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Rows `[start, end)` as a new matrix.
    pub fn slice_frames(&self, start: usize, end: usize) -> FeatureMatrix {
        FeatureMatrix {
            data: self.data[start * self.dim..end * self.dim].to_vec(),
            dim: self.dim,
            hop_ms: self.hop_ms,
            source: self.source,
        }
    }

    pub(crate) fn from_parts_unchecked(data: Vec<f32>, dim: usize, hop_ms: u32, source: FeatureSource) -> Self {
        debug_assert!(data.len() % dim == 0);
        Self {
            data,
            dim,
            hop_ms,
            source,
        }
    }
}

/// Duplicates each 20 ms frame so embeddings line up with the 10 ms raster.
pub fn upsample_frames(m: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
    if m.hop_ms != 20 {
        return Err(FeatureError::WrongHop {
            expected: 20,
            found: m.hop_ms,
        });
    }
    let mut data = Vec::with_capacity(m.data.len() * 2);
    for row in m.rows() {
        data.extend_from_slice(row);
        data.extend_from_slice(row);
    }
    Ok(FeatureMatrix {
        data,
        dim: m.dim,
        hop_ms: 10,
        source: m.source,
    })
}
