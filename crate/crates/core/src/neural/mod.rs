//! A small deterministic CPU engine for per-frame sequence labeling.
//!
//! Layers carry hand-written backward passes; [`grad_check`] verifies them
//! against central finite differences in double precision.

mod checkpoint;
mod gradcheck;
mod layers;
mod loss;
mod model;
mod params;
pub mod tensor;
mod train;

pub use checkpoint::{
    checkpoint_crc, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, NNCK_VERSION,
};
pub use gradcheck::{grad_check, GRAD_CHECK_MAX_PARAMS};
pub use loss::{softmax_row, LossKind, Target};
pub use model::{
    build_gd_backbone, build_gd_backbone_seeded, build_rosd, build_rosd_seeded, build_tcn, build_tcn_seeded, Arch,
    GdHead, GdHyper, Hyper, RosdHyper, SequenceModel, TcnHyper,
};
pub use params::{ParamSet, ParamSpec};
pub use train::{evaluate_loss, train, Dataset, EpochStats, Sample, TrainConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("feature dimension {found} does not match model input {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("input sequence has no frames")]
    EmptySequence,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("target does not fit the loss: {0}")]
    TargetMismatch(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad checkpoint magic, expected \"NNCK\"")]
    BadMagic,
    #[error("checkpoint version {0} is not supported")]
    VersionUnsupported(u32),
    #[error("checkpoint truncated in {0}")]
    Truncated(&'static str),
    #[error("checkpoint checksum does not match its contents")]
    ChecksumFailed,
    #[error("checkpoint does not match its architecture: {0}")]
    ArchMismatch(String),
    #[error("bad hyperparameters: {0}")]
    BadHyper(String),
    #[error("checkpoint holds non-finite parameters")]
    NonFiniteParameter,
}
