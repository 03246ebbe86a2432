//! Overlapped-speech detection (OSD) and gender detection (GD) for broadcast
//! style audio.
//!
//! The crate is organised as a pipeline:
//!
//! * [`audio`] reads and writes 16 kHz PCM WAV, synthesizes harmonic voices and
//!   builds labeled overlapped mixtures.
//! * [`features`] extracts 59-dimensional MFCC stacks, loads externally
//!   computed embeddings (FEAT files) and provides a deterministic embedding
//!   stand-in.
//! * [`neural`] is a small CPU sequence-labeling engine (LSTM, BiLSTM, dilated
//!   TCN, Adam, checkpoints) with hand-written backward passes.
//! * [`osd`] and [`gender`] assemble datasets, train detectors and run
//!   inference.
//! * [`pitch`] estimates F0 with YIN and relates gender errors to pitch.
//! * [`corpus`] parses annotations, rasterizes them to 10 ms frames, builds
//!   balanced subsets and synthetic corpora.
//! * [`eval`] computes frame-level precision/recall/F1 and gender accuracies.
//!
//! Every label and score lives on a 10 ms raster ([`frames::FRAME_RATE`]).

pub mod audio;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod frames;
pub mod gender;
pub mod neural;
pub mod osd;
pub mod pitch;

pub use audio::{AudioBuffer, MixSpec};
pub use features::{FeatureMatrix, FeatureSource, MfccConfig};
pub use frames::{Alphabet, FrameLabels, ScoreTrack};
pub use neural::{Arch, SequenceModel, TrainConfig};

/// Sample rate accepted by every pipeline stage.
pub const SAMPLE_RATE: u32 = 16_000;
