//! Segment gender detection with a two-way head (GD1) or a pair of
//! independent presence regressors (GD2), and sliding-window show analysis.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::FeatureSet;
use crate::eval::{gender_accuracy, EvalError, EvalReport};
use crate::features::FeatureMatrix;
use crate::frames::{FrameError, ScoreTrack};
use crate::neural::{
    build_gd_backbone_seeded, softmax_row, train, Arch, GdHead, Hyper, LossKind, NeuralError, SequenceModel, Target,
    TrainConfig,
};

/// Frames in one gender segment and in the sliding analysis window.
pub const SEGMENT_FRAMES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    /// Class index: female 0, male 1.
    pub fn index(self) -> usize {
        match self {
            Gender::Female => 0,
            Gender::Male => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Gender::Female),
            1 => Some(Gender::Male),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "f",
            Gender::Male => "m",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" | "female" => Ok(Gender::Female),
            "m" | "male" => Ok(Gender::Male),
            other => Err(format!("unknown gender {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum GenderError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("show has {frames} frames, the sliding window needs {SEGMENT_FRAMES}")]
    TooShort { frames: usize },
    #[error("{0}")]
    WrongModel(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Frames(#[from] FrameError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenderDecision {
    pub label: Gender,
    pub score_female: f64,
    pub score_male: f64,
}

impl GenderDecision {
    /// Argmax with ties going to female.
    fn from_scores(score_female: f64, score_male: f64) -> Self {
        let label = if score_female >= score_male { Gender::Female } else { Gender::Male };
        Self {
            label,
            score_female,
            score_male,
        }
    }
}

/// A trained gender detector.
#[derive(Debug, Clone)]
pub enum GdSystem {
    /// One model with a two-way head.
    Gd1(SequenceModel),
    /// Independent female and male presence regressors.
    Gd2 { female: SequenceModel, male: SequenceModel },
}

impl GdSystem {
    pub fn input_dim(&self) -> usize {
        match self {
            GdSystem::Gd1(m) => m.input_dim(),
            GdSystem::Gd2 { female, .. } => female.input_dim(),
        }
    }
}

/// Two epochs, as used for both gender systems.
pub fn gd_train_config() -> TrainConfig {
    TrainConfig {
        max_epochs: 2,
        ..TrainConfig::default()
    }
}

fn check_gd(model: &SequenceModel, head: GdHead) -> Result<(), GenderError> {
    match model.hyper() {
        Hyper::Gd(h) if h.head == head => Ok(()),
        _ => Err(GenderError::WrongModel(format!(
            "expected a {} model with a {head:?} head",
            Arch::GdBackbone
        ))),
    }
}

/// Trains the two-way system with segment cross-entropy on summed logits.
pub fn train_gd1(set: &FeatureSet<Gender>, cfg: &TrainConfig) -> Result<SequenceModel, GenderError> {
    let dim = set.input_dim().ok_or(NeuralError::EmptyDataset)?;
    let model = build_gd_backbone_seeded(dim, GdHead::TwoWay, cfg.seed);
    let cfg = TrainConfig {
        loss: LossKind::CrossEntropy,
        ..cfg.clone()
    };
    let data = set.with_targets(|g| Target::Class(g.index()));
    Ok(train(&model, &data, &cfg, None)?.0)
}

/// Trains one presence regressor per gender with RMSE on summed outputs.
///
/// The male model uses `cfg.seed + 1` for initialization and shuffling so the
/// two trainings stay independent.
pub fn train_gd2(set: &FeatureSet<Gender>, cfg: &TrainConfig) -> Result<(SequenceModel, SequenceModel), GenderError> {
    let dim = set.input_dim().ok_or(NeuralError::EmptyDataset)?;
    let mut out = Vec::with_capacity(2);
    for (k, gender) in [Gender::Female, Gender::Male].into_iter().enumerate() {
        let seed = cfg.seed.wrapping_add(k as u64);
        let model = build_gd_backbone_seeded(dim, GdHead::Scalar, seed);
        let cfg = TrainConfig {
            loss: LossKind::Rmse,
            seed,
            ..cfg.clone()
        };
        let data = set.with_targets(move |g| Target::Values(vec![if *g == gender { 1.0 } else { 0.0 }]));
        out.push(train(&model, &data, &cfg, None)?.0);
    }
    let male = out.pop().unwrap();
    let female = out.pop().unwrap();
    Ok((female, male))
}

fn summed(model: &SequenceModel, features: &FeatureMatrix) -> Result<Vec<f64>, GenderError> {
    let y = model.forward(features)?;
    let mut s = vec![0.0f64; y.cols];
    for r in 0..y.rows {
        for (a, &v) in s.iter_mut().zip(y.row(r)) {
            *a += v as f64;
        }
    }
    Ok(s)
}

/// Decides the gender of one segment.
///
/// GD1 scores are the softmax of the summed logits and ignore
/// `offset_female`; GD2 scores are the summed regressor outputs with
/// `offset_female` added to the female score.
pub fn classify_segment(
    system: &GdSystem,
    features: &FeatureMatrix,
    offset_female: f64,
) -> Result<GenderDecision, GenderError> {
    match system {
        GdSystem::Gd1(m) => {
            check_gd(m, GdHead::TwoWay)?;
            let s = summed(m, features)?;
            let p = softmax_row(&[s[0] as f32, s[1] as f32]);
            let mut d = GenderDecision::from_scores(p[0] as f64, p[1] as f64);
            // Softmax can round two distinct logits to equal probabilities.
            d.label = if s[0] >= s[1] { Gender::Female } else { Gender::Male };
            Ok(d)
        }
        GdSystem::Gd2 { female, male } => {
            check_gd(female, GdHead::Scalar)?;
            check_gd(male, GdHead::Scalar)?;
            let f = summed(female, features)?[0];
            let m = summed(male, features)?[0];
            Ok(decide_gd2(f, m, offset_female))
        }
    }
}

/// GD2 decision rule on raw summed scores.
pub fn decide_gd2(score_female: f64, score_male: f64, offset_female: f64) -> GenderDecision {
    GenderDecision::from_scores(score_female + offset_female, score_male)
}

/// Classifies every segment of a set and scores the decisions.
pub fn evaluate_gd(
    system: &GdSystem,
    set: &FeatureSet<Gender>,
    offset_female: f64,
) -> Result<(EvalReport, Vec<GenderDecision>), GenderError> {
    let mut decisions = Vec::with_capacity(set.len());
    let mut pairs = Vec::with_capacity(set.len());
    for i in 0..set.len() {
        let d = classify_segment(system, &set.features(i), offset_female)?;
        pairs.push((*set.label(i), d.label));
        decisions.push(d);
    }
    Ok((gender_accuracy(&pairs)?, decisions))
}

/// Per-frame mean GD2 scores of the 1 s window centered on every 10 ms step.
///
/// The track has `n_frames - 99` points; point `k` covers frames
/// `[k, k + 100)` and sits at the window center, `k * 10 ms + 0.5 s`.
pub fn sliding_gender_scores(
    female: &SequenceModel,
    male: &SequenceModel,
    features: &FeatureMatrix,
) -> Result<ScoreTrack, GenderError> {
    check_gd(female, GdHead::Scalar)?;
    check_gd(male, GdHead::Scalar)?;
    if features.n_frames() < SEGMENT_FRAMES {
        return Err(GenderError::TooShort {
            frames: features.n_frames(),
        });
    }
    let f = female.window_means(features, SEGMENT_FRAMES)?.data;
    let m = male.window_means(features, SEGMENT_FRAMES)?.data;
    let first = SEGMENT_FRAMES as f64 / 200.0;
    Ok(ScoreTrack::new(first, vec!["female".into(), "male".into()], vec![f, m])?)
}

/// `time_s,score_female,score_male` lines.
pub fn gender_track_csv(track: &ScoreTrack) -> String {
    let mut out = String::from("time_s,score_female,score_male\n");
    for (i, t) in track.times_s().iter().enumerate() {
        let _ = writeln!(out, "{t:.6},{:.6},{:.6}", track.column(0)[i], track.column(1)[i]);
    }
    out
}
