//! Frame-level overlap metrics and segment-level gender accuracy.

use std::fmt::Write as _;

use thiserror::Error;

use crate::frames::{Alphabet, FrameLabels};
use crate::gender::Gender;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("reference has {reference} frames, hypothesis has {hypothesis}")]
    LengthMismatch { reference: usize, hypothesis: usize },
    #[error("overlap scoring needs binary labels")]
    BadAlphabet,
    #[error("nothing to score")]
    EmptyInput,
}

/// A rate, or `Undefined` when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Defined(f64),
    Undefined,
}

impl Rate {
    fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            Rate::Undefined
        } else {
            Rate::Defined(num as f64 / den as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Rate::Defined(v) => Some(v),
            Rate::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Rate::Defined(_))
    }

    /// Percentage with one decimal, or `undefined`.
    pub fn percent(self) -> String {
        match self {
            Rate::Defined(v) => format!("{:.1}", 100.0 * v),
            Rate::Undefined => "undefined".into(),
        }
    }

    fn csv(self) -> String {
        match self {
            Rate::Defined(v) => format!("{v:.6}"),
            Rate::Undefined => "undefined".into(),
        }
    }
}

/// Harmonic mean of precision and recall.
pub fn f1_score(precision: Rate, recall: Rate) -> Rate {
    match (precision, recall) {
        (Rate::Defined(p), Rate::Defined(r)) if p + r > 0.0 => Rate::Defined(2.0 * p * r / (p + r)),
        (Rate::Defined(_), Rate::Defined(_)) => Rate::Defined(0.0),
        _ => Rate::Undefined,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OsdMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    /// Frames left out of scoring by the collar.
    pub excluded: u64,
    pub precision: Rate,
    pub recall: Rate,
    pub f1: Rate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdMetrics {
    /// `confusion[true][predicted]`, index 0 female and 1 male.
    pub confusion: [[u64; 2]; 2],
    pub acc: Rate,
    pub acc_f: Rate,
    pub acc_m: Rate,
}

impl GdMetrics {
    pub fn n_female(&self) -> u64 {
        self.confusion[0][0] + self.confusion[0][1]
    }

    pub fn n_male(&self) -> u64 {
        self.confusion[1][0] + self.confusion[1][1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalReport {
    Osd(OsdMetrics),
    Gd(GdMetrics),
}

impl EvalReport {
    pub fn osd(&self) -> Option<&OsdMetrics> {
        match self {
            EvalReport::Osd(m) => Some(m),
            EvalReport::Gd(_) => None,
        }
    }

    pub fn gd(&self) -> Option<&GdMetrics> {
        match self {
            EvalReport::Gd(m) => Some(m),
            EvalReport::Osd(_) => None,
        }
    }

    fn rows(&self) -> Vec<(&'static str, Rate, u64)> {
        match self {
            EvalReport::Osd(m) => vec![
                ("precision", m.precision, m.tp + m.fp),
                ("recall", m.recall, m.tp + m.fn_),
                ("f1", m.f1, m.tp + m.fp + m.fn_),
            ],
            EvalReport::Gd(m) => vec![
                ("acc", m.acc, m.n_female() + m.n_male()),
                ("acc_f", m.acc_f, m.n_female()),
                ("acc_m", m.acc_m, m.n_male()),
            ],
        }
    }

    /// Human-readable table with percentages to one decimal.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>10} {:>10}", "metric", "value(%)", "support");
        for (name, rate, support) in self.rows() {
            let _ = writeln!(out, "{:<10} {:>10} {:>10}", name, rate.percent(), support);
        }
        match self {
            EvalReport::Osd(m) => {
                let _ = writeln!(out, "tp={} fp={} fn={} tn={} excluded={}", m.tp, m.fp, m.fn_, m.tn, m.excluded);
            }
            EvalReport::Gd(m) => {
                let c = m.confusion;
                let _ = writeln!(out, "{:<10} {:>10} {:>10}", "true\\pred", "female", "male");
                let _ = writeln!(out, "{:<10} {:>10} {:>10}", "female", c[0][0], c[0][1]);
                let _ = writeln!(out, "{:<10} {:>10} {:>10}", "male", c[1][0], c[1][1]);
            }
        }
        out
    }

    /// `metric,value,support` lines with values as fractions.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value,support\n");
        for (name, rate, support) in self.rows() {
            let _ = writeln!(out, "{name},{},{support}", rate.csv());
        }
        out
    }
}

/// Frame-wise precision, recall and F1 on the overlap category.
pub fn frame_prf(reference: &FrameLabels, hypothesis: &FrameLabels) -> Result<EvalReport, EvalError> {
    frame_prf_with_collar(reference, hypothesis, 0)
}

/// Like [`frame_prf`], skipping frames within `collar` frames of a reference
/// label change.
pub fn frame_prf_with_collar(
    reference: &FrameLabels,
    hypothesis: &FrameLabels,
    collar: usize,
) -> Result<EvalReport, EvalError> {
    if reference.alphabet() != Alphabet::Binary || hypothesis.alphabet() != Alphabet::Binary {
        return Err(EvalError::BadAlphabet);
    }
    if reference.len() != hypothesis.len() {
        return Err(EvalError::LengthMismatch {
            reference: reference.len(),
            hypothesis: hypothesis.len(),
        });
    }
    let r = reference.values();
    let h = hypothesis.values();
    let mut skip = vec![false; r.len()];
    if collar > 0 {
        for i in 1..r.len() {
            if r[i] != r[i - 1] {
                let lo = i.saturating_sub(collar);
                let hi = (i + collar).min(r.len());
                skip[lo..hi].iter_mut().for_each(|s| *s = true);
            }
        }
    }
    let (mut tp, mut fp, mut fn_, mut tn, mut excluded) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for i in 0..r.len() {
        if skip[i] {
            excluded += 1;
            continue;
        }
        match (r[i], h[i]) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            _ => tn += 1,
        }
    }
    let precision = Rate::ratio(tp, tp + fp);
    let recall = Rate::ratio(tp, tp + fn_);
    Ok(EvalReport::Osd(OsdMetrics {
        tp,
        fp,
        fn_,
        tn,
        excluded,
        precision,
        recall,
        f1: f1_score(precision, recall),
    }))
}

/// Global and per-gender accuracy over `(true, predicted)` pairs.
pub fn gender_accuracy(pairs: &[(Gender, Gender)]) -> Result<EvalReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut confusion = [[0u64; 2]; 2];
    for &(t, p) in pairs {
        confusion[t.index()][p.index()] += 1;
    }
    let correct = confusion[0][0] + confusion[1][1];
    let n_f = confusion[0][0] + confusion[0][1];
    let n_m = confusion[1][0] + confusion[1][1];
    Ok(EvalReport::Gd(GdMetrics {
        confusion,
        acc: Rate::ratio(correct, n_f + n_m),
        acc_f: Rate::ratio(confusion[0][0], n_f),
        acc_m: Rate::ratio(confusion[1][1], n_m),
    }))
}
