//! Overlap detection: fixed-length windowing, training and sliding-window
//! inference with mean aggregation and median smoothing.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dataset::FeatureSet;
use crate::eval::{frame_prf, EvalError, EvalReport};
use crate::features::FeatureMatrix;
use crate::frames::{frame_time, Alphabet, FrameError, FrameLabels, ScoreTrack, FRAME_RATE};
use crate::neural::{
    build_rosd_seeded, build_tcn_seeded, softmax_row, train, Arch, EpochStats, LossKind, NeuralError, SequenceModel,
    Target, TrainConfig,
};

#[derive(Debug, Error)]
pub enum OsdError {
    #[error("features have {features} frames, labels have {labels}")]
    LengthMismatch { features: usize, labels: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Frames(#[from] FrameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowingConfig {
    pub window_frames: usize,
    pub shift_frames: usize,
}

impl Default for WindowingConfig {
    fn default() -> Self {
        Self {
            window_frames: 200,
            shift_frames: 100,
        }
    }
}

impl WindowingConfig {
    pub fn validate(&self) -> Result<(), OsdError> {
        if self.window_frames == 0 || self.shift_frames == 0 || self.shift_frames > self.window_frames {
            return Err(OsdError::BadConfig(format!(
                "need 1 <= shift ({}) <= window ({})",
                self.shift_frames, self.window_frames
            )));
        }
        Ok(())
    }

    /// Window start frames covering `n` frames; the last window may run past
    /// the end.
    pub fn starts(&self, n: usize) -> Vec<usize> {
        if n <= self.window_frames {
            return vec![0];
        }
        let extra = (n - self.window_frames).div_ceil(self.shift_frames);
        (0..=extra).map(|k| k * self.shift_frames).collect()
    }
}

/// Labels of one training window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowLabels {
    /// First frame of the window in the source sequence.
    pub start: usize,
    pub labels: Vec<u8>,
    /// `false` on frames that repeat the last real frame as padding.
    pub valid: Vec<bool>,
}

impl WindowLabels {
    pub fn target(&self) -> Target {
        Target::Frames {
            labels: self.labels.clone(),
            mask: self.valid.clone(),
        }
    }
}

/// Window `[start, start + len)` of `features`, padded by repeating the last
/// frame.
fn padded_slice(features: &FeatureMatrix, start: usize, len: usize) -> (FeatureMatrix, usize) {
    let n = features.n_frames();
    let end = (start + len).min(n);
    let real = end - start;
    if real == len {
        return (features.slice_frames(start, end), real);
    }
    let dim = features.dim();
    let mut data = Vec::with_capacity(len * dim);
    data.extend_from_slice(&features.data()[start * dim..end * dim]);
    let last = features.row(end - 1).to_vec();
    for _ in real..len {
        data.extend_from_slice(&last);
    }
    let m = FeatureMatrix::new(data, dim, features.hop_ms(), features.source()).expect("finite source rows");
    (m, real)
}

/// Cuts aligned feature/label windows at the configured shift.
pub fn make_windows(
    features: &FeatureMatrix,
    labels: &FrameLabels,
    cfg: &WindowingConfig,
) -> Result<Vec<(FeatureMatrix, WindowLabels)>, OsdError> {
    cfg.validate()?;
    if features.n_frames() != labels.len() {
        return Err(OsdError::LengthMismatch {
            features: features.n_frames(),
            labels: labels.len(),
        });
    }
    let w = cfg.window_frames;
    let values = labels.values();
    Ok(cfg
        .starts(labels.len())
        .into_iter()
        .map(|start| {
            let (f, real) = padded_slice(features, start, w);
            let last = values[start + real - 1];
            let mut lab = values[start..start + real].to_vec();
            lab.resize(w, last);
            let valid = (0..w).map(|t| t < real).collect();
            (
                f,
                WindowLabels {
                    start,
                    labels: lab,
                    valid,
                },
            )
        })
        .collect())
}

/// Windows every `(features, labels)` pair of a set.
pub fn window_set(
    set: &[(FeatureMatrix, FrameLabels)],
    cfg: &WindowingConfig,
) -> Result<Vec<(FeatureMatrix, WindowLabels)>, OsdError> {
    let mut out = Vec::new();
    for (f, l) in set {
        out.extend(make_windows(f, l, cfg)?);
    }
    Ok(out)
}

/// Builds a fresh detector of the given family with two outputs.
pub fn build_detector(arch: Arch, input_dim: usize, seed: u64) -> Result<SequenceModel, OsdError> {
    match arch {
        Arch::Rosd => Ok(build_rosd_seeded(input_dim, seed)),
        Arch::Tcn => Ok(build_tcn_seeded(input_dim, 2, seed)),
        Arch::GdBackbone => Err(OsdError::BadConfig("gd_backbone is not an overlap detector".into())),
    }
}

/// Trains an overlap detector with frame-wise cross-entropy, padding frames
/// excluded. With a dev set the best-dev snapshot is returned.
pub fn train_osd(
    arch: Arch,
    train_set: &FeatureSet<WindowLabels>,
    dev_set: Option<&FeatureSet<WindowLabels>>,
    cfg: &TrainConfig,
) -> Result<(SequenceModel, Vec<EpochStats>), OsdError> {
    let dim = train_set.input_dim().ok_or(NeuralError::EmptyDataset)?;
    let model = build_detector(arch, dim, cfg.seed)?;
    let cfg = TrainConfig {
        loss: LossKind::CrossEntropy,
        ..cfg.clone()
    };
    let data = train_set.with_targets(WindowLabels::target);
    let dev = dev_set.map(|d| d.with_targets(WindowLabels::target));
    Ok(train(&model, &data, &cfg, dev.as_ref().map(|d| d as _))?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    pub threshold: f32,
    /// Odd length of the median filter; 1 disables smoothing.
    pub median_frames: usize,
    pub windowing: WindowingConfig,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            median_frames: 11,
            windowing: WindowingConfig::default(),
        }
    }
}

/// Mean probability of the overlap category over every window covering each
/// frame.
pub fn overlap_scores(
    model: &SequenceModel,
    features: &FeatureMatrix,
    windowing: &WindowingConfig,
) -> Result<ScoreTrack, OsdError> {
    windowing.validate()?;
    model.check_input(features.n_frames(), features.dim())?;
    if model.n_out() != 2 {
        return Err(OsdError::BadConfig(format!("detector has {} outputs, expected 2", model.n_out())));
    }
    let n = features.n_frames();
    let mut sum = vec![0.0f64; n];
    let mut count = vec![0u32; n];
    for start in windowing.starts(n) {
        let (f, real) = padded_slice(features, start, windowing.window_frames);
        let y = model.forward(&f)?;
        for t in 0..real {
            sum[start + t] += softmax_row(y.row(t))[1] as f64;
            count[start + t] += 1;
        }
    }
    let p = sum.iter().zip(&count).map(|(&s, &c)| (s / c as f64) as f32).collect();
    Ok(ScoreTrack::new(0.0, vec!["overlap".into()], vec![p])?)
}

/// Frames with score at or above `threshold`.
pub fn binarize(scores: &[f32], threshold: f32) -> Vec<u8> {
    scores.iter().map(|&p| (p >= threshold) as u8).collect()
}

/// Median filter of odd length with edge replication.
pub fn median_filter(values: &[u8], len: usize) -> Vec<u8> {
    let half = len / 2;
    let n = values.len();
    if half == 0 || n == 0 {
        return values.to_vec();
    }
    let at = |i: isize| values[i.clamp(0, n as isize - 1) as usize];
    let mut buf = Vec::with_capacity(len);
    (0..n as isize)
        .map(|i| {
            buf.clear();
            buf.extend((i - half as isize..=i + half as isize).map(at));
            buf.sort_unstable();
            buf[half]
        })
        .collect()
}

/// Scores, binarizes and smooths one feature sequence.
pub fn detect_overlap(
    model: &SequenceModel,
    features: &FeatureMatrix,
    cfg: &DetectConfig,
) -> Result<(FrameLabels, ScoreTrack), OsdError> {
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(OsdError::BadConfig(format!("threshold {} outside (0, 1)", cfg.threshold)));
    }
    if cfg.median_frames % 2 == 0 {
        return Err(OsdError::BadConfig(format!("median_frames {} must be odd", cfg.median_frames)));
    }
    let track = overlap_scores(model, features, &cfg.windowing)?;
    let raw = binarize(track.column(0), cfg.threshold);
    let labels = FrameLabels::new(Alphabet::Binary, median_filter(&raw, cfg.median_frames))?;
    Ok((labels, track))
}

/// Detects on every item and scores all frames jointly against the reference.
pub fn evaluate_osd(
    model: &SequenceModel,
    set: &FeatureSet<FrameLabels>,
    cfg: &DetectConfig,
) -> Result<EvalReport, OsdError> {
    let mut reference = Vec::new();
    let mut hypothesis = Vec::new();
    for i in 0..set.len() {
        let (hyp, _) = detect_overlap(model, &set.features(i), cfg)?;
        let r = set.label(i);
        if r.len() != hyp.len() {
            return Err(OsdError::LengthMismatch {
                features: hyp.len(),
                labels: r.len(),
            });
        }
        reference.extend_from_slice(r.values());
        hypothesis.extend(hyp.into_values());
    }
    let r = FrameLabels::new(Alphabet::Binary, reference)?;
    let h = FrameLabels::new(Alphabet::Binary, hypothesis)?;
    Ok(frame_prf(&r, &h)?)
}

/// `frame_index,time_s,p_overlap` lines.
pub fn scores_csv(track: &ScoreTrack) -> String {
    let mut out = String::from("frame_index,time_s,p_overlap\n");
    for (i, (t, p)) in track.times_s().iter().zip(track.column(0)).enumerate() {
        let _ = writeln!(out, "{i},{t:.6},{p:.6}");
    }
    out
}

/// `start_s,end_s,label` lines for every run of overlap frames.
pub fn segments_csv(labels: &FrameLabels) -> String {
    let mut out = String::from("start_s,end_s,label\n");
    for (s, e) in labels.runs_of_ones() {
        let _ = writeln!(out, "{:.6},{:.6},overlap", frame_time(s), frame_time(e));
    }
    out
}

/// Reads a `start_s,end_s,label` listing back into `(start_s, end_s)` pairs.
pub fn parse_segments_csv(text: &str) -> Result<Vec<(f64, f64)>, OsdError> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || OsdError::BadConfig(format!("line {}: expected start_s,end_s,label", k + 1));
        let mut it = line.split(',');
        let s: f64 = it.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        let e: f64 = it.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        if !(s >= 0.0 && e >= s) {
            return Err(bad());
        }
        out.push((s, e));
    }
    Ok(out)
}

/// Rasterizes overlap segments onto `n_frames` frames by frame centers.
pub fn segments_to_labels(segments: &[(f64, f64)], n_frames: usize) -> FrameLabels {
    let mut v = vec![0u8; n_frames.max(1)];
    let rate = FRAME_RATE as f64;
    for &(s, e) in segments {
        for (i, x) in v.iter_mut().enumerate() {
            let c = (i as f64 + 0.5) / rate;
            if c >= s && c < e {
                *x = 1;
            }
        }
    }
    FrameLabels::new(Alphabet::Binary, v).expect("binary values")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSource;
    use crate::neural::{Hyper, TcnHyper};

    fn ramp(n: usize, dim: usize) -> FeatureMatrix {
        let data = (0..n * dim).map(|i| (i / dim) as f32).collect();
        FeatureMatrix::new(data, dim, 10, FeatureSource::External).unwrap()
    }

    #[test]
    fn window_starts_and_padding() {
        let cfg = WindowingConfig::default();
        let f = ramp(400, 2);
        let l = FrameLabels::zeros(Alphabet::Binary, 400).unwrap();
        let w = make_windows(&f, &l, &cfg).unwrap();
        assert_eq!(w.iter().map(|x| x.1.start).collect::<Vec<_>>(), vec![0, 100, 200]);
        assert_eq!(w[1].0.row(0), f.row(100));

        let f = ramp(150, 2);
        let mut lv = vec![0u8; 150];
        lv[149] = 1;
        let l = FrameLabels::new(Alphabet::Binary, lv).unwrap();
        let w = make_windows(&f, &l, &cfg).unwrap();
        assert_eq!(w.len(), 1);
        let (wf, wl) = &w[0];
        assert_eq!(wf.n_frames(), 200);
        assert_eq!(wf.row(199), f.row(149));
        assert!(wl.valid[..150].iter().all(|&v| v) && wl.valid[150..].iter().all(|&v| !v));
        assert_eq!(wl.labels[199], 1);
        assert!(make_windows(&f, &FrameLabels::zeros(Alphabet::Binary, 10).unwrap(), &cfg).is_err());
    }

    #[test]
    fn median_filter_removes_isolated_frames() {
        let mut v = vec![0u8; 30];
        v[15] = 1;
        assert!(median_filter(&v, 11).iter().all(|&x| x == 0));
        let v = vec![1u8; 30];
        assert_eq!(median_filter(&v, 11), v);
        assert_eq!(binarize(&[0.9; 4], 0.5), vec![1; 4]);
    }

    #[test]
    fn detect_keeps_length_and_range() {
        let m = build_tcn_seeded(3, 2, 1);
        for n in [37, 200, 333] {
            let (labels, track) = detect_overlap(&m, &ramp(n, 3), &DetectConfig::default()).unwrap();
            assert_eq!(labels.len(), n);
            assert_eq!(track.len(), n);
            assert!(track.column(0).iter().all(|p| (0.0..=1.0).contains(p)));
        }
        let bad = DetectConfig {
            median_frames: 4,
            ..DetectConfig::default()
        };
        assert!(detect_overlap(&m, &ramp(10, 3), &bad).is_err());
    }

    #[test]
    fn agreeing_windows_aggregate_exactly() {
        // A zero-weight TCN emits its head bias everywhere, so every window
        // agrees on every frame.
        let mut m = SequenceModel::new(Hyper::Tcn(TcnHyper::standard(3, 2)), 0);
        let names: Vec<String> = m.params().specs().iter().map(|s| s.name.clone()).collect();
        for name in &names {
            m.params_mut().get_mut(name).unwrap().fill(0.0);
        }
        m.params_mut().get_mut("head.bias").unwrap()[1] = 0.37;
        let track = overlap_scores(&m, &ramp(450, 3), &WindowingConfig::default()).unwrap();
        let p = softmax_row(&[0.0, 0.37])[1];
        assert!(track.column(0).iter().all(|&x| x == p));
    }

    #[test]
    fn segment_listing_round_trip() {
        let l = FrameLabels::new(Alphabet::Binary, vec![0, 1, 1, 0, 0, 1]).unwrap();
        let csv = segments_csv(&l);
        assert_eq!(csv.lines().nth(1), Some("0.010000,0.030000,overlap"));
        let back = segments_to_labels(&parse_segments_csv(&csv).unwrap(), 6);
        assert_eq!(back, l);
    }
}
