//! YIN pitch tracking and pitch-binned gender error analysis.

use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::gender::Gender;

#[derive(Debug, Error, PartialEq)]
pub enum PitchError {
    #[error("audio has {samples} samples, a pitch frame needs {needed}")]
    TooShort { samples: usize, needed: usize },
    #[error("invalid pitch configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YinConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub f0_min: f64,
    pub f0_max: f64,
    pub cmnd_threshold: f64,
}

impl Default for YinConfig {
    fn default() -> Self {
        Self {
            frame_ms: 40.0,
            hop_ms: 10.0,
            f0_min: 50.0,
            f0_max: 600.0,
            cmnd_threshold: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    pub times_s: Vec<f64>,
    /// 0 on unvoiced frames.
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    pub cmnd_min: Vec<f64>,
}

impl PitchTrack {
    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    /// Track from per-frame F0 values, 0 meaning unvoiced.
    pub fn from_f0(f0_hz: Vec<f64>) -> Self {
        let n = f0_hz.len();
        Self {
            times_s: (0..n).map(|i| i as f64 * 0.01).collect(),
            voiced: f0_hz.iter().map(|&f| f > 0.0).collect(),
            cmnd_min: f0_hz.iter().map(|&f| if f > 0.0 { 0.0 } else { 1.0 }).collect(),
            f0_hz,
        }
    }
}

struct Geometry {
    frame: usize,
    hop: usize,
    tau_min: usize,
    tau_max: usize,
    /// Integration window of the difference function.
    window: usize,
}

fn geometry(cfg: &YinConfig, rate: u32) -> Result<Geometry, PitchError> {
    let bad = |m: &str| Err(PitchError::BadConfig(m.into()));
    if !(cfg.f0_min > 0.0 && cfg.f0_max > cfg.f0_min) {
        return bad("need 0 < f0_min < f0_max");
    }
    if !(cfg.cmnd_threshold > 0.0 && cfg.cmnd_threshold < 1.0) {
        return bad("cmnd_threshold must lie in (0, 1)");
    }
    let sr = rate as f64;
    let frame = (cfg.frame_ms * sr / 1000.0).round() as usize;
    let hop = (cfg.hop_ms * sr / 1000.0).round() as usize;
    let tau_min = ((sr / cfg.f0_max).floor() as usize).max(2);
    let tau_max = (sr / cfg.f0_min).ceil() as usize;
    if hop == 0 || tau_max + 2 > frame {
        return bad("frame too short for the lowest f0");
    }
    Ok(Geometry {
        frame,
        hop,
        tau_min,
        tau_max,
        window: frame - tau_max,
    })
}

/// Cumulative mean normalized difference for lags `0..=tau_max`.
fn cmnd(diff: &[f64]) -> Vec<f64> {
    let mut out = vec![1.0; diff.len()];
    let mut running = 0.0;
    for tau in 1..diff.len() {
        running += diff[tau];
        out[tau] = if running > 0.0 { diff[tau] * tau as f64 / running } else { 1.0 };
    }
    out
}

/// Picks the lag, returning `(refined lag, cmnd at the chosen lag)`.
fn pick_lag(d: &[f64], g: &Geometry, threshold: f64) -> (f64, f64) {
    let mut chosen = None;
    let mut tau = g.tau_min;
    while tau <= g.tau_max {
        if d[tau] < threshold {
            while tau < g.tau_max && d[tau + 1] < d[tau] {
                tau += 1;
            }
            chosen = Some(tau);
            break;
        }
        tau += 1;
    }
    let tau = chosen.unwrap_or_else(|| {
        (g.tau_min..=g.tau_max)
            .min_by(|&a, &b| d[a].total_cmp(&d[b]))
            .expect("non-empty lag range")
    });
    let mut refined = tau as f64;
    if tau > 1 && tau + 1 < d.len() {
        let (a, b, c) = (d[tau - 1], d[tau], d[tau + 1]);
        let den = a - 2.0 * b + c;
        if den > 0.0 {
            let shift = 0.5 * (a - c) / den;
            if shift.abs() < 1.0 {
                refined += shift;
            }
        }
    }
    (refined, d[tau])
}

/// Per-frame F0 with the YIN estimator.
pub fn yin_f0(audio: &AudioBuffer, cfg: &YinConfig) -> Result<PitchTrack, PitchError> {
    let g = geometry(cfg, audio.sample_rate())?;
    let x = audio.samples();
    if x.len() < g.frame {
        return Err(PitchError::TooShort {
            samples: x.len(),
            needed: g.frame,
        });
    }
    let n_frames = (x.len() - g.frame) / g.hop + 1;
    let n_fft = (g.frame + g.window).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n_fft);
    let inv = planner.plan_fft_inverse(n_fft);
    let sr = audio.sample_rate() as f64;

    let mut track = PitchTrack {
        times_s: Vec::with_capacity(n_frames),
        f0_hz: Vec::with_capacity(n_frames),
        voiced: Vec::with_capacity(n_frames),
        cmnd_min: Vec::with_capacity(n_frames),
    };
    let mut a = vec![Complex::new(0.0, 0.0); n_fft];
    let mut b = vec![Complex::new(0.0, 0.0); n_fft];
    let mut prefix = vec![0.0f64; g.frame + 1];
    for i in 0..n_frames {
        let frame = &x[i * g.hop..i * g.hop + g.frame];
        for (k, v) in a.iter_mut().enumerate() {
            *v = Complex::new(if k < g.window { frame[k] as f64 } else { 0.0 }, 0.0);
        }
        for (k, v) in b.iter_mut().enumerate() {
            *v = Complex::new(if k < g.frame { frame[k] as f64 } else { 0.0 }, 0.0);
        }
        for k in 0..g.frame {
            prefix[k + 1] = prefix[k] + (frame[k] as f64).powi(2);
        }
        fwd.process(&mut a);
        fwd.process(&mut b);
        for (bv, av) in b.iter_mut().zip(&a) {
            *bv *= av.conj();
        }
        inv.process(&mut b);
        let scale = 1.0 / n_fft as f64;
        let e0 = prefix[g.window];
        let diff: Vec<f64> = (0..=g.tau_max)
            .map(|tau| {
                let r = b[tau].re * scale;
                let e_tau = prefix[tau + g.window] - prefix[tau];
                (e0 + e_tau - 2.0 * r).max(0.0)
            })
            .collect();
        let d = cmnd(&diff);
        let (lag, dmin) = pick_lag(&d, &g, cfg.cmnd_threshold);
        let voiced = e0 > 0.0 && dmin <= cfg.cmnd_threshold;
        track.times_s.push((i * g.hop) as f64 / sr + g.frame as f64 / (2.0 * sr));
        track.f0_hz.push(if voiced { (sr / lag).clamp(cfg.f0_min, cfg.f0_max) } else { 0.0 });
        track.voiced.push(voiced);
        track.cmnd_min.push(dmin);
    }
    Ok(track)
}

/// Median of the voiced frames of a track, as a segment-level pitch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentPitch {
    /// Natural log of the median F0 in Hz.
    LogF0(f64),
    Unvoiced,
}

impl SegmentPitch {
    pub fn log_f0(self) -> Option<f64> {
        match self {
            SegmentPitch::LogF0(v) => Some(v),
            SegmentPitch::Unvoiced => None,
        }
    }
}

/// Minimum voiced fraction for a segment to carry a pitch.
pub const MIN_VOICED_FRACTION: f64 = 0.10;

pub fn segment_log_f0(track: &PitchTrack) -> SegmentPitch {
    let mut voiced: Vec<f64> = track
        .f0_hz
        .iter()
        .zip(&track.voiced)
        .filter(|(&f, &v)| v && f > 0.0)
        .map(|(&f, _)| f)
        .collect();
    if voiced.is_empty() || (voiced.len() as f64) < MIN_VOICED_FRACTION * track.len() as f64 {
        return SegmentPitch::Unvoiced;
    }
    voiced.sort_by(f64::total_cmp);
    let n = voiced.len();
    let median = if n % 2 == 1 {
        voiced[n / 2]
    } else {
        0.5 * (voiced[n / 2 - 1] + voiced[n / 2])
    };
    SegmentPitch::LogF0(median.ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchBin {
    pub lo: f64,
    pub hi: f64,
    pub total_f: u64,
    pub total_m: u64,
    pub err_f: u64,
    pub err_m: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slice {
    Lowest,
    Middle,
    Highest,
}

/// Accuracy on one pitch slice of one gender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileSlice {
    pub gender: Gender,
    pub slice: Slice,
    pub lo_log_f0: f64,
    pub hi_log_f0: f64,
    pub n: usize,
    pub accuracy: f64,
}

/// Fraction of each gender's segments in the lowest and highest slices.
pub const TAIL_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct PitchHistogram {
    pub bin_width: f64,
    pub bins: Vec<PitchBin>,
    /// Voiced samples counted in the bins.
    pub grand_total: u64,
    pub unvoiced: u64,
    pub slices: Vec<QuantileSlice>,
}

impl PitchHistogram {
    pub fn err_f_norm(&self, bin: &PitchBin) -> f64 {
        bin.err_f as f64 / self.grand_total.max(1) as f64
    }

    pub fn err_m_norm(&self, bin: &PitchBin) -> f64 {
        bin.err_m as f64 / self.grand_total.max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,total_f,total_m,err_f,err_m,err_f_norm,err_m_norm\n");
        for b in &self.bins {
            let _ = writeln!(
                out,
                "{:.6},{:.6},{},{},{},{},{:.6},{:.6}",
                b.lo,
                b.hi,
                b.total_f,
                b.total_m,
                b.err_f,
                b.err_m,
                self.err_f_norm(b),
                self.err_m_norm(b)
            );
        }
        out
    }

    pub fn quantile_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<7} {:<8} {:>9} {:>9} {:>7} {:>8}", "gender", "slice", "logf0_lo", "logf0_hi", "n", "acc(%)");
        for s in &self.slices {
            let _ = writeln!(
                out,
                "{:<7} {:<8} {:>9.3} {:>9.3} {:>7} {:>8.1}",
                s.gender.as_str(),
                format!("{:?}", s.slice).to_lowercase(),
                s.lo_log_f0,
                s.hi_log_f0,
                s.n,
                100.0 * s.accuracy
            );
        }
        let _ = writeln!(out, "unvoiced segments excluded: {}", self.unvoiced);
        out
    }
}

fn quantile_slices(results: &[(Gender, Gender, f64)]) -> Vec<QuantileSlice> {
    let mut out = Vec::new();
    for gender in [Gender::Female, Gender::Male] {
        let mut rows: Vec<(f64, bool)> = results
            .iter()
            .filter(|r| r.0 == gender)
            .map(|r| (r.2, r.0 == r.1))
            .collect();
        if rows.is_empty() {
            continue;
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = rows.len();
        let tail = ((TAIL_FRACTION * n as f64).round() as usize).clamp(1, n.div_ceil(2));
        let mut ranges = vec![(Slice::Lowest, 0, tail)];
        if n > 2 * tail {
            ranges.push((Slice::Middle, tail, n - tail));
        }
        if n > tail {
            ranges.push((Slice::Highest, (n - tail).max(tail), n));
        }
        for (slice, lo, hi) in ranges {
            let part = &rows[lo..hi];
            if part.is_empty() {
                continue;
            }
            out.push(QuantileSlice {
                gender,
                slice,
                lo_log_f0: part[0].0,
                hi_log_f0: part[part.len() - 1].0,
                n: part.len(),
                accuracy: part.iter().filter(|r| r.1).count() as f64 / part.len() as f64,
            });
        }
    }
    out
}

/// Per-bin totals and errors over natural-log F0 bins aligned on multiples of
/// `bin_width`, plus tail/middle accuracy slices per gender.
pub fn error_pitch_histogram(
    results: &[(Gender, Gender, SegmentPitch)],
    bin_width: f64,
) -> Result<PitchHistogram, PitchError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(PitchError::BadConfig("bin_width must be positive".into()));
    }
    let voiced: Vec<(Gender, Gender, f64)> = results
        .iter()
        .filter_map(|&(t, p, s)| s.log_f0().map(|v| (t, p, v)))
        .collect();
    let unvoiced = (results.len() - voiced.len()) as u64;
    let mut bins = Vec::new();
    if let (Some(lo), Some(hi)) = (
        voiced.iter().map(|r| r.2).min_by(f64::total_cmp),
        voiced.iter().map(|r| r.2).max_by(f64::total_cmp),
    ) {
        let k0 = (lo / bin_width).floor() as i64;
        let k1 = (hi / bin_width).floor() as i64;
        bins = (k0..=k1)
            .map(|k| PitchBin {
                lo: k as f64 * bin_width,
                hi: (k + 1) as f64 * bin_width,
                total_f: 0,
                total_m: 0,
                err_f: 0,
                err_m: 0,
            })
            .collect();
        for &(t, p, v) in &voiced {
            let i = (((v / bin_width).floor() as i64) - k0) as usize;
            let b = &mut bins[i];
            let wrong = (t != p) as u64;
            match t {
                Gender::Female => {
                    b.total_f += 1;
                    b.err_f += wrong;
                }
                Gender::Male => {
                    b.total_m += 1;
                    b.err_m += wrong;
                }
            }
        }
    }
    Ok(PitchHistogram {
        bin_width,
        bins,
        grand_total: voiced.len() as u64,
        unvoiced,
        slices: quantile_slices(&voiced),
    })
}
