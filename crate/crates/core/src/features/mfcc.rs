use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{FeatureError, FeatureMatrix, FeatureSource};
use crate::audio::AudioBuffer;
use crate::SAMPLE_RATE;

/// Width of the MFCC stack: 19 statics (c0 dropped), 20 deltas, 20 delta-deltas.
pub const MFCC_DIM: usize = 59;

const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub n_ceps: usize,
    pub window_ms: u32,
    pub hop_ms: u32,
    pub n_mels: usize,
    pub fft_size: usize,
    pub preemphasis: f64,
    pub delta_width: usize,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            n_ceps: 20,
            window_ms: 30,
            hop_ms: 10,
            n_mels: 26,
            fft_size: 512,
            preemphasis: 0.97,
            delta_width: 2,
        }
    }
}

impl MfccConfig {
    pub fn window_samples(&self) -> usize {
        (SAMPLE_RATE * self.window_ms / 1000) as usize
    }

    pub fn hop_samples(&self) -> usize {
        (SAMPLE_RATE * self.hop_ms / 1000) as usize
    }

    /// Output width: statics without c0, plus deltas and delta-deltas of c0..c{n-1}.
    pub fn output_dim(&self) -> usize {
        3 * self.n_ceps - 1
    }

    fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: &str| Err(FeatureError::BadConfig(m.to_string()));
        if self.fft_size < self.window_samples() {
            return bad("fft_size must cover the analysis window");
        }
        if self.n_ceps == 0 || self.n_ceps > self.n_mels {
            return bad("need 1 <= n_ceps <= n_mels");
        }
        if self.hop_ms != 10 && self.hop_ms != 20 {
            return bad("hop_ms must be 10 or 20");
        }
        if self.delta_width == 0 {
            return bad("delta_width must be positive");
        }
        Ok(())
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters over FFT bins `0..=fft_size/2`, spanning 0 Hz to Nyquist.
fn mel_filterbank(n_mels: usize, fft_size: usize, sample_rate: f64) -> Vec<Vec<f64>> {
    let n_bins = fft_size / 2 + 1;
    let top = hz_to_mel(sample_rate / 2.0);
    let edges: Vec<usize> = (0..n_mels + 2)
        .map(|i| {
            let hz = mel_to_hz(top * i as f64 / (n_mels + 1) as f64);
            (((fft_size + 1) as f64 * hz / sample_rate).floor() as usize).min(n_bins - 1)
        })
        .collect();
    (1..=n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m - 1], edges[m], edges[m + 1]);
            let mut w = vec![0.0; n_bins];
            for (k, wk) in w.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *wk = if k < mid {
                    (k - lo) as f64 / (mid - lo) as f64
                } else if hi > mid {
                    (hi - k) as f64 / (hi - mid) as f64
                } else {
                    1.0
                };
            }
            w
        })
        .collect()
}

fn dct_matrix(n_out: usize, n_in: usize) -> Vec<Vec<f64>> {
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n_in as f64).sqrt()
            } else {
                (2.0 / n_in as f64).sqrt()
            };
            (0..n_in)
                .map(|n| scale * (PI * k as f64 * (2 * n + 1) as f64 / (2 * n_in) as f64).cos())
                .collect()
        })
        .collect()
}

/// Regression deltas over ±`width` frames with edge clamping.
pub(crate) fn deltas(rows: &[Vec<f64>], width: usize) -> Vec<Vec<f64>> {
    let n = rows.len();
    let dim = rows.first().map_or(0, Vec::len);
    let denom: f64 = 2.0 * (1..=width).map(|k| (k * k) as f64).sum::<f64>();
    (0..n)
        .map(|t| {
            (0..dim)
                .map(|d| {
                    (1..=width)
                        .map(|k| {
                            let ahead = rows[(t + k).min(n - 1)][d];
                            let behind = rows[t.saturating_sub(k)][d];
                            k as f64 * (ahead - behind)
                        })
                        .sum::<f64>()
                        / denom
                })
                .collect()
        })
        .collect()
}

/// Cepstra c0..c{n_ceps-1} of every complete analysis frame, without padding.
pub(crate) fn cepstra(audio: &AudioBuffer, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>, FeatureError> {
    audio.ensure_pipeline_ready()?;
    cfg.validate()?;
    let win = cfg.window_samples();
    let hop = cfg.hop_samples();
    let x = audio.samples();
    if x.len() < win {
        return Err(FeatureError::TooShort {
            samples: x.len(),
            window: win,
        });
    }
    let mut emph = Vec::with_capacity(x.len());
    emph.push(x[0] as f64);
    for i in 1..x.len() {
        emph.push(x[i] as f64 - cfg.preemphasis * x[i - 1] as f64);
    }
    let hamming: Vec<f64> = (0..win)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (win - 1) as f64).cos())
        .collect();
    let filters = mel_filterbank(cfg.n_mels, cfg.fft_size, SAMPLE_RATE as f64);
    let dct = dct_matrix(cfg.n_ceps, cfg.n_mels);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(cfg.fft_size);

    let n_frames = 1 + (x.len() - win) / hop;
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    let mut mag = vec![0.0; cfg.fft_size / 2 + 1];
    let mut out = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let frame = &emph[f * hop..f * hop + win];
        for (b, (s, w)) in buf.iter_mut().zip(frame.iter().zip(&hamming)) {
            *b = Complex::new(s * w, 0.0);
        }
        buf[win..].fill(Complex::new(0.0, 0.0));
        fft.process(&mut buf);
        for (m, b) in mag.iter_mut().zip(&buf) {
            *m = b.norm();
        }
        let log_mel: Vec<f64> = filters
            .iter()
            .map(|w| w.iter().zip(&mag).map(|(a, b)| a * b).sum::<f64>().max(LOG_FLOOR).ln())
            .collect();
        out.push(
            dct.iter()
                .map(|row| row.iter().zip(&log_mel).map(|(a, b)| a * b).sum())
                .collect(),
        );
    }
    Ok(out)
}

/// Stacks statics (without c0), deltas and delta-deltas into one row per frame.
pub(crate) fn stack(ceps: &[Vec<f64>], width: usize) -> Vec<f32> {
    let d1 = deltas(ceps, width);
    let d2 = deltas(&d1, width);
    let mut data = Vec::with_capacity(ceps.len() * (3 * ceps[0].len() - 1));
    for t in 0..ceps.len() {
        data.extend(ceps[t][1..].iter().map(|&v| v as f32));
        data.extend(d1[t].iter().map(|&v| v as f32));
        data.extend(d2[t].iter().map(|&v| v as f32));
    }
    data
}

/// 59-dimensional MFCC stack on the 10 ms raster.
///
/// Frames are analysed with a 30 ms Hamming window, then right-padded by edge
/// repetition to `len / hop` frames so they align one-to-one with frame labels.
pub fn extract_mfcc(audio: &AudioBuffer, cfg: &MfccConfig) -> Result<FeatureMatrix, FeatureError> {
    let mut ceps = cepstra(audio, cfg)?;
    let target = audio.len() / cfg.hop_samples();
    if let Some(last) = ceps.last().cloned() {
        while ceps.len() < target {
            ceps.push(last.clone());
        }
    }
    let dim = cfg.output_dim();
    Ok(FeatureMatrix::from_parts_unchecked(
        stack(&ceps, cfg.delta_width),
        dim,
        cfg.hop_ms,
        FeatureSource::Mfcc,
    ))
}
