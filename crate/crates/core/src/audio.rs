//! Audio buffers, PCM WAV I/O, synthetic voices and overlapped mixtures.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::frames::{frames_for_samples, FrameLabels, HOP_SAMPLES};
use crate::SAMPLE_RATE;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a RIFF/WAVE file: {0}")]
    NotWave(String),
    #[error("channels = {0}, only mono is accepted")]
    NotMono(u16),
    #[error("sample_rate = {0} Hz, only 16000 Hz is accepted")]
    BadSampleRate(u32),
    #[error("encoding format_tag = {format_tag}, bits_per_sample = {bits}: only 16-bit integer PCM is accepted")]
    BadEncoding { format_tag: u16, bits: u16 },
    #[error("truncated {field}: expected {expected} bytes, found {found}")]
    Truncated {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("audio buffer is empty")]
    Empty,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("f0 = {0} Hz outside the synthesizable range 50..=600 Hz")]
    OutOfRangePitch(f64),
    #[error("duration must be positive, got {0} s")]
    BadDuration(f64),
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("offset {offset_s} s is not inside the first source ({duration_s} s)")]
    OffsetBeyondFirstSource { offset_s: f64, duration_s: f64 },
    #[error("gain_db must be finite, got {0}")]
    BadGain(f64),
}

/// Mono PCM samples in [-1, 1] with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::BadSampleRate(0));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// `n` zero samples at 16 kHz.
    pub fn silence(n: usize) -> Self {
        Self {
            samples: vec![0.0; n],
            sample_rate: SAMPLE_RATE,
        }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Copy of samples `[start, end)`, clamped to the buffer.
    pub fn slice(&self, start: usize, end: usize) -> AudioBuffer {
        let end = end.min(self.samples.len());
        let start = start.min(end);
        AudioBuffer {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    /// Checks the pipeline preconditions: 16 kHz and at least one sample.
    pub fn ensure_pipeline_ready(&self) -> Result<(), AudioError> {
        if self.sample_rate != SAMPLE_RATE {
            return Err(AudioError::BadSampleRate(self.sample_rate));
        }
        if self.samples.is_empty() {
            return Err(AudioError::Empty);
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// WAV
// ---------------------------------------------------------------------------

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes a RIFF/WAVE byte stream holding 16-bit mono PCM at 16 kHz.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
    if bytes.len() < 12 {
        return Err(AudioError::Truncated {
            field: "RIFF header",
            expected: 12,
            found: bytes.len(),
        });
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotWave("missing RIFF/WAVE tags".into()));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        if id == b"fmt " {
            if size < 16 || body + 16 > bytes.len() {
                return Err(AudioError::Truncated {
                    field: "fmt chunk",
                    expected: 16,
                    found: bytes.len().saturating_sub(body).min(size),
                });
            }
            fmt = Some((
                le_u16(bytes, body),
                le_u16(bytes, body + 2),
                le_u32(bytes, body + 4),
                le_u16(bytes, body + 14),
            ));
        } else if id == b"data" {
            let (format_tag, channels, rate, bits) =
                fmt.ok_or_else(|| AudioError::NotWave("data chunk before fmt chunk".into()))?;
            if rate != SAMPLE_RATE {
                return Err(AudioError::BadSampleRate(rate));
            }
            if format_tag != 1 || bits != 16 {
                return Err(AudioError::BadEncoding { format_tag, bits });
            }
            if channels != 1 {
                return Err(AudioError::NotMono(channels));
            }
            let available = bytes.len() - body;
            if size > available || size % 2 != 0 {
                return Err(AudioError::Truncated {
                    field: "data chunk",
                    expected: size,
                    found: available,
                });
            }
            let samples = bytes[body..body + size]
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
                .collect();
            return AudioBuffer::new(samples, rate);
        }
        // Chunks are word aligned.
        pos = body + size + (size & 1);
    }
    Err(AudioError::NotWave(if fmt.is_some() {
        "no data chunk".into()
    } else {
        "no fmt chunk".into()
    }))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_wav(&bytes)
}

/// Quantizes one amplitude to 16-bit PCM (saturating).
pub fn quantize_pcm16(x: f32) -> i16 {
    (x as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Canonical 44-byte header followed by little-endian PCM-16.
pub fn encode_wav(audio: &AudioBuffer) -> Vec<u8> {
    let data_len = audio.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&audio.sample_rate.to_le_bytes());
    out.extend_from_slice(&(audio.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &audio.samples {
        out.extend_from_slice(&quantize_pcm16(s).to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<(), AudioError> {
    let path = path.as_ref();
    fs::write(path, encode_wav(audio)).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Synthetic voices
// ---------------------------------------------------------------------------

/// Lowest and highest fundamental accepted by [`synth_voice`].
pub const SYNTH_F0_RANGE: (f64, f64) = (50.0, 600.0);

const MODULATION_DEPTH: f64 = 0.03;

/// Harmonic tone standing in for a voiced speaker.
///
/// Fundamental plus harmonics 2..=5 at 1/k amplitude, with a seeded ±3 %
/// vibrato and ±3 % amplitude modulation, peak-normalized to 0.5.
pub fn synth_voice(f0_hz: f64, duration_s: f64, seed: u64) -> Result<AudioBuffer, AudioError> {
    if !(SYNTH_F0_RANGE.0..=SYNTH_F0_RANGE.1).contains(&f0_hz) {
        return Err(AudioError::OutOfRangePitch(f0_hz));
    }
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(AudioError::BadDuration(duration_s));
    }
    let rate = SAMPLE_RATE as f64;
    let n = ((duration_s * rate).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vib_rate = rng.random_range(4.0..7.0);
    let vib_phase = rng.random_range(0.0..2.0 * PI);
    let am_rate = rng.random_range(2.0..5.0);
    let am_phase = rng.random_range(0.0..2.0 * PI);

    let mut phase = 0.0f64;
    let mut raw = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / rate;
        let f = f0_hz * (1.0 + MODULATION_DEPTH * (2.0 * PI * vib_rate * t + vib_phase).sin());
        let env = 1.0 + MODULATION_DEPTH * (2.0 * PI * am_rate * t + am_phase).sin();
        let s: f64 = (1..=5).map(|k| (k as f64 * phase).sin() / k as f64).sum();
        raw.push(env * s);
        phase = (phase + 2.0 * PI * f / rate) % (2.0 * PI);
    }
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 0.5 / peak } else { 0.0 };
    AudioBuffer::new(raw.into_iter().map(|v| (v * scale) as f32).collect(), SAMPLE_RATE)
}

/// Seeded white noise with the given peak amplitude.
pub fn white_noise(n: usize, amplitude: f32, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect();
    AudioBuffer {
        samples,
        sample_rate: SAMPLE_RATE,
    }
}

// ---------------------------------------------------------------------------
// Mixtures
// ---------------------------------------------------------------------------

/// How overlap labels are derived for a mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// Frames whose center lies inside both sources' active spans.
    Span,
    /// Frames where both sources' 30 ms RMS exceeds the silence floor.
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixSpec {
    pub offset_s: f64,
    /// Gain applied to the second source.
    pub gain_db: f64,
    pub label_mode: LabelMode,
    /// Only used by [`LabelMode::Energy`].
    pub silence_floor_dbfs: f64,
}

impl Default for MixSpec {
    fn default() -> Self {
        Self {
            offset_s: 0.0,
            gain_db: 0.0,
            label_mode: LabelMode::Span,
            silence_floor_dbfs: -40.0,
        }
    }
}

impl MixSpec {
    pub fn at(offset_s: f64) -> Self {
        Self {
            offset_s,
            ..Self::default()
        }
    }
}

/// Output of [`mix_overlap`].
#[derive(Debug, Clone)]
pub struct Mixture {
    pub audio: AudioBuffer,
    pub labels: FrameLabels,
    /// Samples saturated to ±1.
    pub clipped_samples: usize,
}

impl Mixture {
    pub fn clip_fraction(&self) -> f64 {
        self.clipped_samples as f64 / self.audio.len().max(1) as f64
    }
}

fn check_mix(a: &AudioBuffer, b: &AudioBuffer, spec: &MixSpec) -> Result<usize, AudioError> {
    if a.sample_rate != b.sample_rate {
        return Err(AudioError::RateMismatch(a.sample_rate, b.sample_rate));
    }
    if a.is_empty() || b.is_empty() {
        return Err(AudioError::Empty);
    }
    if !spec.gain_db.is_finite() {
        return Err(AudioError::BadGain(spec.gain_db));
    }
    let offset = (spec.offset_s * a.sample_rate as f64).round();
    if !(spec.offset_s >= 0.0) || offset >= a.len() as f64 {
        return Err(AudioError::OffsetBeyondFirstSource {
            offset_s: spec.offset_s,
            duration_s: a.duration_s(),
        });
    }
    Ok(offset as usize)
}

/// Sample-wise sum of `a` and the shifted, gain-scaled `b`, before clipping.
pub fn mix_unclipped(a: &AudioBuffer, b: &AudioBuffer, spec: &MixSpec) -> Result<Vec<f32>, AudioError> {
    let offset = check_mix(a, b, spec)?;
    let gain = 10f64.powf(spec.gain_db / 20.0) as f32;
    let len = a.len().max(offset + b.len());
    let mut out = vec![0.0f32; len];
    out[..a.len()].copy_from_slice(&a.samples);
    for (o, &s) in out[offset..].iter_mut().zip(&b.samples) {
        *o += gain * s;
    }
    Ok(out)
}

/// Index range `[first, last + 1)` of nonzero samples, if any.
fn active_span(samples: &[f32]) -> Option<(usize, usize)> {
    let first = samples.iter().position(|&s| s != 0.0)?;
    let last = samples.iter().rposition(|&s| s != 0.0)?;
    Some((first, last + 1))
}

fn window_rms_dbfs(samples: &[f32], center: usize, half: usize) -> f64 {
    let lo = center.saturating_sub(half).min(samples.len());
    let hi = (center + half).min(samples.len());
    if hi <= lo {
        return f64::NEG_INFINITY;
    }
    let energy: f64 = samples[lo..hi].iter().map(|&s| (s as f64).powi(2)).sum();
    let rms = (energy / (hi - lo) as f64).sqrt();
    20.0 * rms.log10()
}

/// Sums two sources into one overlapped mixture with 10 ms overlap labels.
pub fn mix_overlap(a: &AudioBuffer, b: &AudioBuffer, spec: &MixSpec) -> Result<Mixture, AudioError> {
    let mut samples = mix_unclipped(a, b, spec)?;
    let offset = check_mix(a, b, spec)?;
    let mut clipped_samples = 0;
    for s in &mut samples {
        if s.abs() > 1.0 {
            *s = s.clamp(-1.0, 1.0);
            clipped_samples += 1;
        }
    }
    let n_frames = frames_for_samples(samples.len());
    let hop = HOP_SAMPLES as f64;
    let labels: Vec<bool> = match spec.label_mode {
        LabelMode::Span => {
            let span_a = active_span(&a.samples);
            let span_b = active_span(&b.samples).map(|(s, e)| (s + offset, e + offset));
            (0..n_frames)
                .map(|i| {
                    let c = (i as f64 + 0.5) * hop;
                    let inside = |span: Option<(usize, usize)>| {
                        span.is_some_and(|(s, e)| c >= s as f64 && c < e as f64)
                    };
                    inside(span_a) && inside(span_b)
                })
                .collect()
        }
        LabelMode::Energy => {
            let gain = 10f64.powf(spec.gain_db / 20.0) as f32;
            let mut placed_b = vec![0.0f32; samples.len()];
            for (o, &s) in placed_b[offset..].iter_mut().zip(&b.samples) {
                *o = gain * s;
            }
            let half = 3 * HOP_SAMPLES / 2;
            (0..n_frames)
                .map(|i| {
                    let c = i * HOP_SAMPLES + HOP_SAMPLES / 2;
                    window_rms_dbfs(&a.samples, c, half) > spec.silence_floor_dbfs
                        && window_rms_dbfs(&placed_b, c, half) > spec.silence_floor_dbfs
                })
                .collect()
        }
    };
    Ok(Mixture {
        audio: AudioBuffer::new(samples, a.sample_rate)?,
        labels: FrameLabels::binary_from_bools(labels).expect("at least one frame"),
        clipped_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn voice(f0: f64, d: f64, seed: u64) -> AudioBuffer {
        synth_voice(f0, d, seed).unwrap()
    }

    #[test]
    fn silence_round_trips_as_zeros() {
        let bytes = encode_wav(&AudioBuffer::silence(16_000));
        assert_eq!(bytes.len(), 44 + 32_000);
        let back = decode_wav(&bytes).unwrap();
        assert_eq!(back.len(), 16_000);
        assert!(back.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn reencoding_is_byte_identical() {
        let bytes = encode_wav(&voice(180.0, 0.3, 3));
        let again = encode_wav(&decode_wav(&bytes).unwrap());
        assert_eq!(bytes, again);
    }

    fn header(rate: u32, channels: u16, format: u16, bits: u16, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&format.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * channels as u32 * bits as u32 / 8).to_le_bytes());
        out.extend_from_slice(&(channels * bits / 8).to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn header_violations_name_the_field() {
        let cd = header(44_100, 2, 1, 16, &[0; 8]);
        assert!(matches!(decode_wav(&cd), Err(AudioError::BadSampleRate(44_100))));
        let stereo = header(16_000, 2, 1, 16, &[0; 8]);
        assert!(matches!(decode_wav(&stereo), Err(AudioError::NotMono(2))));
        let float = header(16_000, 1, 3, 32, &[0; 8]);
        assert!(matches!(
            decode_wav(&float),
            Err(AudioError::BadEncoding { format_tag: 3, bits: 32 })
        ));
        let mut cut = header(16_000, 1, 1, 16, &[0; 8]);
        cut.truncate(cut.len() - 3);
        assert!(matches!(
            decode_wav(&cut),
            Err(AudioError::Truncated { field: "data chunk", .. })
        ));
        assert!(matches!(decode_wav(b"RIFX"), Err(AudioError::Truncated { .. })));
        assert!(matches!(
            decode_wav(b"RIFF\0\0\0\0WAVX"),
            Err(AudioError::NotWave(_))
        ));
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut bytes = header(16_000, 1, 1, 16, &[1, 0, 2, 0]);
        // Splice a LIST chunk with odd size (padded) before "data".
        let list = b"LIST\x03\x00\x00\x00abc\x00";
        bytes.splice(36..36, list.iter().copied());
        let a = decode_wav(&bytes).unwrap();
        assert_eq!(a.samples(), &[1.0 / 32768.0, 2.0 / 32768.0]);
    }

    #[test]
    fn synth_voice_is_deterministic_and_bounded() {
        let a = voice(220.0, 1.0, 7);
        let b = voice(220.0, 1.0, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 16_000);
        let peak = a.samples().iter().fold(0.0f32, |m, v| m.max(v.abs()));
        assert!((peak - 0.5).abs() < 1e-6);
        assert_ne!(a, voice(220.0, 1.0, 8));
    }

    #[test]
    fn synth_voice_rejects_out_of_range_pitch() {
        assert!(matches!(synth_voice(30.0, 1.0, 0), Err(AudioError::OutOfRangePitch(_))));
        assert!(matches!(synth_voice(601.0, 1.0, 0), Err(AudioError::OutOfRangePitch(_))));
        assert!(matches!(synth_voice(100.0, 0.0, 0), Err(AudioError::BadDuration(_))));
    }

    #[test]
    fn mixing_with_silence_is_identity() {
        let a = voice(200.0, 2.0, 1);
        for spec in [
            MixSpec::at(0.3),
            MixSpec {
                label_mode: LabelMode::Energy,
                gain_db: 6.0,
                ..MixSpec::at(1.0)
            },
        ] {
            let m = mix_overlap(&a, &AudioBuffer::silence(8_000), &spec).unwrap();
            assert_eq!(m.audio, a);
            assert_eq!(m.labels.count(1), 0);
            assert_eq!(m.clipped_samples, 0);
        }
    }

    #[test]
    fn span_labels_cover_the_hand_computed_intersection() {
        let a = voice(200.0, 2.0, 1);
        let b = voice(120.0, 1.0, 2);
        let m = mix_overlap(&a, &b, &MixSpec::at(0.5)).unwrap();
        assert_eq!(m.labels.len(), 200);
        let ones: Vec<usize> = (0..200).filter(|&i| m.labels.values()[i] == 1).collect();
        assert_eq!(ones, (50..150).collect::<Vec<_>>());
    }

    #[test]
    fn full_overlap_labels_every_frame() {
        let a = voice(200.0, 2.0, 1);
        let b = voice(120.0, 2.0, 2);
        let m = mix_overlap(&a, &b, &MixSpec::at(0.0)).unwrap();
        assert_eq!(m.labels.count(1), 200);
        let e = mix_overlap(
            &a,
            &b,
            &MixSpec {
                label_mode: LabelMode::Energy,
                ..MixSpec::default()
            },
        )
        .unwrap();
        assert_eq!(e.labels.count(1), 200);
    }

    #[test]
    fn output_length_and_clipping() {
        let a = voice(200.0, 1.0, 1);
        let b = voice(120.0, 1.0, 2);
        let m = mix_overlap(
            &a,
            &b,
            &MixSpec {
                gain_db: 20.0,
                ..MixSpec::at(0.5)
            },
        )
        .unwrap();
        assert_eq!(m.audio.len(), 24_000);
        assert!(m.clipped_samples > 0);
        assert!(m.clip_fraction() > 0.0 && m.clip_fraction() < 1.0);
        assert!(m.audio.samples().iter().all(|s| s.abs() <= 1.0));
    }

    #[test]
    fn mix_errors() {
        let a = voice(200.0, 1.0, 1);
        let b = AudioBuffer::new(vec![0.1; 10], 8_000).unwrap();
        assert!(matches!(
            mix_overlap(&a, &b, &MixSpec::default()),
            Err(AudioError::RateMismatch(16_000, 8_000))
        ));
        assert!(matches!(
            mix_overlap(&a, &a, &MixSpec::at(1.0)),
            Err(AudioError::OffsetBeyondFirstSource { .. })
        ));
        assert!(matches!(
            mix_overlap(&a, &a, &MixSpec::at(-0.1)),
            Err(AudioError::OffsetBeyondFirstSource { .. })
        ));
    }

    #[test]
    fn energy_mode_ignores_quiet_second_source() {
        let a = voice(200.0, 1.0, 1);
        let b = voice(120.0, 1.0, 2);
        let spec = MixSpec {
            label_mode: LabelMode::Energy,
            gain_db: -60.0,
            ..MixSpec::default()
        };
        assert_eq!(mix_overlap(&a, &b, &spec).unwrap().labels.count(1), 0);
    }
}
