//! The 10 ms frame raster shared by labels, features and scores.

use thiserror::Error;

/// Frames per second of every label and score sequence.
pub const FRAME_RATE: u32 = 100;

/// Samples per 10 ms frame at 16 kHz.
pub const HOP_SAMPLES: usize = 160;

/// Number of whole 10 ms frames covering `n_samples` at 16 kHz (at least one).
pub fn frames_for_samples(n_samples: usize) -> usize {
    (n_samples / HOP_SAMPLES).max(1)
}

/// Number of whole 10 ms frames in `duration_s` seconds.
pub fn frames_for_duration(duration_s: f64) -> usize {
    // The small bias keeps e.g. 2.0 s from landing on 199.99999 frames.
    ((duration_s * FRAME_RATE as f64) + 1e-6).floor().max(0.0) as usize
}

/// Center time of frame `i` in seconds.
pub fn frame_center(i: usize) -> f64 {
    (i as f64 + 0.5) / FRAME_RATE as f64
}

/// Start time of frame `i` in seconds.
pub fn frame_time(i: usize) -> f64 {
    i as f64 / FRAME_RATE as f64
}

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("label sequence must hold at least one frame")]
    Empty,
    #[error("label value {value} at frame {index} is outside the {alphabet:?} alphabet")]
    BadSymbol {
        index: usize,
        value: u8,
        alphabet: Alphabet,
    },
    #[error("score track columns differ in length ({expected} vs {found})")]
    RaggedTrack { expected: usize, found: usize },
}

/// Symbol sets used on the frame raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alphabet {
    /// 0 = no overlap, 1 = overlapped speech.
    Binary,
    /// See [`GenderSymbol`].
    Gender,
}

impl Alphabet {
    pub fn size(self) -> u8 {
        match self {
            Alphabet::Binary => 2,
            Alphabet::Gender => 4,
        }
    }
}

/// Symbols of the gender raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum GenderSymbol {
    Silence = 0,
    Female = 1,
    Male = 2,
    Both = 3,
}

impl GenderSymbol {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Self::Silence),
            1 => Some(Self::Female),
            2 => Some(Self::Male),
            3 => Some(Self::Both),
            _ => None,
        }
    }
}

/// Per-frame symbolic labels at 100 frames/s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLabels {
    alphabet: Alphabet,
    values: Vec<u8>,
}

impl FrameLabels {
    pub fn new(alphabet: Alphabet, values: Vec<u8>) -> Result<Self, FrameError> {
        if values.is_empty() {
            return Err(FrameError::Empty);
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| v >= alphabet.size())
        {
            return Err(FrameError::BadSymbol {
                index,
                value,
                alphabet,
            });
        }
        Ok(Self { alphabet, values })
    }

    /// Binary labels; any nonzero input value becomes 1.
    pub fn binary_from_bools(values: impl IntoIterator<Item = bool>) -> Result<Self, FrameError> {
        Self::new(Alphabet::Binary, values.into_iter().map(u8::from).collect())
    }

    pub fn zeros(alphabet: Alphabet, n: usize) -> Result<Self, FrameError> {
        Self::new(alphabet, vec![0; n])
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn rate(&self) -> u32 {
        FRAME_RATE
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    /// Number of frames carrying `symbol`.
    pub fn count(&self, symbol: u8) -> usize {
        self.values.iter().filter(|&&v| v == symbol).count()
    }

    /// Maximal runs of 1s as `(first_frame, end_frame_exclusive)`.
    pub fn runs_of_ones(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &v) in self.values.iter().enumerate() {
            match (v == 1, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push((s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((s, self.values.len()));
        }
        runs
    }
}

/// Real-valued per-frame scores for one or more named categories.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrack {
    times_s: Vec<f64>,
    categories: Vec<String>,
    scores: Vec<Vec<f32>>,
}

impl ScoreTrack {
    /// Builds a track whose frame `k` sits at `first_time_s + k * 10 ms`.
    pub fn new(
        first_time_s: f64,
        categories: Vec<String>,
        scores: Vec<Vec<f32>>,
    ) -> Result<Self, FrameError> {
        let n = scores.first().map(Vec::len).unwrap_or(0);
        for col in &scores {
            if col.len() != n {
                return Err(FrameError::RaggedTrack {
                    expected: n,
                    found: col.len(),
                });
            }
        }
        let step = 1.0 / FRAME_RATE as f64;
        let times_s = (0..n).map(|k| first_time_s + k as f64 * step).collect();
        Ok(Self {
            times_s,
            categories,
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    pub fn times_s(&self) -> &[f64] {
        &self.times_s
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// Scores of the named category.
    pub fn category(&self, name: &str) -> Option<&[f32]> {
        self.categories
            .iter()
            .position(|c| c == name)
            .map(|i| self.scores[i].as_slice())
    }

    pub fn column(&self, i: usize) -> &[f32] {
        &self.scores[i]
    }
}
