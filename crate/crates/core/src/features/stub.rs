use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{extract_mfcc, FeatureError, FeatureMatrix, FeatureSource, MfccConfig, MFCC_DIM};
use crate::audio::AudioBuffer;
use crate::neural::tensor::{gemm, Op};

/// Deterministic stand-in for pretrained embeddings: a seeded Gaussian random
/// projection of each MFCC frame followed by `asinh`.
///
/// `asinh` is injective, so the embedding keeps everything the MFCC frame
/// carries while compressing its dynamic range.
#[derive(Debug, Clone)]
pub struct StubProjector {
    dim: usize,
    weights: Vec<f32>,
}

impl StubProjector {
    pub fn new(dim: usize, seed: u64) -> Result<Self, FeatureError> {
        if dim != 768 && dim != 1024 {
            return Err(FeatureError::BadStubDim(dim));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (MFCC_DIM as f32).sqrt();
        let weights = (0..dim * MFCC_DIM)
            .map(|_| {
                let z: f32 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Ok(Self { dim, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Projects a 59-dimensional MFCC matrix.
    pub fn project(&self, mfcc: &FeatureMatrix) -> FeatureMatrix {
        assert_eq!(mfcc.dim(), MFCC_DIM, "stub projection expects MFCC input");
        let mut data = vec![0.0f32; mfcc.n_frames() * self.dim];
        gemm(Op::N, Op::T, mfcc.n_frames(), self.dim, MFCC_DIM, mfcc.data(), &self.weights, 0.0, &mut data);
        for v in &mut data {
            *v = v.asinh();
        }
        FeatureMatrix::from_parts_unchecked(data, self.dim, mfcc.hop_ms(), FeatureSource::Stub)
    }
}

/// Stub embeddings of `dim` ∈ {768, 1024} per 10 ms frame.
pub fn stub_features(audio: &AudioBuffer, dim: usize, seed: u64) -> Result<FeatureMatrix, FeatureError> {
    let projector = StubProjector::new(dim, seed)?;
    let mfcc = extract_mfcc(audio, &MfccConfig::default())?;
    Ok(projector.project(&mfcc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::synth_voice;

    #[test]
    fn shape_determinism_and_seed_sensitivity() {
        let a = synth_voice(210.0, 2.0, 4).unwrap();
        let x = stub_features(&a, 1024, 1).unwrap();
        assert_eq!((x.n_frames(), x.dim()), (200, 1024));
        assert_eq!(x.source(), FeatureSource::Stub);
        assert_eq!(x, stub_features(&a, 1024, 1).unwrap());
        let y = stub_features(&a, 1024, 2).unwrap();
        let differing = x.data().iter().zip(y.data()).filter(|(p, q)| p != q).count();
        assert!(differing as f64 >= 0.99 * x.data().len() as f64);
    }

    #[test]
    fn rejects_unsupported_dims() {
        assert!(matches!(StubProjector::new(512, 0), Err(FeatureError::BadStubDim(512))));
        assert_eq!(StubProjector::new(768, 0).unwrap().dim(), 768);
    }
}
