//! Shared fixtures for the integration targets.

#![allow(dead_code)]

use osdgd::features::{FeatureMatrix, FeatureSource};
use osdgd::neural::{grad_check, Arch, GdHead, GdHyper, Hyper, LossKind, RosdHyper, SequenceModel, Target, TcnHyper};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-3;
/// Smooth models tolerate a wide stencil, which keeps roundoff small on
/// near-zero gradients.
const EPS_SMOOTH: f64 = 1e-4;
/// PReLU kinks need a narrow stencil so perturbations rarely cross them.
const EPS_KINKED: f64 = 1e-6;

pub fn random_features(rng: &mut ChaCha8Rng, frames: usize, dim: usize) -> FeatureMatrix {
    let data = (0..frames * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    FeatureMatrix::new(data, dim, 10, FeatureSource::External).unwrap()
}

pub fn frame_batch(seed: u64, dim: usize, n_out: usize) -> Vec<(FeatureMatrix, Target)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..2)
        .map(|k| {
            let frames = 6 + k;
            let f = random_features(&mut rng, frames, dim);
            let labels = (0..frames).map(|_| rng.random_range(0..n_out as u8)).collect();
            let mask = (0..frames).map(|i| i != 1).collect();
            (f, Target::Frames { labels, mask })
        })
        .collect()
}

pub fn class_batch(seed: u64, dim: usize, n_out: usize) -> Vec<(FeatureMatrix, Target)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc1a55);
    (0..2)
        .map(|_| (random_features(&mut rng, 5, dim), Target::Class(rng.random_range(0..n_out))))
        .collect()
}

pub fn value_batch(seed: u64, dim: usize, n_out: usize) -> Vec<(FeatureMatrix, Target)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a1);
    (0..2)
        .map(|_| {
            let v = (0..n_out).map(|_| rng.random_range(0.0f32..1.0)).collect();
            (random_features(&mut rng, 5, dim), Target::Values(v))
        })
        .collect()
}

/// Worst relative gradient error over 5 seeds and every applicable loss.
pub fn max_grad_error(hyper: Hyper) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let model = SequenceModel::new(hyper, seed);
        let (dim, n_out) = (hyper.input_dim(), hyper.n_out());
        let cases = [
            ("frame-ce", frame_batch(seed, dim, n_out), LossKind::CrossEntropy),
            ("segment-ce", class_batch(seed, dim, n_out), LossKind::CrossEntropy),
            ("rmse", value_batch(seed, dim, n_out), LossKind::Rmse),
        ];
        for (loss_name, batch, loss) in cases {
            if n_out == 1 && loss == LossKind::CrossEntropy {
                continue;
            }
            let eps = if hyper.arch() == Arch::Tcn { EPS_KINKED } else { EPS_SMOOTH };
            let err = grad_check(&model, &batch, loss, eps).unwrap();
            assert!(err.is_finite(), "seed {seed} / {loss_name}: non-finite error");
            worst = worst.max(err);
        }
    }
    worst
}

pub fn check_all_losses(name: &str, hyper: Hyper) {
    let err = max_grad_error(hyper);
    assert!(err <= TOL, "{name}: max relative error {err:e}");
}

/// The layer and model configurations covered by the gradient suite.
pub fn gradient_cases() -> Vec<(&'static str, Hyper)> {
    vec![
        ("linear", rosd(0, 0)),
        ("linear+tanh", rosd(0, 2)),
        ("lstm", Hyper::Gd(GdHyper { input_dim: 4, hidden: 3, head: GdHead::TwoWay })),
        ("bilstm", rosd(1, 0)),
        ("tcn 1x1", tiny_tcn(1, 1)),
        ("tcn 1x2", tiny_tcn(1, 2)),
        ("rosd", rosd(2, 2)),
        ("tcn", tiny_tcn(2, 3)),
        ("gd two-way", Hyper::Gd(GdHyper { input_dim: 6, hidden: 4, head: GdHead::TwoWay })),
        ("gd scalar", Hyper::Gd(GdHyper { input_dim: 6, hidden: 4, head: GdHead::Scalar })),
    ]
}

pub fn rosd(lstm_layers: usize, linear_layers: usize) -> Hyper {
    Hyper::Rosd(RosdHyper {
        input_dim: 4,
        lstm_hidden: 3,
        lstm_layers,
        linear_hidden: 5,
        linear_layers,
        n_out: 2,
    })
}

pub fn tiny_tcn(repeats: usize, blocks: usize) -> Hyper {
    Hyper::Tcn(TcnHyper {
        input_dim: 5,
        bottleneck: 4,
        hidden: 8,
        repeats,
        blocks,
        n_out: 2,
    })
}

