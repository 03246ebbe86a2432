use super::tensor::{Mat, Scalar};
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    Rmse,
}

/// Supervision for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// One class index per frame; frames with `mask == false` are not scored.
    Frames { labels: Vec<u8>, mask: Vec<bool> },
    /// One class for the whole sequence, scored on frame outputs summed over time.
    Class(usize),
    /// Real targets for the frame outputs summed over time, one per output.
    Values(Vec<f32>),
}

impl Target {
    /// Every frame scored.
    pub fn frames(labels: Vec<u8>) -> Self {
        let mask = vec![true; labels.len()];
        Target::Frames { labels, mask }
    }
}

fn softmax<S: Scalar>(z: &[S]) -> Vec<S> {
    let max = z.iter().copied().fold(S::neg_infinity(), S::max);
    let e: Vec<S> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: S = e.iter().copied().sum();
    e.into_iter().map(|v| v / sum).collect()
}

/// Softmax of one row (numerically stabilized).
pub fn softmax_row(z: &[f32]) -> Vec<f32> {
    softmax(z)
}

fn column_sums<S: Scalar>(y: &Mat<S>) -> Vec<S> {
    let mut s = vec![S::zero(); y.cols];
    for r in 0..y.rows {
        for (a, &v) in s.iter_mut().zip(y.row(r)) {
            *a += v;
        }
    }
    s
}

/// Batch loss and its gradient with respect to every output matrix.
///
/// Frame cross-entropy averages over all scored frames in the batch; segment
/// cross-entropy averages over sequences; RMSE is taken over all
/// `(sequence, output)` residuals of the batch.
pub(crate) fn batch_loss<S: Scalar>(
    kind: LossKind,
    outputs: &[Mat<S>],
    targets: &[&Target],
) -> Result<(S, Vec<Mat<S>>), NeuralError> {
    let mut grads: Vec<Mat<S>> = outputs.iter().map(|y| Mat::zeros(y.rows, y.cols)).collect();
    match kind {
        LossKind::CrossEntropy => {
            let mut scored = 0usize;
            for (y, t) in outputs.iter().zip(targets) {
                match t {
                    Target::Frames { labels, mask } => {
                        if labels.len() != y.rows || mask.len() != y.rows {
                            return Err(NeuralError::TargetMismatch(format!(
                                "{} frame labels for {} output frames",
                                labels.len(),
                                y.rows
                            )));
                        }
                        scored += mask.iter().filter(|&&m| m).count();
                    }
                    Target::Class(_) => {}
                    Target::Values(_) => {
                        return Err(NeuralError::TargetMismatch(
                            "cross-entropy needs class targets".into(),
                        ))
                    }
                }
            }
            let n_seg = targets.iter().filter(|t| matches!(t, Target::Class(_))).count();
            let mut loss = S::zero();
            for ((y, t), g) in outputs.iter().zip(targets).zip(grads.iter_mut()) {
                match t {
                    Target::Frames { labels, mask } => {
                        let norm = S::from(scored.max(1)).unwrap();
                        for r in 0..y.rows {
                            if !mask[r] {
                                continue;
                            }
                            let c = labels[r] as usize;
                            if c >= y.cols {
                                return Err(NeuralError::TargetMismatch(format!(
                                    "label {c} with {} outputs",
                                    y.cols
                                )));
                            }
                            let p = softmax(y.row(r));
                            loss -= p[c].max(S::min_positive_value()).ln() / norm;
                            for (k, gk) in g.row_mut(r).iter_mut().enumerate() {
                                let onehot = if k == c { S::one() } else { S::zero() };
                                *gk = (p[k] - onehot) / norm;
                            }
                        }
                    }
                    Target::Class(c) => {
                        let c = *c;
                        if c >= y.cols {
                            return Err(NeuralError::TargetMismatch(format!(
                                "class {c} with {} outputs",
                                y.cols
                            )));
                        }
                        let norm = S::from(n_seg).unwrap();
                        let p = softmax(&column_sums(y));
                        loss -= p[c].max(S::min_positive_value()).ln() / norm;
                        let d: Vec<S> = (0..y.cols)
                            .map(|k| (p[k] - if k == c { S::one() } else { S::zero() }) / norm)
                            .collect();
                        for r in 0..y.rows {
                            g.row_mut(r).copy_from_slice(&d);
                        }
                    }
                    Target::Values(_) => unreachable!(),
                }
            }
            Ok((loss, grads))
        }
        LossKind::Rmse => {
            let mut residuals = Vec::with_capacity(outputs.len());
            for (y, t) in outputs.iter().zip(targets) {
                let Target::Values(v) = t else {
                    return Err(NeuralError::TargetMismatch("RMSE needs real-valued targets".into()));
                };
                if v.len() != y.cols {
                    return Err(NeuralError::TargetMismatch(format!(
                        "{} targets for {} outputs",
                        v.len(),
                        y.cols
                    )));
                }
                let s = column_sums(y);
                residuals.push(s.iter().zip(v).map(|(&a, &b)| a - S::from_f32(b)).collect::<Vec<S>>());
            }
            let count = S::from(residuals.iter().map(Vec::len).sum::<usize>().max(1)).unwrap();
            let mse = residuals.iter().flatten().map(|&e| e * e).sum::<S>() / count;
            let loss = mse.sqrt();
            if loss > S::zero() {
                for (e, g) in residuals.iter().zip(grads.iter_mut()) {
                    let d: Vec<S> = e.iter().map(|&v| v / (count * loss)).collect();
                    for r in 0..g.rows {
                        g.row_mut(r).copy_from_slice(&d);
                    }
                }
            }
            Ok((loss, grads))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_cross_entropy_matches_closed_form() {
        // Two frames, logits (0, 1) labelled 1 and (2, 0) labelled 0.
        let y = Mat::from_vec(2, 2, vec![0.0f64, 1.0, 2.0, 0.0]);
        let t = Target::frames(vec![1, 0]);
        let (loss, g) = batch_loss(LossKind::CrossEntropy, &[y], &[&t]).unwrap();
        let want = 0.5 * ((1.0 + (-1.0f64).exp()).ln() + (1.0 + (-2.0f64).exp()).ln());
        assert!((loss - want).abs() < 1e-12);
        // Gradient rows sum to zero for softmax cross-entropy.
        assert!((g[0].row(0)[0] + g[0].row(0)[1]).abs() < 1e-15);
    }

    #[test]
    fn masked_frames_do_not_count() {
        let y = Mat::from_vec(2, 2, vec![0.0f64, 1.0, 5.0, -5.0]);
        let t = Target::Frames {
            labels: vec![1, 1],
            mask: vec![true, false],
        };
        let (loss, g) = batch_loss(LossKind::CrossEntropy, &[y], &[&t]).unwrap();
        assert!((loss - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-12);
        assert_eq!(g[0].row(1), &[0.0, 0.0]);
    }

    #[test]
    fn segment_targets() {
        let y = Mat::from_vec(3, 1, vec![0.5f64, 0.25, 0.25]);
        let (loss, _) = batch_loss(LossKind::Rmse, &[y.clone()], &[&Target::Values(vec![0.0])]).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
        let y2 = Mat::from_vec(2, 2, vec![1.0f64, 0.0, 1.0, 0.0]);
        let (ce, _) = batch_loss(LossKind::CrossEntropy, &[y2], &[&Target::Class(0)]).unwrap();
        assert!((ce - (1.0 + (-2.0f64).exp()).ln()).abs() < 1e-12);
        assert!(batch_loss(LossKind::CrossEntropy, &[y], &[&Target::Values(vec![0.0])]).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax_row(&[1000.0, -3.0]);
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }
}
