use super::loss::{batch_loss, LossKind, Target};
use super::model::SequenceModel;
use super::tensor::Mat;
use super::NeuralError;
use crate::features::FeatureMatrix;

/// Largest parameter count [`grad_check`] accepts.
pub const GRAD_CHECK_MAX_PARAMS: usize = 50_000;

fn loss_and_grads(
    model: &SequenceModel,
    params: &[Vec<f64>],
    inputs: &[Mat<f64>],
    targets: &[&Target],
    kind: LossKind,
    want_grads: bool,
) -> Result<(f64, Vec<Vec<f64>>), NeuralError> {
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (y, c) = model.net.forward(params, x);
        outputs.push(y);
        caches.push(c);
    }
    let (loss, dys) = batch_loss(kind, &outputs, targets)?;
    let mut grads: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
    if want_grads {
        for ((x, c), dy) in inputs.iter().zip(&caches).zip(&dys) {
            model.net.backward(params, x, c, dy, &mut grads);
        }
    }
    Ok((loss, grads))
}

/// Compares backpropagated gradients with central finite differences.
///
/// Both routes run in double precision on a copy of the model's parameters.
/// Returns the maximum over all parameter elements of
/// `|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)`.
pub fn grad_check(
    model: &SequenceModel,
    batch: &[(FeatureMatrix, Target)],
    loss: LossKind,
    eps: f64,
) -> Result<f64, NeuralError> {
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(NeuralError::BadConfig(format!("eps {eps} outside [1e-6, 1e-3]")));
    }
    if model.param_count() > GRAD_CHECK_MAX_PARAMS {
        return Err(NeuralError::BadConfig(format!(
            "{} parameters exceed the grad-check limit of {GRAD_CHECK_MAX_PARAMS}",
            model.param_count()
        )));
    }
    if batch.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let mut inputs = Vec::with_capacity(batch.len());
    for (f, _) in batch {
        model.check_input(f.n_frames(), f.dim())?;
        inputs.push(Mat::from_vec(
            f.n_frames(),
            f.dim(),
            f.data().iter().map(|&v| v as f64).collect(),
        ));
    }
    let targets: Vec<&Target> = batch.iter().map(|(_, t)| t).collect();
    let mut params: Vec<Vec<f64>> = model
        .params
        .values
        .iter()
        .map(|p| p.iter().map(|&v| v as f64).collect())
        .collect();
    let (_, analytic) = loss_and_grads(model, &params, &inputs, &targets, loss, true)?;
    let mut worst = 0.0f64;
    for t in 0..params.len() {
        for i in 0..params[t].len() {
            let orig = params[t][i];
            params[t][i] = orig + eps;
            let (up, _) = loss_and_grads(model, &params, &inputs, &targets, loss, false)?;
            params[t][i] = orig - eps;
            let (down, _) = loss_and_grads(model, &params, &inputs, &targets, loss, false)?;
            params[t][i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[t][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
