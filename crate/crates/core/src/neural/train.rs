use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{batch_loss, LossKind, Target};
use super::model::SequenceModel;
use super::tensor::Mat;
use super::NeuralError;
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    /// Dev-loss drop that counts as an improvement for `patience`.
    pub min_delta: f64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 120,
            learning_rate: 1e-3,
            batch_size: 8,
            seed: 0,
            patience: 10,
            min_delta: 0.0,
            loss: LossKind::CrossEntropy,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), NeuralError> {
        if self.max_epochs == 0 {
            return Err(NeuralError::BadConfig("max_epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::BadConfig("learning_rate must be finite and non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(NeuralError::BadConfig("batch_size must be at least 1".into()));
        }
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return Err(NeuralError::BadConfig("min_delta must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// One training example, possibly borrowed from the dataset.
pub struct Sample<'a> {
    pub features: Cow<'a, FeatureMatrix>,
    pub target: Cow<'a, Target>,
}

/// Random-access source of training examples.
pub trait Dataset {
    fn len(&self) -> usize;
    fn get(&self, i: usize) -> Sample<'_>;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Dataset for [(FeatureMatrix, Target)] {
    fn len(&self) -> usize {
        <[_]>::len(self)
    }
    fn get(&self, i: usize) -> Sample<'_> {
        Sample {
            features: Cow::Borrowed(&self[i].0),
            target: Cow::Borrowed(&self[i].1),
        }
    }
}

impl Dataset for Vec<(FeatureMatrix, Target)> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn get(&self, i: usize) -> Sample<'_> {
        Dataset::get(self.as_slice(), i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
}

/// Adam with bias correction.
pub(crate) struct Adam {
    lr: f32,
    beta1: f32,
    beta2: f32,
    eps: f32,
    step: i32,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(lr: f32, shapes: &[Vec<f32>]) -> Self {
        let zeros = || shapes.iter().map(|p| vec![0.0; p.len()]).collect::<Vec<_>>();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn update(&mut self, params: &mut [Vec<f32>], grads: &[Vec<f32>]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

fn to_mat(f: &FeatureMatrix) -> Mat<f32> {
    Mat::from_vec(f.n_frames(), f.dim(), f.data().to_vec())
}

/// Loss and accumulated gradients of one batch.
fn batch_step(
    model: &SequenceModel,
    data: &dyn Dataset,
    idx: &[usize],
    kind: LossKind,
    grads: Option<&mut [Vec<f32>]>,
) -> Result<f64, NeuralError> {
    let p = &model.params.values;
    let mut inputs = Vec::with_capacity(idx.len());
    let mut outputs = Vec::with_capacity(idx.len());
    let mut caches = Vec::with_capacity(idx.len());
    let mut targets = Vec::with_capacity(idx.len());
    for &i in idx {
        let s = data.get(i);
        model.check_input(s.features.n_frames(), s.features.dim())?;
        let x = to_mat(&s.features);
        let (y, c) = model.net.forward(p, &x);
        inputs.push(x);
        outputs.push(y);
        if grads.is_some() {
            caches.push(c);
        }
        targets.push(s.target.into_owned());
    }
    let trefs: Vec<&Target> = targets.iter().collect();
    let (loss, dys) = batch_loss(kind, &outputs, &trefs)?;
    if let Some(g) = grads {
        for ((x, c), dy) in inputs.iter().zip(&caches).zip(&dys) {
            model.net.backward(p, x, c, dy, g);
        }
    }
    Ok(loss as f64)
}

/// Mean batch loss over a whole dataset, in index order.
pub fn evaluate_loss(model: &SequenceModel, data: &dyn Dataset, kind: LossKind, batch_size: usize) -> Result<f64, NeuralError> {
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    let mut n = 0;
    for chunk in idx.chunks(batch_size.max(1)) {
        total += batch_step(model, data, chunk, kind, None)?;
        n += 1;
    }
    Ok(total / n as f64)
}

/// Trains with Adam on seeded shuffles.
///
/// With a dev set, training stops once the dev loss has not dropped by more
/// than `min_delta` for `patience` epochs, and the best-dev snapshot is
/// returned.
pub fn train(
    model: &SequenceModel,
    data: &dyn Dataset,
    cfg: &TrainConfig,
    dev: Option<&dyn Dataset>,
) -> Result<(SequenceModel, Vec<EpochStats>), NeuralError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.learning_rate, &model.params.values);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, SequenceModel)> = None;
    let mut reference = f64::INFINITY;
    let mut since_best = 0;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut grads = model.params.zeros_like();
            let loss = batch_step(&model, data, chunk, cfg.loss, Some(&mut grads))?;
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(NeuralError::NonFiniteLoss { epoch });
            }
            adam.update(&mut model.params.values, &grads);
            total += loss;
            batches += 1;
        }
        let train_loss = total / batches as f64;
        let dev_loss = match dev {
            Some(d) => {
                let l = evaluate_loss(&model, d, cfg.loss, cfg.batch_size)?;
                if !l.is_finite() {
                    return Err(NeuralError::NonFiniteLoss { epoch });
                }
                Some(l)
            }
            None => None,
        };
        log::info!("epoch {epoch}: train {train_loss:.5} dev {dev_loss:?}");
        history.push(EpochStats {
            epoch,
            train_loss,
            dev_loss,
        });
        if let Some(l) = dev_loss {
            if best.as_ref().is_none_or(|(b, _)| l < *b) {
                best = Some((l, model.clone()));
            }
            if l < reference - cfg.min_delta {
                reference = l;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
        }
    }
    Ok((best.map_or(model, |(_, m)| m), history))
}
