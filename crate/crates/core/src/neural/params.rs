use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name and shape of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Named parameter tensors in registration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub(crate) specs: Vec<ParamSpec>,
    pub(crate) values: Vec<Vec<f32>>,
}

impl ParamSet {
    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn values(&self) -> &[Vec<f32>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    pub fn get(&self, name: &str) -> Option<&[f32]> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .map(|i| self.values[i].as_slice())
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f32]> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .map(|i| self.values[i].as_mut_slice())
    }

    pub fn zeros_like(&self) -> Vec<Vec<f32>> {
        self.values.iter().map(|v| vec![0.0; v.len()]).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Init {
    /// Uniform Glorot with the given fans.
    Glorot { fan_in: usize, fan_out: usize },
    Const(f32),
    /// LSTM input-side bias: zeros except +1 on the forget-gate block.
    ForgetBias { hidden: usize },
}

/// Registers parameters while a network is being assembled.
pub(crate) struct ParamBuilder {
    set: ParamSet,
    rng: ChaCha8Rng,
}

impl ParamBuilder {
    pub fn new(seed: u64) -> Self {
        Self {
            set: ParamSet {
                specs: Vec::new(),
                values: Vec::new(),
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn add(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        let n: usize = shape.iter().product();
        let values = match init {
            Init::Glorot { fan_in, fan_out } => {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
                (0..n).map(|_| self.rng.random_range(-limit..=limit)).collect()
            }
            Init::Const(c) => vec![c; n],
            Init::ForgetBias { hidden } => {
                let mut v = vec![0.0; n];
                v[hidden..2 * hidden].fill(1.0);
                v
            }
        };
        self.set.specs.push(ParamSpec { name, shape });
        self.set.values.push(values);
        self.set.specs.len() - 1
    }

    pub fn finish(self) -> ParamSet {
        self.set
    }
}
