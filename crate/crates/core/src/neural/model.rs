use std::collections::BTreeMap;
use std::fmt;

use super::layers::{BiLstm, BiLstmCache, Linear, Lstm, LstmCache, Params, TcnBlock, TcnBlockCache};
use super::params::{ParamBuilder, ParamSet};
use super::tensor::{Mat, Scalar};
use super::NeuralError;
use crate::features::FeatureMatrix;

/// Architecture family of a [`SequenceModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    /// Recurrent overlap detector: stacked BiLSTMs and a linear head.
    Rosd,
    /// Dilated temporal convolutional network.
    Tcn,
    /// Unidirectional LSTM backbone used for gender detection.
    GdBackbone,
}

impl Arch {
    pub fn id(self) -> u8 {
        match self {
            Arch::Rosd => 0,
            Arch::Tcn => 1,
            Arch::GdBackbone => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Arch::Rosd),
            1 => Some(Arch::Tcn),
            2 => Some(Arch::GdBackbone),
            _ => None,
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Rosd => "rosd",
            Arch::Tcn => "tcn",
            Arch::GdBackbone => "gd_backbone",
        })
    }
}

impl std::str::FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rosd" => Ok(Arch::Rosd),
            "tcn" => Ok(Arch::Tcn),
            "gd_backbone" => Ok(Arch::GdBackbone),
            other => Err(format!("unknown architecture {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RosdHyper {
    pub input_dim: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub linear_hidden: usize,
    pub linear_layers: usize,
    pub n_out: usize,
}

impl RosdHyper {
    pub fn standard(input_dim: usize) -> Self {
        Self {
            input_dim,
            lstm_hidden: 128,
            lstm_layers: 2,
            linear_hidden: 128,
            linear_layers: 2,
            n_out: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TcnHyper {
    pub input_dim: usize,
    pub bottleneck: usize,
    pub hidden: usize,
    pub repeats: usize,
    /// Blocks per repeat; block `b` uses dilation `2^b`.
    pub blocks: usize,
    pub n_out: usize,
}

impl TcnHyper {
    pub fn standard(input_dim: usize, n_out: usize) -> Self {
        Self {
            input_dim,
            bottleneck: 64,
            hidden: 128,
            repeats: 3,
            blocks: 5,
            n_out,
        }
    }

    /// Frames that can influence one output frame: `1 + 2 * Σ dilations`.
    pub fn receptive_field(&self) -> usize {
        let per_repeat: usize = (0..self.blocks).map(|b| 1usize << b).sum();
        1 + 2 * self.repeats * per_repeat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdHead {
    /// Two logits (female, male).
    TwoWay,
    /// One presence score.
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GdHyper {
    pub input_dim: usize,
    pub hidden: usize,
    pub head: GdHead,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hyper {
    Rosd(RosdHyper),
    Tcn(TcnHyper),
    Gd(GdHyper),
}

impl Hyper {
    pub fn arch(&self) -> Arch {
        match self {
            Hyper::Rosd(_) => Arch::Rosd,
            Hyper::Tcn(_) => Arch::Tcn,
            Hyper::Gd(_) => Arch::GdBackbone,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Hyper::Rosd(h) => h.input_dim,
            Hyper::Tcn(h) => h.input_dim,
            Hyper::Gd(h) => h.input_dim,
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            Hyper::Rosd(h) => h.n_out,
            Hyper::Tcn(h) => h.n_out,
            Hyper::Gd(h) => match h.head {
                GdHead::TwoWay => 2,
                GdHead::Scalar => 1,
            },
        }
    }

    /// `key=value` pairs, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        match self {
            Hyper::Rosd(h) => vec![
                ("input_dim", h.input_dim.to_string()),
                ("lstm_hidden", h.lstm_hidden.to_string()),
                ("lstm_layers", h.lstm_layers.to_string()),
                ("linear_hidden", h.linear_hidden.to_string()),
                ("linear_layers", h.linear_layers.to_string()),
                ("n_out", h.n_out.to_string()),
            ],
            Hyper::Tcn(h) => vec![
                ("input_dim", h.input_dim.to_string()),
                ("bottleneck", h.bottleneck.to_string()),
                ("hidden", h.hidden.to_string()),
                ("repeats", h.repeats.to_string()),
                ("blocks", h.blocks.to_string()),
                ("n_out", h.n_out.to_string()),
            ],
            Hyper::Gd(h) => vec![
                ("input_dim", h.input_dim.to_string()),
                ("hidden", h.hidden.to_string()),
                (
                    "head",
                    match h.head {
                        GdHead::TwoWay => "two_way",
                        GdHead::Scalar => "scalar",
                    }
                    .to_string(),
                ),
            ],
        }
    }

    pub fn from_pairs(arch: Arch, pairs: &BTreeMap<String, String>) -> Result<Self, NeuralError> {
        let num = |k: &str| -> Result<usize, NeuralError> {
            pairs
                .get(k)
                .ok_or_else(|| NeuralError::BadHyper(format!("missing key {k}")))?
                .parse()
                .map_err(|_| NeuralError::BadHyper(format!("key {k} is not an integer")))
        };
        Ok(match arch {
            Arch::Rosd => Hyper::Rosd(RosdHyper {
                input_dim: num("input_dim")?,
                lstm_hidden: num("lstm_hidden")?,
                lstm_layers: num("lstm_layers")?,
                linear_hidden: num("linear_hidden")?,
                linear_layers: num("linear_layers")?,
                n_out: num("n_out")?,
            }),
            Arch::Tcn => Hyper::Tcn(TcnHyper {
                input_dim: num("input_dim")?,
                bottleneck: num("bottleneck")?,
                hidden: num("hidden")?,
                repeats: num("repeats")?,
                blocks: num("blocks")?,
                n_out: num("n_out")?,
            }),
            Arch::GdBackbone => Hyper::Gd(GdHyper {
                input_dim: num("input_dim")?,
                hidden: num("hidden")?,
                head: match pairs.get("head").map(String::as_str) {
                    Some("two_way") => GdHead::TwoWay,
                    Some("scalar") => GdHead::Scalar,
                    other => return Err(NeuralError::BadHyper(format!("bad head {other:?}"))),
                },
            }),
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Network {
    Rosd {
        bilstms: Vec<BiLstm>,
        linears: Vec<Linear>,
        out: Linear,
    },
    Tcn {
        input: Linear,
        blocks: Vec<TcnBlock>,
        head: Linear,
    },
    Gd {
        lstm: Lstm,
        head: Linear,
    },
}

pub(crate) enum Cache<S> {
    Rosd {
        bilstms: Vec<BiLstmCache<S>>,
        /// Activated outputs of each hidden linear layer.
        acts: Vec<Mat<S>>,
    },
    Tcn {
        /// Input of each block, then the last block's output.
        states: Vec<Mat<S>>,
        blocks: Vec<TcnBlockCache<S>>,
    },
    Gd {
        lstm: LstmCache<S>,
    },
}

impl Network {
    pub fn build(hyper: &Hyper, pb: &mut ParamBuilder) -> Self {
        match *hyper {
            Hyper::Rosd(h) => {
                let mut d = h.input_dim;
                let bilstms = (0..h.lstm_layers)
                    .map(|i| {
                        let l = BiLstm::new(pb, &format!("bilstm{}", i + 1), d, h.lstm_hidden);
                        d = 2 * h.lstm_hidden;
                        l
                    })
                    .collect();
                let linears = (0..h.linear_layers)
                    .map(|i| {
                        let l = Linear::new(pb, &format!("linear{}", i + 1), d, h.linear_hidden);
                        d = h.linear_hidden;
                        l
                    })
                    .collect();
                let out = Linear::new(pb, "out", d, h.n_out);
                Network::Rosd { bilstms, linears, out }
            }
            Hyper::Tcn(h) => {
                let input = Linear::new(pb, "input", h.input_dim, h.bottleneck);
                let mut blocks = Vec::with_capacity(h.repeats * h.blocks);
                for r in 0..h.repeats {
                    for b in 0..h.blocks {
                        blocks.push(TcnBlock::new(
                            pb,
                            &format!("blocks.{}", r * h.blocks + b),
                            h.bottleneck,
                            h.hidden,
                            1 << b,
                        ));
                    }
                }
                let head = Linear::new(pb, "head", h.bottleneck, h.n_out);
                Network::Tcn { input, blocks, head }
            }
            Hyper::Gd(h) => {
                let lstm = Lstm::new(pb, "lstm", h.input_dim, h.hidden);
                let head = Linear::new(pb, "head", h.hidden, hyper.n_out());
                Network::Gd { lstm, head }
            }
        }
    }

    pub fn forward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>) -> (Mat<S>, Cache<S>) {
        match self {
            Network::Rosd { bilstms, linears, out } => {
                let mut caches: Vec<BiLstmCache<S>> = Vec::with_capacity(bilstms.len());
                for l in bilstms {
                    let input = caches.last().map_or(x, |c| &c.out);
                    let c = l.forward(p, input);
                    caches.push(c);
                }
                let mut acts: Vec<Mat<S>> = Vec::with_capacity(linears.len());
                for l in linears {
                    let input = acts.last().or(caches.last().map(|c| &c.out)).unwrap_or(x);
                    let a = l.forward(p, input).map(|v| v.tanh());
                    acts.push(a);
                }
                let last = acts.last().or(caches.last().map(|c| &c.out)).unwrap_or(x);
                let y = out.forward(p, last);
                (y, Cache::Rosd { bilstms: caches, acts })
            }
            Network::Tcn { input, blocks, head } => {
                let mut states = Vec::with_capacity(blocks.len() + 1);
                let mut bc = Vec::with_capacity(blocks.len());
                states.push(input.forward(p, x));
                for b in blocks {
                    let (y, c) = b.forward(p, states.last().unwrap());
                    states.push(y);
                    bc.push(c);
                }
                let y = head.forward(p, states.last().unwrap());
                (y, Cache::Tcn { states, blocks: bc })
            }
            Network::Gd { lstm, head } => {
                let c = lstm.forward(p, x, false);
                let y = head.forward(p, &c.h);
                (y, Cache::Gd { lstm: c })
            }
        }
    }

    /// Accumulates parameter gradients for one sequence given `dL/dy`.
    pub fn backward<S: Scalar>(&self, p: &Params<S>, x: &Mat<S>, cache: &Cache<S>, dy: &Mat<S>, g: &mut Params<S>) {
        match (self, cache) {
            (Network::Rosd { bilstms, linears, out }, Cache::Rosd { bilstms: bc, acts }) => {
                let input_of_linear = |i: usize| -> &Mat<S> {
                    if i > 0 {
                        &acts[i - 1]
                    } else {
                        bc.last().map_or(x, |c| &c.out)
                    }
                };
                let mut d = out
                    .backward(p, input_of_linear(linears.len()), dy, g, true)
                    .unwrap();
                for i in (0..linears.len()).rev() {
                    // tanh'
                    for (dv, &a) in d.data.iter_mut().zip(&acts[i].data) {
                        *dv *= S::one() - a * a;
                    }
                    d = linears[i].backward(p, input_of_linear(i), &d, g, true).unwrap();
                }
                for i in (0..bilstms.len()).rev() {
                    let input = if i > 0 { &bc[i - 1].out } else { x };
                    match bilstms[i].backward(p, input, &bc[i], &d, g, i > 0) {
                        Some(dx) => d = dx,
                        None => break,
                    }
                }
            }
            (Network::Tcn { input, blocks, head }, Cache::Tcn { states, blocks: bc }) => {
                let mut d = head.backward(p, states.last().unwrap(), dy, g, true).unwrap();
                for i in (0..blocks.len()).rev() {
                    d = blocks[i].backward(p, &states[i], &bc[i], &d, g);
                }
                input.backward(p, x, &d, g, false);
            }
            (Network::Gd { lstm, head }, Cache::Gd { lstm: lc }) => {
                let dh = head.backward(p, &lc.h, dy, g, true).unwrap();
                lstm.backward(p, x, lc, &dh, false, g, false);
            }
            _ => unreachable!("cache built by a different network"),
        }
    }

    /// The GD backbone's LSTM and head, for windowed inference.
    pub fn gd_parts(&self) -> Option<(&Lstm, &Linear)> {
        match self {
            Network::Gd { lstm, head } => Some((lstm, head)),
            _ => None,
        }
    }
}

/// A trainable per-frame sequence labeler: architecture plus named tensors.
#[derive(Debug, Clone)]
pub struct SequenceModel {
    hyper: Hyper,
    pub(crate) params: ParamSet,
    pub(crate) net: Network,
}

impl SequenceModel {
    /// Builds a freshly initialized model.
    pub fn new(hyper: Hyper, seed: u64) -> Self {
        let mut pb = ParamBuilder::new(seed);
        let net = Network::build(&hyper, &mut pb);
        Self {
            hyper,
            params: pb.finish(),
            net,
        }
    }

    pub fn arch(&self) -> Arch {
        self.hyper.arch()
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn input_dim(&self) -> usize {
        self.hyper.input_dim()
    }

    pub fn n_out(&self) -> usize {
        self.hyper.n_out()
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    /// Sorted tensor names.
    pub fn tensor_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.params.specs.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        names
    }

    pub(crate) fn check_input(&self, rows: usize, dim: usize) -> Result<(), NeuralError> {
        if dim != self.input_dim() {
            return Err(NeuralError::DimMismatch {
                expected: self.input_dim(),
                found: dim,
            });
        }
        if rows == 0 {
            return Err(NeuralError::EmptySequence);
        }
        Ok(())
    }

    /// Per-frame raw outputs (logits or scores), `n_frames × n_out`.
    pub fn forward(&self, features: &FeatureMatrix) -> Result<Mat<f32>, NeuralError> {
        self.check_input(features.n_frames(), features.dim())?;
        let x = Mat::from_vec(features.n_frames(), features.dim(), features.data().to_vec());
        Ok(self.net.forward(&self.params.values, &x).0)
    }

    /// Mean per-frame output of the sequence restarted on every window
    /// `[k, k + window)`, one row per start `k`.
    ///
    /// Equivalent to running [`forward`](Self::forward) on each slice and
    /// averaging its rows; recurrent models reuse one input projection.
    pub fn window_means(&self, features: &FeatureMatrix, window: usize) -> Result<Mat<f32>, NeuralError> {
        self.check_input(features.n_frames(), features.dim())?;
        let n = features.n_frames();
        if window == 0 || window > n {
            return Err(NeuralError::BadConfig(format!("window {window} for {n} frames")));
        }
        let starts = n - window + 1;
        let mut out = Mat::zeros(starts, self.n_out());
        let p = &self.params.values;
        if let Some((lstm, head)) = self.net.gd_parts() {
            let x = Mat::from_vec(n, features.dim(), features.data().to_vec());
            let pre = lstm.input_projection(p, &x);
            let scale = 1.0 / window as f32;
            for k in 0..starts {
                let part = Mat::from_vec(window, pre.cols, pre.data[k * pre.cols..(k + window) * pre.cols].to_vec());
                let cache = lstm.recur(p, part, false);
                let mut mean = Mat::zeros(1, cache.h.cols);
                for r in 0..window {
                    for (m, &v) in mean.data.iter_mut().zip(cache.h.row(r)) {
                        *m += v * scale;
                    }
                }
                out.row_mut(k).copy_from_slice(&head.forward(p, &mean).data);
            }
        } else {
            for k in 0..starts {
                let y = self.forward(&features.slice_frames(k, k + window))?;
                for r in 0..window {
                    for (o, &v) in out.row_mut(k).iter_mut().zip(y.row(r)) {
                        *o += v / window as f32;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// The recurrent overlap detector: two BiLSTM-128 layers, two linear-128
/// layers with tanh and a two-way output layer.
pub fn build_rosd(input_dim: usize) -> SequenceModel {
    build_rosd_seeded(input_dim, 0)
}

pub fn build_rosd_seeded(input_dim: usize, seed: u64) -> SequenceModel {
    warn_unusual_dim(input_dim);
    SequenceModel::new(Hyper::Rosd(RosdHyper::standard(input_dim)), seed)
}

/// The dilated TCN: 3 repeats of 5 bottleneck blocks (dilations 1..16).
pub fn build_tcn(input_dim: usize, n_out: usize) -> SequenceModel {
    build_tcn_seeded(input_dim, n_out, 0)
}

pub fn build_tcn_seeded(input_dim: usize, n_out: usize, seed: u64) -> SequenceModel {
    assert!(n_out >= 1, "n_out must be at least 1");
    SequenceModel::new(Hyper::Tcn(TcnHyper::standard(input_dim, n_out)), seed)
}

/// One LSTM-64 layer with either a two-way or a scalar linear head.
pub fn build_gd_backbone(input_dim: usize, head: GdHead) -> SequenceModel {
    build_gd_backbone_seeded(input_dim, head, 0)
}

pub fn build_gd_backbone_seeded(input_dim: usize, head: GdHead, seed: u64) -> SequenceModel {
    assert!(input_dim > 0, "input_dim must be positive");
    SequenceModel::new(
        Hyper::Gd(GdHyper {
            input_dim,
            hidden: 64,
            head,
        }),
        seed,
    )
}

fn warn_unusual_dim(input_dim: usize) {
    if ![59, 768, 1024].contains(&input_dim) {
        log::warn!("ROSD input dimension {input_dim} is not one of 59, 768, 1024");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSource;

    fn lstm_count(d_in: usize, h: usize) -> usize {
        4 * h * (d_in + h) + 8 * h
    }

    #[test]
    fn rosd_counts_follow_the_gate_arithmetic() {
        let closed = |d: usize| {
            2 * lstm_count(d, 128) + 2 * lstm_count(256, 128) + (256 * 128 + 128) + (128 * 128 + 128) + (128 * 2 + 2)
        };
        assert_eq!(closed(59), 638_466);
        assert_eq!(build_rosd(59).param_count(), 638_466);
        assert_eq!(build_rosd(1024).param_count(), 1_626_626);
        assert_eq!(build_rosd(1024).param_count(), closed(1024));
    }

    #[test]
    fn tcn_counts() {
        let block = (64 * 128 + 128) + 1 + 256 + (128 * 3 + 128) + 1 + 256 + (128 * 64 + 64);
        assert_eq!(block, 17_602);
        assert_eq!(build_tcn(59, 2).param_count(), 59 * 64 + 64 + 15 * block + 130);
        assert_eq!(build_tcn(59, 2).param_count(), 268_000);
        assert_eq!(build_tcn(1024, 2).param_count(), 329_760);
    }

    #[test]
    fn gd_heads() {
        let two = build_gd_backbone(768, GdHead::TwoWay);
        let one = build_gd_backbone(768, GdHead::Scalar);
        assert_eq!(two.param_count() - one.param_count(), 65);
        assert_eq!(two.n_out(), 2);
        assert_eq!(one.n_out(), 1);
        assert_eq!(
            two.tensor_names(),
            vec!["head.bias", "head.weight", "lstm.b_hh", "lstm.b_ih", "lstm.w_hh", "lstm.w_ih"]
        );
    }

    #[test]
    fn forward_shapes_and_errors() {
        let m = build_tcn_seeded(8, 2, 1);
        let f = FeatureMatrix::new(vec![0.1; 200 * 8], 8, 10, FeatureSource::External).unwrap();
        let y = m.forward(&f).unwrap();
        assert_eq!((y.rows, y.cols), (200, 2));
        assert_eq!(y, m.forward(&f).unwrap());
        let wrong = FeatureMatrix::new(vec![0.1; 7], 7, 10, FeatureSource::External).unwrap();
        assert!(matches!(m.forward(&wrong), Err(NeuralError::DimMismatch { expected: 8, found: 7 })));
        let empty = FeatureMatrix::new(vec![], 8, 10, FeatureSource::External).unwrap();
        assert!(matches!(m.forward(&empty), Err(NeuralError::EmptySequence)));
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut m = build_rosd_seeded(5, 3);
        for v in &mut m.params.values {
            v.fill(0.0);
        }
        let f = FeatureMatrix::new((0..50).map(|i| i as f32).collect(), 5, 10, FeatureSource::External).unwrap();
        assert!(m.forward(&f).unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn receptive_field_formula() {
        assert_eq!(TcnHyper::standard(59, 2).receptive_field(), 1 + 2 * 3 * 31);
    }

    #[test]
    fn hyper_pairs_round_trip() {
        for h in [
            Hyper::Rosd(RosdHyper::standard(59)),
            Hyper::Tcn(TcnHyper::standard(1024, 2)),
            Hyper::Gd(GdHyper {
                input_dim: 768,
                hidden: 64,
                head: GdHead::Scalar,
            }),
        ] {
            let pairs: BTreeMap<String, String> =
                h.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            assert_eq!(Hyper::from_pairs(h.arch(), &pairs).unwrap(), h);
        }
    }
}
