//! Convolutional encoder `f` and MLP projection head `g`.
//!
//! Encoder: blocks of conv3x3 -> BN -> ReLU -> maxpool2x2, then a global
//! average pool, giving `h` with one value per last-block channel.
//! Head: linear -> BN -> ReLU -> linear, giving `z`.

use serde::{Deserialize, Serialize};

use super::layers::{self, BnCache, RunningStats};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Output channels of each conv block.
    pub channels: Vec<usize>,
    /// Standardize each input spectrogram to zero mean and unit variance.
    pub standardize_input: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            channels: vec![16, 32, 64, 128],
            standardize_input: true,
        }
    }
}

impl EncoderConfig {
    pub fn embedding_dim(&self) -> usize {
        self.channels.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::InvalidConfig("encoder needs >= 1 block with non-zero channels".into()));
        }
        Ok(())
    }

    /// Smallest input edge that survives every pool.
    pub fn min_input_size(&self) -> usize {
        1 << self.channels.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 256,
            output_dim: 64,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidConfig("projection dims must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Train,
    Eval,
}

/// Learnable parameters plus batch-norm running statistics.
///
/// Parameters are stored in a fixed order: for each encoder block
/// `conv.weight, conv.bias, bn.gamma, bn.beta`, then the head's
/// `fc1.weight, fc1.bias, bn.gamma, bn.beta, fc2.weight, fc2.bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<S> {
    pub names: Vec<String>,
    pub params: Vec<Tensor<S>>,
    pub running_names: Vec<String>,
    pub running: Vec<RunningStats<S>>,
    pub mode: Mode,
}

impl<S: Scalar> ModelState<S> {
    pub fn param(&self, name: &str) -> Option<&Tensor<S>> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn cast<T: Scalar>(&self) -> ModelState<T> {
        ModelState {
            names: self.names.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            running_names: self.running_names.clone(),
            running: self
                .running
                .iter()
                .map(|r| RunningStats {
                    mean: crate::scalar::cast_vec(&r.mean),
                    var: crate::scalar::cast_vec(&r.var),
                })
                .collect(),
            mode: self.mode,
        }
    }
}

/// Gradients aligned with [`ModelState::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    pub tensors: Vec<Tensor<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros_like(state: &ModelState<S>) -> Self {
        Self {
            tensors: state.params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn named<'a>(&'a self, state: &'a ModelState<S>) -> impl Iterator<Item = (&'a str, &'a Tensor<S>)> {
        state.names.iter().map(String::as_str).zip(&self.tensors)
    }
}

const PER_BLOCK: usize = 4;

struct BlockTape<S> {
    input: Tensor<S>,
    bn: BnCache<S>,
    relu_out: Tensor<S>,
    pool_arg: Vec<usize>,
}

struct EncoderTape<S> {
    blocks: Vec<BlockTape<S>>,
    final_shape: Vec<usize>,
}

struct HeadTape<S> {
    h: Tensor<S>,
    bn: BnCache<S>,
    relu_out: Tensor<S>,
}

/// Encoder plus projection head, with a recorded forward pass for backward.
pub struct Network<S: Scalar> {
    encoder: EncoderConfig,
    projection: ProjectionConfig,
    state: ModelState<S>,
    enc_tape: Option<EncoderTape<S>>,
    head_tape: Option<HeadTape<S>>,
}

impl<S: Scalar> Network<S> {
    pub fn new(encoder: EncoderConfig, projection: ProjectionConfig, rng: &mut Rng) -> Result<Self> {
        encoder.validate()?;
        projection.validate()?;
        let mut names = Vec::new();
        let mut params = Vec::new();
        let mut running_names = Vec::new();
        let mut running = Vec::new();
        let mut c_in = 1;
        for (i, &c_out) in encoder.channels.iter().enumerate() {
            let p = format!("encoder.block{i}");
            names.extend([
                format!("{p}.conv.weight"),
                format!("{p}.conv.bias"),
                format!("{p}.bn.gamma"),
                format!("{p}.bn.beta"),
            ]);
            params.push(Tensor::glorot(&[c_out, c_in, 3, 3], c_in * 9, c_out * 9, rng));
            params.push(Tensor::zeros(&[c_out]));
            params.push(Tensor::full(&[c_out], S::one()));
            params.push(Tensor::zeros(&[c_out]));
            running_names.push(format!("{p}.bn"));
            running.push(RunningStats::new(c_out));
            c_in = c_out;
        }
        let (d_h, hid, d_z) = (encoder.embedding_dim(), projection.hidden_dim, projection.output_dim);
        names.extend(
            ["fc1.weight", "fc1.bias", "bn.gamma", "bn.beta", "fc2.weight", "fc2.bias"]
                .iter()
                .map(|s| format!("head.{s}")),
        );
        params.push(Tensor::glorot(&[hid, d_h], d_h, hid, rng));
        params.push(Tensor::zeros(&[hid]));
        params.push(Tensor::full(&[hid], S::one()));
        params.push(Tensor::zeros(&[hid]));
        params.push(Tensor::glorot(&[d_z, hid], hid, d_z, rng));
        params.push(Tensor::zeros(&[d_z]));
        running_names.push("head.bn".to_string());
        running.push(RunningStats::new(hid));
        let state = ModelState {
            names,
            params,
            running_names,
            running,
            mode: Mode::Train,
        };
        Ok(Self {
            encoder,
            projection,
            state,
            enc_tape: None,
            head_tape: None,
        })
    }

    /// Rebuilds a network around an existing state, checking every shape.
    pub fn from_state(encoder: EncoderConfig, projection: ProjectionConfig, state: ModelState<S>) -> Result<Self> {
        let mut rng = crate::rng::rng_from_seed(0);
        let template = Self::new(encoder.clone(), projection, &mut rng)?;
        if template.state.names != state.names || template.state.running_names != state.running_names {
            return Err(Error::ConfigConflict("parameter inventory does not match the model config".into()));
        }
        for ((name, a), b) in state.names.iter().zip(&template.state.params).zip(&state.params) {
            if a.shape() != b.shape() {
                return Err(Error::ConfigConflict(format!(
                    "{name}: config expects {:?}, state has {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        for ((name, a), b) in state.running_names.iter().zip(&template.state.running).zip(&state.running) {
            if a.mean.len() != b.mean.len() || a.var.len() != b.var.len() {
                return Err(Error::ConfigConflict(format!("{name}: running-stat size mismatch")));
            }
        }
        Ok(Self {
            encoder,
            projection,
            state,
            enc_tape: None,
            head_tape: None,
        })
    }

    pub fn encoder_config(&self) -> &EncoderConfig {
        &self.encoder
    }

    pub fn projection_config(&self) -> &ProjectionConfig {
        &self.projection
    }

    pub fn state(&self) -> &ModelState<S> {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut ModelState<S> {
        &mut self.state
    }

    pub fn into_state(self) -> ModelState<S> {
        self.state
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.state.mode = mode;
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    fn head_base(&self) -> usize {
        PER_BLOCK * self.encoder.channels.len()
    }

    /// Index range of encoder parameters inside [`ModelState::params`].
    pub fn encoder_param_range(&self) -> std::ops::Range<usize> {
        0..self.head_base()
    }

    /// Encoder forward: `[N, 1, F, T] -> [N, d_h]`. In train mode the pass is
    /// recorded for [`Network::backward`] and running stats are updated.
    pub fn encode(&mut self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let shape = x.shape();
        if shape.len() != 4 || shape[1] != 1 {
            return Err(Error::Shape(format!("encoder expects [N, 1, F, T], got {shape:?}")));
        }
        let min = self.encoder.min_input_size();
        if shape[2] < min || shape[3] < min {
            return Err(Error::Shape(format!(
                "input {}x{} underflows {} pooling stages (needs >= {min})",
                shape[2],
                shape[3],
                self.encoder.channels.len()
            )));
        }
        let train = self.state.mode == Mode::Train;
        let mut act = if self.encoder.standardize_input {
            standardize_per_instance(x)
        } else {
            x.clone()
        };
        let mut blocks = Vec::with_capacity(self.encoder.channels.len());
        for b in 0..self.encoder.channels.len() {
            let base = PER_BLOCK * b;
            let p = &self.state.params;
            let conv = layers::conv2d_forward(&act, &p[base], &p[base + 1])?;
            let (normed, cache) = if train {
                let (y, c) = layers::batchnorm_forward_train(&conv, &p[base + 2], &p[base + 3], &mut self.state.running[b])?;
                (y, Some(c))
            } else {
                (layers::batchnorm_forward_eval(&conv, &p[base + 2], &p[base + 3], &self.state.running[b])?, None)
            };
            let relu_out = layers::relu_forward(&normed);
            let (pooled, pool_arg) = layers::maxpool2_forward(&relu_out)?;
            if let Some(bn) = cache {
                blocks.push(BlockTape {
                    input: act,
                    bn,
                    relu_out,
                    pool_arg,
                });
            }
            act = pooled;
        }
        let h = layers::global_avg_pool_forward(&act)?;
        self.enc_tape = train.then(|| EncoderTape {
            blocks,
            final_shape: act.shape().to_vec(),
        });
        self.head_tape = None;
        Ok(h)
    }

    /// Head forward: `[N, d_h] -> [N, d_z]`.
    pub fn project(&mut self, h: &Tensor<S>) -> Result<Tensor<S>> {
        if h.shape().len() != 2 || h.dim(1) != self.encoder.embedding_dim() {
            return Err(Error::Shape(format!(
                "head expects [N, {}], got {:?}",
                self.encoder.embedding_dim(),
                h.shape()
            )));
        }
        let base = self.head_base();
        let train = self.state.mode == Mode::Train;
        let p = &self.state.params;
        let a1 = layers::linear_forward(h, &p[base], &p[base + 1])?;
        let run = self.state.running.len() - 1;
        let (normed, cache) = if train {
            let (y, c) = layers::batchnorm_forward_train(&a1, &p[base + 2], &p[base + 3], &mut self.state.running[run])?;
            (y, Some(c))
        } else {
            (layers::batchnorm_forward_eval(&a1, &p[base + 2], &p[base + 3], &self.state.running[run])?, None)
        };
        let relu_out = layers::relu_forward(&normed);
        let p = &self.state.params;
        let z = layers::linear_forward(&relu_out, &p[base + 4], &p[base + 5])?;
        self.head_tape = cache.map(|bn| HeadTape {
            h: h.clone(),
            bn,
            relu_out,
        });
        Ok(z)
    }

    /// Branch taken by the last train-mode forward through every
    /// piecewise-linear unit: ReLU on/off bits and max-pool argmax indices.
    /// Two forwards with equal patterns lie on the same smooth piece.
    pub fn activation_pattern(&self) -> Vec<usize> {
        let mut pattern = Vec::new();
        let relu_bits = |t: &Tensor<S>, out: &mut Vec<usize>| out.extend(t.data().iter().map(|&v| usize::from(v > S::zero())));
        if let Some(tape) = &self.enc_tape {
            for b in &tape.blocks {
                relu_bits(&b.relu_out, &mut pattern);
                pattern.extend_from_slice(&b.pool_arg);
            }
        }
        if let Some(tape) = &self.head_tape {
            relu_bits(&tape.relu_out, &mut pattern);
        }
        pattern
    }

    /// `(h, z)` for a batch of spectrograms.
    pub fn forward(&mut self, x: &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>)> {
        let h = self.encode(x)?;
        let z = self.project(&h)?;
        Ok((h, z))
    }

    /// Backpropagates `dL/dz` through head and encoder. Consumes the tape.
    pub fn backward(&mut self, dz: &Tensor<S>) -> Result<Gradients<S>> {
        let tape = self.head_tape.take().ok_or(Error::NoForward)?;
        let mut grads = Gradients::zeros_like(&self.state);
        let base = self.head_base();
        let p = &self.state.params;
        let g2 = layers::linear_backward(&tape.relu_out, &p[base + 4], dz)?;
        let d_norm = layers::relu_backward(&tape.relu_out, &g2.dx);
        let gbn = layers::batchnorm_backward(&d_norm, &p[base + 2], &tape.bn)?;
        let g1 = layers::linear_backward(&tape.h, &p[base], &gbn.dx)?;
        grads.tensors[base] = g1.dw;
        grads.tensors[base + 1] = g1.db;
        grads.tensors[base + 2] = gbn.dgamma;
        grads.tensors[base + 3] = gbn.dbeta;
        grads.tensors[base + 4] = g2.dw;
        grads.tensors[base + 5] = g2.db;
        self.backward_encoder_into(&g1.dx, &mut grads)?;
        Ok(grads)
    }

    /// Backpropagates `dL/dh` through the encoder only (head gradients zero).
    pub fn backward_embedding(&mut self, dh: &Tensor<S>) -> Result<Gradients<S>> {
        let mut grads = Gradients::zeros_like(&self.state);
        self.head_tape = None;
        self.backward_encoder_into(dh, &mut grads)?;
        Ok(grads)
    }

    fn backward_encoder_into(&mut self, dh: &Tensor<S>, grads: &mut Gradients<S>) -> Result<()> {
        let tape = self.enc_tape.take().ok_or(Error::NoForward)?;
        let mut d = layers::global_avg_pool_backward(&tape.final_shape, dh);
        for (b, bt) in tape.blocks.iter().enumerate().rev() {
            let base = PER_BLOCK * b;
            let p = &self.state.params;
            let d_relu = layers::maxpool2_backward(bt.relu_out.shape(), &bt.pool_arg, &d);
            let d_norm = layers::relu_backward(&bt.relu_out, &d_relu);
            let gbn = layers::batchnorm_backward(&d_norm, &p[base + 2], &bt.bn)?;
            let gc = layers::conv2d_backward(&bt.input, &p[base], &gbn.dx)?;
            grads.tensors[base] = gc.dk;
            grads.tensors[base + 1] = gc.db;
            grads.tensors[base + 2] = gbn.dgamma;
            grads.tensors[base + 3] = gbn.dbeta;
            d = gc.dx;
        }
        Ok(())
    }
}

fn standardize_per_instance<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let inner: usize = x.shape()[1..].iter().product();
    let n = S::from_usize_lossy(inner);
    let mut data = x.data().to_vec();
    for sample in data.chunks_mut(inner) {
        let mean = sample.iter().copied().sum::<S>() / n;
        let var = sample.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
        let inv = S::one() / (var + S::lit(1e-8)).sqrt();
        sample.iter_mut().for_each(|v| *v = (*v - mean) * inv);
    }
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}
