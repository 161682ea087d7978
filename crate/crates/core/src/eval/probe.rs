//! Linear probes (frozen encoder) and fine-tuning, with clip-level
//! segment-score averaging.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{LabeledDataset, LabeledItem, TaskKind};
use super::metrics::{argmax, mean_average_precision, top1_accuracy};
use crate::audio_io::{tile_to, AudioBuffer};
use crate::dsp::{FrontEnd, Spectrogrammer, StftConfig};
use crate::error::{Error, Result};
use crate::nn::layers::{linear_backward, linear_forward};
use crate::nn::{Mode, Network, Tensor};
use crate::optim::Sgd;
use crate::rng::{stream_rng, Stream};
use crate::scalar::Scalar;
use crate::train::{load_recording, Checkpoint, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    #[default]
    Frozen,
    Finetune,
}

impl std::str::FromStr for ProbeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frozen" => Ok(ProbeMode::Frozen),
            "finetune" => Ok(ProbeMode::Finetune),
            other => Err(format!("unknown probe mode `{other}` (expected frozen|finetune)")),
        }
    }
}

/// Which network output feeds the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    /// Encoder output `h`.
    #[default]
    Embedding,
    /// Projection-head output `z`.
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub mode: ProbeMode,
    /// Defaults to 100 (frozen) or 50 (finetune).
    pub epochs: Option<usize>,
    pub lr: f64,
    /// Multiplier applied to `lr` for the second half of training.
    pub decay_factor: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub features: FeatureSource,
    /// Standardize features with training-set statistics before the
    /// classifier.
    pub standardize_features: bool,
    pub seed: u64,
    /// Input settings; taken from the checkpoint's config echo when unset.
    pub segment_frames: Option<usize>,
    pub front_end: Option<FrontEnd>,
    pub stft: Option<StftConfig>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            mode: ProbeMode::Frozen,
            epochs: None,
            lr: 1e-3,
            decay_factor: 0.1,
            batch_size: 64,
            momentum: 0.9,
            features: FeatureSource::Embedding,
            standardize_features: true,
            seed: 0,
            segment_frames: None,
            front_end: None,
            stft: None,
        }
    }
}

impl ProbeConfig {
    pub fn epochs(&self) -> usize {
        self.epochs.unwrap_or(match self.mode {
            ProbeMode::Frozen => 100,
            ProbeMode::Finetune => 50,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs() == 0 {
            return Err(Error::InvalidConfig("probe epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("probe batch_size must be >= 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0 && self.decay_factor > 0.0 && self.momentum >= 0.0) {
            return Err(Error::InvalidConfig("probe lr/decay/momentum out of range".into()));
        }
        Ok(())
    }
}

/// Learning rate of 1-based `epoch`: `lr` for the first half, then
/// `lr * decay_factor`.
pub fn probe_lr(epoch: usize, cfg: &ProbeConfig) -> f64 {
    if epoch > cfg.epochs() / 2 {
        cfg.lr * cfg.decay_factor
    } else {
        cfg.lr
    }
}

/// Front-end settings used to cut and transform clips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub stft: StftConfig,
    pub front_end: FrontEnd,
    pub segment_frames: usize,
}

impl InputSpec {
    /// Probe overrides first, then the checkpoint's training config, then
    /// defaults.
    pub fn resolve(cfg: &ProbeConfig, echo: Option<&serde_json::Value>) -> Result<Self> {
        let train: TrainConfig = match echo {
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|e| Error::Checkpoint(format!("unreadable config echo: {e}")))?,
            None => TrainConfig::default(),
        };
        Ok(Self {
            stft: cfg.stft.unwrap_or(train.stft),
            front_end: cfg.front_end.unwrap_or(train.front_end),
            segment_frames: cfg.segment_frames.unwrap_or(train.segment_frames),
        })
    }

    pub fn segment_samples(&self) -> usize {
        self.stft.samples_for_frames(self.segment_frames)
    }
}

/// Splits a clip into non-overlapping segments of `len` samples. A trailing
/// partial segment is dropped; a clip shorter than one segment is tiled.
pub fn clip_segments<S: Scalar>(clip: &AudioBuffer<S>, len: usize) -> Vec<AudioBuffer<S>> {
    let count = clip.len() / len;
    if count == 0 {
        return vec![tile_to(clip, len)];
    }
    clip.samples
        .chunks_exact(len)
        .map(|c| AudioBuffer {
            samples: c.to_vec(),
            sample_rate: clip.sample_rate,
        })
        .collect()
}

/// Element-wise mean of score vectors.
pub fn average_scores(scores: &[Vec<f64>]) -> Vec<f64> {
    let classes = scores.first().map_or(0, Vec::len);
    let mut out = vec![0.0; classes];
    for s in scores {
        out.iter_mut().zip(s).for_each(|(o, &v)| *o += v);
    }
    let n = scores.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.iter().map(|e| e / sum).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Affine feature standardization with fixed statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNorm<S> {
    pub mean: Vec<S>,
    pub inv_std: Vec<S>,
}

impl<S: Scalar> FeatureNorm<S> {
    pub fn fit(x: &Tensor<S>) -> Self {
        let (n, d) = (x.dim(0), x.dim(1));
        let nn = S::from_usize_lossy(n.max(1));
        let mut mean = vec![S::zero(); d];
        for row in x.data().chunks(d) {
            mean.iter_mut().zip(row).for_each(|(m, &v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= nn);
        let mut var = vec![S::zero(); d];
        for row in x.data().chunks(d) {
            var.iter_mut().zip(row.iter().zip(&mean)).for_each(|(s, (&v, &m))| *s += (v - m) * (v - m));
        }
        let inv_std = var.iter().map(|&s| S::one() / (s / nn + S::lit(1e-6)).sqrt()).collect();
        Self { mean, inv_std }
    }

    pub fn apply(&self, x: &Tensor<S>) -> Tensor<S> {
        let d = x.dim(1);
        let mut data = x.data().to_vec();
        for row in data.chunks_mut(d) {
            for ((v, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.inv_std) {
                *v = (*v - m) * s;
            }
        }
        Tensor::new(x.shape().to_vec(), data).expect("same shape")
    }

    /// Chain rule through [`FeatureNorm::apply`].
    pub fn backward(&self, dy: &Tensor<S>) -> Tensor<S> {
        let d = dy.dim(1);
        let mut data = dy.data().to_vec();
        for row in data.chunks_mut(d) {
            row.iter_mut().zip(&self.inv_std).for_each(|(v, &s)| *v *= s);
        }
        Tensor::new(dy.shape().to_vec(), data).expect("same shape")
    }
}

/// Linear layer from features to class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier<S> {
    /// `[classes, features]`.
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
}

impl<S: Scalar> LinearClassifier<S> {
    pub fn zeros(features: usize, classes: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[classes, features]),
            bias: Tensor::zeros(&[classes]),
        }
    }

    pub fn classes(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn logits(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        linear_forward(x, &self.weight, &self.bias)
    }
}

/// A trained network + classifier, ready to score clips.
pub struct Probe<S: Scalar> {
    pub net: Network<S>,
    pub classifier: LinearClassifier<S>,
    pub norm: Option<FeatureNorm<S>>,
    pub input: InputSpec,
    pub task_kind: TaskKind,
    pub features: FeatureSource,
    front: Spectrogrammer<S>,
}

const FEATURE_BATCH: usize = 64;

impl<S: Scalar> Probe<S> {
    pub fn new(
        net: Network<S>,
        classifier: LinearClassifier<S>,
        norm: Option<FeatureNorm<S>>,
        input: InputSpec,
        task_kind: TaskKind,
        features: FeatureSource,
    ) -> Result<Self> {
        let front = Spectrogrammer::new(input.stft, input.front_end)?;
        Ok(Self {
            net,
            classifier,
            norm,
            input,
            task_kind,
            features,
            front,
        })
    }

    fn input_tensor(&self, segments: &[AudioBuffer<S>]) -> Result<Tensor<S>> {
        let specs = segments.par_iter().map(|s| self.front.compute(s)).collect::<Result<Vec<_>>>()?;
        let (f, t) = specs[0].shape();
        let data: Vec<S> = specs.iter().flat_map(|s| s.values.iter().copied()).collect();
        Tensor::new(vec![specs.len(), 1, f, t], data)
    }

    /// Raw (unnormalized) features in the network's current mode.
    fn raw_features(&mut self, x: &Tensor<S>) -> Result<Tensor<S>> {
        match self.features {
            FeatureSource::Embedding => self.net.encode(x),
            FeatureSource::Projection => Ok(self.net.forward(x)?.1),
        }
    }

    /// Eval-mode raw features, in batches.
    fn extract(&mut self, segments: &[AudioBuffer<S>]) -> Result<Tensor<S>> {
        let mode = self.net.mode();
        self.net.set_mode(Mode::Eval);
        let mut parts = Vec::new();
        for chunk in segments.chunks(FEATURE_BATCH) {
            let x = self.input_tensor(chunk)?;
            parts.push(self.raw_features(&x)?);
        }
        self.net.set_mode(mode);
        Tensor::concat(&parts.iter().collect::<Vec<_>>())
    }

    fn normalize(&self, x: &Tensor<S>) -> Tensor<S> {
        match &self.norm {
            Some(n) => n.apply(x),
            None => x.clone(),
        }
    }

    fn scores(&self, logits: &Tensor<S>) -> Vec<Vec<f64>> {
        logits
            .data()
            .chunks(logits.dim(1))
            .map(|row| {
                let row: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
                match self.task_kind {
                    TaskKind::SingleLabel => softmax(&row),
                    TaskKind::MultiLabel => row.iter().map(|&l| sigmoid(l)).collect(),
                }
            })
            .collect()
    }

    /// Per-segment score vectors of one clip.
    pub fn segment_scores(&mut self, clip: &AudioBuffer<S>) -> Result<Vec<Vec<f64>>> {
        let segs = clip_segments(clip, self.input.segment_samples());
        let feats = self.extract(&segs)?;
        let logits = self.classifier.logits(&self.normalize(&feats))?;
        Ok(self.scores(&logits))
    }

    /// Clip score: mean of its segment scores.
    pub fn predict_clip(&mut self, clip: &AudioBuffer<S>) -> Result<Vec<f64>> {
        Ok(average_scores(&self.segment_scores(clip)?))
    }

    /// Clip scores for many clips, batching segments across clips.
    pub fn predict_clips(&mut self, clips: &[AudioBuffer<S>]) -> Result<Vec<Vec<f64>>> {
        let len = self.input.segment_samples();
        let mut segs = Vec::new();
        let mut owner = Vec::new();
        for (i, c) in clips.iter().enumerate() {
            for s in clip_segments(c, len) {
                segs.push(s);
                owner.push(i);
            }
        }
        if segs.is_empty() {
            return Ok(Vec::new());
        }
        let feats = self.extract(&segs)?;
        let logits = self.classifier.logits(&self.normalize(&feats))?;
        let scores = self.scores(&logits);
        let mut grouped: Vec<Vec<Vec<f64>>> = vec![Vec::new(); clips.len()];
        for (s, &o) in scores.into_iter().zip(&owner) {
            grouped[o].push(s);
        }
        Ok(grouped.iter().map(|g| average_scores(g)).collect())
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEpoch {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    /// Segment-level training accuracy (single-label tasks).
    pub train_accuracy: Option<f64>,
}

pub struct ProbeReport<S: Scalar> {
    pub probe: Probe<S>,
    pub per_epoch: Vec<ProbeEpoch>,
}

/// Test-set metrics in the `metrics.json` schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMetrics {
    pub task: String,
    pub mode: ProbeMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<f64>,
    pub per_epoch: Vec<ProbeEpoch>,
}

/// Loads clips at the input sample rate.
pub fn load_clips<S: Scalar>(items: &[LabeledItem], rate: u32) -> Result<Vec<AudioBuffer<S>>> {
    items.par_iter().map(|it| load_recording(&it.path, rate)).collect()
}

/// Loss and logit gradient (mean over the batch) for one minibatch.
fn loss_and_grad<S: Scalar>(logits: &Tensor<S>, targets: &[&[usize]], kind: TaskKind) -> (f64, usize, Tensor<S>) {
    let (b, c) = (logits.dim(0), logits.dim(1));
    let mut grad = vec![S::zero(); b * c];
    let mut loss = 0.0;
    let mut correct = 0;
    for (i, (row, labels)) in logits.data().chunks(c).zip(targets).enumerate() {
        let row: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
        let g = &mut grad[i * c..(i + 1) * c];
        match kind {
            TaskKind::SingleLabel => {
                let p = softmax(&row);
                let y = labels[0];
                loss -= p[y].max(1e-300).ln();
                if argmax(&row) == y {
                    correct += 1;
                }
                for (k, gv) in g.iter_mut().enumerate() {
                    let t = if k == y { 1.0 } else { 0.0 };
                    *gv = S::lit((p[k] - t) / b as f64);
                }
            }
            TaskKind::MultiLabel => {
                for (k, gv) in g.iter_mut().enumerate() {
                    let t = if labels.contains(&k) { 1.0 } else { 0.0 };
                    // numerically stable binary cross-entropy with logits
                    let l = row[k];
                    loss += l.max(0.0) - l * t + (-l.abs()).exp().ln_1p();
                    *gv = S::lit((sigmoid(l) - t) / b as f64);
                }
            }
        }
    }
    (loss / b as f64, correct, Tensor::new(vec![b, c], grad).expect("shape"))
}

/// Trains a classifier on `dataset.train` (frozen or fine-tuned per `cfg`).
pub fn train_probe<S: Scalar>(dataset: &LabeledDataset, ckpt: &Checkpoint<S>, cfg: &ProbeConfig) -> Result<ProbeReport<S>> {
    cfg.validate()?;
    dataset.validate()?;
    let input = InputSpec::resolve(cfg, ckpt.config.as_ref())?;
    let clips = load_clips::<S>(&dataset.train, input.stft.sample_rate)?;
    let labels: Vec<Vec<usize>> = dataset.train.iter().map(|i| i.labels.clone()).collect();
    train_probe_on(&clips, &labels, dataset.task_kind, dataset.num_classes, ckpt, cfg, input)
}

/// [`train_probe`] on in-memory clips.
pub fn train_probe_on<S: Scalar>(
    clips: &[AudioBuffer<S>],
    labels: &[Vec<usize>],
    task_kind: TaskKind,
    num_classes: usize,
    ckpt: &Checkpoint<S>,
    cfg: &ProbeConfig,
    input: InputSpec,
) -> Result<ProbeReport<S>> {
    cfg.validate()?;
    if clips.len() != labels.len() || clips.is_empty() {
        return Err(Error::InvalidArgument("need one label set per clip and at least one clip".into()));
    }
    if let Some(bad) = labels.iter().flatten().find(|&&l| l >= num_classes) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range [0, {num_classes})")));
    }
    let net = Network::from_state(ckpt.encoder.clone(), ckpt.projection, ckpt.state.clone())?;
    let feat_dim = match cfg.features {
        FeatureSource::Embedding => ckpt.encoder.embedding_dim(),
        FeatureSource::Projection => ckpt.projection.output_dim,
    };
    let mut probe = Probe::new(
        net,
        LinearClassifier::zeros(feat_dim, num_classes),
        None,
        input,
        task_kind,
        cfg.features,
    )?;
    probe.net.set_mode(Mode::Eval);

    let seg_len = input.segment_samples();
    let mut segments = Vec::new();
    let mut seg_labels: Vec<&[usize]> = Vec::new();
    for (clip, l) in clips.iter().zip(labels) {
        for s in clip_segments(clip, seg_len) {
            segments.push(s);
            seg_labels.push(l);
        }
    }
    let initial = probe.extract(&segments)?;
    if cfg.standardize_features {
        probe.norm = Some(FeatureNorm::fit(&initial));
    }
    let single = task_kind == TaskKind::SingleLabel;
    let mut per_epoch = Vec::with_capacity(cfg.epochs());
    let mut order: Vec<usize> = (0..segments.len()).collect();

    match cfg.mode {
        ProbeMode::Frozen => {
            let feats = probe.normalize(&initial);
            let mut sgd = Sgd::new(cfg.momentum, &[&probe.classifier.weight, &probe.classifier.bias]);
            for epoch in 1..=cfg.epochs() {
                let lr = probe_lr(epoch, cfg);
                order.shuffle(&mut stream_rng(cfg.seed, Stream::Probe, epoch as u64));
                let (mut loss_sum, mut correct) = (0.0, 0);
                for idx in order.chunks(cfg.batch_size) {
                    let x = gather_rows(&feats, idx);
                    let targets: Vec<&[usize]> = idx.iter().map(|&i| seg_labels[i]).collect();
                    let logits = probe.classifier.logits(&x)?;
                    let (loss, hits, dlogits) = loss_and_grad(&logits, &targets, task_kind);
                    let g = linear_backward(&x, &probe.classifier.weight, &dlogits)?;
                    let clf = &mut probe.classifier;
                    sgd.step(&mut [&mut clf.weight, &mut clf.bias], &[&g.dw, &g.db], lr)?;
                    loss_sum += loss * idx.len() as f64;
                    correct += hits;
                }
                per_epoch.push(ProbeEpoch {
                    epoch,
                    lr,
                    loss: loss_sum / segments.len() as f64,
                    train_accuracy: single.then(|| correct as f64 / segments.len() as f64),
                });
            }
        }
        ProbeMode::Finetune => {
            let range = match cfg.features {
                FeatureSource::Embedding => probe.net.encoder_param_range(),
                FeatureSource::Projection => 0..probe.net.state().params.len(),
            };
            let mut sgd = {
                let mut refs: Vec<&Tensor<S>> = probe.net.state().params[range.clone()].iter().collect();
                refs.push(&probe.classifier.weight);
                refs.push(&probe.classifier.bias);
                Sgd::new(cfg.momentum, &refs)
            };
            for epoch in 1..=cfg.epochs() {
                let lr = probe_lr(epoch, cfg);
                order.shuffle(&mut stream_rng(cfg.seed, Stream::Probe, epoch as u64));
                let (mut loss_sum, mut correct, mut seen) = (0.0, 0, 0);
                probe.net.set_mode(Mode::Train);
                for idx in order.chunks(cfg.batch_size) {
                    // batch statistics need at least two items
                    if idx.len() < 2 {
                        continue;
                    }
                    let batch: Vec<AudioBuffer<S>> = idx.iter().map(|&i| segments[i].clone()).collect();
                    let x = probe.input_tensor(&batch)?;
                    let raw = probe.raw_features(&x)?;
                    let feats = probe.normalize(&raw);
                    let targets: Vec<&[usize]> = idx.iter().map(|&i| seg_labels[i]).collect();
                    let logits = probe.classifier.logits(&feats)?;
                    let (loss, hits, dlogits) = loss_and_grad(&logits, &targets, task_kind);
                    if !loss.is_finite() {
                        return Err(Error::NonFinite(format!("fine-tuning loss at epoch {epoch}")));
                    }
                    let g = linear_backward(&feats, &probe.classifier.weight, &dlogits)?;
                    let d_raw = match &probe.norm {
                        Some(n) => n.backward(&g.dx),
                        None => g.dx,
                    };
                    let grads = match cfg.features {
                        FeatureSource::Embedding => probe.net.backward_embedding(&d_raw)?,
                        FeatureSource::Projection => probe.net.backward(&d_raw)?,
                    };
                    let mut grad_refs: Vec<&Tensor<S>> = grads.tensors[range.clone()].iter().collect();
                    grad_refs.push(&g.dw);
                    grad_refs.push(&g.db);
                    let params = &mut probe.net.state_mut().params[range.clone()];
                    let clf = &mut probe.classifier;
                    let mut refs: Vec<&mut Tensor<S>> = params.iter_mut().collect();
                    refs.push(&mut clf.weight);
                    refs.push(&mut clf.bias);
                    sgd.step(&mut refs, &grad_refs, lr)?;
                    loss_sum += loss * idx.len() as f64;
                    correct += hits;
                    seen += idx.len();
                }
                probe.net.set_mode(Mode::Eval);
                let seen = seen.max(1) as f64;
                per_epoch.push(ProbeEpoch {
                    epoch,
                    lr,
                    loss: loss_sum / seen,
                    train_accuracy: single.then(|| correct as f64 / seen),
                });
            }
        }
    }
    Ok(ProbeReport { probe, per_epoch })
}

fn gather_rows<S: Scalar>(x: &Tensor<S>, idx: &[usize]) -> Tensor<S> {
    let d = x.dim(1);
    let data: Vec<S> = idx.iter().flat_map(|&i| x.data()[i * d..(i + 1) * d].iter().copied()).collect();
    Tensor::new(vec![idx.len(), d], data).expect("shape")
}

/// Scores test clips and computes top-1 (single-label) or mAP (multi-label).
pub fn evaluate<S: Scalar>(
    probe: &mut Probe<S>,
    clips: &[AudioBuffer<S>],
    labels: &[Vec<usize>],
    num_classes: usize,
) -> Result<(Option<f64>, Option<f64>)> {
    let scores = probe.predict_clips(clips)?;
    match probe.task_kind {
        TaskKind::SingleLabel => {
            let y: Vec<usize> = labels.iter().map(|l| l[0]).collect();
            Ok((Some(top1_accuracy(&scores, &y)?), None))
        }
        TaskKind::MultiLabel => {
            let y: Vec<Vec<bool>> = labels
                .iter()
                .map(|l| (0..num_classes).map(|c| l.contains(&c)).collect())
                .collect();
            Ok((None, Some(mean_average_precision(&scores, &y)?)))
        }
    }
}

/// Full probe run: train on the train split, evaluate on the test split.
pub fn run_probe<S: Scalar>(dataset: &LabeledDataset, ckpt: &Checkpoint<S>, cfg: &ProbeConfig) -> Result<(ProbeMetrics, Probe<S>)> {
    let ProbeReport { mut probe, per_epoch } = train_probe(dataset, ckpt, cfg)?;
    let eval_items = if dataset.test.is_empty() { &dataset.train } else { &dataset.test };
    let clips = load_clips::<S>(eval_items, probe.input.stft.sample_rate)?;
    let labels: Vec<Vec<usize>> = eval_items.iter().map(|i| i.labels.clone()).collect();
    let (top1, map) = evaluate(&mut probe, &clips, &labels, dataset.num_classes)?;
    Ok((
        ProbeMetrics {
            task: dataset.task.clone(),
            mode: cfg.mode,
            top1,
            map,
            per_epoch,
        },
        probe,
    ))
}
