//! Pretraining loop, run configuration, dataset manifests and checkpoints.

pub mod checkpoint;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio_io::{load_wav, resample, AudioBuffer};
use crate::augment::{AdvConfig, PositiveAugConfig, RirBank};
use crate::contrastive::{build_quadruple, nt_xent_loss, LossConfig, QuadrupleBatch, QuadrupleStreams};
use crate::dsp::{FrontEnd, Spectrogrammer, StftConfig};
use crate::error::{Error, Result};
use crate::nn::{EncoderConfig, Mode, Network, ProjectionConfig};
use crate::optim::{lr_at, peak_lr, Lars, LarsConfig, ScheduleConfig};
use crate::rng::{sample_rng, stream_rng, Stream};
use crate::scalar::{Precision, Scalar};

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};

/// Environment variable that sets the number of augmentation workers.
pub const WORKERS_ENV: &str = "ASG_NUM_WORKERS";

/// Every pretraining knob. All fields have defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// JSON list of `{path, duration}`; relative paths resolve against the
    /// manifest's directory.
    pub manifest: PathBuf,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_epochs: usize,
    /// Frames per training segment.
    pub segment_frames: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Overrides the `0.3 * batch / 256` rule when set.
    pub peak_lr: Option<f64>,
    pub front_end: FrontEnd,
    pub asg_enabled: bool,
    pub adversarial: AdvConfig,
    /// Number of synthetic room responses in the RIR bank.
    pub rir_bank_size: usize,
    pub stft: StftConfig,
    pub positive: PositiveAugConfig,
    pub encoder: EncoderConfig,
    pub projection: ProjectionConfig,
    pub loss: LossConfig,
    pub lars: LarsConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::new(),
            batch_size: 32,
            epochs: 10,
            warmup_epochs: 2,
            segment_frames: 300,
            seed: 0,
            precision: Precision::Single,
            peak_lr: None,
            front_end: FrontEnd::Linear,
            asg_enabled: true,
            adversarial: AdvConfig::default(),
            rir_bank_size: 16,
            stft: StftConfig::default(),
            positive: PositiveAugConfig::default(),
            encoder: EncoderConfig::default(),
            projection: ProjectionConfig::default(),
            loss: LossConfig::default(),
            lars: LarsConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Small configuration that trains in minutes on one CPU core: 64-band
    /// mel input, 64-frame segments, a four-block encoder with
    /// [8, 16, 32, 64] channels and a 128/64 head. Batch 32, 10 epochs, peak
    /// lr from the batch-size rule. The LARS trust coefficient is raised to
    /// 0.01 because at 0.001 the effective step is too small for 10 epochs.
    pub fn desk(manifest: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            segment_frames: 64,
            front_end: FrontEnd::default_mel(),
            encoder: EncoderConfig {
                channels: vec![8, 16, 32, 64],
                standardize_input: true,
            },
            projection: ProjectionConfig {
                hidden_dim: 128,
                output_dim: 64,
            },
            lars: LarsConfig {
                trust_coefficient: 0.01,
                ..LarsConfig::default()
            },
            ..Self::default()
        }
    }

    /// Checks everything that can be checked without reading the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.warmup_epochs >= self.epochs {
            return Err(Error::InvalidConfig(format!(
                "warmup_epochs ({}) must be < epochs ({})",
                self.warmup_epochs, self.epochs
            )));
        }
        if let Some(lr) = self.peak_lr {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::InvalidConfig(format!("peak_lr must be positive, got {lr}")));
            }
        }
        self.stft.validate()?;
        self.positive.validate()?;
        self.encoder.validate()?;
        self.projection.validate()?;
        self.loss.validate()?;
        self.lars.validate()?;
        if self.positive.rir_probability > 0.0 && self.rir_bank_size == 0 {
            return Err(Error::InvalidConfig("rir_probability > 0 needs rir_bank_size >= 1".into()));
        }
        let bins = match self.front_end {
            FrontEnd::Linear => self.stft.freq_bins(),
            FrontEnd::Mel { n_mels, .. } => n_mels,
        };
        let min = self.encoder.min_input_size();
        if bins < min || self.segment_frames < min {
            return Err(Error::InvalidConfig(format!(
                "input {bins}x{} is smaller than the encoder minimum {min}x{min}",
                self.segment_frames
            )));
        }
        if self.asg_enabled {
            self.adversarial.validate(bins)?;
        }
        Ok(())
    }

    pub fn peak_lr(&self) -> f64 {
        self.peak_lr.unwrap_or_else(|| peak_lr(self.batch_size))
    }

    pub fn schedule(&self, steps_per_epoch: usize) -> ScheduleConfig {
        ScheduleConfig {
            warmup_epochs: self.warmup_epochs,
            total_epochs: self.epochs,
            steps_per_epoch,
        }
    }

    pub fn segment_samples(&self) -> usize {
        self.stft.samples_for_frames(self.segment_frames)
    }
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub duration: f64,
}

/// Reads a manifest and resolves relative paths against its directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
    if entries.is_empty() {
        return Err(Error::InvalidConfig(format!("manifest {} is empty", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new(""));
    for e in &mut entries {
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
    }
    Ok(entries)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(entries)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a WAV file and resamples it to `rate`.
pub fn load_recording<S: Scalar>(path: &Path, rate: u32) -> Result<AudioBuffer<S>> {
    resample(&load_wav(path)?, rate)
}

/// Execution options that do not change results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory receiving `metrics.jsonl` and `checkpoints/`. Nothing is
    /// written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Forces one augmentation worker.
    pub deterministic: bool,
    /// Worker count; falls back to [`WORKERS_ENV`], then to the core count.
    pub workers: Option<usize>,
}

impl RunOptions {
    pub fn worker_count(&self) -> usize {
        if self.deterministic {
            return 1;
        }
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
            .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
            .unwrap_or(1)
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub mean_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum MetricsLine<'a> {
    Step(&'a StepRecord),
    Epoch(&'a EpochRecord),
}

/// Result of a pretraining run.
#[derive(Debug, Clone)]
pub struct PretrainReport<S> {
    pub checkpoint: Checkpoint<S>,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    pub checkpoint_paths: Vec<PathBuf>,
}

struct RunDir {
    metrics: Option<fs::File>,
    checkpoints: Option<PathBuf>,
}

impl RunDir {
    fn open(out: Option<&Path>) -> Result<Self> {
        let Some(out) = out else {
            return Ok(Self {
                metrics: None,
                checkpoints: None,
            });
        };
        let ckpt_dir = out.join("checkpoints");
        fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
        let metrics_path = out.join("metrics.jsonl");
        let metrics = fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
        Ok(Self {
            metrics: Some(metrics),
            checkpoints: Some(ckpt_dir),
        })
    }

    fn emit(&mut self, line: MetricsLine<'_>) -> Result<()> {
        if let Some(f) = &mut self.metrics {
            let mut text = serde_json::to_string(&line)?;
            text.push('\n');
            f.write_all(text.as_bytes()).map_err(|e| Error::Checkpoint(format!("metrics write failed: {e}")))?;
        }
        Ok(())
    }

    fn save<S: Scalar>(&self, ckpt: &Checkpoint<S>, file: &str) -> Result<Option<PathBuf>> {
        match &self.checkpoints {
            None => Ok(None),
            Some(dir) => {
                let path = dir.join(file);
                save_checkpoint(ckpt, &path)?;
                Ok(Some(path))
            }
        }
    }
}

/// Runs pretraining on the recordings listed in `cfg.manifest`.
pub fn pretrain<S: Scalar>(cfg: &TrainConfig, opts: &RunOptions) -> Result<PretrainReport<S>> {
    cfg.validate()?;
    let entries = read_manifest(&cfg.manifest)?;
    let pool = worker_pool(opts.worker_count())?;
    let rate = cfg.stft.sample_rate;
    let recordings: Vec<AudioBuffer<S>> =
        pool.install(|| entries.par_iter().map(|e| load_recording(&e.path, rate)).collect::<Result<_>>())?;
    pretrain_on(&recordings, cfg, opts)
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))
}

/// Runs pretraining on in-memory recordings (already at the STFT rate).
///
/// Every random draw comes from a stream keyed by the seed, the epoch and the
/// recording index, so results do not depend on the worker count, and the
/// segment and positive-view streams do not depend on `asg_enabled`.
pub fn pretrain_on<S: Scalar>(recordings: &[AudioBuffer<S>], cfg: &TrainConfig, opts: &RunOptions) -> Result<PretrainReport<S>> {
    cfg.validate()?;
    if recordings.is_empty() {
        return Err(Error::InvalidConfig("no recordings to train on".into()));
    }
    if let Some(r) = recordings.iter().find(|r| r.sample_rate != cfg.stft.sample_rate) {
        return Err(Error::InvalidArgument(format!(
            "recording at {} Hz, STFT expects {} Hz",
            r.sample_rate, cfg.stft.sample_rate
        )));
    }
    let steps_per_epoch = recordings.len() / cfg.batch_size;
    if steps_per_epoch == 0 {
        return Err(Error::InvalidConfig(format!(
            "{} recordings cannot fill one batch of {}",
            recordings.len(),
            cfg.batch_size
        )));
    }
    let schedule = cfg.schedule(steps_per_epoch);
    let peak = cfg.peak_lr();
    let pool = worker_pool(opts.worker_count())?;
    let front: Spectrogrammer<S> = Spectrogrammer::new(cfg.stft, cfg.front_end)?;
    let bank: RirBank<S> = if cfg.rir_bank_size == 0 {
        RirBank::empty()
    } else {
        RirBank::synthetic(cfg.rir_bank_size, cfg.stft.sample_rate, &mut stream_rng(cfg.seed, Stream::Init, 1))
    };
    let adv = cfg.asg_enabled.then_some(&cfg.adversarial);
    let segment_samples = cfg.segment_samples();
    let mut net: Network<S> = Network::new(cfg.encoder.clone(), cfg.projection, &mut stream_rng(cfg.seed, Stream::Init, 0))?;
    net.set_mode(Mode::Train);
    let mut lars = Lars::new(cfg.lars, &net.state().params);
    let echo = serde_json::to_value(cfg)?;
    let mut run = RunDir::open(opts.out_dir.as_deref())?;
    let mut report = PretrainReport {
        checkpoint: Checkpoint {
            encoder: cfg.encoder.clone(),
            projection: cfg.projection,
            state: net.state().clone(),
            epoch: 0,
            step: 0,
            config: Some(echo.clone()),
        },
        steps: Vec::new(),
        epochs: Vec::new(),
        checkpoint_paths: Vec::new(),
    };

    let mut order: Vec<usize> = (0..recordings.len()).collect();
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut stream_rng(cfg.seed, Stream::Shuffle, epoch as u64));
        let mut loss_sum = 0.0;
        for batch_idx in order.chunks_exact(cfg.batch_size) {
            let items = pool.install(|| {
                batch_idx
                    .par_iter()
                    .map(|&i| {
                        let mut streams = QuadrupleStreams {
                            segments: sample_rng(cfg.seed, epoch, i, Stream::Segments),
                            positive: sample_rng(cfg.seed, epoch, i, Stream::Positive),
                            adversarial: sample_rng(cfg.seed, epoch, i, Stream::Adversarial),
                        };
                        build_quadruple(&recordings[i], segment_samples, &cfg.positive, &bank, adv, &front, &mut streams)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let batch = QuadrupleBatch::from_quadruples(items)?;
            let lr = lr_at(step, &schedule, peak);
            let (_, z) = net.forward(&batch.to_tensor())?;
            let (loss, dz) = nt_xent_loss(&z, &batch.layout(), &cfg.loss)?;
            let loss = loss.as_f64();
            if !loss.is_finite() {
                let diag = Checkpoint {
                    state: net.state().clone(),
                    epoch,
                    step,
                    ..report.checkpoint.clone()
                };
                let saved = run.save(&diag, &format!("diverged-step-{step:06}.asgc"))?;
                let place = saved.map(|p| format!(", state saved to {}", p.display())).unwrap_or_default();
                return Err(Error::NonFinite(format!("loss {loss} at step {step} (epoch {epoch}){place}")));
            }
            let grads = net.backward(&dz)?;
            let state = net.state_mut();
            lars.step(&state.names, &mut state.params, &grads.tensors, lr)?;
            let rec = StepRecord { step, epoch, lr, loss };
            run.emit(MetricsLine::Step(&rec))?;
            report.steps.push(rec);
            loss_sum += loss;
            step += 1;
        }
        let rec = EpochRecord {
            epoch,
            steps: steps_per_epoch,
            mean_loss: loss_sum / steps_per_epoch as f64,
            seconds: started.elapsed().as_secs_f64(),
        };
        run.emit(MetricsLine::Epoch(&rec))?;
        report.epochs.push(rec);
        report.checkpoint.state = net.state().clone();
        report.checkpoint.epoch = epoch;
        report.checkpoint.step = step;
        if let Some(p) = run.save(&report.checkpoint, &format!("epoch-{epoch:03}.asgc"))? {
            report.checkpoint_paths.push(p);
        }
    }
    Ok(report)
}
