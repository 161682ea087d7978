//! Synthetic labeled corpora for desk-scale experiments.
//!
//! * `tone`: harmonic tones, one fundamental per class.
//! * `chirp`: repeated log-frequency sweeps, rising or falling.
//! * `shift`: one fixed chord pattern placed at a class-specific pitch, with
//!   per-clip rhythm, level and noise as nuisance.
//!
//! Every clip draws from its own seeded stream, so the corpus is a pure
//! function of the config.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{write_dataset, LabeledDataset, LabeledItem, TaskKind};
use crate::audio_io::{write_wav_pcm16, AudioBuffer};
use crate::dsp::mel_to_hz;
use crate::error::{Error, Result};
use crate::rng::{sample_rng, stream_rng, Rng, Stream};
use crate::train::{write_manifest, ManifestEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Tone,
    Chirp,
    Shift,
}

impl SynthKind {
    pub fn default_classes(self) -> usize {
        match self {
            SynthKind::Tone | SynthKind::Shift => 4,
            SynthKind::Chirp => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Tone => "tone-class",
            SynthKind::Chirp => "chirp-direction",
            SynthKind::Shift => "shifted-pattern",
        }
    }
}

impl std::str::FromStr for SynthKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tone" | "tone-class" => Ok(SynthKind::Tone),
            "chirp" | "chirp-direction" => Ok(SynthKind::Chirp),
            "shift" | "shifted-pattern" => Ok(SynthKind::Shift),
            other => Err(format!("unknown synthetic spec `{other}` (expected tone|chirp|shift)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub kind: SynthKind,
    /// Defaults to the kind's class count.
    pub classes: Option<usize>,
    pub clips_per_class: usize,
    pub duration_secs: f64,
    pub sample_rate: u32,
    /// Fraction of clips in the training split.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            kind: SynthKind::Tone,
            classes: None,
            clips_per_class: 500,
            duration_secs: 3.0,
            sample_rate: 16000,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn classes(&self) -> usize {
        self.classes.unwrap_or(self.kind.default_classes())
    }

    pub fn validate(&self) -> Result<()> {
        let classes = self.classes();
        let max = match self.kind {
            SynthKind::Chirp => 2,
            SynthKind::Tone => 6,
            SynthKind::Shift => 8,
        };
        if classes < 2 || classes > max {
            return Err(Error::InvalidConfig(format!("{}: classes must be in [2, {max}]", self.kind.name())));
        }
        if self.clips_per_class == 0 || !(self.duration_secs > 0.0) || self.sample_rate < 8000 {
            return Err(Error::InvalidConfig("synthetic corpus needs clips, a duration and a rate >= 8 kHz".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::InvalidConfig("train_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }

    fn samples(&self) -> usize {
        (self.duration_secs * f64::from(self.sample_rate)).round() as usize
    }
}

/// Generates clip `index` of class `class`.
pub fn synth_clip(cfg: &SynthConfig, class: usize, index: usize) -> AudioBuffer<f64> {
    let mut rng = sample_rng(cfg.seed, class, index, Stream::Synth);
    let sr = f64::from(cfg.sample_rate);
    let n = cfg.samples();
    let mut x = match cfg.kind {
        SynthKind::Tone => tone(class, n, sr, &mut rng),
        SynthKind::Chirp => chirp(class == 0, n, sr, &mut rng),
        SynthKind::Shift => shifted(class, n, sr, &mut rng),
    };
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let level = rng.gen_range(0.2..0.8);
    let noise = rng.gen_range(0.001..0.01);
    for v in &mut x {
        *v = *v / peak * level + rng.gen_range(-noise..noise);
    }
    AudioBuffer {
        samples: x,
        sample_rate: cfg.sample_rate,
    }
}

fn tone(class: usize, n: usize, sr: f64, rng: &mut Rng) -> Vec<f64> {
    let f0 = 220.0 * 2f64.powf(class as f64 * 0.75) * rng.gen_range(0.98..1.02);
    let harmonics = rng.gen_range(2..=5);
    let rolloff: f64 = rng.gen_range(0.3..0.8);
    let phases: Vec<f64> = (0..harmonics).map(|_| rng.gen_range(0.0..TAU)).collect();
    let am_rate = rng.gen_range(0.5..4.0);
    let am_depth = rng.gen_range(0.0..0.6);
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let env = 1.0 - am_depth * 0.5 * (1.0 + (TAU * am_rate * t).sin());
            let s: f64 = (0..harmonics)
                .filter(|&h| f0 * ((h + 1) as f64) < sr / 2.0)
                .map(|h| rolloff.powi(h as i32) * (TAU * f0 * (h + 1) as f64 * t + phases[h]).sin())
                .sum();
            env * s
        })
        .collect()
}

/// Slow sawtooth glides in log frequency; a segment of a few hundred
/// milliseconds shows only a gently sloped line.
fn chirp(rising: bool, n: usize, sr: f64, rng: &mut Rng) -> Vec<f64> {
    let f_lo = rng.gen_range(400.0..1600.0);
    let ratio: f64 = rng.gen_range(1.05..1.2);
    let sweep = rng.gen_range(1.0..2.0);
    let offset = rng.gen_range(0.0..sweep);
    let second = rng.gen_range(0.0..0.5);
    let mut phase = 0.0;
    (0..n)
        .map(|i| {
            let pos = ((i as f64 / sr + offset) % sweep) / sweep;
            let u = if rising { pos } else { 1.0 - pos };
            phase += TAU * f_lo * ratio.powf(u) / sr;
            phase.sin() + second * (2.0 * phase).sin()
        })
        .collect()
}

/// Partial offsets of the shared pattern, in mel.
const PATTERN_MEL: [f64; 3] = [0.0, 85.0, 212.0];

/// The same mel-domain pattern at a class-specific mel position, gated by a
/// per-clip rhythm.
fn shifted(class: usize, n: usize, sr: f64, rng: &mut Rng) -> Vec<f64> {
    let base = 900.0 + 20.0 * class as f64 + rng.gen_range(-8.0..8.0);
    let freqs: Vec<f64> = PATTERN_MEL.iter().map(|m| mel_to_hz(base + m)).collect();
    let rate = rng.gen_range(1.5..8.0);
    let duty = rng.gen_range(0.3..0.9);
    let offset = rng.gen_range(0.0..1.0);
    let phases: Vec<f64> = freqs.iter().map(|_| rng.gen_range(0.0..TAU)).collect();
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let cycle = (t * rate + offset).fract();
            let gate = if cycle < duty { 1.0 } else { 0.0 };
            let s: f64 = freqs
                .iter()
                .zip(&phases)
                .filter(|(f, _)| **f < sr / 2.0)
                .map(|(f, p)| (TAU * f * t + p).sin())
                .sum();
            gate * s
        })
        .collect()
}

/// Paths written by [`make_synthetic_dataset`].
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: LabeledDataset,
    /// Labeled train/test manifest.
    pub dataset_path: PathBuf,
    /// Unlabeled `{path, duration}` list of the training clips, for
    /// pretraining.
    pub pretrain_manifest: PathBuf,
}

/// Writes WAV clips under `out/clips/` plus `dataset.json` and
/// `pretrain.json`. Classes are balanced; the split is a seeded shuffle.
pub fn make_synthetic_dataset(cfg: &SynthConfig, out: impl AsRef<Path>) -> Result<SynthOutput> {
    cfg.validate()?;
    let out = out.as_ref();
    let clip_dir = out.join("clips");
    fs::create_dir_all(&clip_dir).map_err(|e| Error::io(&clip_dir, e))?;
    let classes = cfg.classes();
    let jobs: Vec<(usize, usize)> = (0..classes).flat_map(|c| (0..cfg.clips_per_class).map(move |i| (c, i))).collect();
    let items: Vec<LabeledItem> = jobs
        .par_iter()
        .map(|&(c, i)| {
            let rel = PathBuf::from("clips").join(format!("c{c}_{i:04}.wav"));
            write_wav_pcm16(out.join(&rel), &synth_clip(cfg, c, i))?;
            Ok(LabeledItem { path: rel, labels: vec![c] })
        })
        .collect::<Result<_>>()?;

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut rng = stream_rng(cfg.seed, Stream::Synth, u64::MAX);
    for c in 0..classes {
        let mut of_class: Vec<&LabeledItem> = items.iter().filter(|it| it.labels[0] == c).collect();
        of_class.shuffle(&mut rng);
        let cut = (of_class.len() as f64 * cfg.train_fraction).round() as usize;
        train.extend(of_class[..cut].iter().map(|&it| it.clone()));
        test.extend(of_class[cut..].iter().map(|&it| it.clone()));
    }
    train.shuffle(&mut rng);

    let dataset = LabeledDataset {
        task: cfg.kind.name().to_string(),
        task_kind: TaskKind::SingleLabel,
        num_classes: classes,
        train,
        test,
    };
    let dataset_path = out.join("dataset.json");
    write_dataset(&dataset_path, &dataset)?;
    let pretrain_manifest = out.join("pretrain.json");
    let entries: Vec<ManifestEntry> = dataset
        .train
        .iter()
        .map(|it| ManifestEntry {
            path: it.path.clone(),
            duration: cfg.samples() as f64 / f64::from(cfg.sample_rate),
        })
        .collect();
    write_manifest(&pretrain_manifest, &entries)?;
    // files store paths relative to `out`; the returned copy is usable as is
    let mut dataset = dataset;
    for item in dataset.train.iter_mut().chain(dataset.test.iter_mut()) {
        item.path = out.join(&item.path);
    }
    Ok(SynthOutput {
        dataset,
        dataset_path,
        pretrain_manifest,
    })
}
