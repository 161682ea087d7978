use std::fs;
use std::path::Path;

use asg_core::audio_io::load_wav;
use asg_core::augment::RirBank;
use asg_core::contrastive::{build_quadruple, nt_xent_loss, LossConfig, QuadrupleStreams, ViewLayout};
use asg_core::dsp::{save_spectrogram, Spectrogrammer};
use asg_core::eval::{make_synthetic_dataset, read_dataset, run_probe, ProbeConfig, ProbeMode, SynthConfig, SynthKind};
use asg_core::nn::Tensor;
use asg_core::oracle::{gradient_check, precision_check, nt_xent_brute_force, relative_error, GradCheckConfig};
use asg_core::rng::{sample_rng, stream_rng, Stream};
use asg_core::train::{load_checkpoint, load_recording, pretrain as run_pretrain, read_manifest, RunOptions, TrainConfig};
use asg_core::{Error, Precision, Scalar};
use rand::Rng as _;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// An error with its exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::ConfigConflict(_) | Error::Json(_) => {
                Failure::validation(e.to_string())
            }
            _ => Failure::runtime(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Reads a JSON config; every problem here is a validation error.
fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::runtime(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Outcome {
    fs::create_dir_all(path).map_err(|e| Failure::runtime(format!("cannot create {}: {e}", path.display())))
}

/// Loads a train config, resolving its manifest path against the config's
/// directory.
fn load_train_config(path: &Path, seed: Option<u64>) -> Result<TrainConfig, Failure> {
    let mut cfg: TrainConfig = read_json(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if cfg.manifest.as_os_str().is_empty() {
        return Err(Failure::validation(format!("{}: `manifest` is required", path.display())));
    }
    if cfg.manifest.is_relative() {
        if let Some(dir) = path.parent() {
            cfg.manifest = dir.join(&cfg.manifest);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn pretrain(config: &Path, out: &Path, seed: Option<u64>, deterministic: bool) -> Outcome {
    let cfg = load_train_config(config, seed)?;
    create_dir(out)?;
    write_json(&out.join("config.json"), &cfg)?;
    let opts = RunOptions {
        out_dir: Some(out.to_path_buf()),
        deterministic,
        workers: None,
    };
    let epochs = match cfg.precision {
        Precision::Single => run_pretrain::<f32>(&cfg, &opts)?.epochs,
        Precision::Double => run_pretrain::<f64>(&cfg, &opts)?.epochs,
    };
    for e in &epochs {
        println!("epoch {:>3}  loss {:.4}  ({:.1}s)", e.epoch, e.mean_loss, e.seconds);
    }
    println!("run written to {}", out.display());
    Ok(())
}

pub fn probe(
    checkpoint: &Path,
    dataset: &Path,
    mode: ProbeMode,
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    precision: Precision,
) -> Outcome {
    let mut cfg: ProbeConfig = match config {
        Some(p) => read_json(p)?,
        None => ProbeConfig::default(),
    };
    cfg.mode = mode;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    if !checkpoint.is_file() {
        return Err(Failure::validation(format!("checkpoint {} not found", checkpoint.display())));
    }
    let ds = read_dataset(dataset).map_err(|e| match e {
        Error::Io { .. } => Failure::validation(e.to_string()),
        other => other.into(),
    })?;
    let metrics = match precision {
        Precision::Single => run_probe::<f32>(&ds, &load_checkpoint(checkpoint)?, &cfg)?.0,
        Precision::Double => run_probe::<f64>(&ds, &load_checkpoint(checkpoint)?, &cfg)?.0,
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_json(out, &metrics)?;
    match (metrics.top1, metrics.map) {
        (Some(t), _) => println!("{} {:?}: top-1 {:.4}", metrics.task, metrics.mode, t),
        (_, Some(m)) => println!("{} {:?}: mAP {:.4}", metrics.task, metrics.mode, m),
        _ => {}
    }
    Ok(())
}

#[derive(Serialize)]
struct AugmentRecord {
    source: String,
    index: usize,
    seed: u64,
    epoch: usize,
    view: &'static str,
    file: String,
    transform: Option<String>,
    shift: Option<usize>,
}

pub fn augment(config: &Path, out: &Path, count: usize, seed: Option<u64>, epoch: usize) -> Outcome {
    let cfg = load_train_config(config, seed)?;
    let entries = read_manifest(&cfg.manifest).map_err(|e| Failure::validation(e.to_string()))?;
    create_dir(out)?;
    let front: Spectrogrammer<f32> = Spectrogrammer::new(cfg.stft, cfg.front_end)?;
    let bank: RirBank<f32> = if cfg.rir_bank_size == 0 {
        RirBank::empty()
    } else {
        RirBank::synthetic(cfg.rir_bank_size, cfg.stft.sample_rate, &mut stream_rng(cfg.seed, Stream::Init, 1))
    };
    let adv = cfg.asg_enabled.then_some(&cfg.adversarial);
    let mut records = Vec::new();
    for (i, entry) in entries.iter().enumerate().take(count) {
        let rec = load_recording::<f32>(&entry.path, cfg.stft.sample_rate)?;
        let mut streams = QuadrupleStreams {
            segments: sample_rng(cfg.seed, epoch, i, Stream::Segments),
            positive: sample_rng(cfg.seed, epoch, i, Stream::Positive),
            adversarial: sample_rng(cfg.seed, epoch, i, Stream::Adversarial),
        };
        let q = build_quadruple(&rec, cfg.segment_samples(), &cfg.positive, &bank, adv, &front, &mut streams)?;
        let applied = q.adv_applied;
        let views = [
            ("x", Some(&q.x), None),
            ("x_p", Some(&q.x_p), None),
            ("x_n", q.x_n.as_ref(), applied.map(|a| a.0)),
            ("x_pn", q.x_pn.as_ref(), applied.map(|a| a.1)),
        ];
        for (view, spec, how) in views {
            let Some(spec) = spec else { continue };
            let file = format!("{i:05}_{view}.asgs");
            save_spectrogram(spec, out.join(&file))?;
            records.push(AugmentRecord {
                source: entry.path.display().to_string(),
                index: i,
                seed: cfg.seed,
                epoch,
                view,
                file,
                transform: match (view, how) {
                    ("x_p", _) => Some("positive".to_string()),
                    (_, Some(a)) => Some(a.kind.tag().to_string()),
                    _ => None,
                },
                shift: how.and_then(|a| a.shift),
            });
        }
    }
    write_json(&out.join("manifest.json"), &records)?;
    println!("wrote {} views to {}", records.len(), out.display());
    Ok(())
}

pub fn dump_spectrogram(input: &Path, out: &Path, config: Option<&Path>) -> Outcome {
    let cfg: TrainConfig = match config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    cfg.stft.validate()?;
    let audio = load_wav::<f32>(input).map_err(|e| match e {
        Error::Io { .. } => Failure::validation(e.to_string()),
        other => other.into(),
    })?;
    let audio = asg_core::audio_io::resample(&audio, cfg.stft.sample_rate)?;
    let spec = Spectrogrammer::<f32>::new(cfg.stft, cfg.front_end)?.compute(&audio)?;
    save_spectrogram(&spec, out)?;
    let (f, t) = spec.shape();
    println!("{f}x{t} spectrogram written to {}", out.display());
    Ok(())
}

pub fn synth(kind: SynthKind, out: &Path, seed: u64, clips_per_class: Option<usize>, duration: Option<f64>) -> Outcome {
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        kind,
        seed,
        clips_per_class: clips_per_class.unwrap_or(defaults.clips_per_class),
        duration_secs: duration.unwrap_or(defaults.duration_secs),
        ..defaults
    };
    let made = make_synthetic_dataset(&cfg, out)?;
    println!(
        "{}: {} train / {} test clips, dataset {}, pretrain manifest {}",
        made.dataset.task,
        made.dataset.train.len(),
        made.dataset.test.len(),
        made.dataset_path.display(),
        made.pretrain_manifest.display()
    );
    Ok(())
}

pub fn grad_check(precision: Precision, seed: u64, tolerance: Option<f64>) -> Outcome {
    let (report, tol) = match precision {
        Precision::Double => {
            let cfg = GradCheckConfig {
                seed,
                ..Default::default()
            };
            (gradient_check::<f64>(&cfg)?, tolerance.unwrap_or(1e-5))
        }
        Precision::Single => {
            // finite differences are meaningless in f32; compare against the
            // f64 analytic gradients instead
            let cfg = GradCheckConfig {
                seed,
                abs_floor: 1e-2,
                ..Default::default()
            };
            (precision_check(&cfg)?, tolerance.unwrap_or(1e-2))
        }
    };
    for (name, err) in &report.per_tensor {
        println!("{name:<32} {err:.3e}");
    }
    println!(
        "max relative error {:.3e} at {}[{}] over {} parameters ({} skipped at kinks)",
        report.max_rel_err, report.worst_param, report.worst_index, report.checked, report.skipped
    );
    if report.max_rel_err < tol {
        Ok(())
    } else {
        Err(Failure::runtime(format!("max relative error {:.3e} exceeds {tol:.1e}", report.max_rel_err)))
    }
}

pub fn loss_oracle(n: usize, trials: usize, dim: usize, seed: u64, tolerance: f64) -> Outcome {
    if n == 0 || dim == 0 || trials == 0 {
        return Err(Failure::validation("--n, --dim and --trials must be >= 1"));
    }
    let layout = ViewLayout::quadruple(n);
    let cfg = LossConfig::default();
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let mut rng = stream_rng(seed, Stream::Probe, trial as u64);
        let m = layout.total();
        let z = Tensor::new(vec![m, dim], (0..m * dim).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        let (fast, _) = nt_xent_loss(&z, &layout, &cfg)?;
        let (slow, _) = nt_xent_brute_force(&z, &layout, cfg.temperature);
        worst = worst.max(relative_error(fast.as_f64(), slow, f64::MIN_POSITIVE));
    }
    println!("N={n}, {trials} trials: max relative error {worst:.3e}");
    if worst <= tolerance {
        Ok(())
    } else {
        Err(Failure::runtime(format!("max relative error {worst:.3e} exceeds {tolerance:.1e}")))
    }
}
