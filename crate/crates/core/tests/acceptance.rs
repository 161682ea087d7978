//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion.
//!
//! Usage: `cargo test -p asg-core --test acceptance [-- A1 A3 ...] [--strict]`.
//! Without `--strict` (or `ASG_ACCEPTANCE_STRICT=1`) the run exits non-zero
//! only when a criterion outside [`REPORT_ONLY`] fails; report-only criteria
//! still print their measured values and verdict.

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use asg_core::audio_io::AudioBuffer;
use asg_core::augment::{adversarial_view, flip_freq, flip_time, scroll_freq, scroll_time, AdvConfig, AdvKind};
use asg_core::contrastive::{nt_xent_loss, LossConfig, ViewLayout};
use asg_core::dsp::{stft_magnitude, FrontEnd, Spectrogram, Spectrogrammer, StftConfig};
use asg_core::eval::{
    average_precision, make_synthetic_dataset, mean_average_precision, run_probe, top1_accuracy, ProbeConfig, SynthConfig,
    SynthKind, SynthOutput,
};
use asg_core::nn::Tensor;
use asg_core::optim::{lars_update, lr_at, peak_lr, LarsConfig, ScheduleConfig};
use asg_core::oracle::{
    gradient_check, map_brute_force, naive_stft_magnitude, nt_xent_brute_force, random_signal, top1_brute_force,
    GradCheckConfig,
};
use asg_core::rng::rng_from_seed;
use asg_core::train::{pretrain, PretrainReport, RunOptions, TrainConfig};
use rand::Rng as _;

/// Criteria whose failure is printed but does not fail the run.
const REPORT_ONLY: &[&str] = &["A6"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Bypasses libtest-style capture so lines land in the log as they finish.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let strict = args.iter().any(|a| a == "--strict") || std::env::var("ASG_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let selected: Vec<&str> = args.iter().filter(|a| a.starts_with('A')).map(String::as_str).collect();
    // libtest flags such as --nocapture or --test-threads are accepted and ignored

    let criteria: [(&str, &str, fn() -> Outcome); 9] = [
        ("A1", "STFT matches direct DFT; 48000 samples -> 257x300", a1_stft),
        ("A2", "NT-Xent matches brute force; identical views give ln 3", a2_loss),
        ("A3", "end-to-end gradient check (f64)", a3_gradients),
        ("A4", "positional transform algebra", a4_transforms),
        ("A5", "tone dataset: loss halves, frozen probe >= 90%", a5_training),
        ("A6", "adversarial sets beat the no-ASG baseline by >= 5 points", a6_ablation),
        ("A7", "schedule endpoints and LARS special cases", a7_optimizer),
        ("A8", "top-1 and mAP match brute force", a8_metrics),
        ("A9", "deterministic checkpoints and byte-stable round trip", a9_reproducibility),
    ];
    let mut hard_failures = 0;
    let mut soft_failures = 0;
    for (id, title, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        emit(&format!(
            "{verdict} {id} {title}: {} [{:.1}s]",
            result.detail,
            t0.elapsed().as_secs_f64()
        ));
        if !result.pass {
            if REPORT_ONLY.contains(&id) && !strict {
                soft_failures += 1;
            } else {
                hard_failures += 1;
            }
        }
    }
    emit(&format!(
        "acceptance: {hard_failures} failing, {soft_failures} failing report-only ({})",
        REPORT_ONLY.join(", ")
    ));
    if hard_failures > 0 {
        std::process::exit(1);
    }
}

fn a1_stft() -> Outcome {
    let cfg = StftConfig::default();
    let mut rng = rng_from_seed(11);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let len = rng.gen_range(cfg.sample_rate as usize..=3 * cfg.sample_rate as usize);
        let signal = random_signal(len, cfg.sample_rate, 1000 + trial);
        let fast = stft_magnitude(&signal, &cfg).expect("stft");
        let (bins, frames, slow) = naive_stft_magnitude(&signal.samples, &cfg);
        assert_eq!((fast.bins, fast.frames), (bins, frames));
        let peak = slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = fast.values.iter().zip(&slow).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(diff / peak);
    }
    let buf = AudioBuffer::new(vec![0.0f64; 48_000], cfg.sample_rate).expect("buffer");
    let shape = Spectrogrammer::<f64>::new(cfg, FrontEnd::Linear)
        .expect("front end")
        .compute(&buf)
        .expect("spectrogram")
        .shape();
    outcome(
        worst < 1e-6 && shape == (257, 300),
        format!("max rel err {worst:.2e} (< 1e-6), 48000 samples -> {}x{}", shape.0, shape.1),
    )
}

fn a2_loss() -> Outcome {
    let cfg = LossConfig::default();
    let mut rng = rng_from_seed(22);
    let mut worst: f64 = 0.0;
    for n in [1, 2, 4] {
        let layout = ViewLayout::quadruple(n);
        let m = layout.total();
        for _ in 0..100 {
            let d = rng.gen_range(2..=32);
            let z = Tensor::new(vec![m, d], (0..m * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("tensor");
            let (fast, _) = nt_xent_loss(&z, &layout, &cfg).expect("loss");
            let (slow, _) = nt_xent_brute_force(&z, &layout, cfg.temperature);
            worst = worst.max((fast - slow).abs() / slow.abs());
        }
    }
    let same = Tensor::new(vec![4, 3], [0.3, -1.2, 0.5].repeat(4)).expect("tensor");
    let (identical, _) = nt_xent_loss(&same, &ViewLayout::quadruple(1), &cfg).expect("loss");
    let ln3 = 3.0f64.ln();
    outcome(
        worst < 1e-10 && (identical - ln3).abs() < 1e-12,
        format!("max rel err {worst:.2e} (< 1e-10), identical views {identical:.15} vs ln 3 {ln3:.15}"),
    )
}

fn a3_gradients() -> Outcome {
    let cfg = GradCheckConfig::default();
    let report = gradient_check::<f64>(&cfg).expect("gradient check");
    outcome(
        report.max_rel_err < 1e-5,
        format!(
            "max rel err {:.2e} (< 1e-5) at {}[{}], {} coordinates checked, {} skipped at ReLU/max-pool kinks",
            report.max_rel_err, report.worst_param, report.worst_index, report.checked, report.skipped
        ),
    )
}

fn sorted_values(spec: &Spectrogram<f64>) -> Vec<f64> {
    let mut v = spec.values.clone();
    v.sort_by(f64::total_cmp);
    v
}

fn a4_transforms() -> Outcome {
    let mut rng = rng_from_seed(44);
    let sf_only = AdvConfig::only(&[AdvKind::ScrollFreq]);
    let mut failures = Vec::new();
    for case in 0..1000 {
        let bins = rng.gen_range(60..=96);
        let frames = rng.gen_range(1..=48);
        let rows: Vec<Vec<f64>> = (0..bins).map(|_| (0..frames).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let spec = Spectrogram::from_rows(&rows).expect("spectrogram");
        let l_f = rng.gen_range(1..bins);
        let l_t = if frames > 1 { rng.gen_range(1..frames) } else { 0 };
        let ft = flip_time(&spec);
        let ff = flip_freq(&spec);
        let sf = scroll_freq(&spec, l_f).expect("sf");
        let st = scroll_time(&spec, l_t).expect("st");
        let st_back = if l_t == 0 { 0 } else { frames - l_t };
        let checks = [
            ("FT.FT", flip_time(&ft) == spec),
            ("FF.FF", flip_freq(&ff) == spec),
            ("SF inverse", scroll_freq(&sf, bins - l_f).expect("sf") == spec),
            ("ST inverse", scroll_time(&st, st_back).expect("st") == spec),
            (
                "multiset",
                [&ft, &ff, &sf, &st].iter().all(|t| sorted_values(t) == sorted_values(&spec)),
            ),
        ];
        for (name, ok) in checks {
            if !ok {
                failures.push(format!("case {case}: {name}"));
            }
        }
        let (_, applied) = adversarial_view(&spec, &sf_only, &mut rng).expect("sf draw");
        let shift = applied.shift.unwrap_or(0);
        if !(30..=bins - 30).contains(&shift) {
            failures.push(format!("case {case}: SF draw {shift} outside [30, {}]", bins - 30));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "1000 cases, 0 failures (FT/FF involution, SF/ST inverses, multiset, SF draws in [30, F-30])".to_string()
        } else {
            format!("{} failures, first: {}", failures.len(), failures[0])
        },
    )
}

fn synth_dataset(kind: SynthKind, dir: &Path) -> SynthOutput {
    let cfg = SynthConfig {
        kind,
        ..SynthConfig::default()
    };
    make_synthetic_dataset(&cfg, dir).expect("synthetic dataset")
}

fn desk_pretrain(data: &SynthOutput, seed: u64, adversarial: Option<&[AdvKind]>) -> PretrainReport<f32> {
    let mut cfg = TrainConfig::desk(&data.pretrain_manifest);
    cfg.seed = seed;
    match adversarial {
        Some(kinds) => cfg.adversarial = AdvConfig::only(kinds),
        None => cfg.asg_enabled = false,
    }
    assert_eq!(cfg.peak_lr(), 0.0375);
    pretrain::<f32>(&cfg, &RunOptions::default()).expect("pretrain")
}

fn frozen_top1(data: &SynthOutput, report: &PretrainReport<f32>, seed: u64) -> f64 {
    let cfg = ProbeConfig {
        seed,
        ..ProbeConfig::default()
    };
    let (metrics, _) = run_probe(&data.dataset, &report.checkpoint, &cfg).expect("probe");
    metrics.top1.expect("single-label task")
}

fn a5_training() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    let data = synth_dataset(SynthKind::Tone, dir.path());
    let clips = data.dataset.train.len() + data.dataset.test.len();
    let report = desk_pretrain(&data, 0, Some(&AdvConfig::default().enabled));
    let first = report.epochs.first().expect("epochs").mean_loss;
    let last = report.epochs.last().expect("epochs").mean_loss;
    let top1 = frozen_top1(&data, &report, 0);
    let minutes = t0.elapsed().as_secs_f64() / 60.0;
    let ratio = last / first;
    outcome(
        clips == 2000 && ratio <= 0.5 && top1 >= 0.9 && minutes < 30.0,
        format!(
            "{clips} clips, loss {first:.3} -> {last:.3} (ratio {ratio:.3} <= 0.5), frozen top-1 {:.1}% (>= 90%), {minutes:.1} min (< 30)",
            100.0 * top1
        ),
    )
}

fn a6_ablation() -> Outcome {
    let seeds = [0u64, 1, 2];
    let mut lines = Vec::new();
    let mut gaps = Vec::new();
    for (kind, kinds) in [
        (SynthKind::Shift, &[AdvKind::FlipFreq, AdvKind::ScrollFreq][..]),
        (SynthKind::Chirp, &[AdvKind::FlipTime][..]),
    ] {
        let dir = tempfile::tempdir().expect("tempdir");
        let data = synth_dataset(kind, dir.path());
        let (mut base, mut asg) = (Vec::new(), Vec::new());
        for &seed in &seeds {
            base.push(frozen_top1(&data, &desk_pretrain(&data, seed, None), seed));
            asg.push(frozen_top1(&data, &desk_pretrain(&data, seed, Some(kinds)), seed));
        }
        let mean = |v: &[f64]| 100.0 * v.iter().sum::<f64>() / v.len() as f64;
        let gap = mean(&asg) - mean(&base);
        let tags: Vec<&str> = kinds.iter().map(|k| k.tag()).collect();
        let pct = |v: &[f64]| v.iter().map(|x| format!("{:.1}", 100.0 * x)).collect::<Vec<_>>().join("/");
        lines.push(format!(
            "{}: {{{}}} {} vs none {} -> {gap:+.2} pts",
            kind.name(),
            tags.join(","),
            pct(&asg),
            pct(&base)
        ));
        gaps.push(gap);
    }
    outcome(gaps.iter().all(|&g| g >= 5.0), format!("{} (need >= +5 each)", lines.join("; ")))
}

fn a7_optimizer() -> Outcome {
    let sched = ScheduleConfig {
        warmup_epochs: 2,
        total_epochs: 10,
        steps_per_epoch: 62,
    };
    let peak = peak_lr(32);
    let start = lr_at(0, &sched, peak);
    let at_warm = lr_at(sched.warmup_steps(), &sched, peak);
    let end = lr_at(sched.total_steps(), &sched, peak);
    let schedule_ok = start == 0.0 && at_warm == peak && end.abs() < 1e-12 && peak_lr(512) == 0.6;

    // momentum 0, trust 1 (excluded path), wd 0 is plain SGD
    let cfg = LarsConfig {
        momentum: 0.0,
        weight_decay: 0.0,
        ..LarsConfig::default()
    };
    let mut rng = rng_from_seed(77);
    let mut sgd_err: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(1..64);
        let lr = rng.gen_range(0.0..1.0);
        let w0: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut w = w0.clone();
        let mut m = vec![0.0; n];
        lars_update(&mut w, &g, &mut m, lr, &cfg, true);
        for ((a, w0), g) in w.iter().zip(&w0).zip(&g) {
            sgd_err = sgd_err.max((a - (w0 - lr * g)).abs());
        }
    }

    let scalar_cfg = LarsConfig {
        momentum: 0.0,
        weight_decay: 0.0,
        trust_coefficient: 0.001,
        ..LarsConfig::default()
    };
    let (mut w, mut m) = (vec![2.0f64], vec![0.0]);
    lars_update(&mut w, &[1.0], &mut m, 1.0, &scalar_cfg, false);
    let scalar_ok = (w[0] - 1.998).abs() < 1e-8;
    outcome(
        schedule_ok && sgd_err <= 1e-12 && scalar_ok,
        format!(
            "lr(0) = {start}, lr(warmup) = {at_warm} (peak {peak}), lr(final) = {end:.1e}; LARS vs SGD max diff {sgd_err:.1e} (<= 1e-12); scalar w' = {:.9}",
            w[0]
        ),
    )
}

fn a8_metrics() -> Outcome {
    let mut rng = rng_from_seed(88);
    let mut mismatches = 0;
    for case in 0..1000 {
        let n = rng.gen_range(1..=12);
        let classes = rng.gen_range(1..=5);
        // half the cases use a coarse grid to force ties
        let coarse = case % 2 == 0;
        let scores: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..classes)
                    .map(|_| if coarse { rng.gen_range(0..4) as f64 / 4.0 } else { rng.gen_range(0.0..1.0) })
                    .collect()
            })
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
        if top1_accuracy(&scores, &labels).expect("top-1") != top1_brute_force(&scores, &labels) {
            mismatches += 1;
        }
        let multi: Vec<Vec<bool>> = (0..n).map(|_| (0..classes).map(|_| rng.gen_bool(0.4)).collect()).collect();
        if !multi.iter().flatten().any(|&b| b) {
            continue;
        }
        if mean_average_precision(&scores, &multi).expect("mAP") != map_brute_force(&scores, &multi) {
            mismatches += 1;
        }
    }
    let hand = average_precision(&[0.9, 0.8, 0.7], &[true, false, true]).expect("positives");
    outcome(
        mismatches == 0 && (hand - 0.8333).abs() <= 1e-4,
        format!("1000 instances, {mismatches} mismatches; hand AP {hand:.4} (0.8333 +- 1e-4)"),
    )
}

fn a9_reproducibility() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let data = make_synthetic_dataset(
        &SynthConfig {
            kind: SynthKind::Tone,
            clips_per_class: 8,
            duration_secs: 1.0,
            ..SynthConfig::default()
        },
        dir.path().join("data"),
    )
    .expect("dataset");
    let mut cfg = TrainConfig::desk(&data.pretrain_manifest);
    cfg.batch_size = 8;
    cfg.epochs = 2;
    cfg.warmup_epochs = 1;
    cfg.segment_frames = 32;
    let run = |name: &str| -> Vec<u8> {
        let opts = RunOptions {
            out_dir: Some(dir.path().join(name)),
            deterministic: true,
            workers: None,
        };
        pretrain::<f32>(&cfg, &opts).expect("pretrain");
        std::fs::read(dir.path().join(name).join("checkpoints/epoch-001.asgc")).expect("checkpoint")
    };
    let (a, b) = (run("a"), run("b"));
    let ckpt = asg_core::train::read_checkpoint::<f32, _>(&a[..]).expect("read");
    let mut resaved = Vec::new();
    asg_core::train::write_checkpoint(&ckpt, &mut resaved).expect("write");
    outcome(
        a == b && resaved == a,
        format!(
            "epoch-1 checkpoints identical: {} ({} bytes); save->load->save identical: {}",
            a == b,
            a.len(),
            resaved == a
        ),
    )
}
