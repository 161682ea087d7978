//! `asg`: pretraining, probing, augmentation dumps, synthetic corpora and
//! self-checks.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use asg_core::eval::{ProbeMode, SynthKind};
use asg_core::Precision;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "asg", version, about = "Contrastive audio pretraining with adversarial positional samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pretrain an encoder; writes config.json, metrics.jsonl and checkpoints/.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Single augmentation worker, for bitwise-reproducible runs.
        #[arg(long)]
        deterministic: bool,
    },
    /// Train and evaluate a linear probe or fine-tune on a labeled dataset.
    Probe {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "frozen")]
        mode: ProbeMode,
        #[arg(long)]
        out: PathBuf,
        /// Optional probe config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "single")]
        precision: Precision,
    },
    /// Materialize training quadruples as ASGS files plus a JSON manifest.
    Augment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of recordings to process (from the start of the manifest).
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        epoch: usize,
    },
    /// Write the log spectrogram of a WAV file in ASGS format.
    DumpSpectrogram {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Train config supplying STFT and front-end settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a synthetic labeled corpus.
    Synth {
        #[arg(long)]
        spec: SynthKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        clips_per_class: Option<usize>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Finite-difference check of every parameter gradient (f64), or f32 against
    /// f64 analytic gradients.
    GradCheck {
        #[arg(long, default_value = "double")]
        precision: Precision,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to 1e-5 (double) or 1e-2 (single).
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Compare NT-Xent against a brute-force double loop on random inputs.
    LossOracle {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Pretrain {
            config,
            out,
            seed,
            deterministic,
        } => commands::pretrain(&config, &out, seed, deterministic),
        Command::Probe {
            checkpoint,
            dataset,
            mode,
            out,
            config,
            seed,
            precision,
        } => commands::probe(&checkpoint, &dataset, mode, &out, config.as_deref(), seed, precision),
        Command::Augment {
            config,
            out,
            count,
            seed,
            epoch,
        } => commands::augment(&config, &out, count, seed, epoch),
        Command::DumpSpectrogram { input, out, config } => commands::dump_spectrogram(&input, &out, config.as_deref()),
        Command::Synth {
            spec,
            out,
            seed,
            clips_per_class,
            duration,
        } => commands::synth(spec, &out, seed, clips_per_class, duration),
        Command::GradCheck {
            precision,
            seed,
            tolerance,
        } => commands::grad_check(precision, seed, tolerance),
        Command::LossOracle {
            n,
            trials,
            dim,
            seed,
            tolerance,
        } => commands::loss_oracle(n, trials, dim, seed, tolerance),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
