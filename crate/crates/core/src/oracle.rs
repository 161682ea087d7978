//! Slow reference implementations used to cross-check the fast paths.
//!
//! Nothing here shares code with the implementations it checks: the DFT is a
//! direct sum, the loss is an explicit double loop over the per-pair formula, and
//! gradients come from central finite differences.

use std::f64::consts::PI;

use rand::Rng as _;

use crate::audio_io::AudioBuffer;
use crate::contrastive::{nt_xent_loss, LossConfig, ViewLayout};
use crate::dsp::{StftConfig, WindowKind};
use crate::error::Result;
use crate::nn::{EncoderConfig, Network, ProjectionConfig, Tensor};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

/// Direct `O(L^2)` DFT magnitude per frame, same framing convention as the
/// STFT (reflect pad of half a window, hop framing).
pub fn naive_stft_magnitude(samples: &[f64], cfg: &StftConfig) -> (usize, usize, Vec<f64>) {
    let n = samples.len();
    let win = cfg.window_length;
    let pad = win / 2;
    let padded_at = |i: usize| -> f64 {
        // index into the virtual padded signal
        if i < pad {
            samples[pad - i]
        } else if i - pad < n {
            samples[i - pad]
        } else {
            samples[2 * n - 2 - (i - pad)]
        }
    };
    let window = |j: usize| match cfg.window {
        WindowKind::Hann => (PI * j as f64 / win as f64).sin().powi(2),
        WindowKind::Rectangular => 1.0,
    };
    let frames = n / cfg.hop_length;
    let bins = cfg.fft_length / 2 + 1;
    let l = cfg.fft_length;
    let twiddle: Vec<(f64, f64)> = (0..l)
        .map(|k| {
            let ang = -2.0 * PI * k as f64 / l as f64;
            (ang.cos(), ang.sin())
        })
        .collect();
    let mut out = vec![0.0; bins * frames];
    for t in 0..frames {
        let frame: Vec<f64> = (0..win).map(|j| padded_at(t * cfg.hop_length + j) * window(j)).collect();
        for f in 0..bins {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in frame.iter().enumerate() {
                let (c, s) = twiddle[(f * j) % l];
                re += v * c;
                im += v * s;
            }
            out[f * frames + t] = re.hypot(im);
        }
    }
    (bins, frames, out)
}

/// Explicit NT-Xent: returns the mean loss and every per-anchor term.
pub fn nt_xent_brute_force(z: &Tensor<f64>, layout: &ViewLayout, tau: f64) -> (f64, Vec<f64>) {
    let m = z.dim(0);
    let d = z.dim(1);
    let row = |i: usize| &z.data()[i * d..(i + 1) * d];
    let s = |a: usize, b: usize| -> f64 {
        let dot: f64 = row(a).iter().zip(row(b)).map(|(x, y)| x * y).sum();
        let na: f64 = row(a).iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = row(b).iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let mut terms = Vec::with_capacity(m);
    for i in 0..m {
        let j = layout.positive_of(i);
        // -ln(num / den) = ln(1 + sum_{k != i, j} exp((s_ik - s_ij) / tau)),
        // written with ln_1p so tiny losses keep their relative precision
        let mut rest = 0.0;
        for k in 0..m {
            if k != i && k != j {
                rest += ((s(i, k) - s(i, j)) / tau).exp();
            }
        }
        terms.push(rest.ln_1p());
    }
    let mean = terms.iter().sum::<f64>() / m as f64;
    (mean, terms)
}

/// Brute-force top-1: counts items whose label has the (first) largest score.
pub fn top1_brute_force(scores: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut correct = 0usize;
    for (row, &label) in scores.iter().zip(labels) {
        let mut best = 0;
        for c in 1..row.len() {
            if row[c] > row[best] {
                best = c;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    correct as f64 / labels.len() as f64
}

/// Brute-force mAP: for every positive item, precision is counted over all
/// items ranked at or above it (ties ranked by item index).
pub fn map_brute_force(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> f64 {
    let classes = scores.first().map_or(0, Vec::len);
    let n = scores.len();
    let mut aps = Vec::new();
    for c in 0..classes {
        let positives: Vec<usize> = (0..n).filter(|&i| labels[i][c]).collect();
        if positives.is_empty() {
            continue;
        }
        let ranks_above = |i: usize| -> Vec<usize> {
            (0..n)
                .filter(|&j| scores[j][c] > scores[i][c] || (scores[j][c] == scores[i][c] && j <= i))
                .collect()
        };
        // precision at each positive, accumulated in rank order so the sum
        // rounds the same way as a ranked sweep
        let mut precisions: Vec<(usize, f64)> = positives
            .iter()
            .map(|&i| {
                let above = ranks_above(i);
                let hits = above.iter().filter(|&&j| labels[j][c]).count();
                (above.len(), hits as f64 / above.len() as f64)
            })
            .collect();
        precisions.sort_by_key(|&(rank, _)| rank);
        let sum: f64 = precisions.iter().map(|&(_, p)| p).sum();
        aps.push(sum / positives.len() as f64);
    }
    if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}

/// Settings for the end-to-end finite-difference check.
#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub channels: Vec<usize>,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub input_size: usize,
    pub samples: usize,
    pub temperature: f64,
    /// Step is `step * max(1, |w|)`.
    pub step: f64,
    /// Absolute floor in the relative-error denominator.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            channels: vec![4, 8],
            hidden_dim: 16,
            output_dim: 8,
            input_size: 32,
            samples: 4,
            temperature: 0.1,
            step: 1e-5,
            abs_floor: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
    /// Coordinates skipped because the difference stencil crossed a kink.
    pub skipped: usize,
    pub per_tensor: Vec<(String, f64)>,
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Seeded network (with perturbed affine parameters) and input batch shared
/// by the gradient checks. Draws are identical across precisions.
fn grad_check_setup<S: Scalar>(cfg: &GradCheckConfig) -> Result<(Network<S>, Tensor<S>, ViewLayout)> {
    let enc = EncoderConfig {
        channels: cfg.channels.clone(),
        standardize_input: false,
    };
    let proj = ProjectionConfig {
        hidden_dim: cfg.hidden_dim,
        output_dim: cfg.output_dim,
    };
    let mut rng = rng_from_seed(cfg.seed);
    let mut net: Network<S> = Network::new(enc, proj, &mut rng)?;
    // break the gamma = 1, beta = 0 symmetry so every parameter is exercised
    for (name, t) in net.state_mut().names.clone().iter().zip(net.state_mut().params.iter_mut()) {
        if name.ends_with("gamma") || name.ends_with("beta") || name.ends_with("bias") {
            for v in t.data_mut() {
                *v += S::lit(rng.gen_range(-0.2..0.2));
            }
        }
    }
    let layout = ViewLayout::quadruple(cfg.samples);
    let views = layout.total();
    let side = cfg.input_size;
    let x = Tensor::new(
        vec![views, 1, side, side],
        (0..views * side * side).map(|_| S::lit(rng.gen_range(-1.0..1.0))).collect(),
    )?;
    Ok((net, x, layout))
}

fn analytic_gradients<S: Scalar>(cfg: &GradCheckConfig) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (mut net, x, layout) = grad_check_setup::<S>(cfg)?;
    let (_, z) = net.forward(&x)?;
    let (_, dz) = nt_xent_loss(&z, &layout, &LossConfig { temperature: cfg.temperature })?;
    let grads = net.backward(&dz)?;
    let values = grads.tensors.iter().map(|t| t.data().iter().map(|v| v.as_f64()).collect()).collect();
    Ok((net.state().names.clone(), values))
}

/// Compares analytic gradients of the full encoder + head + NT-Xent stack
/// against central differences for every parameter scalar (train-mode batch
/// norm). Coordinates whose stencil changes the ReLU or max-pool branch are
/// skipped and counted.
/// Only meaningful in `f64`; see [`precision_check`] for `f32`.
pub fn gradient_check<S: Scalar>(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let (mut net, x, layout) = grad_check_setup::<S>(cfg)?;
    let loss_cfg = LossConfig {
        temperature: cfg.temperature,
    };
    let loss_of = |net: &mut Network<S>| -> Result<(f64, Tensor<S>)> {
        let (_, z) = net.forward(&x)?;
        let (loss, dz) = nt_xent_loss(&z, &layout, &loss_cfg)?;
        Ok((loss.as_f64(), dz))
    };
    let (_, dz) = loss_of(&mut net)?;
    let pattern = net.activation_pattern();
    let grads = net.backward(&dz)?;

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
        skipped: 0,
        per_tensor: Vec::new(),
    };
    let names = net.state().names.clone();
    for (p, name) in names.iter().enumerate() {
        let mut tensor_max: f64 = 0.0;
        for i in 0..net.state().params[p].len() {
            let w = net.state().params[p].data()[i];
            let h = S::lit(cfg.step * w.as_f64().abs().max(1.0));
            net.state_mut().params[p].data_mut()[i] = w + h;
            let plus = loss_of(&mut net)?.0;
            let smooth_plus = net.activation_pattern() == pattern;
            net.state_mut().params[p].data_mut()[i] = w - h;
            let minus = loss_of(&mut net)?.0;
            let smooth_minus = net.activation_pattern() == pattern;
            net.state_mut().params[p].data_mut()[i] = w;
            if !(smooth_plus && smooth_minus) {
                report.skipped += 1;
                continue;
            }
            // divide by the step actually taken after rounding
            let taken = ((w + h) - (w - h)).as_f64();
            let fd = (plus - minus) / taken;
            let err = relative_error(grads.tensors[p].data()[i].as_f64(), fd, cfg.abs_floor);
            tensor_max = tensor_max.max(err);
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst_param = name.clone();
                report.worst_index = i;
            }
            report.checked += 1;
        }
        report.per_tensor.push((name.clone(), tensor_max));
    }
    Ok(report)
}

/// Compares single-precision analytic gradients against double-precision
/// ones for the same seeded network and batch.
pub fn precision_check(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let (names, single) = analytic_gradients::<f32>(cfg)?;
    let (_, double) = analytic_gradients::<f64>(cfg)?;
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
        skipped: 0,
        per_tensor: Vec::new(),
    };
    for ((name, a), b) in names.iter().zip(&single).zip(&double) {
        let mut tensor_max: f64 = 0.0;
        for (i, (&a, &b)) in a.iter().zip(b).enumerate() {
            let err = relative_error(a, b, cfg.abs_floor);
            tensor_max = tensor_max.max(err);
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst_param = name.clone();
                report.worst_index = i;
            }
            report.checked += 1;
        }
        report.per_tensor.push((name.clone(), tensor_max));
    }
    Ok(report)
}

/// Random signal helper for the STFT oracle.
pub fn random_signal(len: usize, sample_rate: u32, seed: u64) -> AudioBuffer<f64> {
    let mut rng = rng_from_seed(seed);
    AudioBuffer {
        samples: (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        sample_rate,
    }
}
