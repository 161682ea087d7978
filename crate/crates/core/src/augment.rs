//! Positive (waveform) and adversarial (spectrogram) views.
//!
//! Positive views keep the semantics of a clip: room reverberation, a volume
//! change and additive uniform noise. Adversarial views keep the local
//! spectro-temporal patterns but move them: flips along either axis and
//! circular scrolls. Every adversarial transform is a permutation of cells.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::dsp::Spectrogram;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositiveAugConfig {
    pub rir_probability: f64,
    pub volume_range_db: (f64, f64),
    pub volume_probability: f64,
    pub noise_max_intensity: f64,
    pub noise_probability: f64,
}

impl Default for PositiveAugConfig {
    fn default() -> Self {
        Self {
            rir_probability: 0.5,
            volume_range_db: (-10.0, 10.0),
            volume_probability: 1.0,
            noise_max_intensity: 0.03,
            noise_probability: 1.0,
        }
    }
}

impl PositiveAugConfig {
    /// Every transform switched off.
    pub fn identity() -> Self {
        Self {
            rir_probability: 0.0,
            volume_range_db: (0.0, 0.0),
            volume_probability: 0.0,
            noise_max_intensity: 0.0,
            noise_probability: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("rir_probability", self.rir_probability),
            ("volume_probability", self.volume_probability),
            ("noise_probability", self.noise_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        let (lo, hi) = self.volume_range_db;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidConfig(format!("volume range [{lo}, {hi}] dB is not a finite interval")));
        }
        if !(self.noise_max_intensity >= 0.0 && self.noise_max_intensity.is_finite()) {
            return Err(Error::InvalidConfig("noise_max_intensity must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Room impulse responses to draw from.
#[derive(Debug, Clone, Default)]
pub struct RirBank<S> {
    responses: Vec<AudioBuffer<S>>,
}

impl<S: Scalar> RirBank<S> {
    pub fn new(responses: Vec<AudioBuffer<S>>) -> Result<Self> {
        for (i, r) in responses.iter().enumerate() {
            if r.is_empty() {
                return Err(Error::InvalidArgument(format!("impulse response {i} is empty")));
            }
            if r.samples.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("impulse response {i}")));
            }
        }
        Ok(Self { responses })
    }

    pub fn empty() -> Self {
        Self { responses: Vec::new() }
    }

    /// Exponentially decaying white-noise responses with decay constants
    /// spread over `[0.05, 0.5]` s. Each response lasts three decay
    /// constants and starts with a unit direct-path tap.
    pub fn synthetic(count: usize, sample_rate: u32, rng: &mut Rng) -> Self {
        let responses = (0..count)
            .map(|i| {
                let frac = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
                let tau = 0.05 * (10f64).powf(frac);
                let len = ((3.0 * tau * f64::from(sample_rate)).round() as usize).max(1);
                let mut samples: Vec<S> = (0..len)
                    .map(|n| {
                        let t = n as f64 / f64::from(sample_rate);
                        S::lit(rng.gen_range(-1.0..=1.0) * 0.3 * (-t / tau).exp())
                    })
                    .collect();
                samples[0] = S::one();
                AudioBuffer { samples, sample_rate }
            })
            .collect();
        Self { responses }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&AudioBuffer<S>> {
        self.responses.get(i)
    }
}

/// Linear convolution truncated to `signal.len()`.
pub fn convolve_truncated<S: Scalar>(signal: &[S], kernel: &[S]) -> Vec<S> {
    let n = signal.len();
    let m = kernel.len().min(n);
    if n == 0 || m == 0 {
        return vec![S::zero(); n];
    }
    if m <= 64 {
        let mut out = vec![S::zero(); n];
        for (j, &k) in kernel[..m].iter().enumerate() {
            for (o, &x) in out[j..].iter_mut().zip(signal) {
                *o += k * x;
            }
        }
        return out;
    }
    let size = (n + m - 1).next_power_of_two();
    let mut planner = FftPlanner::<S>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let lift = |xs: &[S]| {
        let mut v: Vec<Complex<S>> = xs.iter().map(|&x| Complex::new(x, S::zero())).collect();
        v.resize(size, Complex::new(S::zero(), S::zero()));
        v
    };
    let mut a = lift(signal);
    let mut b = lift(&kernel[..m]);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x = *x * *y;
    }
    inv.process(&mut a);
    let scale = S::one() / S::from_usize_lossy(size);
    a[..n].iter().map(|c| c.re * scale).collect()
}

/// Convolves with a room response, keeps the input length and restores the
/// input's peak amplitude.
pub fn apply_rir<S: Scalar>(buf: &AudioBuffer<S>, rir: &AudioBuffer<S>) -> Result<AudioBuffer<S>> {
    if rir.is_empty() {
        return Err(Error::InvalidArgument("impulse response is empty".into()));
    }
    if rir.sample_rate != buf.sample_rate {
        return Err(Error::InvalidArgument(format!(
            "impulse response rate {} does not match audio rate {}",
            rir.sample_rate, buf.sample_rate
        )));
    }
    let mut samples = convolve_truncated(&buf.samples, &rir.samples);
    let in_peak = buf.peak();
    let out_peak = samples.iter().fold(S::zero(), |m, &v| m.max(v.abs()));
    if out_peak > S::zero() {
        let g = in_peak / out_peak;
        samples.iter_mut().for_each(|v| *v *= g);
    }
    Ok(AudioBuffer {
        samples,
        sample_rate: buf.sample_rate,
    })
}

pub fn db_to_gain(gain_db: f64) -> f64 {
    10f64.powf(gain_db / 20.0)
}

pub fn tune_volume<S: Scalar>(buf: &AudioBuffer<S>, gain_db: f64) -> AudioBuffer<S> {
    let g = S::lit(db_to_gain(gain_db));
    AudioBuffer {
        samples: buf.samples.iter().map(|&v| v * g).collect(),
        sample_rate: buf.sample_rate,
    }
}

/// Adds `Uniform[-a, a]` noise with `a ~ Uniform[0, max_intensity]` drawn once.
pub fn add_white_noise<S: Scalar>(buf: &AudioBuffer<S>, max_intensity: f64, rng: &mut Rng) -> AudioBuffer<S> {
    if max_intensity <= 0.0 {
        return buf.clone();
    }
    let a: f64 = rng.gen_range(0.0..=max_intensity);
    let samples = buf
        .samples
        .iter()
        .map(|&v| v + S::lit(if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 }))
        .collect();
    AudioBuffer {
        samples,
        sample_rate: buf.sample_rate,
    }
}

/// RIR, then volume, then noise, each gated by its probability.
pub fn positive_view<S: Scalar>(
    buf: &AudioBuffer<S>,
    cfg: &PositiveAugConfig,
    bank: &RirBank<S>,
    rng: &mut Rng,
) -> Result<AudioBuffer<S>> {
    let mut out = buf.clone();
    if rng.gen_bool(cfg.rir_probability) {
        if bank.is_empty() {
            return Err(Error::InvalidConfig("rir_probability > 0 needs a non-empty RIR bank".into()));
        }
        let rir = &bank.responses[rng.gen_range(0..bank.len())];
        out = apply_rir(&out, rir)?;
    }
    if rng.gen_bool(cfg.volume_probability) {
        let (lo, hi) = cfg.volume_range_db;
        let gain = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        out = tune_volume(&out, gain);
    }
    if rng.gen_bool(cfg.noise_probability) {
        out = add_white_noise(&out, cfg.noise_max_intensity, rng);
    }
    Ok(out)
}

/// Positional transform families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AdvKind {
    /// Flip along time.
    #[serde(rename = "FT")]
    FlipTime,
    /// Flip along frequency.
    #[serde(rename = "FF")]
    FlipFreq,
    /// Circular scroll along frequency.
    #[serde(rename = "SF")]
    ScrollFreq,
    /// Circular scroll along time.
    #[serde(rename = "ST")]
    ScrollTime,
}

impl AdvKind {
    pub const ALL: [AdvKind; 4] = [AdvKind::FlipTime, AdvKind::FlipFreq, AdvKind::ScrollFreq, AdvKind::ScrollTime];

    pub fn tag(self) -> &'static str {
        match self {
            AdvKind::FlipTime => "FT",
            AdvKind::FlipFreq => "FF",
            AdvKind::ScrollFreq => "SF",
            AdvKind::ScrollTime => "ST",
        }
    }
}

impl fmt::Display for AdvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for AdvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AdvKind::ALL
            .into_iter()
            .find(|k| k.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown adversarial transform `{s}`")))
    }
}

/// Enabled adversarial transforms and the minimal scroll distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvConfig {
    pub enabled: Vec<AdvKind>,
    pub min_scroll: usize,
}

impl Default for AdvConfig {
    fn default() -> Self {
        Self {
            enabled: vec![AdvKind::FlipTime, AdvKind::FlipFreq, AdvKind::ScrollFreq],
            min_scroll: 30,
        }
    }
}

impl AdvConfig {
    pub fn only(kinds: &[AdvKind]) -> Self {
        Self {
            enabled: kinds.to_vec(),
            ..Self::default()
        }
    }

    /// Checks the config against a spectrogram shape.
    pub fn validate(&self, bins: usize) -> Result<()> {
        if self.enabled.is_empty() {
            return Err(Error::InvalidConfig("adversarial set is empty".into()));
        }
        if self.enabled.contains(&AdvKind::ScrollFreq) && !(self.min_scroll >= 1 && 2 * self.min_scroll <= bins) {
            return Err(Error::InvalidConfig(format!(
                "frequency scroll needs 1 <= min_scroll ({}) <= F - min_scroll (F = {bins})",
                self.min_scroll
            )));
        }
        Ok(())
    }
}

/// What [`adversarial_view`] did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvApplied {
    pub kind: AdvKind,
    pub shift: Option<usize>,
}

pub fn flip_time<S: Scalar>(spec: &Spectrogram<S>) -> Spectrogram<S> {
    let values = spec
        .values
        .chunks(spec.frames)
        .flat_map(|row| row.iter().rev().copied())
        .collect();
    spec.with_values(values)
}

pub fn flip_freq<S: Scalar>(spec: &Spectrogram<S>) -> Spectrogram<S> {
    let values = spec.values.chunks(spec.frames).rev().flatten().copied().collect();
    spec.with_values(values)
}

/// Row `i` moves to row `(i + length) mod F`.
pub fn scroll_freq<S: Scalar>(spec: &Spectrogram<S>, length: usize) -> Result<Spectrogram<S>> {
    if length >= spec.bins {
        return Err(Error::InvalidArgument(format!(
            "frequency scroll {length} out of range 0..{}",
            spec.bins
        )));
    }
    let mut values = spec.values.clone();
    values.rotate_right(length * spec.frames);
    Ok(spec.with_values(values))
}

/// Column `j` moves to column `(j + length) mod T`.
pub fn scroll_time<S: Scalar>(spec: &Spectrogram<S>, length: usize) -> Result<Spectrogram<S>> {
    if length >= spec.frames {
        return Err(Error::InvalidArgument(format!(
            "time scroll {length} out of range 0..{}",
            spec.frames
        )));
    }
    let mut values = spec.values.clone();
    for row in values.chunks_mut(spec.frames) {
        row.rotate_right(length);
    }
    Ok(spec.with_values(values))
}

/// Scroll distance drawn uniformly from `[min_scroll, size - min_scroll]`,
/// falling back to `[1, size - 1]` when the axis is too short for the bound.
pub fn draw_scroll(size: usize, min_scroll: usize, rng: &mut Rng) -> usize {
    if min_scroll >= 1 && 2 * min_scroll <= size {
        rng.gen_range(min_scroll..=size - min_scroll)
    } else if size >= 2 {
        rng.gen_range(1..size)
    } else {
        0
    }
}

/// Applies one transform chosen uniformly from the enabled set.
pub fn adversarial_view<S: Scalar>(
    spec: &Spectrogram<S>,
    cfg: &AdvConfig,
    rng: &mut Rng,
) -> Result<(Spectrogram<S>, AdvApplied)> {
    let kind = *cfg
        .enabled
        .choose(rng)
        .ok_or_else(|| Error::InvalidConfig("adversarial set is empty".into()))?;
    Ok(match kind {
        AdvKind::FlipTime => (flip_time(spec), AdvApplied { kind, shift: None }),
        AdvKind::FlipFreq => (flip_freq(spec), AdvApplied { kind, shift: None }),
        AdvKind::ScrollFreq => {
            if 2 * cfg.min_scroll > spec.bins || cfg.min_scroll == 0 {
                return Err(Error::InvalidConfig(format!(
                    "frequency scroll needs F > 2 * min_scroll (F = {}, min_scroll = {})",
                    spec.bins, cfg.min_scroll
                )));
            }
            let shift = draw_scroll(spec.bins, cfg.min_scroll, rng);
            (scroll_freq(spec, shift)?, AdvApplied { kind, shift: Some(shift) })
        }
        AdvKind::ScrollTime => {
            let shift = draw_scroll(spec.frames, cfg.min_scroll, rng);
            (scroll_time(spec, shift)?, AdvApplied { kind, shift: Some(shift) })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn m2(rows: &[&[f64]]) -> Spectrogram<f64> {
        Spectrogram::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn naive_conv(x: &[f64], h: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|n| (0..h.len()).filter(|&k| k <= n).map(|k| h[k] * x[n - k]).sum())
            .collect()
    }

    fn buf(v: Vec<f64>) -> AudioBuffer<f64> {
        AudioBuffer::new(v, 16000).unwrap()
    }

    #[test]
    fn rir_identity_and_delay() {
        let x = buf(vec![0.5, -0.25, 0.75, 0.1]);
        assert_eq!(apply_rir(&x, &buf(vec![1.0])).unwrap(), x);
        let d = apply_rir(&x, &buf(vec![0.0, 1.0])).unwrap();
        assert_eq!(d.samples, vec![0.0, 0.5, -0.25, 0.75]);
        assert!(apply_rir(&x, &buf(vec![])).is_err());
    }

    #[test]
    fn rir_matches_naive_convolution() {
        let mut rng = rng_from_seed(11);
        for &(n, m) in &[(50, 7), (300, 200), (1000, 999), (257, 64), (128, 65)] {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fast = convolve_truncated(&x, &h);
            let slow = naive_conv(&x, &h);
            let scale = slow.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-6 * scale, "{a} vs {b}");
            }
            let out = apply_rir(&buf(x.clone()), &buf(h)).unwrap();
            let in_peak = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!((out.peak() - in_peak).abs() < 1e-12);
        }
    }

    #[test]
    fn volume_gains() {
        let x = buf(vec![0.1, -0.2]);
        assert_eq!(tune_volume(&x, 0.0), x);
        let up = tune_volume(&x, 20.0 * 2f64.log10());
        assert!((up.samples[0] - 0.2).abs() < 1e-15 && (up.samples[1] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn volume_factor_bounds_over_rng_stream() {
        let cfg = PositiveAugConfig { rir_probability: 0.0, noise_probability: 0.0, ..Default::default() };
        let x = buf(vec![1.0]);
        let mut rng = rng_from_seed(3);
        let (lo, hi) = (10f64.powf(-0.5), 10f64.powf(0.5));
        for _ in 0..2000 {
            let g = positive_view(&x, &cfg, &RirBank::empty(), &mut rng).unwrap().samples[0];
            assert!(g >= lo - 1e-12 && g <= hi + 1e-12);
        }
    }

    #[test]
    fn noise_bounds_identity_and_reproducibility() {
        let x = buf(vec![0.0; 4096]);
        assert_eq!(add_white_noise(&x, 0.0, &mut rng_from_seed(1)), x);
        let a = add_white_noise(&x, 0.03, &mut rng_from_seed(9));
        let b = add_white_noise(&x, 0.03, &mut rng_from_seed(9));
        assert_eq!(a, b);
        assert!(a.samples.iter().all(|v| v.abs() <= 0.03));
        assert!(a.samples.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn positive_view_identity_when_disabled() {
        let x = buf((0..100).map(|i| (i as f64 * 0.1).sin()).collect());
        let out = positive_view(&x, &PositiveAugConfig::identity(), &RirBank::empty(), &mut rng_from_seed(0)).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn positive_view_deterministic_and_length_preserving() {
        let mut seed_rng = rng_from_seed(5);
        let bank = RirBank::synthetic(4, 16000, &mut seed_rng);
        let x = buf((0..4000).map(|i| (i as f64 * 0.01).sin() * 0.5).collect());
        let cfg = PositiveAugConfig { rir_probability: 1.0, ..Default::default() };
        let a = positive_view(&x, &cfg, &bank, &mut rng_from_seed(77)).unwrap();
        let b = positive_view(&x, &cfg, &bank, &mut rng_from_seed(77)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), x.len());
        assert!(positive_view(&x, &cfg, &RirBank::empty(), &mut rng_from_seed(1)).is_err());
    }

    #[test]
    fn synthetic_rirs_decay() {
        let bank: RirBank<f64> = RirBank::synthetic(5, 16000, &mut rng_from_seed(2));
        assert_eq!(bank.len(), 5);
        assert_eq!(bank.get(0).unwrap().len(), 2400);
        assert_eq!(bank.get(4).unwrap().len(), 24000);
        assert!(bank.get(2).unwrap().samples.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn flips_on_two_by_two() {
        let s = m2(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(flip_time(&s).rows(), vec![vec![2.0, 1.0], vec![4.0, 3.0]]);
        assert_eq!(flip_freq(&s).rows(), vec![vec![3.0, 4.0], vec![1.0, 2.0]]);
        assert_eq!(flip_time(&flip_time(&s)), s);
        assert_eq!(flip_freq(&flip_freq(&s)), s);
    }

    #[test]
    fn flips_reverse_marginals() {
        let s = m2(&[&[1.0, 2.0, 7.0], &[3.0, 4.0, -1.0], &[0.5, 0.0, 2.0]]);
        let col_sums = |m: &Spectrogram<f64>| (0..m.frames).map(|t| (0..m.bins).map(|f| m.at(f, t)).sum::<f64>()).collect::<Vec<_>>();
        let row_sums = |m: &Spectrogram<f64>| (0..m.bins).map(|f| m.row(f).iter().sum::<f64>()).collect::<Vec<_>>();
        let mut c = col_sums(&s);
        c.reverse();
        assert_eq!(col_sums(&flip_time(&s)), c);
        let mut r = row_sums(&s);
        r.reverse();
        assert_eq!(row_sums(&flip_freq(&s)), r);
    }

    #[test]
    fn scrolls() {
        let s = m2(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!(scroll_time(&s, 1).unwrap().rows(), vec![vec![3.0, 1.0, 2.0], vec![6.0, 4.0, 5.0]]);
        assert_eq!(scroll_time(&s, 0).unwrap(), s);
        assert_eq!(scroll_freq(&s, 1).unwrap().rows(), vec![vec![4.0, 5.0, 6.0], vec![1.0, 2.0, 3.0]]);
        assert_eq!(scroll_freq(&s, 0).unwrap(), s);
        assert!(scroll_freq(&s, 2).is_err());
        assert!(scroll_time(&s, 3).is_err());
    }

    #[test]
    fn scroll_freq_moves_row_i_to_i_plus_l() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let s = Spectrogram::from_rows(&rows).unwrap();
        let out = scroll_freq(&s, 2).unwrap();
        for i in 0..5 {
            assert_eq!(out.at((i + 2) % 5, 0), i as f64);
        }
    }

    #[test]
    fn adversarial_single_choice_and_errors() {
        let s = m2(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let cfg = AdvConfig::only(&[AdvKind::FlipTime]);
        for seed in 0..10 {
            let (out, applied) = adversarial_view(&s, &cfg, &mut rng_from_seed(seed)).unwrap();
            assert_eq!(out, flip_time(&s));
            assert_eq!(applied.kind, AdvKind::FlipTime);
        }
        assert!(adversarial_view(&s, &AdvConfig::only(&[]), &mut rng_from_seed(0)).is_err());
        assert!(adversarial_view(&s, &AdvConfig::only(&[AdvKind::ScrollFreq]), &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn adversarial_sequence_is_reproducible() {
        let rows: Vec<Vec<f64>> = (0..64).map(|f| (0..8).map(|t| (f * 8 + t) as f64).collect()).collect();
        let s = Spectrogram::from_rows(&rows).unwrap();
        let cfg = AdvConfig::default();
        let run = |seed| {
            let mut rng = rng_from_seed(seed);
            (0..50).map(|_| adversarial_view(&s, &cfg, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(4), run(4));
        let kinds: std::collections::BTreeSet<_> = run(4).iter().map(|(_, a)| a.kind).collect();
        assert_eq!(kinds.len(), 3);
        for (out, _) in run(4) {
            assert_eq!(out.shape(), s.shape());
        }
    }

    #[test]
    fn adv_kind_parsing() {
        assert_eq!("sf".parse::<AdvKind>().unwrap(), AdvKind::ScrollFreq);
        assert_eq!(serde_json::to_string(&AdvKind::FlipTime).unwrap(), "\"FT\"");
        assert!("xx".parse::<AdvKind>().is_err());
    }
}
