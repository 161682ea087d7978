//! Log-magnitude STFT and log-mel spectrograms.
//!
//! Framing: the signal is reflect-padded by `window_length / 2` on both sides
//! and framed with `hop_length`, so a buffer of `n` samples gives exactly
//! `n / hop_length` frames (257 x 300 for 3 s at the default settings).

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Additive floor inside the logarithm.
pub const DEFAULT_LOG_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann.
    #[default]
    Hann,
    /// All ones; used by the Parseval oracle.
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub fft_length: usize,
    pub window_length: usize,
    pub hop_length: usize,
    pub sample_rate: u32,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            fft_length: 512,
            window_length: 512,
            hop_length: 160,
            sample_rate: 16_000,
            window: WindowKind::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_length < 2 {
            return Err(Error::InvalidConfig("fft_length must be >= 2".into()));
        }
        if self.window_length == 0 || self.window_length > self.fft_length {
            return Err(Error::InvalidConfig(format!(
                "window_length {} must be in 1..={}",
                self.window_length, self.fft_length
            )));
        }
        if self.hop_length == 0 {
            return Err(Error::InvalidConfig("hop_length must be >= 1".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be > 0".into()));
        }
        Ok(())
    }

    /// Number of frequency bins, `fft_length / 2 + 1`.
    pub fn freq_bins(&self) -> usize {
        self.fft_length / 2 + 1
    }

    /// Number of frames produced for `len` samples.
    pub fn frames_for(&self, len: usize) -> usize {
        len / self.hop_length
    }

    /// Samples needed to produce `frames` frames.
    pub fn samples_for_frames(&self, frames: usize) -> usize {
        frames * self.hop_length
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * f64::from(self.sample_rate) / self.fft_length as f64
    }

    fn window<S: Scalar>(&self) -> Vec<S> {
        let n = self.window_length;
        match self.window {
            WindowKind::Rectangular => vec![S::one(); n],
            WindowKind::Hann => (0..n)
                .map(|i| {
                    let phase = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    S::lit(0.5 - 0.5 * phase.cos())
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    LinearFreq,
    Mel,
}

impl AxisKind {
    fn code(self) -> u8 {
        match self {
            AxisKind::LinearFreq => 0,
            AxisKind::Mel => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(AxisKind::LinearFreq),
            1 => Ok(AxisKind::Mel),
            other => Err(Error::Format(format!("unknown axis kind {other}"))),
        }
    }
}

/// Dense row-major `F x T` matrix: axis 0 is frequency (low index = low
/// frequency), axis 1 is time (low index = early).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<S> {
    pub values: Vec<S>,
    pub bins: usize,
    pub frames: usize,
    pub axis_kind: AxisKind,
    pub config: StftConfig,
    pub mel_bands: Option<usize>,
}

impl<S: Scalar> Spectrogram<S> {
    /// Builds a bare matrix (default provenance). Mostly for tests and transforms.
    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let bins = rows.len();
        let frames = rows.first().map_or(0, Vec::len);
        if bins == 0 || frames == 0 || rows.iter().any(|r| r.len() != frames) {
            return Err(Error::Shape("spectrogram rows must be non-empty and equal length".into()));
        }
        Ok(Self {
            values: rows.concat(),
            bins,
            frames,
            axis_kind: AxisKind::LinearFreq,
            config: StftConfig::default(),
            mel_bands: None,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.bins, self.frames)
    }

    #[inline]
    pub fn at(&self, f: usize, t: usize) -> S {
        self.values[f * self.frames + t]
    }

    pub fn row(&self, f: usize) -> &[S] {
        &self.values[f * self.frames..(f + 1) * self.frames]
    }

    pub fn rows(&self) -> Vec<Vec<S>> {
        self.values.chunks(self.frames).map(<[S]>::to_vec).collect()
    }

    /// Copy with the same provenance but different values.
    pub fn with_values(&self, values: Vec<S>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            ..self.clone()
        }
    }

    /// Frames `[start, start + len)` as a new spectrogram.
    pub fn slice_frames(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.frames {
            return Err(Error::Shape(format!(
                "frame slice {start}..{} out of 0..{}",
                start + len,
                self.frames
            )));
        }
        let values = self
            .values
            .chunks(self.frames)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        Ok(Self {
            values,
            frames: len,
            ..self.clone()
        })
    }

    /// Zero-mean, unit-variance copy (variance floored at 1e-8).
    pub fn standardized(&self) -> Self {
        let n = S::from_usize_lossy(self.values.len());
        let mean = self.values.iter().copied().sum::<S>() / n;
        let var = self.values.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
        let inv = S::one() / (var + S::lit(1e-8)).sqrt();
        self.with_values(self.values.iter().map(|&v| (v - mean) * inv).collect())
    }

    pub fn cast<T: Scalar>(&self) -> Spectrogram<T> {
        Spectrogram {
            values: crate::scalar::cast_vec(&self.values),
            bins: self.bins,
            frames: self.frames,
            axis_kind: self.axis_kind,
            config: self.config,
            mel_bands: self.mel_bands,
        }
    }
}

/// Plain `F x T` magnitude matrix before log compression.
#[derive(Debug, Clone, PartialEq)]
pub struct Magnitude<S> {
    pub values: Vec<S>,
    pub bins: usize,
    pub frames: usize,
}

/// Reusable STFT: window and FFT plan are built once.
pub struct Stft<S: Scalar> {
    cfg: StftConfig,
    window: Vec<S>,
    fft: Arc<dyn Fft<S>>,
}

impl<S: Scalar> std::fmt::Debug for Stft<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl<S: Scalar> Stft<S> {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_length);
        Ok(Self {
            cfg,
            window: cfg.window(),
            fft,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn magnitude(&self, buf: &AudioBuffer<S>) -> Result<Magnitude<S>> {
        let cfg = &self.cfg;
        if buf.sample_rate != cfg.sample_rate {
            return Err(Error::InvalidArgument(format!(
                "buffer rate {} does not match STFT rate {}",
                buf.sample_rate, cfg.sample_rate
            )));
        }
        let pad = cfg.window_length / 2;
        let n = buf.len();
        let frames = cfg.frames_for(n);
        if frames == 0 || n <= pad {
            return Err(Error::InvalidArgument(format!(
                "buffer of {n} samples is too short for window {} / hop {}",
                cfg.window_length, cfg.hop_length
            )));
        }
        let padded = reflect_pad(&buf.samples, pad);
        let bins = cfg.freq_bins();
        let mut values = vec![S::zero(); bins * frames];
        let mut frame = vec![Complex::new(S::zero(), S::zero()); cfg.fft_length];
        let mut scratch = vec![Complex::new(S::zero(), S::zero()); self.fft.get_inplace_scratch_len()];
        for t in 0..frames {
            let start = t * cfg.hop_length;
            for (slot, (x, w)) in frame
                .iter_mut()
                .zip(padded[start..start + cfg.window_length].iter().zip(&self.window))
            {
                *slot = Complex::new(*x * *w, S::zero());
            }
            for slot in frame.iter_mut().skip(cfg.window_length) {
                *slot = Complex::new(S::zero(), S::zero());
            }
            self.fft.process_with_scratch(&mut frame, &mut scratch);
            for (f, c) in frame.iter().take(bins).enumerate() {
                values[f * frames + t] = c.norm();
            }
        }
        Ok(Magnitude {
            values,
            bins,
            frames,
        })
    }
}

fn reflect_pad<S: Scalar>(x: &[S], pad: usize) -> Vec<S> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| x[i]));
    out.extend_from_slice(x);
    out.extend((0..pad).map(|i| x[n - 2 - i]));
    out
}

/// `|STFT|` with shape `F x T`, `T = floor(len / hop)`.
pub fn stft_magnitude<S: Scalar>(buf: &AudioBuffer<S>, cfg: &StftConfig) -> Result<Magnitude<S>> {
    Stft::new(*cfg)?.magnitude(buf)
}

/// Elementwise `ln(mag + eps)`.
pub fn log_compress<S: Scalar>(mag: &Magnitude<S>, eps: S, cfg: &StftConfig) -> Spectrogram<S> {
    Spectrogram {
        values: mag.values.iter().map(|&m| (m + eps).ln()).collect(),
        bins: mag.bins,
        frames: mag.frames,
        axis_kind: AxisKind::LinearFreq,
        config: *cfg,
        mel_bands: None,
    }
}

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters on the mel scale, each row normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank<S> {
    /// Dense `n_mels x F` weights.
    pub weights: Vec<S>,
    pub n_mels: usize,
    pub bins: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// Per row: first nonzero bin and the nonzero run.
    support: Vec<(usize, usize)>,
    centers_hz: Vec<f64>,
}

impl<S: Scalar> MelFilterbank<S> {
    pub fn row(&self, m: usize) -> &[S] {
        &self.weights[m * self.bins..(m + 1) * self.bins]
    }

    pub fn center_frequencies(&self) -> &[f64] {
        &self.centers_hz
    }

    /// `weights . mag`, skipping zeros outside each filter's support.
    pub fn apply(&self, mag: &Magnitude<S>) -> Result<Magnitude<S>> {
        if mag.bins != self.bins {
            return Err(Error::Shape(format!(
                "filterbank expects {} bins, magnitude has {}",
                self.bins, mag.bins
            )));
        }
        let frames = mag.frames;
        let mut out = vec![S::zero(); self.n_mels * frames];
        for (m, &(lo, hi)) in self.support.iter().enumerate() {
            let dst = &mut out[m * frames..(m + 1) * frames];
            for f in lo..hi {
                let w = self.weights[m * self.bins + f];
                let src = &mag.values[f * frames..(f + 1) * frames];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        Ok(Magnitude {
            values: out,
            bins: self.n_mels,
            frames,
        })
    }
}

pub fn make_mel_filterbank<S: Scalar>(
    cfg: &StftConfig,
    n_mels: usize,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank<S>> {
    cfg.validate()?;
    let nyquist = f64::from(cfg.sample_rate) / 2.0;
    if !(f_min >= 0.0 && f_min < f_max && f_max <= nyquist) {
        return Err(Error::InvalidConfig(format!(
            "mel range [{f_min}, {f_max}] must satisfy 0 <= f_min < f_max <= {nyquist}"
        )));
    }
    if n_mels < 2 {
        return Err(Error::InvalidConfig("n_mels must be >= 2".into()));
    }
    let bins = cfg.freq_bins();
    let (m_lo, m_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let mut weights = vec![S::zero(); n_mels * bins];
    let mut support = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut raw: Vec<f64> = (0..bins)
            .map(|f| {
                let hz = cfg.bin_frequency(f);
                let up = (hz - left) / (center - left);
                let down = (right - hz) / (right - center);
                up.min(down).max(0.0)
            })
            .collect();
        if raw.iter().all(|&w| w == 0.0) {
            // Filter narrower than one bin: collapse onto the nearest bin.
            let nearest = ((center / cfg.bin_frequency(1)).round() as usize).min(bins - 1);
            raw[nearest] = 1.0;
        }
        let total: f64 = raw.iter().sum();
        let lo = raw.iter().position(|&w| w > 0.0).unwrap_or(0);
        let hi = raw.iter().rposition(|&w| w > 0.0).map_or(0, |i| i + 1);
        for (f, w) in raw.into_iter().enumerate() {
            weights[m * bins + f] = S::lit(w / total);
        }
        support.push((lo, hi));
    }
    Ok(MelFilterbank {
        weights,
        n_mels,
        bins,
        f_min,
        f_max,
        support,
        centers_hz: edges[1..=n_mels].to_vec(),
    })
}

/// `log_compress(fb . |STFT|)` with mel provenance.
pub fn mel_spectrogram<S: Scalar>(
    buf: &AudioBuffer<S>,
    cfg: &StftConfig,
    fb: &MelFilterbank<S>,
    eps: S,
) -> Result<Spectrogram<S>> {
    let mag = stft_magnitude(buf, cfg)?;
    let mel = fb.apply(&mag)?;
    let mut spec = log_compress(&mel, eps, cfg);
    spec.axis_kind = AxisKind::Mel;
    spec.mel_bands = Some(fb.n_mels);
    Ok(spec)
}

/// Which front end turns audio into the encoder input.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FrontEnd {
    #[default]
    Linear,
    Mel {
        n_mels: usize,
        f_min: f64,
        f_max: f64,
    },
}

impl FrontEnd {
    pub fn default_mel() -> Self {
        FrontEnd::Mel {
            n_mels: 64,
            f_min: 50.0,
            f_max: 8000.0,
        }
    }
}

/// STFT plus optional mel projection plus log, built once and shared.
#[derive(Debug)]
pub struct Spectrogrammer<S: Scalar> {
    stft: Stft<S>,
    mel: Option<MelFilterbank<S>>,
    eps: S,
}

impl<S: Scalar> Spectrogrammer<S> {
    pub fn new(cfg: StftConfig, front: FrontEnd) -> Result<Self> {
        let mel = match front {
            FrontEnd::Linear => None,
            FrontEnd::Mel { n_mels, f_min, f_max } => Some(make_mel_filterbank(&cfg, n_mels, f_min, f_max)?),
        };
        Ok(Self {
            stft: Stft::new(cfg)?,
            mel,
            eps: S::lit(DEFAULT_LOG_EPS),
        })
    }

    pub fn config(&self) -> &StftConfig {
        self.stft.config()
    }

    /// Number of rows in the output.
    pub fn bins(&self) -> usize {
        self.mel.as_ref().map_or(self.stft.config().freq_bins(), |fb| fb.n_mels)
    }

    pub fn compute(&self, buf: &AudioBuffer<S>) -> Result<Spectrogram<S>> {
        let mag = self.stft.magnitude(buf)?;
        let cfg = self.stft.config();
        Ok(match &self.mel {
            None => log_compress(&mag, self.eps, cfg),
            Some(fb) => {
                let mut spec = log_compress(&fb.apply(&mag)?, self.eps, cfg);
                spec.axis_kind = AxisKind::Mel;
                spec.mel_bands = Some(fb.n_mels);
                spec
            }
        })
    }
}

const SPEC_MAGIC: &[u8; 4] = b"ASGS";
const SPEC_VERSION: u32 = 1;

/// Serializes to the little-endian `ASGS` dump format.
pub fn write_spectrogram<S: Scalar, W: Write>(spec: &Spectrogram<S>, mut w: W) -> std::io::Result<()> {
    w.write_all(SPEC_MAGIC)?;
    w.write_all(&SPEC_VERSION.to_le_bytes())?;
    w.write_all(&(spec.bins as u32).to_le_bytes())?;
    w.write_all(&(spec.frames as u32).to_le_bytes())?;
    w.write_all(&[spec.axis_kind.code()])?;
    for v in &spec.values {
        w.write_all(&v.as_f32().to_le_bytes())?;
    }
    Ok(())
}

pub fn save_spectrogram<S: Scalar>(spec: &Spectrogram<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_spectrogram(spec, &mut w)
        .and_then(|()| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Parses an `ASGS` dump. Provenance other than the axis kind is not stored
/// and comes back as the default STFT configuration.
pub fn read_spectrogram<R: Read>(mut r: R) -> Result<Spectrogram<f32>> {
    let mut header = [0u8; 17];
    r.read_exact(&mut header)
        .map_err(|e| Error::Format(format!("truncated ASGS header: {e}")))?;
    if &header[..4] != SPEC_MAGIC {
        return Err(Error::Format("bad ASGS magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
    if word(4) != SPEC_VERSION {
        return Err(Error::Format(format!("unsupported ASGS version {}", word(4))));
    }
    let (bins, frames) = (word(8) as usize, word(12) as usize);
    let axis_kind = AxisKind::from_code(header[16])?;
    let mut payload = vec![0u8; bins * frames * 4];
    r.read_exact(&mut payload)
        .map_err(|e| Error::Format(format!("truncated ASGS payload: {e}")))?;
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(Spectrogram {
        values,
        bins,
        frames,
        axis_kind,
        config: StftConfig::default(),
        mel_bands: (axis_kind == AxisKind::Mel).then_some(bins),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, n: usize, sr: u32) -> AudioBuffer<f64> {
        let samples = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / f64::from(sr)).sin())
            .collect();
        AudioBuffer::new(samples, sr).unwrap()
    }

    #[test]
    fn default_shape_is_257_by_300() {
        let buf = AudioBuffer::new(vec![0.0f32; 48000], 16000).unwrap();
        let mag = stft_magnitude(&buf, &StftConfig::default()).unwrap();
        assert_eq!((mag.bins, mag.frames), (257, 300));
        assert!(mag.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_short_buffer_errors() {
        let buf = AudioBuffer::new(vec![0.1f64; 100], 16000).unwrap();
        assert!(stft_magnitude(&buf, &StftConfig::default()).is_err());
        let buf = AudioBuffer::new(vec![0.1f64; 16000], 8000).unwrap();
        assert!(stft_magnitude(&buf, &StftConfig::default()).is_err());
    }

    #[test]
    fn bin_centered_sine_peaks_at_its_bin() {
        let k = 40;
        let buf = sine(k as f64 * 16000.0 / 512.0, 16000, 16000);
        let mag = stft_magnitude(&buf, &StftConfig::default()).unwrap();
        for t in 5..mag.frames - 5 {
            let col: Vec<f64> = (0..mag.bins).map(|f| mag.values[f * mag.frames + t]).collect();
            let arg = col.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert_eq!(arg, k);
            // periodic Hann main lobe: 3 bins carry all the energy of a bin-centred tone
            let lobe: f64 = col[k - 1..=k + 1].iter().map(|v| v * v).sum();
            let all: f64 = col.iter().map(|v| v * v).sum();
            assert!(lobe / all > 0.999_999);
        }
    }

    #[test]
    fn log_compress_values() {
        let cfg = StftConfig::default();
        let mag = Magnitude { values: vec![0.0f64, std::f64::consts::E - 1e-6], bins: 1, frames: 2 };
        let spec = log_compress(&mag, 1e-6, &cfg);
        assert!((spec.values[0] - (-13.815_510_557_964_274)).abs() < 1e-12);
        assert!((spec.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mel_scale_formula() {
        assert!((hz_to_mel(700.0) - 781.172_838_741).abs() < 1e-6);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn filterbank_rows_normalized_and_cover_band() {
        let cfg = StftConfig::default();
        let fb: MelFilterbank<f64> = make_mel_filterbank(&cfg, 64, 50.0, 8000.0).unwrap();
        assert_eq!(fb.weights.len(), 64 * 257);
        for m in 0..64 {
            let s: f64 = fb.row(m).iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!(fb.row(m).iter().all(|&w| w >= 0.0));
        }
        assert!(fb.center_frequencies().windows(2).all(|w| w[0] < w[1]));
        for f in 0..257 {
            let hz = cfg.bin_frequency(f);
            if hz > 50.0 && hz < 8000.0 {
                let col: f64 = (0..64).map(|m| fb.weights[m * 257 + f]).sum();
                assert!(col > 0.0, "gap at bin {f} ({hz} Hz)");
            }
        }
    }

    #[test]
    fn filterbank_rejects_bad_range() {
        let cfg = StftConfig::default();
        assert!(make_mel_filterbank::<f32>(&cfg, 64, 100.0, 50.0).is_err());
        assert!(make_mel_filterbank::<f32>(&cfg, 64, 0.0, 9000.0).is_err());
        assert!(make_mel_filterbank::<f32>(&cfg, 1, 0.0, 8000.0).is_err());
    }

    #[test]
    fn mel_spectrogram_zero_buffer_and_shape() {
        let cfg = StftConfig::default();
        let fb = make_mel_filterbank(&cfg, 64, 50.0, 8000.0).unwrap();
        let buf = AudioBuffer::new(vec![0.0f64; 48000], 16000).unwrap();
        let spec = mel_spectrogram(&buf, &cfg, &fb, 1e-6).unwrap();
        assert_eq!(spec.shape(), (64, 300));
        assert_eq!(spec.axis_kind, AxisKind::Mel);
        assert!(spec.values.iter().all(|&v| v == (1e-6f64).ln()));
    }

    #[test]
    fn mel_matches_dense_dot_products() {
        let cfg = StftConfig::default();
        let fb = make_mel_filterbank(&cfg, 40, 50.0, 8000.0).unwrap();
        let buf = sine(440.0, 8000, 16000);
        let mag = stft_magnitude(&buf, &cfg).unwrap();
        let spec = mel_spectrogram(&buf, &cfg, &fb, 1e-6).unwrap();
        for m in 0..40 {
            for t in 0..mag.frames {
                let dot: f64 = (0..257).map(|f| fb.row(m)[f] * mag.values[f * mag.frames + t]).sum();
                let expect = (dot + 1e-6).ln();
                assert!((spec.at(m, t) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn filterbank_shape_mismatch_errors() {
        let fb: MelFilterbank<f64> = make_mel_filterbank(&StftConfig::default(), 16, 50.0, 8000.0).unwrap();
        let mag = Magnitude { values: vec![0.0; 10], bins: 5, frames: 2 };
        assert!(fb.apply(&mag).is_err());
    }

    #[test]
    fn asgs_round_trip() {
        let spec = Spectrogram::from_rows(&[vec![1.0f32, 2.0, 3.0], vec![-4.0, 5.5, 6.25]]).unwrap();
        let mut bytes = Vec::new();
        write_spectrogram(&spec, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"ASGS");
        assert_eq!(bytes.len(), 17 + 6 * 4);
        let back = read_spectrogram(&bytes[..]).unwrap();
        assert_eq!(back.values, spec.values);
        assert_eq!(back.shape(), (2, 3));
        assert!(read_spectrogram(&bytes[..20]).is_err());
    }

    #[test]
    fn standardized_moments() {
        let spec = Spectrogram::from_rows(&[vec![1.0f64, 2.0, 3.0], vec![4.0, 5.0, 9.0]]).unwrap();
        let z = spec.standardized();
        let mean: f64 = z.values.iter().sum::<f64>() / 6.0;
        let var: f64 = z.values.iter().map(|v| v * v).sum::<f64>() / 6.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-6);
    }
}
