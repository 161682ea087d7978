//! Audio decoding, resampling and segmentation.

use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Sample rate every pipeline stage expects.
pub const TARGET_SAMPLE_RATE: u32 = 16_000;

/// Mono waveform with its sample rate. Samples are nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<S> {
    pub samples: Vec<S>,
    pub sample_rate: u32,
}

impl<S: Scalar> AudioBuffer<S> {
    pub fn new(samples: Vec<S>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample_rate must be > 0".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn peak(&self) -> S {
        self.samples
            .iter()
            .fold(S::zero(), |m, &v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn cast<T: Scalar>(&self) -> AudioBuffer<T> {
        AudioBuffer {
            samples: crate::scalar::cast_vec(&self.samples),
            sample_rate: self.sample_rate,
        }
    }
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::Format(e.to_string()),
        hound::Error::FormatError(msg) => Error::Format(msg.to_string()),
        hound::Error::Unsupported => Error::Unsupported("unsupported WAVE subformat".into()),
        other => Error::Format(other.to_string()),
    }
}

/// Decodes a PCM16 or float32 RIFF/WAVE file into a mono buffer at its native
/// rate. Stereo frames are averaged.
pub fn load_wav<S: Scalar>(path: impl AsRef<Path>) -> Result<AudioBuffer<S>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_wav(std::io::BufReader::new(file))
}

pub fn decode_wav<S: Scalar, R: std::io::Read>(reader: R) -> Result<AudioBuffer<S>> {
    let mut reader = hound::WavReader::new(reader).map_err(map_hound)?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if channels == 0 || channels > 2 {
        return Err(Error::Unsupported(format!("{channels} channels")));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(Error::Unsupported(format!("{fmt:?} with {bits} bits per sample")));
        }
    };
    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| S::lit(frame.iter().sum::<f64>() / channels as f64))
        .collect();
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Writes a mono PCM16 WAV. Samples are clamped to the representable range.
pub fn write_wav_pcm16<S: Scalar>(path: impl AsRef<Path>, buf: &AudioBuffer<S>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(map_hound)?;
    for &v in &buf.samples {
        let q = (v.as_f64() * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)
}

/// Linear-interpolation resampler.
///
/// Output length is `round(len * target / source)`; output sample `j` reads the
/// source at position `j * source / target`.
pub fn resample<S: Scalar>(buf: &AudioBuffer<S>, target_rate: u32) -> Result<AudioBuffer<S>> {
    if target_rate == 0 {
        return Err(Error::InvalidArgument("target_rate must be > 0".into()));
    }
    if target_rate == buf.sample_rate || buf.is_empty() {
        return Ok(AudioBuffer {
            samples: buf.samples.clone(),
            sample_rate: target_rate,
        });
    }
    let n = buf.len();
    let ratio = f64::from(buf.sample_rate) / f64::from(target_rate);
    let out_len = (n as f64 / ratio).round() as usize;
    let last = n - 1;
    let samples = (0..out_len)
        .map(|j| {
            let pos = j as f64 * ratio;
            let i0 = (pos.floor() as usize).min(last);
            let i1 = (i0 + 1).min(last);
            let frac = S::lit(pos - i0 as f64);
            let a = buf.samples[i0];
            let b = buf.samples[i1];
            a + (b - a) * frac
        })
        .collect();
    Ok(AudioBuffer {
        samples,
        sample_rate: target_rate,
    })
}

/// Cuts `length` contiguous samples starting at a uniformly drawn offset.
///
/// Buffers shorter than `length` are tiled and sliced from offset 0, and no
/// random number is consumed in that case.
pub fn cut_segment<S: Scalar>(buf: &AudioBuffer<S>, length: usize, rng: &mut Rng) -> AudioBuffer<S> {
    assert!(length > 0, "segment length must be positive");
    let n = buf.len();
    let samples = if n == 0 {
        vec![S::zero(); length]
    } else if n < length {
        buf.samples.iter().copied().cycle().take(length).collect()
    } else {
        let start = rng.gen_range(0..=n - length);
        buf.samples[start..start + length].to_vec()
    };
    AudioBuffer {
        samples,
        sample_rate: buf.sample_rate,
    }
}

/// Tiles (or truncates) to exactly `length` samples starting at offset 0.
pub fn tile_to<S: Scalar>(buf: &AudioBuffer<S>, length: usize) -> AudioBuffer<S> {
    let samples = if buf.is_empty() {
        vec![S::zero(); length]
    } else {
        buf.samples.iter().copied().cycle().take(length).collect()
    };
    AudioBuffer {
        samples,
        sample_rate: buf.sample_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn write_raw_wav(path: &Path, spec: hound::WavSpec, f: impl FnOnce(&mut hound::WavWriter<std::io::BufWriter<std::fs::File>>)) {
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        f(&mut w);
        w.finalize().unwrap();
    }

    #[test]
    fn pcm16_maps_by_32768() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let spec = hound::WavSpec { channels: 1, sample_rate: 16000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
        write_raw_wav(&p, spec, |w| {
            w.write_sample(16384i16).unwrap();
            w.write_sample(-32768i16).unwrap();
        });
        let buf: AudioBuffer<f64> = load_wav(&p).unwrap();
        assert_eq!(buf.samples, vec![0.5, -1.0]);
        assert_eq!(buf.sample_rate, 16000);
    }

    #[test]
    fn stereo_is_channel_mean() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let spec = hound::WavSpec { channels: 2, sample_rate: 8000, bits_per_sample: 32, sample_format: hound::SampleFormat::Float };
        write_raw_wav(&p, spec, |w| {
            w.write_sample(0.2f32).unwrap();
            w.write_sample(0.4f32).unwrap();
        });
        let buf: AudioBuffer<f64> = load_wav(&p).unwrap();
        assert_eq!(buf.len(), 1);
        assert!((buf.samples[0] - 0.3).abs() < 1e-7);
    }

    #[test]
    fn one_second_native_rate() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.wav");
        let spec = hound::WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
        write_raw_wav(&p, spec, |w| {
            for i in 0..8000 {
                w.write_sample((i % 100) as i16).unwrap();
            }
        });
        let buf: AudioBuffer<f32> = load_wav(&p).unwrap();
        assert_eq!(buf.len(), 8000);
        assert_eq!(buf.sample_rate, 8000);
    }

    #[test]
    fn malformed_and_unsupported() {
        let garbage = b"RIFF\x04\x00\x00\x00JUNKxxxxxxxx".to_vec();
        let err = decode_wav::<f32, _>(std::io::Cursor::new(garbage)).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err:?}");

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.wav");
        let spec = hound::WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 8, sample_format: hound::SampleFormat::Int };
        write_raw_wav(&p, spec, |w| w.write_sample(3i8).unwrap());
        let err = load_wav::<f32>(&p).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)), "{err:?}");
    }

    #[test]
    fn resample_lengths_and_identity() {
        let buf = AudioBuffer::new(vec![0.25f64; 8000], 8000).unwrap();
        assert_eq!(resample(&buf, 16000).unwrap().len(), 16000);
        let buf = AudioBuffer::new(vec![0.1f32, -0.3, 0.7], 16000).unwrap();
        let same = resample(&buf, 16000).unwrap();
        assert_eq!(same.samples, buf.samples);
        let empty = AudioBuffer::<f32>::new(vec![], 8000).unwrap();
        assert!(resample(&empty, 16000).unwrap().is_empty());
    }

    #[test]
    fn resample_hand_evaluated_upsample() {
        // positions 0, 0.5, 1.0 (the last is clamped onto the final sample)
        let buf = AudioBuffer::new(vec![0.0f64, 1.0], 1).unwrap();
        let up = resample(&buf, 2).unwrap();
        assert_eq!(up.len(), 4); // round(2 * 2 / 1)
        assert_eq!(&up.samples[..3], &[0.0, 0.5, 1.0]);
        assert_eq!(up.samples[3], 1.0);
        assert_eq!(up.sample_rate, 2);
    }

    #[test]
    fn cut_segment_rules() {
        let mut rng = rng_from_seed(1);
        let buf = AudioBuffer::new((0..48000).map(|i| i as f32 / 48000.0).collect(), 16000).unwrap();
        assert_eq!(cut_segment(&buf, 48000, &mut rng), buf);

        let short = AudioBuffer::new((0..100).map(|i| i as f32).collect(), 16000).unwrap();
        let tiled = cut_segment(&short, 250, &mut rng);
        assert_eq!(tiled.len(), 250);
        for (i, v) in tiled.samples.iter().enumerate() {
            assert_eq!(*v, (i % 100) as f32);
        }
    }

    #[test]
    fn cut_segment_offset_range_and_reproducible() {
        let buf = AudioBuffer::new((0..48160).map(|i| i as f64).collect(), 16000).unwrap();
        let mut seen_nonzero = false;
        for seed in 0..200 {
            let a = cut_segment(&buf, 48000, &mut rng_from_seed(seed));
            let b = cut_segment(&buf, 48000, &mut rng_from_seed(seed));
            assert_eq!(a, b);
            let start = a.samples[0] as usize;
            assert!(start <= 160);
            assert_eq!(a.samples[47999] as usize, start + 47999);
            seen_nonzero |= start > 0;
        }
        assert!(seen_nonzero);
    }
}
