//! "ASGC" checkpoint files.
//!
//! Layout: magic `ASGC`, `u32` version, `u64` header length, a JSON header
//! (configs, counters and a tensor directory), then every tensor as
//! little-endian floats in directory order. Values are stored at the model's
//! own precision so a round trip is bitwise exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{EncoderConfig, Mode, ModelState, ProjectionConfig, RunningStats, Tensor};
use crate::scalar::{Precision, Scalar};

pub const MAGIC: &[u8; 4] = b"ASGC";
pub const VERSION: u32 = 1;

/// A model snapshot plus the configs that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<S> {
    pub encoder: EncoderConfig,
    pub projection: ProjectionConfig,
    pub state: ModelState<S>,
    pub epoch: usize,
    pub step: usize,
    /// Free-form echo of the run configuration.
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum EntryKind {
    Param,
    RunningMean,
    RunningVar,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    name: String,
    kind: EntryKind,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    precision: Precision,
    encoder: EncoderConfig,
    projection: ProjectionConfig,
    mode: Mode,
    epoch: usize,
    step: usize,
    config: Option<serde_json::Value>,
    tensors: Vec<Entry>,
}

impl<S: Scalar> Checkpoint<S> {
    fn header(&self) -> Header {
        let mut tensors: Vec<Entry> = self
            .state
            .names
            .iter()
            .zip(&self.state.params)
            .map(|(name, t)| Entry {
                name: name.clone(),
                kind: EntryKind::Param,
                shape: t.shape().to_vec(),
            })
            .collect();
        for (name, rs) in self.state.running_names.iter().zip(&self.state.running) {
            for (kind, len) in [(EntryKind::RunningMean, rs.mean.len()), (EntryKind::RunningVar, rs.var.len())] {
                tensors.push(Entry {
                    name: name.clone(),
                    kind,
                    shape: vec![len],
                });
            }
        }
        Header {
            precision: S::PRECISION,
            encoder: self.encoder.clone(),
            projection: self.projection,
            mode: self.state.mode,
            epoch: self.epoch,
            step: self.step,
            config: self.config.clone(),
            tensors,
        }
    }

    /// Tensor names and shapes in file order.
    pub fn inventory(&self) -> Vec<(String, Vec<usize>)> {
        self.header().tensors.into_iter().map(|e| (e.name, e.shape)).collect()
    }
}

fn put<S: Scalar>(out: &mut Vec<u8>, values: &[S]) {
    for &v in values {
        match S::PRECISION {
            Precision::Single => out.extend_from_slice(&v.as_f32().to_le_bytes()),
            Precision::Double => out.extend_from_slice(&v.as_f64().to_le_bytes()),
        }
    }
}

pub fn write_checkpoint<S: Scalar, W: Write>(ckpt: &Checkpoint<S>, mut w: W) -> Result<()> {
    let header = serde_json::to_vec(&ckpt.header())?;
    let mut buf = Vec::with_capacity(16 + header.len() + ckpt.state.num_scalars() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for t in &ckpt.state.params {
        put(&mut buf, t.data());
    }
    for rs in &ckpt.state.running {
        put(&mut buf, &rs.mean);
        put(&mut buf, &rs.var);
    }
    w.write_all(&buf).map_err(|e| Error::Checkpoint(format!("write failed: {e}")))
}

/// Writes via a temporary file and rename so readers never see a partial file.
pub fn save_checkpoint<S: Scalar>(ckpt: &Checkpoint<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("asgc.tmp");
    let mut bytes = Vec::new();
    write_checkpoint(ckpt, &mut bytes)?;
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn floats<S: Scalar>(&mut self, count: usize, precision: Precision) -> Result<Vec<S>> {
        let width = match precision {
            Precision::Single => 4,
            Precision::Double => 8,
        };
        let raw = self.take(count.checked_mul(width).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
        let values: Vec<S> = match precision {
            Precision::Single => raw
                .chunks_exact(4)
                .map(|c| S::lit(f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes")))))
                .collect(),
            Precision::Double => raw
                .chunks_exact(8)
                .map(|c| S::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
                .collect(),
        };
        Ok(values)
    }
}

/// Parses a checkpoint. Stored values are converted if the file precision
/// differs from `S`.
pub fn read_checkpoint<S: Scalar, R: Read>(mut r: R) -> Result<Checkpoint<S>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::Checkpoint(format!("read failed: {e}")))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic, not an ASGC file".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version} (expected {VERSION})")));
    }
    let header_len = u64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes"));
    let header_len = usize::try_from(header_len).map_err(|_| Error::Checkpoint("header too large".into()))?;
    let header: Header = serde_json::from_slice(cur.take(header_len)?)
        .map_err(|e| Error::Checkpoint(format!("corrupt header: {e}")))?;

    let mut state = ModelState {
        names: Vec::new(),
        params: Vec::new(),
        running_names: Vec::new(),
        running: Vec::new(),
        mode: header.mode,
    };
    for e in &header.tensors {
        let count: usize = e.shape.iter().product();
        let values = cur.floats::<S>(count, header.precision)?;
        match e.kind {
            EntryKind::Param => {
                state.names.push(e.name.clone());
                state.params.push(Tensor::new(e.shape.clone(), values)?);
            }
            EntryKind::RunningMean => {
                state.running_names.push(e.name.clone());
                state.running.push(RunningStats { mean: values, var: Vec::new() });
            }
            EntryKind::RunningVar => {
                let last = state.running.last_mut().filter(|_| state.running_names.last() == Some(&e.name));
                let last = last.ok_or_else(|| Error::Checkpoint(format!("{}: variance without mean", e.name)))?;
                last.var = values;
            }
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    if state.running.iter().any(|rs| rs.var.len() != rs.mean.len()) {
        return Err(Error::Checkpoint("running statistics incomplete".into()));
    }
    // the configs must describe exactly this inventory
    crate::nn::Network::from_state(header.encoder.clone(), header.projection, state.clone())
        .map_err(|e| Error::Checkpoint(format!("header/payload mismatch: {e}")))?;
    Ok(Checkpoint {
        encoder: header.encoder,
        projection: header.projection,
        state,
        epoch: header.epoch,
        step: header.step,
        config: header.config,
    })
}

pub fn load_checkpoint<S: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<S>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}

/// Loads and checks the stored encoder config against `expected`.
pub fn load_checkpoint_expecting<S: Scalar>(path: impl AsRef<Path>, expected: &EncoderConfig) -> Result<Checkpoint<S>> {
    let ckpt = load_checkpoint(path)?;
    if &ckpt.encoder != expected {
        return Err(Error::ConfigConflict(format!(
            "checkpoint encoder {:?} differs from requested {:?}",
            ckpt.encoder, expected
        )));
    }
    Ok(ckpt)
}
