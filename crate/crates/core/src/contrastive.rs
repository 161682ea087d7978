//! View layout, cosine similarity and the NT-Xent loss over quadruple batches.
//!
//! A batch of `N` quadruples `(x, x_p, x_n, x_pn)` is laid out as four blocks
//! `[x | x_p | x_n | x_pn]`. The ordered positive pairs are `(x, x_p)`,
//! `(x_p, x)`, `(x_n, x_pn)` and `(x_pn, x_n)`; every other view, including
//! the adversarial view of the anchor itself, is a negative.

use serde::{Deserialize, Serialize};

use crate::audio_io::{cut_segment, AudioBuffer};
use crate::augment::{adversarial_view, positive_view, AdvApplied, AdvConfig, PositiveAugConfig, RirBank};
use crate::dsp::{Spectrogram, Spectrogrammer};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Which view pairs with which.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewLayout {
    positive_of: Vec<usize>,
    samples: usize,
    blocks: usize,
}

impl ViewLayout {
    /// `4N` views: `i <-> N + i` and `2N + i <-> 3N + i`.
    pub fn quadruple(n: usize) -> Self {
        let mut positive_of = vec![0; 4 * n];
        for i in 0..n {
            positive_of[i] = n + i;
            positive_of[n + i] = i;
            positive_of[2 * n + i] = 3 * n + i;
            positive_of[3 * n + i] = 2 * n + i;
        }
        Self {
            positive_of,
            samples: n,
            blocks: 4,
        }
    }

    /// `2N` views without adversarial samples: `i <-> N + i`.
    pub fn pairs(n: usize) -> Self {
        let mut positive_of = vec![0; 2 * n];
        for i in 0..n {
            positive_of[i] = n + i;
            positive_of[n + i] = i;
        }
        Self {
            positive_of,
            samples: n,
            blocks: 2,
        }
    }

    /// Arbitrary pairing. Must be an involution without fixed points.
    pub fn custom(positive_of: Vec<usize>) -> Result<Self> {
        let m = positive_of.len();
        for (i, &j) in positive_of.iter().enumerate() {
            if j >= m || j == i || positive_of[j] != i {
                return Err(Error::InvalidArgument(format!("positive_of is not a fixed-point-free involution at {i}")));
            }
        }
        Ok(Self {
            positive_of,
            samples: m,
            blocks: 1,
        })
    }

    pub fn total(&self) -> usize {
        self.positive_of.len()
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn positive_of(&self, i: usize) -> usize {
        self.positive_of[i]
    }

    pub fn positives(&self) -> &[usize] {
        &self.positive_of
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub temperature: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { temperature: 0.1 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!("temperature must be > 0, got {}", self.temperature)));
        }
        Ok(())
    }
}

/// `z . z' / (|z| |z'|)`. Zero-norm inputs are an error.
pub fn cosine_similarity<S: Scalar>(z: &[S], zp: &[S]) -> Result<S> {
    if z.len() != zp.len() {
        return Err(Error::Shape(format!("cosine similarity of lengths {} and {}", z.len(), zp.len())));
    }
    let na = z.iter().map(|&v| v * v).sum::<S>().sqrt();
    let nb = zp.iter().map(|&v| v * v).sum::<S>().sqrt();
    if na == S::zero() {
        return Err(Error::DegenerateEmbedding(0));
    }
    if nb == S::zero() {
        return Err(Error::DegenerateEmbedding(1));
    }
    Ok(z.iter().zip(zp).map(|(&a, &b)| a * b).sum::<S>() / (na * nb))
}

/// Mean NT-Xent loss over all ordered positive pairs, and `dL/dZ`.
///
/// For anchor `i` with positive `p(i)`:
/// `L_i = -s(i, p(i)) / tau + log sum_{k != i} exp(s(i, k) / tau)`.
pub fn nt_xent_loss<S: Scalar>(z: &Tensor<S>, layout: &ViewLayout, cfg: &LossConfig) -> Result<(S, Tensor<S>)> {
    cfg.validate()?;
    let (m, d) = match *z.shape() {
        [m, d] => (m, d),
        ref s => return Err(Error::Shape(format!("embeddings must be 2-d, got {s:?}"))),
    };
    if m != layout.total() {
        return Err(Error::Shape(format!("{m} embeddings for a layout of {} views", layout.total())));
    }
    if m < 2 {
        return Err(Error::Shape("need at least two views".into()));
    }
    let inv_tau = S::lit(1.0 / cfg.temperature);
    let rows: Vec<&[S]> = z.data().chunks(d).collect();
    let norms: Vec<S> = rows.iter().map(|r| r.iter().map(|&v| v * v).sum::<S>().sqrt()).collect();
    if let Some(i) = norms.iter().position(|&n| n == S::zero() || !n.is_finite()) {
        return Err(Error::DegenerateEmbedding(i));
    }
    let u: Vec<S> = rows
        .iter()
        .zip(&norms)
        .flat_map(|(r, &n)| r.iter().map(move |&v| v / n))
        .collect();
    let mut logits = vec![S::zero(); m * m];
    for i in 0..m {
        for k in 0..m {
            if k != i {
                let dot: S = u[i * d..(i + 1) * d].iter().zip(&u[k * d..(k + 1) * d]).map(|(&a, &b)| a * b).sum();
                logits[i * m + k] = dot * inv_tau;
            }
        }
    }
    // coefficient matrix dL/dlogits, already divided by m
    let inv_m = S::one() / S::from_usize_lossy(m);
    let mut coef = vec![S::zero(); m * m];
    let mut total = S::zero();
    for i in 0..m {
        let row = &logits[i * m..(i + 1) * m];
        let max = (0..m).filter(|&k| k != i).map(|k| row[k]).fold(S::neg_infinity(), S::max);
        let denom: S = (0..m).filter(|&k| k != i).map(|k| (row[k] - max).exp()).sum();
        let lse = max + denom.ln();
        let p = layout.positive_of(i);
        total += if row[p] >= max {
            // positive dominates: lse - row[p] would cancel to ~0
            (0..m)
                .filter(|&k| k != i && k != p)
                .map(|k| (row[k] - row[p]).exp())
                .sum::<S>()
                .ln_1p()
        } else {
            lse - row[p]
        };
        for k in (0..m).filter(|&k| k != i) {
            coef[i * m + k] = (row[k] - lse).exp() * inv_m;
        }
        coef[i * m + p] -= inv_m;
    }
    let loss = total * inv_m;
    let mut grad = vec![S::zero(); m * d];
    for j in 0..m {
        let mut du = vec![S::zero(); d];
        for i in 0..m {
            let c = (coef[i * m + j] + coef[j * m + i]) * inv_tau;
            if c != S::zero() {
                for (acc, &v) in du.iter_mut().zip(&u[i * d..(i + 1) * d]) {
                    *acc += c * v;
                }
            }
        }
        let uj = &u[j * d..(j + 1) * d];
        let proj: S = uj.iter().zip(&du).map(|(&a, &b)| a * b).sum();
        let inv_n = S::one() / norms[j];
        for ((g, &a), &b) in grad[j * d..(j + 1) * d].iter_mut().zip(&du).zip(uj) {
            *g = (a - b * proj) * inv_n;
        }
    }
    Ok((loss, Tensor::new(vec![m, d], grad)?))
}

/// One sample's four views.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadruple<S> {
    pub x: Spectrogram<S>,
    pub x_p: Spectrogram<S>,
    pub x_n: Option<Spectrogram<S>>,
    pub x_pn: Option<Spectrogram<S>>,
    pub adv_applied: Option<(AdvApplied, AdvApplied)>,
}

/// Aligned lists of views.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadrupleBatch<S> {
    pub x: Vec<Spectrogram<S>>,
    pub x_p: Vec<Spectrogram<S>>,
    pub x_n: Vec<Spectrogram<S>>,
    pub x_pn: Vec<Spectrogram<S>>,
}

impl<S: Scalar> QuadrupleBatch<S> {
    pub fn from_quadruples(items: Vec<Quadruple<S>>) -> Result<Self> {
        let mut batch = Self {
            x: Vec::with_capacity(items.len()),
            x_p: Vec::with_capacity(items.len()),
            x_n: Vec::new(),
            x_pn: Vec::new(),
        };
        for q in items {
            batch.x.push(q.x);
            batch.x_p.push(q.x_p);
            if let (Some(n), Some(pn)) = (q.x_n, q.x_pn) {
                batch.x_n.push(n);
                batch.x_pn.push(pn);
            }
        }
        batch.validate()?;
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn has_adversarial(&self) -> bool {
        !self.x_n.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if n == 0 || self.x_p.len() != n {
            return Err(Error::Shape("quadruple batch needs equal, non-empty x and x_p lists".into()));
        }
        if !(self.x_n.is_empty() && self.x_pn.is_empty()) && (self.x_n.len() != n || self.x_pn.len() != n) {
            return Err(Error::Shape("adversarial lists must match the batch size".into()));
        }
        let shape = self.x[0].shape();
        if self.views().any(|s| s.shape() != shape) {
            return Err(Error::Shape("all views must share one shape".into()));
        }
        Ok(())
    }

    /// Views in block order `[x | x_p | x_n | x_pn]`.
    pub fn views(&self) -> impl Iterator<Item = &Spectrogram<S>> {
        self.x.iter().chain(&self.x_p).chain(&self.x_n).chain(&self.x_pn)
    }

    pub fn layout(&self) -> ViewLayout {
        if self.has_adversarial() {
            ViewLayout::quadruple(self.len())
        } else {
            ViewLayout::pairs(self.len())
        }
    }

    /// `[views, 1, F, T]` input tensor in block order.
    pub fn to_tensor(&self) -> Tensor<S> {
        let (f, t) = self.x[0].shape();
        let data: Vec<S> = self.views().flat_map(|s| s.values.iter().copied()).collect();
        let count = data.len() / (f * t);
        Tensor::new(vec![count, 1, f, t], data).expect("validated shapes")
    }
}

/// Independent random streams used to build one quadruple.
pub struct QuadrupleStreams {
    pub segments: Rng,
    pub positive: Rng,
    pub adversarial: Rng,
}

/// Cuts two segments, augments the second, computes both spectrograms and
/// (when `adv` is given) an independently drawn adversarial view of each.
pub fn build_quadruple<S: Scalar>(
    recording: &AudioBuffer<S>,
    segment_samples: usize,
    positive: &PositiveAugConfig,
    bank: &RirBank<S>,
    adv: Option<&AdvConfig>,
    front: &Spectrogrammer<S>,
    streams: &mut QuadrupleStreams,
) -> Result<Quadruple<S>> {
    let first = cut_segment(recording, segment_samples, &mut streams.segments);
    let second = cut_segment(recording, segment_samples, &mut streams.segments);
    let second = positive_view(&second, positive, bank, &mut streams.positive)?;
    let x = front.compute(&first)?;
    let x_p = front.compute(&second)?;
    match adv {
        None => Ok(Quadruple {
            x,
            x_p,
            x_n: None,
            x_pn: None,
            adv_applied: None,
        }),
        Some(cfg) => {
            let (x_n, a) = adversarial_view(&x, cfg, &mut streams.adversarial)?;
            let (x_pn, b) = adversarial_view(&x_p, cfg, &mut streams.adversarial)?;
            Ok(Quadruple {
                x,
                x_p,
                x_n: Some(x_n),
                x_pn: Some(x_pn),
                adv_applied: Some((a, b)),
            })
        }
    }
}
