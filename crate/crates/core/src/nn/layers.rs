//! Layer kernels with hand-written backward passes.
//!
//! Work is split over the batch axis; every cross-sample reduction is summed
//! in sample order so results do not depend on the thread count.

use rayon::prelude::*;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

fn dims4<S: Scalar>(x: &Tensor<S>, what: &str) -> Result<(usize, usize, usize, usize)> {
    match *x.shape() {
        [n, c, h, w] => Ok((n, c, h, w)),
        ref s => Err(Error::Shape(format!("{what}: expected a 4-d tensor, got {s:?}"))),
    }
}

/// 3x3 cross-correlation, stride 1, zero padding 1, plus bias.
pub fn conv2d_forward<S: Scalar>(x: &Tensor<S>, k: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let (n, c, h, w) = dims4(x, "conv2d input")?;
    let (o, kc, kh, kw) = dims4(k, "conv2d kernel")?;
    if kc != c || kh != 3 || kw != 3 || b.shape() != [o] {
        return Err(Error::Shape(format!(
            "conv2d: input {:?}, kernel {:?}, bias {:?}",
            x.shape(),
            k.shape(),
            b.shape()
        )));
    }
    let plane = h * w;
    let kd = k.data();
    let bd = b.data();
    let mut out = vec![S::zero(); n * o * plane];
    out.par_chunks_mut(o * plane)
        .zip(x.data().par_chunks(c * plane))
        .for_each(|(dst, src)| {
            let cols = im2col(src, c, h, w);
            for (oi, dplane) in dst.chunks_mut(plane).enumerate() {
                dplane.fill(bd[oi]);
            }
            S::gemm(o, c * 9, plane, (kd, c * 9, 1), (&cols, plane, 1), S::one(), (dst, plane, 1));
        });
    Tensor::new(vec![n, o, h, w], out)
}

/// Unfolds `[c, h, w]` into `[c * 9, h * w]` with zero padding: row
/// `ci * 9 + ky * 3 + kx` holds `src[ci][y + ky - 1][x + kx - 1]`.
fn im2col<S: Scalar>(src: &[S], c: usize, h: usize, w: usize) -> Vec<S> {
    let plane = h * w;
    let mut cols = vec![S::zero(); c * 9 * plane];
    for ci in 0..c {
        let splane = &src[ci * plane..(ci + 1) * plane];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((ci * 9) + ky * 3 + kx) * plane..][..plane];
                let (x_lo, x_hi) = (usize::from(kx == 0), w - usize::from(kx == 2));
                for y in 0..h {
                    let sy = y + ky;
                    if sy == 0 || sy > h {
                        continue;
                    }
                    let srow = &splane[(sy - 1) * w + x_lo + kx - 1..(sy - 1) * w + x_hi + kx - 1];
                    row[y * w + x_lo..y * w + x_hi].copy_from_slice(srow);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: sums each column entry back into its source pixel.
fn col2im<S: Scalar>(cols: &[S], c: usize, h: usize, w: usize) -> Vec<S> {
    let plane = h * w;
    let mut dst = vec![S::zero(); c * plane];
    for ci in 0..c {
        let dplane = &mut dst[ci * plane..(ci + 1) * plane];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((ci * 9) + ky * 3 + kx) * plane..][..plane];
                let (x_lo, x_hi) = (usize::from(kx == 0), w - usize::from(kx == 2));
                for y in 0..h {
                    let sy = y + ky;
                    if sy == 0 || sy > h {
                        continue;
                    }
                    let drow = &mut dplane[(sy - 1) * w + x_lo + kx - 1..(sy - 1) * w + x_hi + kx - 1];
                    for (d, &v) in drow.iter_mut().zip(&row[y * w + x_lo..y * w + x_hi]) {
                        *d += v;
                    }
                }
            }
        }
    }
    dst
}

pub struct ConvGrads<S> {
    pub dx: Tensor<S>,
    pub dk: Tensor<S>,
    pub db: Tensor<S>,
}

pub fn conv2d_backward<S: Scalar>(x: &Tensor<S>, k: &Tensor<S>, dy: &Tensor<S>) -> Result<ConvGrads<S>> {
    let (n, c, h, w) = dims4(x, "conv2d input")?;
    let (o, _, _, _) = dims4(k, "conv2d kernel")?;
    if dy.shape() != [n, o, h, w] {
        return Err(Error::Shape(format!("conv2d backward: dy {:?}", dy.shape())));
    }
    let plane = h * w;
    let kd = k.data();
    let per_sample: Vec<(Vec<S>, Vec<S>, Vec<S>)> = x
        .data()
        .par_chunks(c * plane)
        .zip(dy.data().par_chunks(o * plane))
        .map(|(xs, dys)| {
            let cols = im2col(xs, c, h, w);
            let db: Vec<S> = dys.chunks(plane).map(|g| g.iter().copied().sum()).collect();
            // dk = dy * cols^T, dcols = k^T * dy
            let mut dk = vec![S::zero(); o * c * 9];
            S::gemm(o, plane, c * 9, (dys, plane, 1), (&cols, 1, plane), S::zero(), (&mut dk, c * 9, 1));
            let mut dcols = cols;
            S::gemm(c * 9, o, plane, (kd, 1, c * 9), (dys, plane, 1), S::zero(), (&mut dcols, plane, 1));
            (col2im(&dcols, c, h, w), dk, db)
        })
        .collect();
    let mut dx = Vec::with_capacity(n * c * plane);
    let mut dk = vec![S::zero(); o * c * 9];
    let mut db = vec![S::zero(); o];
    for (sdx, sdk, sdb) in per_sample {
        dx.extend(sdx);
        dk.iter_mut().zip(&sdk).for_each(|(a, &b)| *a += b);
        db.iter_mut().zip(&sdb).for_each(|(a, &b)| *a += b);
    }
    Ok(ConvGrads {
        dx: Tensor::new(vec![n, c, h, w], dx)?,
        dk: Tensor::new(k.shape().to_vec(), dk)?,
        db: Tensor::new(vec![o], db)?,
    })
}

/// Running statistics of one batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<S> {
    pub mean: Vec<S>,
    pub var: Vec<S>,
}

impl<S: Scalar> RunningStats<S> {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![S::zero(); channels],
            var: vec![S::one(); channels],
        }
    }
}

/// Cached values for the batch-norm backward pass.
#[derive(Debug, Clone)]
pub struct BnCache<S> {
    xhat: Vec<S>,
    inv_std: Vec<S>,
}

/// `(N, C, inner)` view of a 2-d `[N, C]` or 4-d `[N, C, H, W]` tensor.
fn bn_dims<S: Scalar>(x: &Tensor<S>) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [n, c] => Ok((n, c, 1)),
        [n, c, h, w] => Ok((n, c, h * w)),
        ref s => Err(Error::Shape(format!("batchnorm: unsupported shape {s:?}"))),
    }
}

/// Train-mode batch norm: normalizes by batch statistics and folds them into
/// `running` with momentum 0.1 (unbiased variance for the running estimate).
pub fn batchnorm_forward_train<S: Scalar>(
    x: &Tensor<S>,
    gamma: &Tensor<S>,
    beta: &Tensor<S>,
    running: &mut RunningStats<S>,
) -> Result<(Tensor<S>, BnCache<S>)> {
    let (n, c, inner) = bn_dims(x)?;
    if gamma.shape() != [c] || beta.shape() != [c] || running.mean.len() != c {
        return Err(Error::Shape(format!("batchnorm: {c} channels vs gamma {:?}", gamma.shape())));
    }
    let count = n * inner;
    if count < 2 {
        return Err(Error::Shape("batchnorm in train mode needs at least 2 values per channel".into()));
    }
    let xd = x.data();
    let m = S::from_usize_lossy(count);
    let momentum = S::lit(BN_MOMENTUM);
    let mut inv_std = vec![S::zero(); c];
    let mut xhat = vec![S::zero(); xd.len()];
    let mut out = vec![S::zero(); xd.len()];
    for ch in 0..c {
        let values = || (0..n).flat_map(move |i| xd[(i * c + ch) * inner..(i * c + ch + 1) * inner].iter().copied());
        let mean = values().sum::<S>() / m;
        let var = values().map(|v| (v - mean) * (v - mean)).sum::<S>() / m;
        let istd = S::one() / (var + S::lit(BN_EPS)).sqrt();
        inv_std[ch] = istd;
        let (g, b) = (gamma.data()[ch], beta.data()[ch]);
        for i in 0..n {
            let range = (i * c + ch) * inner..(i * c + ch + 1) * inner;
            for j in range {
                let xh = (xd[j] - mean) * istd;
                xhat[j] = xh;
                out[j] = g * xh + b;
            }
        }
        let unbiased = var * m / (m - S::one());
        running.mean[ch] = (S::one() - momentum) * running.mean[ch] + momentum * mean;
        running.var[ch] = (S::one() - momentum) * running.var[ch] + momentum * unbiased;
    }
    Ok((Tensor::new(x.shape().to_vec(), out)?, BnCache { xhat, inv_std }))
}

/// Eval-mode batch norm with running statistics.
pub fn batchnorm_forward_eval<S: Scalar>(
    x: &Tensor<S>,
    gamma: &Tensor<S>,
    beta: &Tensor<S>,
    running: &RunningStats<S>,
) -> Result<Tensor<S>> {
    let (n, c, inner) = bn_dims(x)?;
    if gamma.shape() != [c] || beta.shape() != [c] || running.mean.len() != c {
        return Err(Error::Shape(format!("batchnorm: {c} channels vs gamma {:?}", gamma.shape())));
    }
    let mut out = x.data().to_vec();
    for i in 0..n {
        for ch in 0..c {
            let scale = gamma.data()[ch] / (running.var[ch] + S::lit(BN_EPS)).sqrt();
            let (mean, b) = (running.mean[ch], beta.data()[ch]);
            for v in &mut out[(i * c + ch) * inner..(i * c + ch + 1) * inner] {
                *v = (*v - mean) * scale + b;
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

pub struct BnGrads<S> {
    pub dx: Tensor<S>,
    pub dgamma: Tensor<S>,
    pub dbeta: Tensor<S>,
}

pub fn batchnorm_backward<S: Scalar>(dy: &Tensor<S>, gamma: &Tensor<S>, cache: &BnCache<S>) -> Result<BnGrads<S>> {
    let (n, c, inner) = bn_dims(dy)?;
    let m = S::from_usize_lossy(n * inner);
    let dyd = dy.data();
    let mut dx = vec![S::zero(); dyd.len()];
    let mut dgamma = vec![S::zero(); c];
    let mut dbeta = vec![S::zero(); c];
    for ch in 0..c {
        let idx = || (0..n).flat_map(move |i| (i * c + ch) * inner..(i * c + ch + 1) * inner);
        let sum_dy: S = idx().map(|j| dyd[j]).sum();
        let sum_dy_xhat: S = idx().map(|j| dyd[j] * cache.xhat[j]).sum();
        dgamma[ch] = sum_dy_xhat;
        dbeta[ch] = sum_dy;
        let k = gamma.data()[ch] * cache.inv_std[ch] / m;
        for j in idx() {
            dx[j] = k * (m * dyd[j] - sum_dy - cache.xhat[j] * sum_dy_xhat);
        }
    }
    Ok(BnGrads {
        dx: Tensor::new(dy.shape().to_vec(), dx)?,
        dgamma: Tensor::new(vec![c], dgamma)?,
        dbeta: Tensor::new(vec![c], dbeta)?,
    })
}

pub fn relu_forward<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let data = x.data().iter().map(|&v| if v > S::zero() { v } else { S::zero() }).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// Gradient through ReLU given its output.
pub fn relu_backward<S: Scalar>(y: &Tensor<S>, dy: &Tensor<S>) -> Tensor<S> {
    let data = y
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&o, &g)| if o > S::zero() { g } else { S::zero() })
        .collect();
    Tensor::new(dy.shape().to_vec(), data).expect("same shape")
}

/// 2x2 max pool, stride 2, floor semantics. Returns the flat input index of
/// each selected element (first maximum in row-major window order).
pub fn maxpool2_forward<S: Scalar>(x: &Tensor<S>) -> Result<(Tensor<S>, Vec<usize>)> {
    let (n, c, h, w) = dims4(x, "maxpool input")?;
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::Shape(format!("maxpool: spatial size {h}x{w} underflows")));
    }
    let xd = x.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::with_capacity(n * c * oh * ow);
    for p in 0..n * c {
        let base = p * h * w;
        for y in 0..oh {
            for xq in 0..ow {
                let mut best = base + 2 * y * w + 2 * xq;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let j = base + (2 * y + dy) * w + 2 * xq + dx;
                    if xd[j] > xd[best] {
                        best = j;
                    }
                }
                out.push(xd[best]);
                arg.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![n, c, oh, ow], out)?, arg))
}

pub fn maxpool2_backward<S: Scalar>(input_shape: &[usize], arg: &[usize], dy: &Tensor<S>) -> Tensor<S> {
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.data_mut();
    for (&j, &g) in arg.iter().zip(dy.data()) {
        d[j] += g;
    }
    dx
}

/// Mean over spatial dims: `[N, C, H, W] -> [N, C]`.
pub fn global_avg_pool_forward<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>> {
    let (n, c, h, w) = dims4(x, "global average pool")?;
    let inv = S::one() / S::from_usize_lossy(h * w);
    let data = x.data().chunks(h * w).map(|p| p.iter().copied().sum::<S>() * inv).collect();
    Tensor::new(vec![n, c], data)
}

pub fn global_avg_pool_backward<S: Scalar>(input_shape: &[usize], dy: &Tensor<S>) -> Tensor<S> {
    let inner = input_shape[2] * input_shape[3];
    let inv = S::one() / S::from_usize_lossy(inner);
    let data = dy.data().iter().flat_map(|&g| std::iter::repeat(g * inv).take(inner)).collect();
    Tensor::new(input_shape.to_vec(), data).expect("same element count")
}

/// `y = x W^T + b`, `W` is `[out, in]`.
pub fn linear_forward<S: Scalar>(x: &Tensor<S>, wt: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let (n, d_in) = match *x.shape() {
        [n, d] => (n, d),
        ref s => return Err(Error::Shape(format!("linear: expected 2-d input, got {s:?}"))),
    };
    let d_out = wt.dim(0);
    if wt.shape() != [d_out, d_in] || b.shape() != [d_out] {
        return Err(Error::Shape(format!(
            "linear: input {:?}, weight {:?}, bias {:?}",
            x.shape(),
            wt.shape(),
            b.shape()
        )));
    }
    let mut out = vec![S::zero(); n * d_out];
    for (row, dst) in x.data().chunks(d_in).zip(out.chunks_mut(d_out)) {
        for (j, d) in dst.iter_mut().enumerate() {
            let wrow = &wt.data()[j * d_in..(j + 1) * d_in];
            *d = b.data()[j] + row.iter().zip(wrow).map(|(&a, &w)| a * w).sum::<S>();
        }
    }
    Tensor::new(vec![n, d_out], out)
}

pub struct LinearGrads<S> {
    pub dx: Tensor<S>,
    pub dw: Tensor<S>,
    pub db: Tensor<S>,
}

pub fn linear_backward<S: Scalar>(x: &Tensor<S>, wt: &Tensor<S>, dy: &Tensor<S>) -> Result<LinearGrads<S>> {
    let (n, d_in) = (x.dim(0), x.dim(1));
    let d_out = wt.dim(0);
    if dy.shape() != [n, d_out] {
        return Err(Error::Shape(format!("linear backward: dy {:?}", dy.shape())));
    }
    let mut dx = vec![S::zero(); n * d_in];
    let mut dw = vec![S::zero(); d_out * d_in];
    let mut db = vec![S::zero(); d_out];
    for ((xrow, grow), dxrow) in x.data().chunks(d_in).zip(dy.data().chunks(d_out)).zip(dx.chunks_mut(d_in)) {
        for (j, &g) in grow.iter().enumerate() {
            db[j] += g;
            let wrow = &wt.data()[j * d_in..(j + 1) * d_in];
            let dwrow = &mut dw[j * d_in..(j + 1) * d_in];
            for ((dwv, dxv), (&xv, &wv)) in dwrow.iter_mut().zip(dxrow.iter_mut()).zip(xrow.iter().zip(wrow)) {
                *dwv += g * xv;
                *dxv += g * wv;
            }
        }
    }
    Ok(LinearGrads {
        dx: Tensor::new(vec![n, d_in], dx)?,
        dw: Tensor::new(vec![d_out, d_in], dw)?,
        db: Tensor::new(vec![d_out], db)?,
    })
}
