//! LARS with heavy-ball momentum, and the warmup + cosine learning-rate
//! schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::scalar::Scalar;

/// Peak learning rate under linear scaling: `0.3 * batch / 256`.
pub fn peak_lr(batch_size: usize) -> f64 {
    0.3 * batch_size as f64 / 256.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub steps_per_epoch: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            warmup_epochs: 2,
            total_epochs: 50,
            steps_per_epoch: 1,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_epochs == 0 || self.warmup_epochs >= self.total_epochs {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= warmup_epochs ({}) < total_epochs ({})",
                self.warmup_epochs, self.total_epochs
            )));
        }
        if self.steps_per_epoch == 0 {
            return Err(Error::InvalidConfig("steps_per_epoch must be >= 1".into()));
        }
        Ok(())
    }

    pub fn warmup_steps(&self) -> usize {
        self.warmup_epochs * self.steps_per_epoch
    }

    pub fn total_steps(&self) -> usize {
        self.total_epochs * self.steps_per_epoch
    }
}

/// Linear warmup to `peak`, then cosine decay to zero at `total_steps`.
pub fn lr_at(step: usize, sched: &ScheduleConfig, peak: f64) -> f64 {
    let warm = sched.warmup_steps();
    let total = sched.total_steps();
    if step < warm {
        return peak * step as f64 / warm as f64;
    }
    let step = step.min(total);
    let progress = (step - warm) as f64 / (total - warm).max(1) as f64;
    peak * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LarsConfig {
    pub weight_decay: f64,
    pub momentum: f64,
    pub trust_coefficient: f64,
    pub eps: f64,
    /// Skip trust scaling and weight decay for biases and BN parameters.
    pub exclude_bias_and_norm: bool,
}

impl Default for LarsConfig {
    fn default() -> Self {
        Self {
            weight_decay: 1e-6,
            momentum: 0.9,
            trust_coefficient: 0.001,
            eps: 1e-9,
            exclude_bias_and_norm: true,
        }
    }
}

impl LarsConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.weight_decay) && ok(self.momentum) && self.trust_coefficient > 0.0 && self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid LARS coefficients: {self:?}")));
        }
        Ok(())
    }

    /// Whether `name` is exempt from adaptation.
    pub fn is_excluded(&self, name: &str) -> bool {
        self.exclude_bias_and_norm && is_bias_or_norm(name)
    }
}

pub fn is_bias_or_norm(name: &str) -> bool {
    name.ends_with(".bias") || name.ends_with(".gamma") || name.ends_with(".beta")
}

/// Per-parameter momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Lars<S> {
    pub cfg: LarsConfig,
    momentum: Vec<Vec<S>>,
}

impl<S: Scalar> Lars<S> {
    pub fn new(cfg: LarsConfig, params: &[Tensor<S>]) -> Self {
        Self {
            cfg,
            momentum: params.iter().map(|p| vec![S::zero(); p.len()]).collect(),
        }
    }

    pub fn momentum_buffers(&self) -> &[Vec<S>] {
        &self.momentum
    }

    /// One update over all parameters. A non-finite gradient aborts before
    /// any parameter is touched.
    pub fn step(&mut self, names: &[String], params: &mut [Tensor<S>], grads: &[Tensor<S>], lr: f64) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.momentum.len() || names.len() != params.len() {
            return Err(Error::Shape("parameter, gradient and momentum lists differ in length".into()));
        }
        for ((name, p), g) in names.iter().zip(params.iter()).zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::Shape(format!("{name}: param {:?} vs grad {:?}", p.shape(), g.shape())));
            }
            if !g.all_finite() {
                return Err(Error::NonFinite(format!("gradient of {name}")));
            }
        }
        for (((name, p), g), m) in names.iter().zip(params.iter_mut()).zip(grads).zip(&mut self.momentum) {
            let excluded = self.cfg.is_excluded(name);
            lars_update(p.data_mut(), g.data(), m, lr, &self.cfg, excluded);
        }
        Ok(())
    }
}

/// `g' = g + wd w`; `trust = eta |w| / (|g'| + eps)` (1 if either norm is 0);
/// `m <- mu m + trust lr g'`; `w <- w - m`. Excluded tensors use `trust = 1`
/// and no weight decay.
pub fn lars_update<S: Scalar>(w: &mut [S], g: &[S], m: &mut [S], lr: f64, cfg: &LarsConfig, excluded: bool) {
    let wd = if excluded { S::zero() } else { S::lit(cfg.weight_decay) };
    let adjusted: Vec<S> = w.iter().zip(g).map(|(&wv, &gv)| gv + wd * wv).collect();
    let trust = if excluded {
        S::one()
    } else {
        let w_norm = w.iter().map(|&v| v * v).sum::<S>().sqrt();
        let g_norm = adjusted.iter().map(|&v| v * v).sum::<S>().sqrt();
        if w_norm > S::zero() && g_norm > S::zero() {
            S::lit(cfg.trust_coefficient) * w_norm / (g_norm + S::lit(cfg.eps))
        } else {
            S::one()
        }
    };
    let scale = trust * S::lit(lr);
    let mu = S::lit(cfg.momentum);
    for ((wv, mv), gv) in w.iter_mut().zip(m.iter_mut()).zip(adjusted) {
        *mv = mu * *mv + scale * gv;
        *wv -= *mv;
    }
}

/// Plain SGD with heavy-ball momentum, used by the downstream probes.
#[derive(Debug, Clone)]
pub struct Sgd<S> {
    pub momentum: f64,
    buffers: Vec<Vec<S>>,
}

impl<S: Scalar> Sgd<S> {
    pub fn new(momentum: f64, params: &[&Tensor<S>]) -> Self {
        Self {
            momentum,
            buffers: params.iter().map(|p| vec![S::zero(); p.len()]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor<S>], grads: &[&Tensor<S>], lr: f64) -> Result<()> {
        let mu = S::lit(self.momentum);
        let lr = S::lit(lr);
        for ((p, g), buf) in params.iter_mut().zip(grads).zip(&mut self.buffers) {
            if !g.all_finite() {
                return Err(Error::NonFinite("probe gradient".into()));
            }
            for ((w, &gv), b) in p.data_mut().iter_mut().zip(g.data()).zip(buf.iter_mut()) {
                *b = mu * *b + gv;
                *w -= lr * *b;
            }
        }
        Ok(())
    }
}
