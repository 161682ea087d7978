//! Contrastive audio representation learning with adversarial positional
//! samples.
//!
//! Pipeline: audio is decoded and cut into segments ([`audio_io`]), turned
//! into log spectrograms ([`dsp`]), augmented into positive and adversarial
//! views ([`augment`]), embedded by a small convolutional encoder and
//! projection head ([`nn`]) and trained with NT-Xent over quadruple batches
//! ([`contrastive`], [`optim`], [`train`]). [`eval`] provides linear-probe and
//! fine-tuning evaluation, metrics and synthetic datasets.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the two concrete instantiations.

pub mod audio_io;
pub mod augment;
pub mod contrastive;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod nn;
pub mod optim;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use scalar::{Precision, Scalar};

pub type AudioBuffer32 = audio_io::AudioBuffer<f32>;
pub type AudioBuffer64 = audio_io::AudioBuffer<f64>;
pub type Spectrogram32 = dsp::Spectrogram<f32>;
pub type Spectrogram64 = dsp::Spectrogram<f64>;
pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Network32 = nn::Network<f32>;
pub type Network64 = nn::Network<f64>;
pub type ModelState32 = nn::ModelState<f32>;
pub type ModelState64 = nn::ModelState<f64>;
