//! Brownian residual-shifting diffusion for image super-resolution.
//!
//! The crate is generic over the working scalar ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix it to `f64`, the precision the
//! checkpoints and tests use.

pub mod analysis;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod image;
pub mod imagedata;
pub mod metrics;
pub mod noise;
pub mod scalar;
pub mod schedule;

pub use error::{Error, Result};
pub use image::{ImageTensor, Shape};
pub use noise::{NoiseKind, RngStream};
pub use scalar::Real;
pub use schedule::ScheduleMode;

pub type Image = ImageTensor<f64>;
pub type Image32 = ImageTensor<f32>;
pub type Schedule = schedule::Schedule<f64>;
pub type Schedule32 = schedule::Schedule<f32>;
pub type DiffusionConfig = diffusion::DiffusionConfig<f64>;
pub type DiffusionConfig32 = diffusion::DiffusionConfig<f32>;
pub type ConvDenoiser = denoiser::ConvDenoiser<f64>;
pub type SrPair = imagedata::SrPair<f64>;
