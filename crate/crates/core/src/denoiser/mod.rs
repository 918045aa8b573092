//! Pluggable `x_0` predictors: a ground-truth oracle for verifying the
//! sampler, and small trainable convolutional networks.

mod checkpoint;
mod net;
mod train;

pub use checkpoint::{
    checkpoint_roundtrip, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, DenoiserCheckpoint,
    TrainConfig, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use train::{smoothed, train, TrainOptions, TrainOutcome, STREAM_BATCH, STREAM_INIT};

use std::fmt;
use std::str::FromStr;

use crate::diffusion::{loss_weight, DiffusionConfig, LossWeighting};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Real;

use net::Planes;

/// Anything that predicts `x0_hat` from `(x_t, y0_up, t)`.
pub trait Denoiser<T: Real> {
    fn predict(&self, x_t: &ImageTensor<T>, y0_up: &ImageTensor<T>, t: usize, eta_t: T) -> Result<ImageTensor<T>>;
}

impl<T: Real, D: Denoiser<T> + ?Sized> Denoiser<T> for &D {
    fn predict(&self, x_t: &ImageTensor<T>, y0_up: &ImageTensor<T>, t: usize, eta_t: T) -> Result<ImageTensor<T>> {
        (**self).predict(x_t, y0_up, t, eta_t)
    }
}

/// Test-only predictor that returns the true `x_0`.
///
/// Holds one or more `(y0_up, x_0)` pairs; with several pairs the truth is
/// looked up by the conditioning image.
#[derive(Debug, Clone)]
pub struct OracleDenoiser<T> {
    truths: Vec<(Option<ImageTensor<T>>, ImageTensor<T>)>,
}

impl<T: Real> OracleDenoiser<T> {
    pub fn new(x0: ImageTensor<T>) -> Self {
        OracleDenoiser {
            truths: vec![(None, x0)],
        }
    }

    /// Oracle over `(x_0, y0_up)` pairs.
    pub fn from_pairs(pairs: &[(ImageTensor<T>, ImageTensor<T>)]) -> Self {
        OracleDenoiser {
            truths: pairs.iter().map(|(x0, y)| (Some(y.clone()), x0.clone())).collect(),
        }
    }
}

impl<T: Real> Denoiser<T> for OracleDenoiser<T> {
    fn predict(&self, x_t: &ImageTensor<T>, y0_up: &ImageTensor<T>, _t: usize, _eta: T) -> Result<ImageTensor<T>> {
        let truth = match self.truths.as_slice() {
            [(None, x0)] => x0,
            many => {
                &many
                    .iter()
                    .find(|(y, _)| y.as_ref() == Some(y0_up))
                    .ok_or_else(|| Error::Parameter("oracle has no ground truth for this input".into()))?
                    .1
            }
        };
        x_t.ensure_same_shape(truth)?;
        Ok(truth.clone())
    }
}

/// One training item: `(x_0, y0_up, t, x_t)`.
pub type Draw<'a, T> = (&'a ImageTensor<T>, &'a ImageTensor<T>, usize, ImageTensor<T>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DenoiserKind {
    Oracle,
    /// One convolution, no nonlinearity.
    Affine,
    /// Convolution, ReLU, convolution.
    Conv2,
}

impl DenoiserKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DenoiserKind::Oracle => "oracle",
            DenoiserKind::Affine => "affine",
            DenoiserKind::Conv2 => "conv2",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            DenoiserKind::Oracle => 0,
            DenoiserKind::Affine => 1,
            DenoiserKind::Conv2 => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DenoiserKind::Oracle),
            1 => Some(DenoiserKind::Affine),
            2 => Some(DenoiserKind::Conv2),
            _ => None,
        }
    }
}

impl fmt::Display for DenoiserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DenoiserKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(DenoiserKind::Oracle),
            "affine" => Ok(DenoiserKind::Affine),
            "conv2" => Ok(DenoiserKind::Conv2),
            other => Err(Error::Parameter(format!("unknown denoiser kind `{other}`"))),
        }
    }
}

/// Upper bound on trainable parameters.
pub const MAX_PARAMS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenoiserSpec {
    pub kind: DenoiserKind,
    /// Channels of the predicted image; the network sees `2 * C + 1` inputs.
    pub image_channels: usize,
    pub hidden_width: usize,
    pub kernel_size: usize,
}

impl DenoiserSpec {
    pub fn conv2(image_channels: usize) -> Self {
        DenoiserSpec {
            kind: DenoiserKind::Conv2,
            image_channels,
            hidden_width: 8,
            kernel_size: 3,
        }
    }

    pub fn affine(image_channels: usize) -> Self {
        DenoiserSpec {
            kind: DenoiserKind::Affine,
            ..Self::conv2(image_channels)
        }
    }

    /// `x_t` channels, `y0_up` channels and one timestep channel.
    pub fn in_channels(&self) -> usize {
        2 * self.image_channels + 1
    }

    pub fn param_count(&self) -> usize {
        net::param_count(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.image_channels == 1 || self.image_channels == 3) {
            return Err(Error::Parameter(format!(
                "denoiser image channels must be 1 or 3, got {}",
                self.image_channels
            )));
        }
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "kernel size must be odd, got {}",
                self.kernel_size
            )));
        }
        if self.kind == DenoiserKind::Conv2 && self.hidden_width == 0 {
            return Err(Error::Parameter("hidden width must be positive".into()));
        }
        if self.param_count() >= MAX_PARAMS {
            return Err(Error::Parameter(format!(
                "{} parameters exceeds the limit of {MAX_PARAMS}",
                self.param_count()
            )));
        }
        Ok(())
    }
}

/// A trainable network with parameters held in the working precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvDenoiser<T> {
    spec: DenoiserSpec,
    params: Vec<T>,
}

impl<T: Real> ConvDenoiser<T> {
    pub fn new(spec: DenoiserSpec, params: Vec<T>) -> Result<Self> {
        spec.validate()?;
        if spec.kind == DenoiserKind::Oracle {
            return Err(Error::Unsupported(
                "the oracle predicts from ground truth; use OracleDenoiser".into(),
            ));
        }
        if params.len() != spec.param_count() {
            return Err(Error::Parameter(format!(
                "{} parameters given, spec needs {}",
                params.len(),
                spec.param_count()
            )));
        }
        Ok(ConvDenoiser { spec, params })
    }

    pub fn spec(&self) -> &DenoiserSpec {
        &self.spec
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn check_input(&self, x_t: &ImageTensor<T>, y0_up: &ImageTensor<T>) -> Result<()> {
        x_t.ensure_same_shape(y0_up)?;
        if x_t.channels() != self.spec.image_channels {
            return Err(Error::Parameter(format!(
                "denoiser expects {}-channel images, got {}",
                self.spec.image_channels,
                x_t.channels()
            )));
        }
        Ok(())
    }

    /// Single-item loss and its gradient for a given draw `(t, x_t)`.
    pub fn loss_gradient(
        &self,
        x0: &ImageTensor<T>,
        y0_up: &ImageTensor<T>,
        t: usize,
        x_t: &ImageTensor<T>,
        cfg: &DiffusionConfig<T>,
        weighting: LossWeighting,
    ) -> Result<(T, Vec<T>)> {
        self.check_input(x_t, y0_up)?;
        x_t.ensure_same_shape(x0)?;
        let eta = cfg.schedule.eta(t)?;
        let weight = loss_weight(cfg, t, weighting, x0.len())?;
        let input = Planes::network_input(x_t, y0_up, eta)?;
        let mut out = net::forward(&self.spec, &self.params, &input)?;
        let target = Planes::from_image(x0);
        let mut loss = T::zero();
        let two_w = T::lit(2.0) * weight;
        for (o, &x) in out.data.iter_mut().zip(&target.data) {
            let diff = *o - x;
            loss += diff * diff;
            *o = two_w * diff;
        }
        let grad = net::backward(&self.spec, &self.params, &input, &out)?;
        Ok((weight * loss, grad))
    }

    /// Sum of single-item losses and gradients over `draws` of `(x_0, y0_up, t, x_t)`,
    /// accumulated in index order.
    pub fn batch_loss_gradient(
        &self,
        draws: &[Draw<'_, T>],
        cfg: &DiffusionConfig<T>,
        weighting: LossWeighting,
    ) -> Result<(T, Vec<T>)> {
        let mut total = T::zero();
        let mut grad = vec![T::zero(); self.params.len()];
        for (x0, y0_up, t, x_t) in draws {
            let (l, g) = self.loss_gradient(x0, y0_up, *t, x_t, cfg, weighting)?;
            total += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok((total, grad))
    }
}

impl<T: Real> Denoiser<T> for ConvDenoiser<T> {
    fn predict(&self, x_t: &ImageTensor<T>, y0_up: &ImageTensor<T>, _t: usize, eta_t: T) -> Result<ImageTensor<T>> {
        self.check_input(x_t, y0_up)?;
        let input = Planes::network_input(x_t, y0_up, eta_t)?;
        net::forward(&self.spec, &self.params, &input)?.into_image()
    }
}
