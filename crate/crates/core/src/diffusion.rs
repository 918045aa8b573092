//! Forward Brownian residual-shifting chain, its closed-form marginal, the
//! Gaussian reverse posterior, the reverse sampler and the training loss.
//!
//! The forward kernel is
//! `q(x_t | x_{t-1}, y_0) = N(x_{t-1} + alpha_t * delta_0, sigma^2 * alpha_t * I)`
//! with `delta_0 = y0_up - x_0`. Composing it from `x_0` gives
//! `N(x_0 + eta_t * delta_0, sigma^2 * eta_t * I)` (with `eta` measured from
//! `eta_0`), and conditioning on a predicted `x0_hat` gives the posterior
//! used by the sampler.

use std::fmt;
use std::str::FromStr;

use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::noise::{brownian_field, RngStream};
use crate::scalar::Real;
use crate::schedule::{Schedule, ScheduleMode};

/// Range of Brownian strengths considered well behaved.
pub const ADVISED_SIGMA: (f64, f64) = (0.1, 2.0);

/// Where the Brownian term enters a forward step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseConvention {
    /// Increment variance `sigma^2 * alpha_t`: noise `sigma * sqrt(alpha_t) * w`.
    #[default]
    Variance,
    /// Noise inside the drift product: `alpha_t * (delta_0 + sigma * w)`.
    DriftScaled,
}

impl NoiseConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseConvention::Variance => "variance",
            NoiseConvention::DriftScaled => "drift-scaled",
        }
    }
}

impl fmt::Display for NoiseConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variance" => Ok(NoiseConvention::Variance),
            "drift-scaled" => Ok(NoiseConvention::DriftScaled),
            other => Err(Error::Parameter(format!("unknown noise convention `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossWeighting {
    /// Per-pixel mean squared error of the `x_0` prediction.
    #[default]
    UniformMse,
    /// Closed-form KL between true and predicted posteriors; the terminal
    /// step falls back to the plain squared error.
    ExactKl,
}

impl LossWeighting {
    pub fn as_str(self) -> &'static str {
        match self {
            LossWeighting::UniformMse => "uniform-mse",
            LossWeighting::ExactKl => "exact-kl",
        }
    }
}

impl fmt::Display for LossWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-mse" => Ok(LossWeighting::UniformMse),
            "exact-kl" => Ok(LossWeighting::ExactKl),
            other => Err(Error::Parameter(format!("unknown loss weighting `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionConfig<T> {
    pub sigma: T,
    pub schedule: Schedule<T>,
    pub convention: NoiseConvention,
    pub seed: u64,
}

impl<T: Real> DiffusionConfig<T> {
    pub fn new(sigma: T, schedule: Schedule<T>, convention: NoiseConvention, seed: u64) -> Result<Self> {
        if !(sigma > T::zero() && sigma.is_finite()) {
            return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
        }
        Ok(DiffusionConfig {
            sigma,
            schedule,
            convention,
            seed,
        })
    }

    /// Normalized sigmoid schedule centred at `t_mid`, variance convention.
    pub fn standard(steps: usize, t_mid: T, sigma: T, seed: u64) -> Result<Self> {
        let schedule = Schedule::build(steps, t_mid, ScheduleMode::Normalized)?;
        Self::new(sigma, schedule, NoiseConvention::Variance, seed)
    }

    pub fn steps(&self) -> usize {
        self.schedule.steps()
    }

    /// True when sigma lies outside the advised range.
    pub fn sigma_advisory(&self) -> bool {
        let s = self.sigma.as_f64();
        !(s > ADVISED_SIGMA.0 && s < ADVISED_SIGMA.1)
    }

    /// `eta_t - eta_0`: residual fraction accumulated from `x_0` to step `t`.
    pub fn shift(&self, t: usize) -> Result<T> {
        Ok(self.schedule.eta(t)? - self.schedule.eta(0)?)
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::Index {
                index: t,
                lo: 1,
                hi: self.steps(),
            });
        }
        Ok(())
    }
}

/// A chain state `x_t` and optionally the states visited so far.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState<T> {
    pub x_t: ImageTensor<T>,
    pub t: usize,
    pub trajectory: Option<Vec<ImageTensor<T>>>,
}

/// One forward increment for a given drift and standard-normal draw `w`.
pub fn step_increment<T: Real>(alpha_t: T, sigma: T, delta0: T, w: T, convention: NoiseConvention) -> T {
    match convention {
        NoiseConvention::Variance => alpha_t * delta0 + sigma * alpha_t.sqrt() * w,
        NoiseConvention::DriftScaled => alpha_t * (delta0 + sigma * w),
    }
}

/// Forward step with an explicit standard-normal field `w`.
pub fn forward_step_with<T: Real>(
    x_prev: &ImageTensor<T>,
    delta0: &ImageTensor<T>,
    w: &ImageTensor<T>,
    alpha_t: T,
    sigma: T,
    convention: NoiseConvention,
) -> Result<ImageTensor<T>> {
    x_prev.ensure_same_shape(delta0)?;
    x_prev.ensure_same_shape(w)?;
    let data = x_prev
        .data()
        .iter()
        .zip(delta0.data())
        .zip(w.data())
        .map(|((&x, &d), &n)| x + step_increment(alpha_t, sigma, d, n, convention))
        .collect();
    ImageTensor::from_vec(x_prev.shape(), data)
}

/// Draws `x_t ~ q(x_t | x_{t-1}, y_0)`.
pub fn forward_step<T: Real>(
    x_prev: &ImageTensor<T>,
    delta0: &ImageTensor<T>,
    t: usize,
    cfg: &DiffusionConfig<T>,
    rng: &mut RngStream,
) -> Result<ImageTensor<T>> {
    x_prev.ensure_same_shape(delta0)?;
    cfg.check_step(t)?;
    let alpha = cfg.schedule.alpha(t)?;
    let w: Vec<T> = brownian_field(1.0, 1.0, &x_prev.shape().dims(), rng)?;
    let w = ImageTensor::from_vec(x_prev.shape(), w)?;
    forward_step_with(x_prev, delta0, &w, alpha, cfg.sigma, cfg.convention)
}

/// Draws `x_t` directly from `N(x_0 + eta_t * delta_0, sigma^2 * eta_t * I)`.
pub fn forward_marginal<T: Real>(
    x0: &ImageTensor<T>,
    delta0: &ImageTensor<T>,
    t: usize,
    cfg: &DiffusionConfig<T>,
    rng: &mut RngStream,
) -> Result<ImageTensor<T>> {
    x0.ensure_same_shape(delta0)?;
    cfg.check_step(t)?;
    let eta = cfg.shift(t)?;
    let sd = cfg.sigma * eta.sqrt();
    let data = x0
        .data()
        .iter()
        .zip(delta0.data())
        .map(|(&x, &d)| x + eta * d + sd * T::lit(rng.standard_normal()))
        .collect();
    ImageTensor::from_vec(x0.shape(), data)
}

/// Runs the forward chain from `x_0` for `t` steps, returning every state
/// `x_0..=x_t`.
pub fn forward_trajectory<T: Real>(
    x0: &ImageTensor<T>,
    delta0: &ImageTensor<T>,
    t: usize,
    cfg: &DiffusionConfig<T>,
    rng: &mut RngStream,
) -> Result<Vec<ImageTensor<T>>> {
    if t > cfg.steps() {
        return Err(Error::Index {
            index: t,
            lo: 0,
            hi: cfg.steps(),
        });
    }
    let mut states = vec![x0.clone()];
    for s in 1..=t {
        let next = forward_step(states.last().expect("nonempty"), delta0, s, cfg, rng)?;
        states.push(next);
    }
    Ok(states)
}

/// Posterior `q(x_{t-1} | x_t, x0_hat)`: returns the mean image and the
/// isotropic variance.
pub fn posterior_params<T: Real>(
    x_t: &ImageTensor<T>,
    x0_hat: &ImageTensor<T>,
    t: usize,
    cfg: &DiffusionConfig<T>,
) -> Result<(ImageTensor<T>, T)> {
    x_t.ensure_same_shape(x0_hat)?;
    cfg.check_step(t)?;
    let eta_t = cfg.shift(t)?;
    let eta_prev = cfg.shift(t - 1)?;
    if eta_t == T::zero() {
        return Err(Error::DegenerateSchedule(t));
    }
    let alpha = eta_t - eta_prev;
    let keep = eta_prev / eta_t;
    let pull = alpha / eta_t;
    let mean = x_t.zip_map(x0_hat, |x, x0| keep * x + pull * x0)?;
    let variance = cfg.sigma * cfg.sigma * eta_prev * alpha / eta_t;
    Ok((mean, variance))
}

/// Draws `x_{t-1}` from the posterior.
pub fn posterior_sample<T: Real>(
    x_t: &ImageTensor<T>,
    x0_hat: &ImageTensor<T>,
    t: usize,
    cfg: &DiffusionConfig<T>,
    rng: &mut RngStream,
) -> Result<ImageTensor<T>> {
    let (mean, variance) = posterior_params(x_t, x0_hat, t, cfg)?;
    if variance == T::zero() {
        return Ok(mean);
    }
    let sd = variance.sqrt();
    Ok(mean.map(|m| m + sd * T::lit(rng.standard_normal())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReverseOutput<T> {
    /// Final estimate clamped to `[0, 1]`.
    pub x0: ImageTensor<T>,
    /// Final estimate before clamping.
    pub x0_raw: ImageTensor<T>,
    /// States `x_T, x_{T-1}, ..., x_0` (unclamped) when requested.
    pub trajectory: Option<Vec<ImageTensor<T>>>,
}

/// Reverse chain from `x_T = y0_up + N(0, sigma^2 * eta_T * I)` down to `x_0`.
pub fn reverse_sample<T: Real, D: Denoiser<T> + ?Sized>(
    y0_up: &ImageTensor<T>,
    denoiser: &D,
    cfg: &DiffusionConfig<T>,
    rng: &mut RngStream,
    keep_trajectory: bool,
) -> Result<ReverseOutput<T>> {
    let steps = cfg.steps();
    let etas = cfg.schedule.etas();
    if etas[0] != T::zero() || etas[steps] != T::one() {
        return Err(Error::Parameter(
            "reverse sampling needs a normalized schedule (eta_0 = 0, eta_T = 1)".into(),
        ));
    }
    let sd = cfg.sigma * etas[steps].sqrt();
    let mut x = y0_up.map(|v| v + sd * T::lit(rng.standard_normal()));
    if !x.is_finite() {
        return Err(Error::Numeric { step: steps });
    }
    let mut trajectory = keep_trajectory.then(|| vec![x.clone()]);
    for t in (1..=steps).rev() {
        let x0_hat = denoiser.predict(&x, y0_up, t, etas[t])?;
        x.ensure_same_shape(&x0_hat)?;
        if !x0_hat.is_finite() {
            return Err(Error::Numeric { step: t });
        }
        x = posterior_sample(&x, &x0_hat, t, cfg, rng)?;
        if !x.is_finite() {
            return Err(Error::Numeric { step: t - 1 });
        }
        if let Some(states) = trajectory.as_mut() {
            states.push(x.clone());
        }
    }
    Ok(ReverseOutput {
        x0: x.clamp_unit(),
        x0_raw: x,
        trajectory,
    })
}

/// Weight applied to `||x0_hat - x_0||^2` at step `t`.
pub fn loss_weight<T: Real>(cfg: &DiffusionConfig<T>, t: usize, weighting: LossWeighting, pixels: usize) -> Result<T> {
    cfg.check_step(t)?;
    match weighting {
        LossWeighting::UniformMse => Ok(T::one() / T::from_usize_lossy(pixels)),
        LossWeighting::ExactKl => {
            let eta_prev = cfg.shift(t - 1)?;
            if eta_prev == T::zero() {
                return Ok(T::one());
            }
            let eta_t = cfg.shift(t)?;
            let alpha = eta_t - eta_prev;
            Ok(alpha / (T::lit(2.0) * cfg.sigma * cfg.sigma * eta_prev * eta_t))
        }
    }
}

/// A training example: sampled step and the noised state.
#[derive(Debug, Clone)]
pub struct TrainingDraw<T> {
    pub t: usize,
    pub x_t: ImageTensor<T>,
}

/// Samples `t ~ U{1..T}` then `x_t` from the forward marginal.
pub fn sample_training_item<T: Real>(
    x0: &ImageTensor<T>,
    y0_up: &ImageTensor<T>,
    cfg: &DiffusionConfig<T>,
    rng: &mut RngStream,
) -> Result<TrainingDraw<T>> {
    let delta0 = (y0_up - x0)?;
    let t = 1 + rng.index(cfg.steps());
    let x_t = forward_marginal(x0, &delta0, t, cfg, rng)?;
    Ok(TrainingDraw { t, x_t })
}

pub(crate) fn squared_error<T: Real>(a: &ImageTensor<T>, b: &ImageTensor<T>) -> Result<T> {
    a.ensure_same_shape(b)?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .fold(T::zero(), |acc, (&p, &q)| acc + (p - q) * (p - q)))
}

/// Batch-mean training objective.
pub fn diffusion_loss<T: Real, D: Denoiser<T> + ?Sized>(
    denoiser: &D,
    batch: &[(ImageTensor<T>, ImageTensor<T>)],
    cfg: &DiffusionConfig<T>,
    rng: &mut RngStream,
    weighting: LossWeighting,
) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Parameter("loss needs a nonempty batch".into()));
    }
    let etas = cfg.schedule.etas();
    let mut total = T::zero();
    for (x0, y0_up) in batch {
        let draw = sample_training_item(x0, y0_up, cfg, rng)?;
        let pred = denoiser.predict(&draw.x_t, y0_up, draw.t, etas[draw.t])?;
        let w = loss_weight(cfg, draw.t, weighting, x0.len())?;
        total += w * squared_error(&pred, x0)?;
    }
    Ok(total / T::from_usize_lossy(batch.len()))
}
