use crate::diffusion::{sample_training_item, DiffusionConfig, LossWeighting};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::noise::RngStream;
use crate::scalar::Real;

use super::checkpoint::{DenoiserCheckpoint, TrainConfig};
use super::{net, ConvDenoiser, DenoiserSpec};

/// Stream used for weight initialization.
pub const STREAM_INIT: u64 = 0x1417;
/// Stream used for minibatch and timestep sampling.
pub const STREAM_BATCH: u64 = 0xba7c;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub spec: DenoiserSpec,
    pub step_size: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub weighting: LossWeighting,
    /// Half-width of the uniform weight initialization.
    pub init_scale: f64,
}

impl TrainOptions {
    pub fn new(spec: DenoiserSpec) -> Self {
        TrainOptions {
            spec,
            step_size: 1e-2,
            steps: 500,
            batch_size: 8,
            weighting: LossWeighting::UniformMse,
            init_scale: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub checkpoint: DenoiserCheckpoint,
    pub model: ConvDenoiser<T>,
    /// Batch-mean loss at each step, measured before the update.
    pub losses: Vec<f64>,
}

fn initial_params<T: Real>(spec: &DenoiserSpec, scale: f64, rng: &mut RngStream) -> Vec<T> {
    let mut params = vec![T::zero(); spec.param_count()];
    for range in net::weight_ranges(spec) {
        for p in &mut params[range] {
            *p = T::lit(scale * (2.0 * rng.uniform() - 1.0));
        }
    }
    params
}

/// Plain minibatch SGD on the diffusion loss over `(x_0, y0_up)` pairs.
pub fn train<T: Real>(
    dataset: &[(ImageTensor<T>, ImageTensor<T>)],
    cfg: &DiffusionConfig<T>,
    opts: &TrainOptions,
) -> Result<TrainOutcome<T>> {
    if dataset.is_empty() {
        return Err(Error::Parameter("training needs a nonempty dataset".into()));
    }
    if !(opts.step_size > 0.0 && opts.step_size.is_finite()) {
        return Err(Error::Parameter(format!("step size must be positive, got {}", opts.step_size)));
    }
    if opts.batch_size == 0 {
        return Err(Error::Parameter("batch size must be positive".into()));
    }
    opts.spec.validate()?;

    let params = initial_params(&opts.spec, opts.init_scale, &mut RngStream::new(cfg.seed, STREAM_INIT));
    let mut model = ConvDenoiser::new(opts.spec, params)?;
    let mut rng = RngStream::new(cfg.seed, STREAM_BATCH);
    let lr = T::lit(opts.step_size);
    let inv_batch = T::one() / T::from_usize_lossy(opts.batch_size);
    let mut losses = Vec::with_capacity(opts.steps);

    for step in 0..opts.steps {
        let mut draws = Vec::with_capacity(opts.batch_size);
        for _ in 0..opts.batch_size {
            let (x0, y0_up) = &dataset[rng.index(dataset.len())];
            let draw = sample_training_item(x0, y0_up, cfg, &mut rng)?;
            draws.push((x0, y0_up, draw.t, draw.x_t));
        }
        let (loss, grad) = model.batch_loss_gradient(&draws, cfg, opts.weighting)?;
        let loss = (loss * inv_batch).as_f64();
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training { step, loss });
        }
        losses.push(loss);
        for (p, g) in model.params_mut().iter_mut().zip(grad) {
            *p -= lr * g * inv_batch;
        }
    }

    let train_config = TrainConfig {
        step_size: opts.step_size,
        steps: opts.steps as u64,
        batch_size: opts.batch_size as u64,
        weighting: opts.weighting,
        sigma: cfg.sigma.as_f64(),
        diffusion_steps: cfg.steps() as u32,
        t_mid: cfg.schedule.t_mid().as_f64(),
        mode: cfg.schedule.mode(),
        convention: cfg.convention,
        seed: cfg.seed,
    };
    let checkpoint = DenoiserCheckpoint::new(
        opts.spec,
        model.params().iter().map(|p| p.as_f64()).collect(),
        opts.steps as u64,
        train_config,
    )?;
    Ok(TrainOutcome {
        checkpoint,
        model,
        losses,
    })
}

/// Trailing moving average with the given window (shorter at the start).
pub fn smoothed(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}
