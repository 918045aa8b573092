//! Layered run configuration: built-in defaults, then `PIXELBOOST_SEED`,
//! then the TOML file named by `--config`, then command-line flags.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use pixelboost::analysis::DEFAULT_BINS;
use pixelboost::denoiser::{DenoiserKind, DenoiserSpec, TrainOptions};
use pixelboost::diffusion::{DiffusionConfig, LossWeighting, NoiseConvention};
use pixelboost::experiment::ToyProtocol;
use pixelboost::imagedata::SynthKind;
use pixelboost::metrics::DEFAULT_PATCH;
use pixelboost::schedule::{default_t_mid, Schedule};
use pixelboost::ScheduleMode;

use crate::CliError;

pub const SEED_ENV: &str = "PIXELBOOST_SEED";

/// One configuration source; `None` leaves the lower layer in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layer {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub t_mid: Option<f64>,
    pub sigma: Option<f64>,
    pub mode: Option<ScheduleMode>,
    pub convention: Option<NoiseConvention>,
    pub bins: Option<usize>,
    pub patch: Option<usize>,
    pub sigmas: Option<Vec<f64>>,
    pub weighting: Option<LossWeighting>,
    pub denoiser: Option<DenoiserKind>,
    pub hidden_width: Option<usize>,
    pub train_steps: Option<usize>,
    pub step_size: Option<f64>,
    pub batch_size: Option<usize>,
    pub init_scale: Option<f64>,
    pub dataset: Option<SynthKind>,
    pub train_images: Option<usize>,
    pub test_images: Option<usize>,
    pub image_size: Option<usize>,
}

/// On-disk form of a [`Layer`]; every key is optional, unknown keys fail.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    steps: Option<usize>,
    t_mid: Option<f64>,
    sigma: Option<f64>,
    mode: Option<String>,
    convention: Option<String>,
    bins: Option<usize>,
    patch: Option<usize>,
    sigmas: Option<Vec<f64>>,
    weighting: Option<String>,
    denoiser: Option<String>,
    hidden_width: Option<usize>,
    train_steps: Option<usize>,
    step_size: Option<f64>,
    batch_size: Option<usize>,
    init_scale: Option<f64>,
    dataset: Option<String>,
    train_images: Option<usize>,
    test_images: Option<usize>,
    image_size: Option<usize>,
}

fn parse_named<T>(key: &str, value: Option<String>) -> Result<Option<T>, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    value
        .map(|v| v.parse().map_err(|e| CliError::Usage(format!("config key `{key}`: {e}"))))
        .transpose()
}

impl Layer {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let f: FileConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        Ok(Layer {
            seed: f.seed,
            steps: f.steps,
            t_mid: f.t_mid,
            sigma: f.sigma,
            mode: parse_named("mode", f.mode)?,
            convention: parse_named("convention", f.convention)?,
            bins: f.bins,
            patch: f.patch,
            sigmas: f.sigmas,
            weighting: parse_named("weighting", f.weighting)?,
            denoiser: parse_named("denoiser", f.denoiser)?,
            hidden_width: f.hidden_width,
            train_steps: f.train_steps,
            step_size: f.step_size,
            batch_size: f.batch_size,
            init_scale: f.init_scale,
            dataset: parse_named("dataset", f.dataset)?,
            train_images: f.train_images,
            test_images: f.test_images,
            image_size: f.image_size,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Seed layer from the environment value, if set.
    pub fn from_env_seed(value: Option<&str>) -> Result<Self, CliError> {
        let seed = value
            .map(|v| {
                v.trim()
                    .parse::<u64>()
                    .map_err(|e| CliError::Usage(format!("{SEED_ENV}={v:?}: {e}")))
            })
            .transpose()?;
        Ok(Layer {
            seed,
            ..Layer::default()
        })
    }
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub steps: usize,
    /// `None` means the default midpoint for `steps`.
    pub t_mid: Option<f64>,
    pub sigma: f64,
    pub mode: ScheduleMode,
    pub convention: NoiseConvention,
    pub bins: usize,
    pub patch: usize,
    pub sigmas: Vec<f64>,
    pub weighting: LossWeighting,
    pub denoiser: DenoiserKind,
    pub hidden_width: usize,
    pub train_steps: usize,
    pub step_size: f64,
    pub batch_size: usize,
    pub init_scale: f64,
    pub dataset: SynthKind,
    pub train_images: usize,
    pub test_images: usize,
    pub image_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let protocol = ToyProtocol::standard(1.5, 0);
        RunConfig {
            seed: 0,
            steps: protocol.diffusion_steps,
            t_mid: None,
            sigma: protocol.sigma,
            mode: ScheduleMode::Normalized,
            convention: NoiseConvention::Variance,
            bins: DEFAULT_BINS,
            patch: DEFAULT_PATCH,
            sigmas: vec![0.01, 0.4, 1.5],
            weighting: protocol.train.weighting,
            denoiser: protocol.train.spec.kind,
            hidden_width: protocol.train.spec.hidden_width,
            train_steps: protocol.train.steps,
            step_size: protocol.train.step_size,
            batch_size: protocol.train.batch_size,
            init_scale: protocol.train.init_scale,
            dataset: protocol.kind,
            train_images: protocol.train_images,
            test_images: protocol.test_images,
            image_size: protocol.size,
        }
    }
}

macro_rules! overlay {
    ($dst:ident, $layer:ident; $($field:ident),* $(,)?) => {
        $( if let Some(v) = &$layer.$field { $dst.$field = v.clone(); } )*
    };
}

impl RunConfig {
    /// Applies `layers` in order over the defaults, later layers winning.
    pub fn resolve(layers: &[Layer]) -> Self {
        let mut cfg = RunConfig::default();
        for layer in layers {
            overlay!(cfg, layer; seed, steps, sigma, mode, convention, bins, patch, sigmas,
                weighting, denoiser, hidden_width, train_steps, step_size, batch_size,
                init_scale, dataset, train_images, test_images, image_size);
            if layer.t_mid.is_some() {
                cfg.t_mid = layer.t_mid;
            }
        }
        cfg
    }

    pub fn t_mid(&self) -> f64 {
        self.t_mid.unwrap_or_else(|| default_t_mid(self.steps))
    }

    pub fn schedule(&self) -> pixelboost::Result<Schedule<f64>> {
        Schedule::build(self.steps, self.t_mid(), self.mode)
    }

    pub fn diffusion(&self) -> pixelboost::Result<DiffusionConfig<f64>> {
        DiffusionConfig::new(self.sigma, self.schedule()?, self.convention, self.seed)
    }

    pub fn denoiser_spec(&self, channels: usize) -> DenoiserSpec {
        DenoiserSpec {
            kind: self.denoiser,
            image_channels: channels,
            hidden_width: self.hidden_width,
            kernel_size: 3,
        }
    }

    pub fn train_options(&self, channels: usize) -> TrainOptions {
        TrainOptions {
            spec: self.denoiser_spec(channels),
            step_size: self.step_size,
            steps: self.train_steps,
            batch_size: self.batch_size,
            weighting: self.weighting,
            init_scale: self.init_scale,
        }
    }

    pub fn protocol(&self, sigma: f64) -> ToyProtocol {
        let mut p = ToyProtocol::standard(sigma, self.seed);
        p.train_images = self.train_images;
        p.test_images = self.test_images;
        p.size = self.image_size;
        p.kind = self.dataset;
        p.diffusion_steps = self.steps;
        p.t_mid = self.t_mid();
        p.train = self.train_options(1);
        p
    }
}
