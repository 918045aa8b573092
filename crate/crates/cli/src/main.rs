//! `pixelboost` command-line front end.
//!
//! Exit status: 0 on success, 1 on runtime or data errors, 2 on usage
//! errors (bad flags, bad config, unknown subcommand).

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pixelboost::denoiser::DenoiserKind;
use pixelboost::diffusion::{LossWeighting, NoiseConvention};
use pixelboost::imagedata::SynthKind;
use pixelboost::ScheduleMode;

use config::Layer;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(pixelboost::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Run(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<pixelboost::Error> for CliError {
    fn from(e: pixelboost::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "pixelboost", version, about = "Brownian residual-shifting diffusion for x4 super-resolution")]
pub struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every random stream (default: $PIXELBOOST_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DiffusionArgs {
    /// Number of diffusion steps T.
    #[arg(long)]
    steps: Option<usize>,
    /// Schedule midpoint (default T/2 + 0.5).
    #[arg(long, allow_negative_numbers = true)]
    t_mid: Option<f64>,
    /// Brownian strength.
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// `normalized` or `raw`.
    #[arg(long)]
    mode: Option<ScheduleMode>,
    /// `variance` or `drift-scaled`.
    #[arg(long)]
    convention: Option<NoiseConvention>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// SGD iterations.
    #[arg(long)]
    train_steps: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// `uniform-mse` or `exact-kl`.
    #[arg(long)]
    weighting: Option<LossWeighting>,
    /// `conv2` or `affine`.
    #[arg(long)]
    denoiser: Option<DenoiserKind>,
    #[arg(long)]
    hidden_width: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DatasetArgs {
    /// Synthetic family: `mixed`, `gradients`, `checkers` or `blobs`.
    #[arg(long)]
    dataset: Option<SynthKind>,
    #[arg(long)]
    train_images: Option<usize>,
    #[arg(long)]
    test_images: Option<usize>,
    /// Side length of synthetic HR images.
    #[arg(long)]
    image_size: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the noise schedule as CSV (t,eta,alpha).
    Schedule {
        #[command(flatten)]
        diffusion: DiffusionArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Degrade an HR image: writes lr, lr_up and the residual into a directory.
    Degrade {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the forward chain from an HR image and dump every frame.
    Forward {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        diffusion: DiffusionArgs,
    },
    /// Train a denoiser on a manifest of HR images (or a synthetic set).
    Train {
        /// Text file listing HR image paths, one per line.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Checkpoint path; the loss history goes next to it as `<out>.loss.csv`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        diffusion: DiffusionArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        dataset: DatasetArgs,
    },
    /// Super-resolve an LR image x4 with a trained checkpoint.
    Sr {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank noise families against residuals (test - gt, or a raw f64 file).
    AnalyzeNoise {
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Little-endian f64 residual samples.
        #[arg(long, conflicts_with_all = ["gt", "test"])]
        residuals: Option<PathBuf>,
        /// Standardise residuals to zero mean and unit variance first.
        #[arg(long)]
        standardize: bool,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PSNR, SSIM and LOE of a test image against ground truth.
    Metrics {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-patch Sobel gradient means of ground truth and test.
    EdgeReport {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        patch: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate the toy protocol for each sigma.
    Sweep {
        /// Comma-separated Brownian strengths.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        #[command(flatten)]
        diffusion: DiffusionArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        dataset: DatasetArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl DiffusionArgs {
    fn apply(&self, layer: &mut Layer) {
        layer.steps = self.steps;
        layer.t_mid = self.t_mid;
        layer.sigma = self.sigma;
        layer.mode = self.mode;
        layer.convention = self.convention;
    }
}

impl TrainArgs {
    fn apply(&self, layer: &mut Layer) {
        layer.train_steps = self.train_steps;
        layer.step_size = self.step_size;
        layer.batch_size = self.batch_size;
        layer.weighting = self.weighting;
        layer.denoiser = self.denoiser;
        layer.hidden_width = self.hidden_width;
    }
}

impl DatasetArgs {
    fn apply(&self, layer: &mut Layer) {
        layer.dataset = self.dataset;
        layer.train_images = self.train_images;
        layer.test_images = self.test_images;
        layer.image_size = self.image_size;
    }
}

impl Cli {
    /// Settings given on the command line.
    fn flag_layer(&self) -> Layer {
        let mut layer = Layer {
            seed: self.seed,
            ..Layer::default()
        };
        match &self.command {
            Command::Schedule { diffusion, .. } | Command::Forward { diffusion, .. } => diffusion.apply(&mut layer),
            Command::Train {
                diffusion,
                train,
                dataset,
                ..
            } => {
                diffusion.apply(&mut layer);
                train.apply(&mut layer);
                dataset.apply(&mut layer);
            }
            Command::Sweep {
                sigmas,
                diffusion,
                train,
                dataset,
                ..
            } => {
                diffusion.apply(&mut layer);
                train.apply(&mut layer);
                dataset.apply(&mut layer);
                layer.sigmas = sigmas.clone();
            }
            Command::AnalyzeNoise { sigma, bins, .. } => {
                layer.sigma = *sigma;
                layer.bins = *bins;
            }
            Command::EdgeReport { patch, .. } => layer.patch = *patch,
            Command::Degrade { .. } | Command::Sr { .. } | Command::Metrics { .. } => {}
        }
        layer
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let env_seed = std::env::var(config::SEED_ENV).ok();
    let mut layers = vec![Layer::from_env_seed(env_seed.as_deref())?];
    if let Some(path) = &cli.config {
        layers.push(Layer::from_file(path)?);
    }
    layers.push(cli.flag_layer());
    let cfg = config::RunConfig::resolve(&layers);
    commands::dispatch(&cli.command, &cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pixelboost: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                CliError::Run(_) => ExitCode::from(1),
            }
        }
    }
}
