//! Toy super-resolution experiment: train on synthetic pairs, then compare
//! reverse-sampled output against the bicubic baseline on held-out images.

use crate::denoiser::{train, DenoiserCheckpoint, DenoiserSpec, TrainOptions};
use crate::diffusion::{reverse_sample, DiffusionConfig, LossWeighting};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::imagedata::{make_lr_pair, synth_dataset, SynthKind, SynthSpec};
use crate::metrics::{loe, psnr, ssim, DEFAULT_LOE_GRID};
use crate::noise::RngStream;
use crate::schedule::default_t_mid;

pub const STREAM_TRAIN_DATA: u64 = 0xd47a;
pub const STREAM_TEST_DATA: u64 = 0x7e57;
pub const STREAM_SAMPLING: u64 = 0x5a3e;

/// Number of steps averaged at each end of the loss history.
pub const LOSS_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyProtocol {
    pub train_images: usize,
    pub test_images: usize,
    pub size: usize,
    pub kind: SynthKind,
    pub diffusion_steps: usize,
    pub t_mid: f64,
    pub sigma: f64,
    pub seed: u64,
    pub train: TrainOptions,
}

impl ToyProtocol {
    /// 200 mixed 16x16 training images, 20 held out, 2000 SGD steps.
    pub fn standard(sigma: f64, seed: u64) -> Self {
        let mut train = TrainOptions::new(DenoiserSpec::conv2(1));
        train.steps = 2000;
        ToyProtocol {
            train_images: 200,
            test_images: 20,
            size: 16,
            kind: SynthKind::Mixed,
            diffusion_steps: 15,
            t_mid: default_t_mid(15),
            sigma,
            seed,
            train,
        }
    }

    pub fn with_weighting(mut self, weighting: LossWeighting) -> Self {
        self.train.weighting = weighting;
        self
    }
}

#[derive(Debug, Clone)]
pub struct ToyResult {
    pub checkpoint: DenoiserCheckpoint,
    pub losses: Vec<f64>,
    /// Mean loss over the first [`LOSS_WINDOW`] steps.
    pub initial_loss: f64,
    /// Mean loss over the last [`LOSS_WINDOW`] steps.
    pub final_loss: f64,
    /// Mean held-out PSNR of the sampler output, in dB.
    pub sr_psnr_db: f64,
    /// Mean held-out PSNR of the bicubic upsampling, in dB.
    pub bicubic_psnr_db: f64,
    pub sr_ssim: f64,
    pub bicubic_ssim: f64,
    /// Mean lightness-order error of the sampler output.
    pub sr_loe: f64,
}

impl ToyResult {
    pub fn gain_db(&self) -> f64 {
        self.sr_psnr_db - self.bicubic_psnr_db
    }
}

type Pair = (ImageTensor<f64>, ImageTensor<f64>);

fn pairs(kind: SynthKind, count: usize, size: usize, rng: &mut RngStream) -> Result<Vec<Pair>> {
    synth_dataset(SynthSpec::new(kind, count, size), rng)?
        .into_iter()
        .map(|hr| make_lr_pair(&hr).map(|p| (p.hr, p.lr_up)))
        .collect()
}

pub fn run_toy(protocol: &ToyProtocol) -> Result<ToyResult> {
    if protocol.test_images == 0 {
        return Err(Error::Parameter("need at least one held-out image".into()));
    }
    let cfg = DiffusionConfig::standard(protocol.diffusion_steps, protocol.t_mid, protocol.sigma, protocol.seed)?;
    let train_set = pairs(
        protocol.kind,
        protocol.train_images,
        protocol.size,
        &mut RngStream::new(protocol.seed, STREAM_TRAIN_DATA),
    )?;
    let test_set = pairs(
        protocol.kind,
        protocol.test_images,
        protocol.size,
        &mut RngStream::new(protocol.seed, STREAM_TEST_DATA),
    )?;

    let outcome = train(&train_set, &cfg, &protocol.train)?;
    let losses = outcome.losses;
    let window = LOSS_WINDOW.min(losses.len()).max(1);
    let mean = |xs: &[f64]| if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let initial_loss = mean(&losses[..window.min(losses.len())]);
    let final_loss = mean(&losses[losses.len().saturating_sub(window)..]);

    let sampling = RngStream::new(protocol.seed, STREAM_SAMPLING);
    let mut sums = [0.0; 5];
    for (i, (hr, lr_up)) in test_set.iter().enumerate() {
        let out = reverse_sample(lr_up, &outcome.model, &cfg, &mut sampling.substream(i as u64), false)?;
        let row = [
            psnr(hr, &out.x0, 1.0)?,
            psnr(hr, lr_up, 1.0)?,
            ssim(hr, &out.x0, 1.0)?,
            ssim(hr, lr_up, 1.0)?,
            loe(&out.x0, hr, DEFAULT_LOE_GRID)?,
        ];
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let n = protocol.test_images as f64;
    Ok(ToyResult {
        checkpoint: outcome.checkpoint,
        losses,
        initial_loss,
        final_loss,
        sr_psnr_db: sums[0] / n,
        bicubic_psnr_db: sums[1] / n,
        sr_ssim: sums[2] / n,
        bicubic_ssim: sums[3] / n,
        sr_loe: sums[4] / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(sigma: f64) -> ToyProtocol {
        let mut p = ToyProtocol::standard(sigma, 11);
        p.train_images = 12;
        p.test_images = 3;
        p.train.steps = 60;
        p
    }

    #[test]
    fn deterministic() {
        let a = run_toy(&small(1.5)).unwrap();
        let b = run_toy(&small(1.5)).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.sr_psnr_db, b.sr_psnr_db);
        assert_eq!(a.losses.len(), 60);
    }

    #[test]
    fn baseline_independent_of_sigma() {
        let a = run_toy(&small(0.01)).unwrap();
        let b = run_toy(&small(1.5)).unwrap();
        assert_eq!(a.bicubic_psnr_db, b.bicubic_psnr_db);
        assert_eq!(a.bicubic_ssim, b.bicubic_ssim);
        assert!(a.sr_ssim <= 1.0 && a.sr_loe >= 0.0);
    }

    #[test]
    fn needs_test_images() {
        let mut p = small(1.5);
        p.test_images = 0;
        assert!(run_toy(&p).is_err());
    }
}
