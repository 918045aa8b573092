//! Versioned binary checkpoint.
//!
//! Layout (little-endian):
//!
//! ```text
//! "PXBK"  u32 format_version
//! u8 kind  u32 image_channels  u32 hidden_width  u32 kernel_size
//! u64 step_count
//! f64 step_size  u64 steps  u64 batch_size  u8 weighting
//! f64 sigma  u32 diffusion_steps  f64 t_mid  u8 mode  u8 convention  u64 seed
//! u64 param_count  f64 x param_count
//! ```

use std::fs;
use std::path::Path;

use crate::diffusion::{DiffusionConfig, LossWeighting, NoiseConvention};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Real;
use crate::schedule::{Schedule, ScheduleMode};

use super::{ConvDenoiser, Denoiser, DenoiserKind, DenoiserSpec};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PXBK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Hyperparameters a checkpoint was trained with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub step_size: f64,
    pub steps: u64,
    pub batch_size: u64,
    pub weighting: LossWeighting,
    pub sigma: f64,
    pub diffusion_steps: u32,
    pub t_mid: f64,
    pub mode: ScheduleMode,
    pub convention: NoiseConvention,
    pub seed: u64,
}

impl TrainConfig {
    /// Rebuilds the diffusion configuration used in training.
    pub fn diffusion<T: Real>(&self) -> Result<DiffusionConfig<T>> {
        let schedule = Schedule::build(self.diffusion_steps as usize, T::lit(self.t_mid), self.mode)?;
        DiffusionConfig::new(T::lit(self.sigma), schedule, self.convention, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserCheckpoint {
    pub spec: DenoiserSpec,
    pub params: Vec<f64>,
    pub step_count: u64,
    pub train_config: TrainConfig,
    pub format_version: u32,
}

impl DenoiserCheckpoint {
    pub fn new(spec: DenoiserSpec, params: Vec<f64>, step_count: u64, train_config: TrainConfig) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::Parameter(format!(
                "{} parameters given, spec needs {}",
                params.len(),
                spec.param_count()
            )));
        }
        Ok(DenoiserCheckpoint {
            spec,
            params,
            step_count,
            train_config,
            format_version: CHECKPOINT_VERSION,
        })
    }

    /// Network in working precision `T`.
    pub fn model<T: Real>(&self) -> Result<ConvDenoiser<T>> {
        ConvDenoiser::new(self.spec, self.params.iter().map(|&p| T::lit(p)).collect())
    }
}

impl<T: Real> Denoiser<T> for DenoiserCheckpoint {
    fn predict(&self, x_t: &ImageTensor<T>, y0_up: &ImageTensor<T>, t: usize, eta_t: T) -> Result<ImageTensor<T>> {
        self.model::<T>()?.predict(x_t, y0_up, t, eta_t)
    }
}

fn mode_code(mode: ScheduleMode) -> u8 {
    match mode {
        ScheduleMode::Raw => 0,
        ScheduleMode::Normalized => 1,
    }
}

fn convention_code(c: NoiseConvention) -> u8 {
    match c {
        NoiseConvention::Variance => 0,
        NoiseConvention::DriftScaled => 1,
    }
}

fn weighting_code(w: LossWeighting) -> u8 {
    match w {
        LossWeighting::UniformMse => 0,
        LossWeighting::ExactKl => 1,
    }
}

pub fn encode_checkpoint(ckpt: &DenoiserCheckpoint) -> Vec<u8> {
    let tc = &ckpt.train_config;
    let mut out = Vec::with_capacity(96 + 8 * ckpt.params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&ckpt.format_version.to_le_bytes());
    out.push(ckpt.spec.kind.code());
    out.extend_from_slice(&(ckpt.spec.image_channels as u32).to_le_bytes());
    out.extend_from_slice(&(ckpt.spec.hidden_width as u32).to_le_bytes());
    out.extend_from_slice(&(ckpt.spec.kernel_size as u32).to_le_bytes());
    out.extend_from_slice(&ckpt.step_count.to_le_bytes());
    out.extend_from_slice(&tc.step_size.to_le_bytes());
    out.extend_from_slice(&tc.steps.to_le_bytes());
    out.extend_from_slice(&tc.batch_size.to_le_bytes());
    out.push(weighting_code(tc.weighting));
    out.extend_from_slice(&tc.sigma.to_le_bytes());
    out.extend_from_slice(&tc.diffusion_steps.to_le_bytes());
    out.extend_from_slice(&tc.t_mid.to_le_bytes());
    out.push(mode_code(tc.mode));
    out.push(convention_code(tc.convention));
    out.extend_from_slice(&tc.seed.to_le_bytes());
    out.extend_from_slice(&(ckpt.params.len() as u64).to_le_bytes());
    for p in &ckpt.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self, field: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("truncated while reading {field}")))?;
        self.pos = end;
        Ok(chunk.try_into().expect("length checked"))
    }

    fn u8(&mut self, field: &str) -> Result<u8> {
        Ok(self.take::<1>(field)?[0])
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(field)?))
    }

    fn u64(&mut self, field: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(field)?))
    }

    fn f64(&mut self, field: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(field)?))
    }
}

fn bad(field: &str, code: u8) -> Error {
    Error::CorruptCheckpoint(format!("invalid {field} code {code}"))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<DenoiserCheckpoint> {
    let mut cur = Cursor { bytes, pos: 0 };
    if &cur.take::<4>("magic")? != CHECKPOINT_MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic header".into()));
    }
    let format_version = cur.u32("format version")?;
    if format_version > CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: format_version,
            supported: CHECKPOINT_VERSION,
        });
    }
    if format_version == 0 {
        return Err(Error::CorruptCheckpoint("format version 0".into()));
    }
    let kind_code = cur.u8("kind")?;
    let kind = DenoiserKind::from_code(kind_code).ok_or_else(|| bad("kind", kind_code))?;
    let spec = DenoiserSpec {
        kind,
        image_channels: cur.u32("channels")? as usize,
        hidden_width: cur.u32("hidden width")? as usize,
        kernel_size: cur.u32("kernel size")? as usize,
    };
    let step_count = cur.u64("step count")?;
    let step_size = cur.f64("step size")?;
    let steps = cur.u64("steps")?;
    let batch_size = cur.u64("batch size")?;
    let weighting = match cur.u8("weighting")? {
        0 => LossWeighting::UniformMse,
        1 => LossWeighting::ExactKl,
        c => return Err(bad("weighting", c)),
    };
    let sigma = cur.f64("sigma")?;
    let diffusion_steps = cur.u32("diffusion steps")?;
    let t_mid = cur.f64("t_mid")?;
    let mode = match cur.u8("mode")? {
        0 => ScheduleMode::Raw,
        1 => ScheduleMode::Normalized,
        c => return Err(bad("mode", c)),
    };
    let convention = match cur.u8("convention")? {
        0 => NoiseConvention::Variance,
        1 => NoiseConvention::DriftScaled,
        c => return Err(bad("convention", c)),
    };
    let seed = cur.u64("seed")?;
    let count = cur.u64("parameter count")? as usize;
    spec.validate()
        .map_err(|e| Error::CorruptCheckpoint(format!("invalid spec: {e}")))?;
    if count != spec.param_count() {
        return Err(Error::CorruptCheckpoint(format!(
            "parameter count {count} does not match spec ({})",
            spec.param_count()
        )));
    }
    let params = (0..count).map(|_| cur.f64("parameters")).collect::<Result<Vec<_>>>()?;
    if cur.pos != bytes.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    Ok(DenoiserCheckpoint {
        spec,
        params,
        step_count,
        train_config: TrainConfig {
            step_size,
            steps,
            batch_size,
            weighting,
            sigma,
            diffusion_steps,
            t_mid,
            mode,
            convention,
            seed,
        },
        format_version,
    })
}

pub fn save_checkpoint(ckpt: &DenoiserCheckpoint, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(ckpt))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<DenoiserCheckpoint> {
    decode_checkpoint(&fs::read(path)?)
}

/// Saves to `path` and loads it back.
pub fn checkpoint_roundtrip(ckpt: &DenoiserCheckpoint, path: &Path) -> Result<DenoiserCheckpoint> {
    save_checkpoint(ckpt, path)?;
    load_checkpoint(path)
}
