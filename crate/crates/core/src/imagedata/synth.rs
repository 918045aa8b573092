//! Seeded synthetic high-resolution images for desk-scale training.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::{ImageTensor, Shape};
use crate::noise::RngStream;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Linear ramps with random direction and contrast.
    Gradients,
    /// Axis-aligned checkerboards with random cell size, phase and levels.
    Checkers,
    /// Sums of a few isotropic Gaussian bumps on a random base level.
    Blobs,
    /// Each image picks one of the above at random.
    Mixed,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradients" => Ok(SynthKind::Gradients),
            "checkers" => Ok(SynthKind::Checkers),
            "blobs" => Ok(SynthKind::Blobs),
            "mixed" => Ok(SynthKind::Mixed),
            other => Err(Error::Parameter(format!("unknown dataset kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub count: usize,
    /// Side length of the square images; must be divisible by 4.
    pub size: usize,
    pub channels: usize,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, count: usize, size: usize) -> Self {
        SynthSpec {
            kind,
            count,
            size,
            channels: 1,
        }
    }
}

fn range(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

fn gradients(size: usize, rng: &mut RngStream) -> Vec<f64> {
    let theta = range(rng, 0.0, std::f64::consts::TAU);
    let contrast = range(rng, 0.3, 0.9);
    let (dx, dy) = (theta.cos(), theta.sin());
    let n = size as f64;
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let u = dx * ((x as f64 + 0.5) / n - 0.5) + dy * ((y as f64 + 0.5) / n - 0.5);
            out.push(0.5 + contrast * u);
        }
    }
    out
}

fn checkers(size: usize, rng: &mut RngStream) -> Vec<f64> {
    let cell = 3 + rng.index(6);
    let phase_x = rng.index(2 * cell);
    let phase_y = rng.index(2 * cell);
    let lo = range(rng, 0.0, 0.4);
    let hi = range(rng, 0.6, 1.0);
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let parity = ((x + phase_x) / cell + (y + phase_y) / cell) % 2;
            out.push(if parity == 0 { lo } else { hi });
        }
    }
    out
}

fn blobs(size: usize, rng: &mut RngStream) -> Vec<f64> {
    let base = range(rng, 0.2, 0.8);
    let count = 1 + rng.index(4);
    let n = size as f64;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            let cx = range(rng, 0.0, n);
            let cy = range(rng, 0.0, n);
            let width = range(rng, 1.5, n / 3.0);
            let amp = range(rng, -0.6, 0.6);
            (cx, cy, width, amp)
        })
        .collect();
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let v = bumps.iter().fold(base, |acc, &(cx, cy, w, a)| {
                let d2 = (x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2);
                acc + a * (-d2 / (2.0 * w * w)).exp()
            });
            out.push(v);
        }
    }
    out
}

/// Generates `spec.count` images; identical seeds give identical datasets.
pub fn synth_dataset<T: Real>(spec: SynthSpec, rng: &mut RngStream) -> Result<Vec<ImageTensor<T>>> {
    if spec.size == 0 || !spec.size.is_multiple_of(4) {
        return Err(Error::Parameter(format!(
            "synthetic image size must be a positive multiple of 4, got {}",
            spec.size
        )));
    }
    if spec.count == 0 {
        return Err(Error::Parameter("synthetic dataset count must be >= 1".into()));
    }
    let shape = Shape::new(spec.size, spec.size, spec.channels);
    (0..spec.count)
        .map(|_| {
            let kind = match spec.kind {
                SynthKind::Mixed => [SynthKind::Gradients, SynthKind::Checkers, SynthKind::Blobs][rng.index(3)],
                k => k,
            };
            let planes: Vec<Vec<f64>> = (0..spec.channels)
                .map(|_| match kind {
                    SynthKind::Gradients => gradients(spec.size, rng),
                    SynthKind::Checkers => checkers(spec.size, rng),
                    _ => blobs(spec.size, rng),
                })
                .collect();
            let plane_len = spec.size * spec.size;
            let data = (0..plane_len * spec.channels)
                .map(|i| T::lit(planes[i % spec.channels][i / spec.channels].clamp(0.0, 1.0)))
                .collect();
            ImageTensor::from_vec(shape, data)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec::new(SynthKind::Mixed, 20, 16);
        let a: Vec<ImageTensor<f64>> = synth_dataset(spec, &mut RngStream::new(3, 0)).unwrap();
        let b: Vec<ImageTensor<f64>> = synth_dataset(spec, &mut RngStream::new(3, 0)).unwrap();
        let c: Vec<ImageTensor<f64>> = synth_dataset(spec, &mut RngStream::new(4, 0)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn values_in_unit_range() {
        for kind in [SynthKind::Gradients, SynthKind::Checkers, SynthKind::Blobs, SynthKind::Mixed] {
            let mut spec = SynthSpec::new(kind, 30, 16);
            spec.channels = 3;
            let set: Vec<ImageTensor<f64>> = synth_dataset(spec, &mut RngStream::new(1, 0)).unwrap();
            assert!(set.iter().flat_map(|i| i.data()).all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn mixed_images_are_not_flat() {
        let set: Vec<ImageTensor<f64>> =
            synth_dataset(SynthSpec::new(SynthKind::Mixed, 100, 16), &mut RngStream::new(11, 0)).unwrap();
        let flat = set.iter().filter(|img| img.variance() <= 0.0).count();
        assert!(flat <= 1, "{flat} degenerate images");
    }

    #[test]
    fn rejects_bad_size() {
        assert!(synth_dataset::<f64>(SynthSpec::new(SynthKind::Blobs, 1, 10), &mut RngStream::new(0, 0)).is_err());
        assert!(synth_dataset::<f64>(SynthSpec::new(SynthKind::Blobs, 0, 16), &mut RngStream::new(0, 0)).is_err());
    }
}
