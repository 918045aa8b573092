//! Separable bicubic resampling (`a = -0.5`) with replicated borders.
//!
//! When shrinking, the kernel is stretched by the inverse scale so every
//! source pixel contributes; weights are renormalised per output sample.

use crate::error::{Error, Result};
use crate::image::{ImageTensor, Shape};
use crate::scalar::Real;

/// Keys cubic coefficient.
pub const CUBIC_A: f64 = -0.5;

/// Rational scale factor `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub num: u32,
    pub den: u32,
}

impl Scale {
    pub const fn new(num: u32, den: u32) -> Self {
        Scale { num, den }
    }

    pub const fn up(factor: u32) -> Self {
        Scale { num: factor, den: 1 }
    }

    pub const fn down(factor: u32) -> Self {
        Scale { num: 1, den: factor }
    }

    /// Output length for an input length, rounded half up.
    pub fn apply(&self, len: usize) -> usize {
        let num = self.num as usize;
        let den = self.den as usize;
        (len * num + den / 2) / den
    }

    fn ratio(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

pub fn cubic_kernel<T: Real>(x: T) -> T {
    let a = T::lit(CUBIC_A);
    let x = x.abs();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    if x <= T::one() {
        ((a + two) * x - (a + three)) * x * x + T::one()
    } else if x < two {
        ((a * x - T::lit(5.0) * a) * x + T::lit(8.0) * a) * x - T::lit(4.0) * a
    } else {
        T::zero()
    }
}

/// Taps for one output sample: `(first source index, weights)`; indices may
/// fall outside the source and are clamped by the caller.
#[derive(Debug, Clone)]
pub(crate) struct Taps<T> {
    pub start: isize,
    pub weights: Vec<T>,
}

pub(crate) fn weight_table<T: Real>(out_len: usize, scale: f64) -> Vec<Taps<T>> {
    // stretch factor > 1 only for minification
    let stretch = if scale < 1.0 { 1.0 / scale } else { 1.0 };
    let support = 2.0 * stretch;
    (0..out_len)
        .map(|i| {
            let center = (i as f64 + 0.5) / scale - 0.5;
            let start = (center - support).floor() as isize + 1;
            let end = (center + support).ceil() as isize - 1;
            let mut weights: Vec<T> = (start..=end)
                .map(|j| cubic_kernel(T::lit((j as f64 - center) / stretch)))
                .collect();
            let sum = weights.iter().fold(T::zero(), |acc, &w| acc + w);
            for w in &mut weights {
                *w /= sum;
            }
            Taps { start, weights }
        })
        .collect()
}

fn resample_rows<T: Real>(img: &ImageTensor<T>, out_w: usize, scale: f64) -> ImageTensor<T> {
    let Shape {
        height, channels, ..
    } = img.shape();
    let table = weight_table::<T>(out_w, scale);
    let mut data = Vec::with_capacity(height * out_w * channels);
    for y in 0..height {
        for taps in &table {
            for c in 0..channels {
                let mut acc = T::zero();
                for (k, &w) in taps.weights.iter().enumerate() {
                    acc += w * img.get_clamped(y as isize, taps.start + k as isize, c);
                }
                data.push(acc);
            }
        }
    }
    ImageTensor::from_parts_unchecked(Shape::new(height, out_w, channels), data)
}

fn resample_cols<T: Real>(img: &ImageTensor<T>, out_h: usize, scale: f64) -> ImageTensor<T> {
    let Shape { width, channels, .. } = img.shape();
    let table = weight_table::<T>(out_h, scale);
    let mut data = Vec::with_capacity(out_h * width * channels);
    for taps in &table {
        for x in 0..width {
            for c in 0..channels {
                let mut acc = T::zero();
                for (k, &w) in taps.weights.iter().enumerate() {
                    acc += w * img.get_clamped(taps.start + k as isize, x as isize, c);
                }
                data.push(acc);
            }
        }
    }
    ImageTensor::from_parts_unchecked(Shape::new(out_h, width, channels), data)
}

/// Resizes both axes by `scale`.
pub fn bicubic_resize<T: Real>(img: &ImageTensor<T>, scale: Scale) -> Result<ImageTensor<T>> {
    if scale.num == 0 || scale.den == 0 {
        return Err(Error::Parameter(format!("invalid scale {}/{}", scale.num, scale.den)));
    }
    let out_h = scale.apply(img.height());
    let out_w = scale.apply(img.width());
    if out_h == 0 || out_w == 0 {
        return Err(Error::Parameter(format!(
            "scale {}/{} maps {}x{} to an empty image",
            scale.num,
            scale.den,
            img.height(),
            img.width()
        )));
    }
    if scale.num == scale.den {
        return Ok(img.clone());
    }
    let ratio = scale.ratio();
    let tmp = resample_rows(img, out_w, ratio);
    Ok(resample_cols(&tmp, out_h, ratio))
}
