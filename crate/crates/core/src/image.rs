use std::ops::{Add, Sub};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Height, width and channel count of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Shape {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }

    fn tuple(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }
}

/// Row-major `H x W x C` image of real intensities, nominally in `[0, 1]`.
///
/// Values may leave the unit interval while a chain is running; only the
/// codec clamps, and only on write.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Real> ImageTensor<T> {
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if shape.height == 0 || shape.width == 0 {
            return Err(Error::Parameter(format!("zero-sized image {shape:?}")));
        }
        if !(shape.channels == 1 || shape.channels == 3) {
            return Err(Error::Parameter(format!(
                "images have 1 or 3 channels, got {}",
                shape.channels
            )));
        }
        if data.len() != shape.len() {
            return Err(Error::Parameter(format!(
                "data length {} does not match {shape:?}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("image data must be finite".into()));
        }
        Ok(ImageTensor { shape, data })
    }

    pub fn filled(shape: Shape, value: T) -> Result<Self> {
        Self::from_vec(shape, vec![value; shape.len()])
    }

    pub fn zeros(shape: Shape) -> Result<Self> {
        Self::filled(shape, T::zero())
    }

    /// Builds an image from a per-pixel function `f(row, col, channel)`.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.len());
        for y in 0..shape.height {
            for x in 0..shape.width {
                for c in 0..shape.channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::from_vec(shape, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[(y * self.shape.width + x) * self.shape.channels + c]
    }

    /// Pixel access with coordinates clamped to the border.
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize, c: usize) -> T {
        let y = y.clamp(0, self.shape.height as isize - 1) as usize;
        let x = x.clamp(0, self.shape.width as isize - 1) as usize;
        self.get(y, x, c)
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape {
                expected: self.shape.tuple(),
                got: other.shape.tuple(),
            });
        }
        Ok(())
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        ImageTensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-shaped images.
    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Result<Self> {
        self.ensure_same_shape(other)?;
        Ok(ImageTensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn clamp_unit(&self) -> Self {
        self.map(|v| v.max(T::zero()).min(T::one()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v) / T::from_usize_lossy(self.len())
    }

    pub fn variance(&self) -> T {
        let mean = self.mean();
        self.data
            .iter()
            .fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean))
            / T::from_usize_lossy(self.len())
    }

    /// Per-pixel maximum over channels, as a single-channel image.
    pub fn lightness(&self) -> Self {
        if self.shape.channels == 1 {
            return self.clone();
        }
        let c = self.shape.channels;
        let data = self
            .data
            .chunks_exact(c)
            .map(|px| px.iter().copied().fold(T::neg_infinity(), T::max))
            .collect();
        ImageTensor {
            shape: Shape::new(self.shape.height, self.shape.width, 1),
            data,
        }
    }

    /// Converts every element to another scalar type.
    pub fn cast<U: Real>(&self) -> ImageTensor<U> {
        ImageTensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    pub(crate) fn from_parts_unchecked(shape: Shape, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        ImageTensor { shape, data }
    }
}

impl<T: Real> Add for &ImageTensor<T> {
    type Output = Result<ImageTensor<T>>;

    fn add(self, rhs: Self) -> Self::Output {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for &ImageTensor<T> {
    type Output = Result<ImageTensor<T>>;

    fn sub(self, rhs: Self) -> Self::Output {
        self.zip_map(rhs, |a, b| a - b)
    }
}
