//! Image I/O, ×4 bicubic degradation and synthetic data.

mod codec;
mod resize;
mod synth;

pub use codec::{
    decode, encode, image_roundtrip, quantize, read_f64_le, read_image, write_f64_le, write_image, ImageFormat,
};
pub use resize::{bicubic_resize, cubic_kernel, Scale, CUBIC_A};
pub use synth::{synth_dataset, SynthKind, SynthSpec};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Real;

/// Super-resolution factor used throughout.
pub const SR_FACTOR: u32 = 4;

/// An HR image together with its degraded LR version and the HR-grid residual.
#[derive(Debug, Clone, PartialEq)]
pub struct SrPair<T> {
    pub hr: ImageTensor<T>,
    pub lr: ImageTensor<T>,
    /// `lr` upsampled back onto the HR grid.
    pub lr_up: ImageTensor<T>,
    /// `lr_up - hr`.
    pub delta0: ImageTensor<T>,
}

/// Degrades `hr` by bicubic ×1/4, upsamples back by ×4 and forms the residual.
pub fn make_lr_pair<T: Real>(hr: &ImageTensor<T>) -> Result<SrPair<T>> {
    let f = SR_FACTOR as usize;
    if !hr.height().is_multiple_of(f) || !hr.width().is_multiple_of(f) {
        return Err(Error::Parameter(format!(
            "HR dimensions {}x{} are not divisible by {f}",
            hr.height(),
            hr.width()
        )));
    }
    let lr = bicubic_resize(hr, Scale::down(SR_FACTOR))?;
    let lr_up = bicubic_resize(&lr, Scale::up(SR_FACTOR))?;
    let delta0 = (&lr_up - hr)?;
    Ok(SrPair {
        hr: hr.clone(),
        lr,
        lr_up,
        delta0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;

    #[test]
    fn constant_has_zero_residual() {
        let hr = ImageTensor::filled(Shape::new(16, 16, 3), 0.3f64).unwrap();
        let pair = make_lr_pair(&hr).unwrap();
        assert_eq!(pair.lr.shape(), Shape::new(4, 4, 3));
        assert!(pair.delta0.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn checkerboard_has_residual() {
        let hr = ImageTensor::from_fn(Shape::new(16, 16, 1), |y, x, _| ((x + y) % 2) as f64).unwrap();
        let pair = make_lr_pair(&hr).unwrap();
        let mad = pair.delta0.data().iter().map(|v| v.abs()).sum::<f64>() / 256.0;
        assert!(mad > 0.1, "mean |delta0| = {mad}");
    }

    #[test]
    fn residual_identity_is_exact() {
        let hr = ImageTensor::from_fn(Shape::new(8, 12, 1), |y, x, _| ((y * 12 + x) as f64 * 0.731).fract()).unwrap();
        let pair = make_lr_pair(&hr).unwrap();
        for ((h, d), u) in pair.hr.data().iter().zip(pair.delta0.data()).zip(pair.lr_up.data()) {
            assert_eq!(u - h, *d);
        }
        for ((h, d), u) in pair.hr.data().iter().zip(pair.delta0.data()).zip(pair.lr_up.data()) {
            assert!((h + d - u).abs() <= f64::EPSILON * 4.0);
        }
    }

    #[test]
    fn indivisible_dims_rejected() {
        let hr = ImageTensor::filled(Shape::new(10, 16, 1), 0.5f64).unwrap();
        assert!(matches!(make_lr_pair(&hr), Err(Error::Parameter(_))));
    }
}
