use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Real;

/// SSIM window side.
pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub fn mse<T: Real>(a: &ImageTensor<T>, b: &ImageTensor<T>) -> Result<T> {
    a.ensure_same_shape(b)?;
    let sum = neumaier_sum(a.data().iter().zip(b.data()).map(|(&x, &y)| (x - y) * (x - y)));
    Ok(sum / T::from_usize_lossy(a.len()))
}

/// Compensated summation; a constant error image gets an exact mean.
fn neumaier_sum<T: Real>(values: impl Iterator<Item = T>) -> T {
    let (mut sum, mut comp) = (T::zero(), T::zero());
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Peak signal-to-noise ratio in dB; identical images give `+inf`.
pub fn psnr<T: Real>(a: &ImageTensor<T>, b: &ImageTensor<T>, data_range: T) -> Result<T> {
    if !(data_range > T::zero()) {
        return Err(Error::Parameter(format!("data range must be positive, got {data_range}")));
    }
    let err = mse(a, b)?;
    if err == T::zero() {
        return Ok(T::infinity());
    }
    Ok(T::lit(10.0) * (data_range * data_range / err).log10())
}

/// Mean structural similarity over all fully contained 7x7 uniform windows,
/// using the unbiased (N - 1) covariance estimate, averaged over channels.
pub fn ssim<T: Real>(a: &ImageTensor<T>, b: &ImageTensor<T>, data_range: T) -> Result<T> {
    a.ensure_same_shape(b)?;
    let (h, w) = (a.height(), a.width());
    if h.min(w) < SSIM_WINDOW {
        return Err(Error::Parameter(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    if !(data_range > T::zero()) {
        return Err(Error::Parameter(format!("data range must be positive, got {data_range}")));
    }
    let c1 = (T::lit(SSIM_K1) * data_range).powi(2);
    let c2 = (T::lit(SSIM_K2) * data_range).powi(2);
    let n = SSIM_WINDOW * SSIM_WINDOW;
    let inv_n = T::one() / T::from_usize_lossy(n);
    let cov_norm = T::from_usize_lossy(n) / T::from_usize_lossy(n - 1);
    let two = T::lit(2.0);

    let mut total = T::zero();
    for c in 0..a.channels() {
        let mut channel_sum = T::zero();
        let mut windows = 0usize;
        for y0 in 0..=h - SSIM_WINDOW {
            for x0 in 0..=w - SSIM_WINDOW {
                let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
                for y in y0..y0 + SSIM_WINDOW {
                    for x in x0..x0 + SSIM_WINDOW {
                        let p = a.get(y, x, c);
                        let q = b.get(y, x, c);
                        sa += p;
                        sb += q;
                        saa += p * p;
                        sbb += q * q;
                        sab += p * q;
                    }
                }
                let (ma, mb) = (sa * inv_n, sb * inv_n);
                let va = cov_norm * (saa * inv_n - ma * ma);
                let vb = cov_norm * (sbb * inv_n - mb * mb);
                let vab = cov_norm * (sab * inv_n - ma * mb);
                let num = (two * ma * mb + c1) * (two * vab + c2);
                let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
                channel_sum += num / den;
                windows += 1;
            }
        }
        total += channel_sum / T::from_usize_lossy(windows);
    }
    Ok(total / T::from_usize_lossy(a.channels()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;
    use crate::noise::RngStream;

    fn random(shape: Shape, seed: u64) -> ImageTensor<f64> {
        let mut rng = RngStream::new(seed, 0);
        ImageTensor::from_fn(shape, |_, _, _| rng.uniform()).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let a = ImageTensor::filled(Shape::new(4, 4, 1), 0.5f64).unwrap();
        let b = ImageTensor::filled(Shape::new(4, 4, 1), 0.6f64).unwrap();
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), 20.0);
        for (h, w) in [(16, 16), (9, 11), (64, 48), (7, 13)] {
            let a = ImageTensor::filled(Shape::new(h, w, 1), 0.5f64).unwrap();
            let b = ImageTensor::filled(Shape::new(h, w, 1), 0.6f64).unwrap();
            assert_eq!(psnr(&a, &b, 1.0).unwrap(), 20.0, "{h}x{w}");
        }
    }

    #[test]
    fn psnr_matches_direct_formula() {
        let a = random(Shape::new(9, 11, 3), 1);
        let b = random(Shape::new(9, 11, 3), 2);
        let mut s = 0.0;
        for (x, y) in a.data().iter().zip(b.data()) {
            s += (x - y) * (x - y);
        }
        let want = 10.0 * (1.0 / (s / a.len() as f64)).log10();
        assert!((psnr(&a, &b, 1.0).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn psnr_falls_with_noise_amplitude() {
        let a = random(Shape::new(16, 16, 1), 3);
        let noise = random(Shape::new(16, 16, 1), 4).map(|v| v - 0.5);
        let mut last = f64::INFINITY;
        for amp in [0.01, 0.05, 0.2] {
            let b = a.zip_map(&noise, |x, n| x + amp * n).unwrap();
            let p = psnr(&a, &b, 1.0).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn ssim_identity_and_constants() {
        let a = random(Shape::new(10, 12, 3), 5);
        assert_eq!(ssim(&a, &a, 1.0).unwrap(), 1.0);
        let p = ImageTensor::filled(Shape::new(8, 8, 1), 0.25f64).unwrap();
        let q = ImageTensor::filled(Shape::new(8, 8, 1), 0.75f64).unwrap();
        let want = (0.375 + 1e-4) / (0.625 + 1e-4);
        assert!((ssim(&p, &q, 1.0).unwrap() - want).abs() < 1e-10);
        assert!((want - 0.60007).abs() < 1e-5);
    }

    #[test]
    fn ssim_symmetric_and_bounded() {
        for seed in 0..10 {
            let a = random(Shape::new(9, 9, 1), seed);
            let b = random(Shape::new(9, 9, 1), seed + 100).map(|v| 1.0 - v);
            let ab = ssim(&a, &b, 1.0).unwrap();
            let ba = ssim(&b, &a, 1.0).unwrap();
            assert!((ab - ba).abs() < 1e-12);
            assert!((-1.0..=1.0).contains(&ab));
            assert!(ab < 1.0);
        }
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = ImageTensor::filled(Shape::new(6, 20, 1), 0.5f64).unwrap();
        assert!(matches!(ssim(&a, &a, 1.0), Err(Error::Parameter(_))));
    }
}
