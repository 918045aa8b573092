use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Real;

pub const DEFAULT_LOE_GRID: usize = 64;

/// Lightness values at a uniform stride so at most `grid` sites per axis remain.
fn subsample<T: Real>(light: &ImageTensor<T>, grid: usize) -> Vec<T> {
    let sy = light.height().div_ceil(grid);
    let sx = light.width().div_ceil(grid);
    let mut out = Vec::new();
    for y in (0..light.height()).step_by(sy) {
        for x in (0..light.width()).step_by(sx) {
            out.push(light.get(y, x, 0));
        }
    }
    out
}

/// Lightness order error: the mean, over subsampled sites, of the number of
/// sites whose lightness ordering relative to it flips between the images.
pub fn loe<T: Real>(enhanced: &ImageTensor<T>, original: &ImageTensor<T>, grid: usize) -> Result<f64> {
    enhanced.ensure_same_shape(original)?;
    if grid == 0 || grid > DEFAULT_LOE_GRID {
        return Err(Error::Parameter(format!("LOE grid must be in 1..=64, got {grid}")));
    }
    let l_enh = subsample(&enhanced.lightness(), grid);
    let l_org = subsample(&original.lightness(), grid);
    let m = l_enh.len();
    let mut total: u64 = 0;
    for i in 0..m {
        for j in 0..m {
            let a = l_org[i] >= l_org[j];
            let b = l_enh[i] >= l_enh[j];
            total += (a ^ b) as u64;
        }
    }
    Ok(total as f64 / m as f64)
}
