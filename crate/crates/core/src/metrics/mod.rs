//! Full-reference quality metrics and edge statistics.

mod edge;
mod loe;
mod quality;

pub use edge::{edge_report, intensity_profile, patch_means, sobel_magnitude, EdgeReport, Grid, DEFAULT_PATCH};
pub use loe::{loe, DEFAULT_LOE_GRID};
pub use quality::{mse, psnr, ssim, SSIM_K1, SSIM_K2, SSIM_WINDOW};

use crate::error::Result;
use crate::image::ImageTensor;
use crate::scalar::Real;

/// PSNR, SSIM and LOE of a test image against its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub loe: f64,
    pub loe_grid: usize,
    pub patch_means: Option<Grid<f64>>,
    pub gt: Option<String>,
    pub test: Option<String>,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "psnr_db,ssim,loe";

    pub fn evaluate<T: Real>(gt: &ImageTensor<T>, test: &ImageTensor<T>) -> Result<Self> {
        let data_range = T::one();
        Ok(MetricReport {
            psnr_db: psnr(gt, test, data_range)?.as_f64(),
            ssim: ssim(gt, test, data_range)?.as_f64(),
            loe: loe(test, gt, DEFAULT_LOE_GRID)?,
            loe_grid: DEFAULT_LOE_GRID,
            patch_means: None,
            gt: None,
            test: None,
        })
    }

    /// `psnr_db,ssim,loe` values; infinite PSNR prints as `inf`.
    pub fn csv_row(&self) -> String {
        format!("{},{},{}", self.psnr_db, self.ssim, self.loe)
    }
}
