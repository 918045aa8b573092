use crate::error::{Error, Result};
use crate::image::{ImageTensor, Shape};
use crate::scalar::Real;

pub const DEFAULT_PATCH: usize = 7;

/// Smoothing weights across the derivative direction.
const SMOOTH: [f64; 3] = [1.0, 2.0, 1.0];

/// Row-major matrix of per-patch values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn get(&self, r: usize, c: usize) -> T {
        self.values[r * self.cols + c]
    }

    /// One CSV line per grid row, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.get(r, c).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Sobel gradient magnitude of the lightness channel, replicated borders.
pub fn sobel_magnitude<T: Real>(img: &ImageTensor<T>) -> ImageTensor<T> {
    let light = img.lightness();
    let (h, w) = (light.height(), light.width());
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let at = |dy: isize, dx: isize| light.get_clamped(y as isize + dy, x as isize + dx, 0);
            let (mut gx, mut gy) = (T::zero(), T::zero());
            for (k, &weight) in SMOOTH.iter().enumerate() {
                let o = k as isize - 1;
                // differences first, so flat regions give exact zeros
                gx += T::lit(weight) * (at(o, 1) - at(o, -1));
                gy += T::lit(weight) * (at(1, o) - at(-1, o));
            }
            data.push((gx * gx + gy * gy).sqrt());
        }
    }
    ImageTensor::from_parts_unchecked(Shape::new(h, w, 1), data)
}

/// Mean of `map` over non-overlapping `patch x patch` cells; partial cells
/// at the right and bottom edges are dropped.
pub fn patch_means<T: Real>(map: &ImageTensor<T>, patch: usize) -> Grid<T> {
    let rows = map.height() / patch;
    let cols = map.width() / patch;
    let inv = T::one() / T::from_usize_lossy(patch * patch);
    let mut values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut s = T::zero();
            for y in r * patch..(r + 1) * patch {
                for x in c * patch..(c + 1) * patch {
                    s += map.get(y, x, 0);
                }
            }
            values.push(s * inv);
        }
    }
    Grid { rows, cols, values }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeReport<T> {
    pub gradient_a: ImageTensor<T>,
    pub gradient_b: ImageTensor<T>,
    pub patches_a: Grid<T>,
    pub patches_b: Grid<T>,
    /// `patches_a - patches_b`, cell by cell.
    pub difference: Grid<T>,
}

pub fn edge_report<T: Real>(a: &ImageTensor<T>, b: &ImageTensor<T>, patch: usize) -> Result<EdgeReport<T>> {
    a.ensure_same_shape(b)?;
    if patch < 2 {
        return Err(Error::Parameter(format!("patch size must be >= 2, got {patch}")));
    }
    if a.height() < patch || a.width() < patch {
        return Err(Error::Parameter(format!(
            "{}x{} image is smaller than one {patch}x{patch} patch",
            a.height(),
            a.width()
        )));
    }
    let gradient_a = sobel_magnitude(a);
    let gradient_b = sobel_magnitude(b);
    let patches_a = patch_means(&gradient_a, patch);
    let patches_b = patch_means(&gradient_b, patch);
    let difference = Grid {
        rows: patches_a.rows,
        cols: patches_a.cols,
        values: patches_a
            .values
            .iter()
            .zip(&patches_b.values)
            .map(|(&p, &q)| p - q)
            .collect(),
    };
    Ok(EdgeReport {
        gradient_a,
        gradient_b,
        patches_a,
        patches_b,
        difference,
    })
}

/// Lightness along one row.
pub fn intensity_profile<T: Real>(img: &ImageTensor<T>, row: usize) -> Result<Vec<T>> {
    if row >= img.height() {
        return Err(Error::Index {
            index: row,
            lo: 0,
            hi: img.height() - 1,
        });
    }
    let light = img.lightness();
    Ok((0..img.width()).map(|x| light.get(row, x, 0)).collect())
}
