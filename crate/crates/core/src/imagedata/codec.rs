//! Binary netpbm codec: P5 (grey) and P6 (RGB), maxval 255 only.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::{ImageTensor, Shape};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Ppm,
}

impl ImageFormat {
    pub fn channels(self) -> usize {
        match self {
            ImageFormat::Pgm => 1,
            ImageFormat::Ppm => 3,
        }
    }

    fn magic(self) -> &'static [u8; 2] {
        match self {
            ImageFormat::Pgm => b"P5",
            ImageFormat::Ppm => b"P6",
        }
    }

    pub fn for_channels(channels: usize) -> Result<Self> {
        match channels {
            1 => Ok(ImageFormat::Pgm),
            3 => Ok(ImageFormat::Ppm),
            c => Err(Error::UnsupportedFormat(format!("no netpbm format for {c} channels"))),
        }
    }

    /// Guesses the format from a `.pgm` / `.ppm` extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "pgm" => Some(ImageFormat::Pgm),
            "ppm" => Some(ImageFormat::Ppm),
            _ => None,
        }
    }
}

impl FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgm" => Ok(ImageFormat::Pgm),
            "ppm" => Ok(ImageFormat::Ppm),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Clamp to `[0, 1]` then round half up onto `0..=255`.
pub fn quantize<T: Real>(v: T) -> u8 {
    let v = v.as_f64().clamp(0.0, 1.0);
    (v * 255.0 + 0.5).floor() as u8
}

pub fn encode<T: Real>(img: &ImageTensor<T>, format: ImageFormat) -> Result<Vec<u8>> {
    if img.channels() != format.channels() {
        return Err(Error::UnsupportedFormat(format!(
            "{format:?} needs {} channel(s), image has {}",
            format.channels(),
            img.channels()
        )));
    }
    let mut out = Vec::with_capacity(img.len() + 20);
    out.extend_from_slice(format.magic());
    out.extend_from_slice(format!("\n{} {}\n255\n", img.width(), img.height()).as_bytes());
    out.extend(img.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&b) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Codec(format!("missing {what} in header")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Codec(format!("bad {what} in header")))
    }
}

pub fn decode<T: Real>(bytes: &[u8]) -> Result<ImageTensor<T>> {
    let format = match bytes.get(..2) {
        Some(b"P5") => ImageFormat::Pgm,
        Some(b"P6") => ImageFormat::Ppm,
        Some(m) if m[0] == b'P' => {
            return Err(Error::UnsupportedFormat(format!(
                "netpbm variant {}",
                String::from_utf8_lossy(m)
            )))
        }
        _ => return Err(Error::Codec("missing P5/P6 magic".into())),
    };
    let mut header = HeaderReader { bytes, pos: 2 };
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!("maxval {maxval} (only 255)")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Codec(format!("zero-sized image {width}x{height}")));
    }
    match bytes.get(header.pos) {
        Some(b) if b.is_ascii_whitespace() => header.pos += 1,
        _ => return Err(Error::Codec("header not terminated by whitespace".into())),
    }
    let shape = Shape::new(height, width, format.channels());
    let payload = &bytes[header.pos..];
    if payload.len() < shape.len() {
        return Err(Error::Codec(format!(
            "truncated payload: {} of {} bytes",
            payload.len(),
            shape.len()
        )));
    }
    let scale = T::lit(255.0);
    let data = payload[..shape.len()]
        .iter()
        .map(|&b| T::lit(b as f64) / scale)
        .collect();
    ImageTensor::from_vec(shape, data)
}

pub fn write_image<T: Real>(img: &ImageTensor<T>, path: &Path) -> Result<()> {
    let format = ImageFormat::from_path(path).map_or_else(|| ImageFormat::for_channels(img.channels()), Ok)?;
    fs::write(path, encode(img, format)?)?;
    Ok(())
}

pub fn read_image<T: Real>(path: &Path) -> Result<ImageTensor<T>> {
    decode(&fs::read(path)?)
}

/// Writes `img` as `format`, reads it back.
pub fn image_roundtrip<T: Real>(img: &ImageTensor<T>, path: &Path, format: ImageFormat) -> Result<ImageTensor<T>> {
    fs::write(path, encode(img, format)?)?;
    read_image(path)
}

/// Flat little-endian `f64` dump.
pub fn write_f64_le(values: impl IntoIterator<Item = f64>, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = values.into_iter().flat_map(f64::to_le_bytes).collect();
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_f64_le(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Codec(format!(
            "{} bytes is not a whole number of f64 values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}
