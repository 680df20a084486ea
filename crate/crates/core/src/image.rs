//! Grayscale images and 8-bit PGM (P5) / PNG I/O.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

/// Row-major grayscale intensities, nominally in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != pixels.len() {
            return Err(Error::DimensionMismatch(format!("{width}x{height} image with {} pixels", pixels.len())));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("image"));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let pixels = (0..height).flat_map(|r| (0..width).map(move |c| (r, c))).map(|(r, c)| f(r, c)).collect();
        GrayImage::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn same_shape(&self, other: &GrayImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn clamped(&self) -> GrayImage {
        GrayImage { pixels: self.pixels.iter().map(|p| p.clamp(0.0, 255.0)).collect(), ..*self }
    }

    /// Rounded and clamped to 8-bit levels, as written to disk.
    pub fn quantized(&self) -> GrayImage {
        GrayImage { pixels: self.to_u8().into_iter().map(f64::from).collect(), ..*self }
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|p| p.round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        GrayImage::new(width, height, bytes.iter().map(|b| f64::from(*b)).collect())
    }

    /// Read a binary PGM, or a PNG (converted to 8-bit luma) when the path
    /// ends in `.png`.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if has_png_extension(path) {
            let img = ::image::open(path).map_err(|e| Error::Format(e.to_string()))?.into_luma8();
            let (w, h) = img.dimensions();
            return GrayImage::from_u8(w as usize, h as usize, img.as_raw());
        }
        parse_pgm(&fs::read(path)?)
    }

    /// Write 8-bit PGM, or PNG when the path ends in `.png`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if has_png_extension(path) {
            let buf = ::image::GrayImage::from_raw(self.width as u32, self.height as u32, self.to_u8())
                .ok_or_else(|| Error::Format("image buffer size".into()))?;
            return buf.save(path).map_err(|e| Error::Format(e.to_string()));
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_pgm())?;
        Ok(())
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_u8());
        out
    }
}

fn has_png_extension(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).map_or(false, |e| e.eq_ignore_ascii_case("png"))
}

/// Parse a binary (P5) PGM with maxval up to 65535. Samples are rescaled to
/// `[0, 255]` when maxval is not 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(Error::Format("not a binary PGM (P5)".into()));
    }
    let mut number = |what: &str| -> Result<usize> {
        token()?.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let sample = if maxval < 256 { 1 } else { 2 };
    let need = width * height * sample;
    if bytes.len() < start + need {
        return Err(Error::Format("truncated PGM raster".into()));
    }
    let raster = &bytes[start..start + need];
    let scale = 255.0 / maxval as f64;
    let pixels = if sample == 1 {
        raster.iter().map(|b| f64::from(*b) * scale).collect()
    } else {
        raster.chunks_exact(2).map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) * scale).collect()
    };
    GrayImage::new(width, height, pixels)
}
