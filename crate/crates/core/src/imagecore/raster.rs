use std::path::Path;

use image::DynamicImage;

use crate::error::{FilerError, Result};

/// Row-major 2-D field of finite reals.
///
/// This is the carrier for every intermediate map in the pipeline:
/// responses, energies, guided-filter output, gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FilerError::ZeroSizedImage);
        }
        if data.len() != width * height {
            return Err(FilerError::DimensionMismatch {
                expected: (width, height),
                actual: (data.len(), 1),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Sample with coordinates clamped to the border.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    /// Sample with coordinates wrapped periodically.
    #[inline]
    pub fn get_wrapped(&self, x: isize, y: isize) -> f64 {
        let cx = x.rem_euclid(self.width as isize) as usize;
        let cy = y.rem_euclid(self.height as isize) as usize;
        self.data[cy * self.width + cx]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two fields of equal size.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_dims(other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn ensure_same_dims(&self, other: &ScalarField) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(FilerError::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Linear rescale to `[0, 1]`. A constant field maps to all zeros.
    pub fn rescaled_unit(&self) -> Self {
        let (lo, hi) = (self.min(), self.max());
        let span = hi - lo;
        if span <= 0.0 || !span.is_finite() {
            return Self::zeros(self.width, self.height);
        }
        self.map(|v| (v - lo) / span)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Grayscale raster with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage(ScalarField);

impl GrayImage {
    /// Wraps a field, clamping values into `[0, 1]`. Non-finite values are
    /// rejected.
    pub fn from_field(field: ScalarField) -> Result<Self> {
        if !field.is_finite() {
            return Err(FilerError::UnsupportedFormat("non-finite intensity".to_string()));
        }
        Ok(Self(field.map(|v| v.clamp(0.0, 1.0))))
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_field(ScalarField::from_vec(width, height, data)?)
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self(ScalarField::from_fn(width, height, f).map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 }))
    }

    pub fn from_luma8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        let data = pixels.iter().map(|&p| p as f64 / 255.0).collect();
        Self::from_vec(width, height, data)
    }

    #[inline]
    pub fn field(&self) -> &ScalarField {
        &self.0
    }

    pub fn into_field(self) -> ScalarField {
        self.0
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.0.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.0.get(x, y)
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    /// Quantize to 8 bits, rounding to nearest.
    pub fn to_luma8(&self) -> Vec<u8> {
        self.0
            .data()
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Writes an 8-bit grayscale PNG (or PGM, by extension).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let buf = image::GrayImage::from_raw(self.width() as u32, self.height() as u32, self.to_luma8())
            .expect("buffer length matches dimensions");
        buf.save(path.as_ref())?;
        Ok(())
    }
}

impl AsRef<ScalarField> for GrayImage {
    fn as_ref(&self) -> &ScalarField {
        &self.0
    }
}

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

fn luminance(r: u8, g: u8, b: u8) -> f64 {
    (LUMA_R * r as f64 + LUMA_G * g as f64 + LUMA_B * b as f64) / 255.0
}

/// Converts an 8-bit decoded raster. RGB collapses by 0.299/0.587/0.114.
pub fn gray_from_dynamic(img: &DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(FilerError::ZeroSizedImage);
    }
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| luminance(p.0[0], p.0[1], p.0[2])).collect(),
        DynamicImage::ImageRgba8(buf) => buf.pixels().map(|p| luminance(p.0[0], p.0[1], p.0[2])).collect(),
        other => {
            return Err(FilerError::UnsupportedFormat(format!(
                "{:?} is not an 8-bit gray or RGB raster",
                other.color()
            )))
        }
    };
    GrayImage::from_vec(w, h, data)
}

/// Loads an 8-bit PNG or PGM/PPM raster as grayscale in `[0, 1]`.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(FilerError::FileNotFound(path.to_path_buf()));
    }
    let reader = image::ImageReader::open(path)?
        .with_guessed_format()
        .map_err(FilerError::Io)?;
    match reader.format() {
        Some(image::ImageFormat::Png) | Some(image::ImageFormat::Pnm) => {}
        Some(other) => {
            return Err(FilerError::UnsupportedFormat(format!("{other:?}")));
        }
        None => return Err(FilerError::UnsupportedFormat("unrecognized file contents".to_string())),
    }
    let img = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => FilerError::Io(io),
        other => FilerError::UnsupportedFormat(other.to_string()),
    })?;
    gray_from_dynamic(&img)
}
