use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::raster::ScalarField;
use crate::error::{FilerError, Result};

/// Row-major frequency-domain carrier. Bin `(u, v)` follows the unshifted
/// FFT layout: DC at `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    width: usize,
    height: usize,
    data: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![Complex64::new(0.0, 0.0); width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(FilerError::DimensionMismatch {
                expected: (width, height),
                actual: (data.len(), 1),
            });
        }
        Ok(Self { width, height, data })
    }

    /// Builds a purely real spectrum from per-bin values.
    pub fn from_real_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(Complex64::new(f(u, v), 0.0));
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
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.data[v * self.width + u]
    }
}

/// Signed normalized frequency of bin `k` in a transform of length `n`,
/// in cycles per pixel, range `[-0.5, 0.5)`.
#[inline]
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    let k = k as isize;
    let n_i = n as isize;
    let signed = if k >= (n_i + 1) / 2 { k - n_i } else { k };
    signed as f64 / n as f64
}

/// Cached 2-D FFT plans for one raster size.
pub struct Fft2d {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2d")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2d {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn forward(&self, field: &ScalarField) -> Result<ComplexSpectrum> {
        self.check(field.dims())?;
        let mut data: Vec<Complex64> = field.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, true);
        Ok(ComplexSpectrum {
            width: self.width,
            height: self.height,
            data,
        })
    }

    /// Inverse transform including the `1 / (w h)` normalization.
    pub fn inverse(&self, spectrum: ComplexSpectrum) -> Result<Vec<Complex64>> {
        self.check(spectrum.dims())?;
        let mut data = spectrum.data;
        self.transform(&mut data, false);
        let scale = 1.0 / (self.width * self.height) as f64;
        for c in &mut data {
            *c *= scale;
        }
        Ok(data)
    }

    fn check(&self, dims: (usize, usize)) -> Result<()> {
        if dims != (self.width, self.height) {
            return Err(FilerError::DimensionMismatch {
                expected: (self.width, self.height),
                actual: dims,
            });
        }
        Ok(())
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let (w, h) = (self.width, self.height);
        let (row, col) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        row.process(data);
        let mut transposed = vec![Complex64::new(0.0, 0.0); w * h];
        transpose(data, &mut transposed, w, h);
        col.process(&mut transposed);
        transpose(&transposed, data, h, w);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], w: usize, h: usize) {
    const BLOCK: usize = 32;
    for by in (0..h).step_by(BLOCK) {
        for bx in (0..w).step_by(BLOCK) {
            for y in by..(by + BLOCK).min(h) {
                for x in bx..(bx + BLOCK).min(w) {
                    dst[x * h + y] = src[y * w + x];
                }
            }
        }
    }
}

/// Multiplies the image spectrum by `kernel_spectrum` and returns the real and
/// imaginary parts of the inverse transform. Boundary semantics are periodic.
pub fn fft_convolve(image: &ScalarField, kernel_spectrum: &ComplexSpectrum) -> Result<(ScalarField, ScalarField)> {
    if image.dims() != kernel_spectrum.dims() {
        return Err(FilerError::DimensionMismatch {
            expected: image.dims(),
            actual: kernel_spectrum.dims(),
        });
    }
    let plan = Fft2d::new(image.width(), image.height());
    let spectrum = plan.forward(image)?;
    convolve_spectrum(&plan, &spectrum, kernel_spectrum)
}

/// Same as [`fft_convolve`] but reuses an already transformed image.
pub fn convolve_spectrum(
    plan: &Fft2d,
    image_spectrum: &ComplexSpectrum,
    kernel_spectrum: &ComplexSpectrum,
) -> Result<(ScalarField, ScalarField)> {
    if image_spectrum.dims() != kernel_spectrum.dims() {
        return Err(FilerError::DimensionMismatch {
            expected: image_spectrum.dims(),
            actual: kernel_spectrum.dims(),
        });
    }
    let (w, h) = image_spectrum.dims();
    let product: Vec<Complex64> = image_spectrum
        .data
        .iter()
        .zip(&kernel_spectrum.data)
        .map(|(a, b)| a * b)
        .collect();
    let out = plan.inverse(ComplexSpectrum {
        width: w,
        height: h,
        data: product,
    })?;
    let re = ScalarField::from_vec(w, h, out.iter().map(|c| c.re).collect())?;
    let im = ScalarField::from_vec(w, h, out.iter().map(|c| c.im).collect())?;
    Ok((re, im))
}
