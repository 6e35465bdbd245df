use super::raster::ScalarField;
use crate::error::{FilerError, Result};

/// How samples outside the raster are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Replicate,
}

impl Boundary {
    #[inline]
    fn sample(self, field: &ScalarField, x: isize, y: isize) -> f64 {
        match self {
            Boundary::Periodic => field.get_wrapped(x, y),
            Boundary::Replicate => field.get_clamped(x, y),
        }
    }
}

/// Exact spatial convolution with an odd-sized kernel centred on its middle
/// tap: `out(x, y) = sum K(i, j) * f(x + cx - i, y + cy - j)`.
pub fn direct_convolve(field: &ScalarField, kernel: &ScalarField, boundary: Boundary) -> Result<ScalarField> {
    let (kw, kh) = kernel.dims();
    if kw % 2 == 0 || kh % 2 == 0 {
        return Err(FilerError::EvenKernel { width: kw, height: kh });
    }
    let (cx, cy) = ((kw / 2) as isize, (kh / 2) as isize);
    let mut out = ScalarField::zeros(field.width(), field.height());
    for y in 0..field.height() {
        for x in 0..field.width() {
            let mut acc = 0.0;
            for j in 0..kh {
                for i in 0..kw {
                    let k = kernel.get(i, j);
                    if k == 0.0 {
                        continue;
                    }
                    let sx = x as isize + cx - i as isize;
                    let sy = y as isize + cy - j as isize;
                    acc += k * boundary.sample(field, sx, sy);
                }
            }
            out.set(x, y, acc);
        }
    }
    Ok(out)
}

/// Normalized 1-D Gaussian taps of radius `ceil(3 sigma)`. `sigma <= 0`
/// yields the identity tap.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable convolution with the same symmetric 1-D taps along x then y.
pub fn separable_convolve(field: &ScalarField, taps: &[f64], boundary: Boundary) -> ScalarField {
    let radius = (taps.len() / 2) as isize;
    let (w, h) = field.dims();
    let mut tmp = ScalarField::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * boundary.sample(field, x as isize + radius - k as isize, y as isize);
            }
            tmp.set(x, y, acc);
        }
    }
    let mut out = ScalarField::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * boundary.sample(&tmp, x as isize, y as isize + radius - k as isize);
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// Gaussian blur with replicated borders.
pub fn gaussian_blur(field: &ScalarField, sigma: f64) -> ScalarField {
    if sigma <= 0.0 {
        return field.clone();
    }
    separable_convolve(field, &gaussian_taps(sigma), Boundary::Replicate)
}
