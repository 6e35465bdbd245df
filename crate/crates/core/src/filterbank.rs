//! Multi-scale, multi-orientation log-Gabor filter bank.
//!
//! Each transfer function is a log-radial Gaussian centred on `f0` times an
//! angular Gaussian centred on the filter orientation. The angular factor is
//! one-sided over the full circle, so the spatial filter is complex: its real
//! part is the even-symmetric wavelet and its imaginary part the odd one. One
//! inverse FFT per (scale, orientation) yields both responses.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{FilerError, Result};
use crate::imagecore::{bin_frequency, convolve_spectrum, ComplexSpectrum, Fft2d, ScalarField};

/// Shape of the exponents in the transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExponentForm {
    /// Standard log-Gabor: squared log-ratio and squared angular deviation.
    #[default]
    Squared,
    /// Exponents exactly as typeset in the original formula, without
    /// squares. Only useful for side-by-side comparison.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBankConfig {
    pub n_scales: usize,
    pub n_orients: usize,
    /// Wavelength of the finest scale in pixels; `f0 = 1 / min_wavelength`.
    pub min_wavelength: f64,
    /// Ratio between successive centre wavelengths.
    pub scale_mult: f64,
    /// `sigma_f / f0`.
    pub sigma_f_ratio: f64,
    /// Angular bandwidth in radians.
    pub sigma_theta: f64,
    pub exponent_form: ExponentForm,
    /// Added to every filter orientation. Steering a bank by an image's
    /// rotation keeps orientation indices comparable across the pair.
    pub orientation_offset: f64,
}

impl FilterBankConfig {
    pub fn new(n_scales: usize, n_orients: usize) -> Self {
        Self {
            n_scales,
            n_orients,
            min_wavelength: 3.0,
            scale_mult: 2.1,
            sigma_f_ratio: 0.55,
            sigma_theta: default_sigma_theta(n_orients),
            exponent_form: ExponentForm::Squared,
            orientation_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FilerError::InvalidConfig(m.to_string()));
        if self.n_scales < 1 {
            return bad("n_scales must be >= 1");
        }
        if self.n_orients < 1 {
            return bad("n_orients must be >= 1");
        }
        if !(self.min_wavelength >= 2.0) {
            return bad("min_wavelength must be >= 2");
        }
        if !(self.scale_mult > 1.0) {
            return bad("scale_mult must be > 1");
        }
        if !(self.sigma_f_ratio > 0.0 && self.sigma_f_ratio < 1.0) {
            return bad("sigma_f_ratio must lie in (0, 1)");
        }
        if !(self.sigma_theta > 0.0) {
            return bad("sigma_theta must be > 0");
        }
        if !self.orientation_offset.is_finite() {
            return bad("orientation_offset must be finite");
        }
        Ok(())
    }

    /// Centre frequency (cycles/pixel) of scale `s`.
    pub fn center_frequency(&self, s: usize) -> f64 {
        1.0 / (self.min_wavelength * self.scale_mult.powi(s as i32))
    }

    /// Orientation angle of filter `o`: `[0, pi)` in uniform steps, plus the
    /// offset.
    pub fn orientation(&self, o: usize) -> f64 {
        o as f64 * PI / self.n_orients as f64 + self.orientation_offset
    }
}

impl Default for FilterBankConfig {
    fn default() -> Self {
        Self::new(4, 6)
    }
}

pub fn default_sigma_theta(n_orients: usize) -> f64 {
    PI / (2.0 * n_orients as f64) * 1.2
}

/// Wraps an angle difference into `(-pi, pi]`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Transfer value at polar frequency `(radius, angle)`.
pub fn transfer_value(config: &FilterBankConfig, f0: f64, theta0: f64, radius: f64, angle: f64) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    let log_ratio = (radius / f0).ln();
    let log_sigma = config.sigma_f_ratio.ln();
    let dtheta = wrap_angle(angle - theta0);
    let sig_t2 = 2.0 * config.sigma_theta * config.sigma_theta;
    match config.exponent_form {
        ExponentForm::Squared => {
            let radial = (-(log_ratio * log_ratio) / (2.0 * log_sigma * log_sigma)).exp();
            let angular = (-(dtheta * dtheta) / sig_t2).exp();
            radial * angular
        }
        ExponentForm::Literal => {
            let radial = (-log_ratio / (2.0 * log_sigma)).exp();
            let angular = (-dtheta / sig_t2).exp();
            radial * angular
        }
    }
}

/// Transfer functions for one raster size.
#[derive(Debug, Clone)]
pub struct FilterBank {
    width: usize,
    height: usize,
    config: FilterBankConfig,
    transfers: Vec<ComplexSpectrum>,
    plan: Arc<Fft2d>,
}

impl FilterBank {
    pub fn config(&self) -> &FilterBankConfig {
        &self.config
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn n_scales(&self) -> usize {
        self.config.n_scales
    }

    pub fn n_orients(&self) -> usize {
        self.config.n_orients
    }

    pub fn orientations(&self) -> Vec<f64> {
        (0..self.config.n_orients).map(|o| self.config.orientation(o)).collect()
    }

    pub fn transfer(&self, s: usize, o: usize) -> Result<&ComplexSpectrum> {
        check_index(s, self.config.n_scales)?;
        check_index(o, self.config.n_orients)?;
        Ok(&self.transfers[s * self.config.n_orients + o])
    }

    pub fn len(&self) -> usize {
        self.transfers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transfers.is_empty()
    }
}

fn check_index(index: usize, limit: usize) -> Result<()> {
    if index >= limit {
        return Err(FilerError::IndexOutOfRange { index, limit });
    }
    Ok(())
}

/// Evaluates every transfer on the discrete frequency grid of a
/// `width x height` raster. The DC bin is zero by construction.
pub fn build_filter_bank(width: usize, height: usize, config: &FilterBankConfig) -> Result<FilterBank> {
    config.validate()?;
    if width < 8 || height < 8 {
        return Err(FilerError::InvalidConfig(format!(
            "filter bank needs at least 8x8, got {width}x{height}"
        )));
    }
    // Polar coordinates of each bin are shared by all filters.
    let mut radius = Vec::with_capacity(width * height);
    let mut angle = Vec::with_capacity(width * height);
    for v in 0..height {
        let fv = bin_frequency(v, height);
        for u in 0..width {
            let fu = bin_frequency(u, width);
            radius.push(fu.hypot(fv));
            angle.push(fv.atan2(fu));
        }
    }
    let mut transfers = Vec::with_capacity(config.n_scales * config.n_orients);
    for s in 0..config.n_scales {
        let f0 = config.center_frequency(s);
        for o in 0..config.n_orients {
            let theta0 = config.orientation(o);
            let mut i = 0;
            let spectrum = ComplexSpectrum::from_real_fn(width, height, |_, _| {
                let val = transfer_value(config, f0, theta0, radius[i], angle[i]);
                i += 1;
                val
            });
            transfers.push(spectrum);
        }
    }
    Ok(FilterBank {
        width,
        height,
        config: config.clone(),
        transfers,
        plan: Arc::new(Fft2d::new(width, height)),
    })
}

/// Even and odd wavelet responses for every (scale, orientation).
#[derive(Debug, Clone)]
pub struct ResponseStack {
    n_scales: usize,
    n_orients: usize,
    even: Vec<ScalarField>,
    odd: Vec<ScalarField>,
}

impl ResponseStack {
    /// Assembles a stack from scale-major grids (`index = s * n_orients + o`).
    pub fn from_parts(
        n_scales: usize,
        n_orients: usize,
        even: Vec<ScalarField>,
        odd: Vec<ScalarField>,
    ) -> Result<Self> {
        let n = n_scales * n_orients;
        if even.len() != n || odd.len() != n {
            return Err(FilerError::InvalidConfig(format!(
                "expected {n} even and odd fields, got {} and {}",
                even.len(),
                odd.len()
            )));
        }
        if let Some(first) = even.first() {
            for f in even.iter().chain(&odd) {
                first.ensure_same_dims(f)?;
            }
        }
        Ok(Self {
            n_scales,
            n_orients,
            even,
            odd,
        })
    }

    pub fn n_scales(&self) -> usize {
        self.n_scales
    }

    pub fn n_orients(&self) -> usize {
        self.n_orients
    }

    pub fn is_empty(&self) -> bool {
        self.even.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.even.first().map(|f| f.dims())
    }

    pub fn even(&self, s: usize, o: usize) -> Result<&ScalarField> {
        check_index(s, self.n_scales)?;
        check_index(o, self.n_orients)?;
        Ok(&self.even[s * self.n_orients + o])
    }

    pub fn odd(&self, s: usize, o: usize) -> Result<&ScalarField> {
        check_index(s, self.n_scales)?;
        check_index(o, self.n_orients)?;
        Ok(&self.odd[s * self.n_orients + o])
    }
}

/// Convolves the image with every filter: one forward transform and
/// `n_scales * n_orients` inverse transforms.
pub fn apply_filter_bank(image: &ScalarField, bank: &FilterBank) -> Result<ResponseStack> {
    if image.dims() != bank.dims() {
        return Err(FilerError::DimensionMismatch {
            expected: bank.dims(),
            actual: image.dims(),
        });
    }
    // The transfers drop DC, so removing an offset changes nothing except
    // that a constant image transforms to exact zeros.
    let offset = image.data().first().copied().unwrap_or(0.0);
    let spectrum = bank.plan.forward(&image.map(|v| v - offset))?;
    let mut even = Vec::with_capacity(bank.len());
    let mut odd = Vec::with_capacity(bank.len());
    for transfer in &bank.transfers {
        let (e, o) = convolve_spectrum(&bank.plan, &spectrum, transfer)?;
        even.push(e);
        odd.push(o);
    }
    ResponseStack::from_parts(bank.n_scales(), bank.n_orients(), even, odd)
}

/// `sqrt(E^2 + O^2)` for one (scale, orientation).
pub fn amplitude(stack: &ResponseStack, s: usize, o: usize) -> Result<ScalarField> {
    let e = stack.even(s, o)?;
    let od = stack.odd(s, o)?;
    e.zip_map(od, |a, b| (a * a + b * b).sqrt())
}
