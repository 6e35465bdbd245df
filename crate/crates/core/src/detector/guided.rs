use crate::error::{FilerError, Result};
use crate::imagecore::ScalarField;

/// Spatial and structural widths of the energy-guided filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidedFilterParams {
    pub sigma_s: f64,
    pub sigma_r: f64,
    pub window_radius: usize,
}

impl GuidedFilterParams {
    pub const DEFAULT_SIGMA_S: f64 = 4.0;
    pub const DEFAULT_WINDOW_RADIUS: usize = 12;
    /// `sigma_r` as a fraction of the guide's dynamic range.
    pub const DEFAULT_SIGMA_R_FRACTION: f64 = 0.1;

    /// Default parameters with `sigma_r` scaled to the guide's range.
    pub fn for_guide(guide: &ScalarField, sigma_r_fraction: f64) -> Self {
        let range = guide.max() - guide.min();
        let sigma_r = (sigma_r_fraction * range).max(f64::MIN_POSITIVE.sqrt());
        Self {
            sigma_s: Self::DEFAULT_SIGMA_S,
            sigma_r,
            window_radius: Self::DEFAULT_WINDOW_RADIUS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_s > 0.0) || !(self.sigma_r > 0.0) {
            return Err(FilerError::InvalidConfig(
                "guided filter sigmas must be positive".into(),
            ));
        }
        if (self.window_radius as f64) < (2.0 * self.sigma_s).ceil() {
            return Err(FilerError::InvalidConfig(format!(
                "window radius {} below ceil(2 sigma_s) = {}",
                self.window_radius,
                (2.0 * self.sigma_s).ceil()
            )));
        }
        Ok(())
    }
}

/// Filters `input` with weights `G_d(i - j) G_r(ET(i) - ET(j))` over a square
/// window, normalized by the weight sum. Borders replicate.
pub fn edge_guided_filter(
    input: &ScalarField,
    guide: &ScalarField,
    params: &GuidedFilterParams,
) -> Result<ScalarField> {
    input.ensure_same_dims(guide)?;
    params.validate()?;
    let (w, h) = input.dims();
    let r = params.window_radius as isize;
    let side = 2 * params.window_radius + 1;
    let two_ss = 2.0 * params.sigma_s * params.sigma_s;
    let two_sr = 2.0 * params.sigma_r * params.sigma_r;
    let spatial: Vec<f64> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .map(|(dx, dy)| (-((dx * dx + dy * dy) as f64) / two_ss).exp())
        .collect();
    debug_assert_eq!(spatial.len(), side * side);

    let mut out = ScalarField::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let g_center = guide.get(x, y);
            let mut acc = 0.0;
            let mut norm = 0.0;
            let mut k = 0;
            for dy in -r..=r {
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                let row = sy * w;
                for dx in -r..=r {
                    let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let diff = guide.data()[row + sx] - g_center;
                    let weight = spatial[k] * (-(diff * diff) / two_sr).exp();
                    acc += weight * input.data()[row + sx];
                    norm += weight;
                    k += 1;
                }
            }
            out.set(x, y, acc / norm);
        }
    }
    Ok(out)
}

/// `I_out = J - ET`.
pub fn structure_map(j_field: &ScalarField, et: &ScalarField) -> Result<ScalarField> {
    j_field.zip_map(et, |j, e| j - e)
}
