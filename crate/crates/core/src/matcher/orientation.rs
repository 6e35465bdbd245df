use std::f64::consts::PI;

use crate::detector::FeaturePoint;
use crate::error::{FilerError, Result};
use crate::imagecore::ScalarField;

/// Central differences `P(x+1, y) - P(x-1, y)` and `P(x, y+1) - P(x, y-1)`
/// with replicated borders.
pub fn gradient_maps(field: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    let (w, h) = field.dims();
    if w < 3 || h < 3 {
        return Err(FilerError::ImageTooSmall {
            width: w,
            height: h,
            min_width: 3,
            min_height: 3,
        });
    }
    let (wi, hi) = (w as isize, h as isize);
    let gx = ScalarField::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        field.get_clamped((x + 1).min(wi - 1), y) - field.get_clamped((x - 1).max(0), y)
    });
    let gy = ScalarField::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        field.get_clamped(x, (y + 1).min(hi - 1)) - field.get_clamped(x, (y - 1).max(0))
    });
    Ok((gx, gy))
}

/// Gradient amplitude and direction in `[0, 2 pi)`.
pub fn gradient_polar(gx: &ScalarField, gy: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    let mag = gx.zip_map(gy, |a, b| (a * a + b * b).sqrt())?;
    let angle = gx.zip_map(gy, |a, b| b.atan2(a).rem_euclid(2.0 * PI))?;
    Ok((mag, angle))
}

/// Amplitude-weighted histogram of gradient directions over a disc of
/// `radius` around `point`. Returns the centre angle of the fullest bin, or
/// `None` when the disc carries (almost) no gradient.
pub fn main_direction(
    point: &FeaturePoint,
    gmag: &ScalarField,
    gangle: &ScalarField,
    radius: f64,
    n_bins: usize,
) -> Result<Option<f64>> {
    gmag.ensure_same_dims(gangle)?;
    if n_bins == 0 || !(radius > 0.0) {
        return Err(FilerError::InvalidConfig(
            "main direction needs positive radius and bin count".into(),
        ));
    }
    let (w, h) = gmag.dims();
    let (px, py) = point.pixel();
    let r = radius.floor() as isize;
    if px - r < 0 || py - r < 0 || px + r >= w as isize || py + r >= h as isize {
        return Err(FilerError::PatchOutOfBounds {
            x: point.x,
            y: point.y,
            radius,
        });
    }
    let bin_width = 2.0 * PI / n_bins as f64;
    let mut hist = vec![0.0; n_bins];
    let mut total = 0.0;
    let r2 = radius * radius;
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) > r2 {
                continue;
            }
            let (x, y) = ((px + dx) as usize, (py + dy) as usize);
            let m = gmag.get(x, y);
            let bin = ((gangle.get(x, y) / bin_width) as usize).min(n_bins - 1);
            hist[bin] += m;
            total += m;
        }
    }
    if total < 1e-9 {
        return Ok(None);
    }
    let mut best = 0;
    for (k, &v) in hist.iter().enumerate() {
        if v > hist[best] {
            best = k;
        }
    }
    Ok(Some((best as f64 + 0.5) * bin_width))
}
