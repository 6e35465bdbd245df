//! FAST-9 segment test with greedy radius suppression.

use super::{DetectorParams, FeaturePoint};
use crate::error::{FilerError, Result};
use crate::imagecore::ScalarField;

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
const CIRCLE: [(isize, isize); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

const ARC: usize = 9;

fn longest_circular_run(mask: u32) -> usize {
    if mask == 0xFFFF {
        return 16;
    }
    // Doubling the 16-bit mask turns circular runs into linear ones.
    let doubled = mask | (mask << 16);
    let mut best = 0;
    let mut run = 0;
    for i in 0..32 {
        if doubled & (1 << i) != 0 {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best.min(16)
}

/// Segment-test score at `(x, y)`, or `None` if the pixel is not a corner.
/// The score is the larger of the summed excess brightness or darkness.
pub fn corner_score(img: &ScalarField, x: usize, y: usize, threshold: f64) -> Option<f64> {
    let p = img.get(x, y);
    let mut bright = 0u32;
    let mut dark = 0u32;
    let mut bright_sum = 0.0;
    let mut dark_sum = 0.0;
    for (k, &(dx, dy)) in CIRCLE.iter().enumerate() {
        let v = img.get((x as isize + dx) as usize, (y as isize + dy) as usize);
        if v > p + threshold {
            bright |= 1 << k;
            bright_sum += v - p - threshold;
        } else if v < p - threshold {
            dark |= 1 << k;
            dark_sum += p - v - threshold;
        }
    }
    let is_bright = longest_circular_run(bright) >= ARC;
    let is_dark = longest_circular_run(dark) >= ARC;
    match (is_bright, is_dark) {
        (false, false) => None,
        _ => Some(bright_sum.max(dark_sum)),
    }
}

/// FAST-9 on the `[0, 1]`-rescaled structure map, then greedy suppression in
/// `(score desc, y, x)` order.
pub fn detect_features(i_out: &ScalarField, params: &DetectorParams) -> Result<Vec<FeaturePoint>> {
    params.validate()?;
    let (w, h) = i_out.dims();
    let min_side = 2 * params.border_margin + 7;
    if w < min_side || h < min_side {
        return Err(FilerError::ImageTooSmall {
            width: w,
            height: h,
            min_width: min_side,
            min_height: min_side,
        });
    }
    let img = i_out.rescaled_unit();
    let margin = params.border_margin.max(3);
    let mut candidates = Vec::new();
    for y in margin..h - margin {
        for x in margin..w - margin {
            if let Some(score) = corner_score(&img, x, y, params.fast_threshold) {
                candidates.push((score, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));

    let r = params.nonmax_radius;
    let r2 = (r * r) as isize;
    let ri = r as isize;
    let mut taken = vec![false; w * h];
    let mut out = Vec::new();
    'next: for (score, x, y) in candidates {
        if out.len() >= params.max_features {
            break;
        }
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                if dx * dx + dy * dy > r2 {
                    continue;
                }
                let (sx, sy) = (x as isize + dx, y as isize + dy);
                if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                    continue;
                }
                if taken[sy as usize * w + sx as usize] {
                    continue 'next;
                }
            }
        }
        taken[y * w + x] = true;
        out.push(FeaturePoint::new(x as f64, y as f64, score));
    }
    Ok(out)
}
