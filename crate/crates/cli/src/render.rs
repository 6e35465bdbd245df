use anyhow::Result;
use image::{Luma, Rgb, RgbImage};
use imageproc::drawing::draw_line_segment_mut;

use filer::imagecore::ScalarField;
use filer::matcher::{AffineTransform, Match};
use filer::synthgen::warp_affine;

const INLIER: Rgb<u8> = Rgb([0, 0, 255]);
const OUTLIER: Rgb<u8> = Rgb([255, 0, 0]);

fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// 8-bit gray buffer of a field assumed to lie in `[0, 1]`.
pub fn luma(field: &ScalarField) -> image::GrayImage {
    let (w, h) = field.dims();
    image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([to_u8(field.get(x as usize, y as usize))])
    })
}

/// A and B side by side with one line per match: blue for inliers, red for
/// rejected matches. Inliers are drawn last.
pub fn match_overlay(a: &ScalarField, b: &ScalarField, matches: &[Match]) -> RgbImage {
    let (wa, ha) = a.dims();
    let (wb, hb) = b.dims();
    let mut canvas = RgbImage::new((wa + wb) as u32, ha.max(hb) as u32);
    for (field, x0) in [(a, 0usize), (b, wa)] {
        let (w, h) = field.dims();
        for y in 0..h {
            for x in 0..w {
                let v = to_u8(field.get(x, y));
                canvas.put_pixel((x0 + x) as u32, y as u32, Rgb([v, v, v]));
            }
        }
    }
    let shift = wa as f32;
    for inlier in [false, true] {
        for m in matches.iter().filter(|m| m.inlier == inlier) {
            let colour = if inlier { INLIER } else { OUTLIER };
            draw_line_segment_mut(
                &mut canvas,
                (m.point_a.x as f32, m.point_a.y as f32),
                (m.point_b.x as f32 + shift, m.point_b.y as f32),
                colour,
            );
        }
    }
    canvas
}

/// Checkerboard of A and B resampled into A's frame through `h` (which maps
/// A to B). Tiles where B has no data show A.
pub fn checkerboard_mosaic(a: &ScalarField, b: &ScalarField, h: &AffineTransform, tile: usize) -> Result<ScalarField> {
    anyhow::ensure!(tile > 0, "tile must be positive");
    h.inverse()?;
    let (w, ht) = a.dims();
    let warped = warp_affine(b, h, w, ht, Some(f64::NAN));
    Ok(ScalarField::from_fn(w, ht, |x, y| {
        let from_b = (x / tile + y / tile) % 2 == 1;
        let v = warped.get(x, y);
        if from_b && !v.is_nan() {
            v
        } else {
            a.get(x, y)
        }
    }))
}
