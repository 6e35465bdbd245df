//! Energy-guided filtering, the structure map `I_out`, and corner detection
//! on it.

mod fast;
mod guided;

pub use fast::{corner_score, detect_features};
pub use guided::{edge_guided_filter, structure_map, GuidedFilterParams};

use serde::Serialize;

use crate::error::{FilerError, Result};

/// A detected keypoint. `main_direction` is filled in later by the matcher;
/// `None` means no dominant gradient direction was found (or none computed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeaturePoint {
    pub x: f64,
    pub y: f64,
    pub score: f64,
    pub main_direction: Option<f64>,
}

impl FeaturePoint {
    pub fn new(x: f64, y: f64, score: f64) -> Self {
        Self {
            x,
            y,
            score,
            main_direction: None,
        }
    }

    /// Nearest integer pixel.
    pub fn pixel(&self) -> (isize, isize) {
        (self.x.round() as isize, self.y.round() as isize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    /// Segment-test threshold on the `[0, 1]`-rescaled structure map.
    pub fast_threshold: f64,
    pub nonmax_radius: usize,
    pub max_features: usize,
    pub border_margin: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            fast_threshold: 0.04,
            nonmax_radius: 3,
            max_features: 5000,
            border_margin: 40,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.fast_threshold > 0.0) || self.nonmax_radius == 0 || self.max_features == 0 || self.border_margin == 0
        {
            return Err(FilerError::InvalidConfig(
                "detector parameters must all be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::ScalarField;

    fn params(margin: usize) -> DetectorParams {
        DetectorParams {
            border_margin: margin,
            ..DetectorParams::default()
        }
    }

    #[test]
    fn constant_map_has_no_features() {
        let f = ScalarField::filled(64, 64, 0.4);
        assert!(detect_features(&f, &params(10)).unwrap().is_empty());
    }

    #[test]
    fn too_small_rejected() {
        let f = ScalarField::zeros(20, 100);
        assert!(matches!(
            detect_features(&f, &params(10)),
            Err(FilerError::ImageTooSmall { .. })
        ));
    }

    /// Light tiles brighten left to right. A two-level X-junction has no
    /// 9-pixel arc, but with the ramp one tile at every junction is the
    /// strict maximum.
    fn checkerboard(n: usize, square: usize, offset: usize) -> ScalarField {
        ScalarField::from_fn(n, n, |x, y| {
            let cx = (x + square - offset % square) / square;
            let cy = (y + square - offset % square) / square;
            if (cx + cy).is_multiple_of(2) {
                0.1
            } else {
                0.45 + 0.05 * cx as f64
            }
        })
    }

    #[test]
    fn checkerboard_corners_found() {
        let (n, sq, margin) = (160, 16, 20);
        let board = checkerboard(n, sq, 0);
        let feats = detect_features(&board, &params(margin)).unwrap();
        // Grid intersections fall between pixels sq*k - 1 and sq*k.
        let mut truth = Vec::new();
        for gy in (sq..n).step_by(sq) {
            for gx in (sq..n).step_by(sq) {
                let (tx, ty) = (gx as f64 - 0.5, gy as f64 - 0.5);
                if tx >= margin as f64 + 2.0
                    && ty >= margin as f64 + 2.0
                    && tx <= (n - 1 - margin) as f64 - 2.0
                    && ty <= (n - 1 - margin) as f64 - 2.0
                {
                    truth.push((tx, ty));
                }
            }
        }
        let found = truth
            .iter()
            .filter(|(tx, ty)| feats.iter().any(|f| (f.x - tx).hypot(f.y - ty) <= 2.0))
            .count();
        assert!(found as f64 >= 0.9 * truth.len() as f64, "{found}/{}", truth.len());
        for f in &feats {
            let near = truth.iter().any(|(tx, ty)| (f.x - tx).hypot(f.y - ty) <= 2.0);
            assert!(near, "spurious feature at ({}, {})", f.x, f.y);
        }
    }

    #[test]
    fn border_suppression_and_determinism() {
        let board = checkerboard(128, 7, 3);
        let p = params(20);
        let a = detect_features(&board, &p).unwrap();
        let b = detect_features(&board, &p).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        for f in &a {
            assert!(f.x >= 20.0 && f.y >= 20.0 && f.x <= 107.0 && f.y <= 107.0);
        }
        for (i, f) in a.iter().enumerate() {
            for g in &a[i + 1..] {
                assert!((f.x - g.x).hypot(f.y - g.y) > p.nonmax_radius as f64);
            }
        }
        for pair in a.windows(2) {
            let ord = pair[1].score.total_cmp(&pair[0].score);
            assert!(ord.is_le());
        }
    }

    #[test]
    fn max_features_truncates_strongest() {
        let board = checkerboard(128, 7, 3);
        let all = detect_features(&board, &params(20)).unwrap();
        let few = detect_features(
            &board,
            &DetectorParams {
                max_features: 5,
                ..params(20)
            },
        )
        .unwrap();
        assert_eq!(few.len(), 5);
        assert_eq!(&all[..5], &few[..]);
    }
}
