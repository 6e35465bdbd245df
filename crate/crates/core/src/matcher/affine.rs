use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{FilerError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// 2-D affine map as a 3x3 homogeneous matrix with last row `(0, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    m: [[f64; 3]; 2],
}

impl AffineTransform {
    pub const IDENTITY: AffineTransform = AffineTransform {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    };

    /// From the top two rows `[[a, b, tx], [c, d, ty]]`.
    pub fn from_rows(rows: [[f64; 3]; 2]) -> Result<Self> {
        let t = Self { m: rows };
        if !rows.iter().flatten().all(|v| v.is_finite()) {
            return Err(FilerError::NonInvertibleAffine);
        }
        if t.determinant() == 0.0 {
            return Err(FilerError::NonInvertibleAffine);
        }
        Ok(t)
    }

    /// From a full 3x3 matrix whose last row must be `(0, 0, 1)`.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self> {
        let last = m[2];
        if (last[0]).abs() > 1e-9 || (last[1]).abs() > 1e-9 || (last[2] - 1.0).abs() > 1e-9 {
            return Err(FilerError::Parse(format!(
                "affine last row must be 0 0 1, got {last:?}"
            )));
        }
        Self::from_rows([m[0], m[1]])
    }

    /// Rotation by `theta` about `center`, then translation by `(tx, ty)`.
    pub fn rotation_about(theta: f64, center: Point2, tx: f64, ty: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let px = center.x - c * center.x + s * center.y + tx;
        let py = center.y - s * center.x - c * center.y + ty;
        Self {
            m: [[c, -s, px], [s, c, py]],
        }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [self.m[0], self.m[1], [0.0, 0.0, 1.0]]
    }

    pub fn rows(&self) -> [[f64; 3]; 2] {
        self.m
    }

    #[inline]
    pub fn apply(&self, p: Point2) -> Point2 {
        Point2 {
            x: self.m[0][0] * p.x + self.m[0][1] * p.y + self.m[0][2],
            y: self.m[1][0] * p.x + self.m[1][1] * p.y + self.m[1][2],
        }
    }

    pub fn determinant(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(FilerError::NonInvertibleAffine);
        }
        let [[a, b, tx], [c, d, ty]] = self.m;
        let ia = d / det;
        let ib = -b / det;
        let ic = -c / det;
        let id = a / det;
        Ok(Self {
            m: [[ia, ib, -(ia * tx + ib * ty)], [ic, id, -(ic * tx + id * ty)]],
        })
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &AffineTransform) -> Self {
        let a = self.matrix();
        let b = first.matrix();
        let mut out = [[0.0; 3]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        Self { m: out }
    }

    /// Angle of the rotation factor in the polar decomposition of the linear
    /// block, in `(-pi, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        let [[a, b, _], [c, d, _]] = self.m;
        (c - b).atan2(a + d)
    }

    /// Exact affine through three correspondences. `None` when the source
    /// triangle is (nearly) degenerate.
    pub fn from_three(src: [Point2; 3], dst: [Point2; 3]) -> Option<Self> {
        let (x1, y1) = (src[1].x - src[0].x, src[1].y - src[0].y);
        let (x2, y2) = (src[2].x - src[0].x, src[2].y - src[0].y);
        let det = x1 * y2 - x2 * y1;
        if det.abs() < 1e-6 {
            return None;
        }
        let (u1, v1) = (dst[1].x - dst[0].x, dst[1].y - dst[0].y);
        let (u2, v2) = (dst[2].x - dst[0].x, dst[2].y - dst[0].y);
        // Solve [a b; c d] [x1 x2; y1 y2] = [u1 u2; v1 v2].
        let a = (u1 * y2 - u2 * y1) / det;
        let b = (u2 * x1 - u1 * x2) / det;
        let c = (v1 * y2 - v2 * y1) / det;
        let d = (v2 * x1 - v1 * x2) / det;
        let tx = dst[0].x - a * src[0].x - b * src[0].y;
        let ty = dst[0].y - c * src[0].x - d * src[0].y;
        let t = Self {
            m: [[a, b, tx], [c, d, ty]],
        };
        (t.determinant().abs() > 1e-12 && t.m.iter().flatten().all(|v| v.is_finite())).then_some(t)
    }

    /// Least-squares affine from `src` to `dst` (centred normal equations).
    pub fn fit_least_squares(src: &[Point2], dst: &[Point2]) -> Option<Self> {
        let n = src.len();
        if n < 3 || dst.len() != n {
            return None;
        }
        let inv_n = 1.0 / n as f64;
        let (mx, my) = src.iter().fold((0.0, 0.0), |a, p| (a.0 + p.x, a.1 + p.y));
        let (mu, mv) = dst.iter().fold((0.0, 0.0), |a, p| (a.0 + p.x, a.1 + p.y));
        let (mx, my, mu, mv) = (mx * inv_n, my * inv_n, mu * inv_n, mv * inv_n);
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        let (mut sux, mut suy, mut svx, mut svy) = (0.0, 0.0, 0.0, 0.0);
        for (p, q) in src.iter().zip(dst) {
            let (x, y) = (p.x - mx, p.y - my);
            let (u, v) = (q.x - mu, q.y - mv);
            sxx += x * x;
            sxy += x * y;
            syy += y * y;
            sux += u * x;
            suy += u * y;
            svx += v * x;
            svy += v * y;
        }
        let det = sxx * syy - sxy * sxy;
        if det.abs() <= 1e-12 * (sxx * syy).max(1e-300) {
            return None;
        }
        let a = (sux * syy - suy * sxy) / det;
        let b = (suy * sxx - sux * sxy) / det;
        let c = (svx * syy - svy * sxy) / det;
        let d = (svy * sxx - svx * sxy) / det;
        let t = Self {
            m: [[a, b, mu - a * mx - b * my], [c, d, mv - c * mx - d * my]],
        };
        (t.determinant() != 0.0 && t.m.iter().flatten().all(|v| v.is_finite())).then_some(t)
    }

    /// Parses three lines of three whitespace-separated numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| FilerError::Parse(format!("{t:?}: {e}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
            return Err(FilerError::Parse("affine file must hold 3 rows of 3 numbers".into()));
        }
        let m = [
            [rows[0][0], rows[0][1], rows[0][2]],
            [rows[1][0], rows[1][1], rows[1][2]],
            [rows[2][0], rows[2][1], rows[2][2]],
        ];
        Self::from_matrix(m)
    }
}

impl fmt::Display for AffineTransform {
    /// Three rows of three plain decimals, written with round-trip precision.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.matrix() {
            writeln!(f, "{} {} {}", row[0], row[1], row[2])?;
        }
        Ok(())
    }
}
