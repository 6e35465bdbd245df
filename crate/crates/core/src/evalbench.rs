//! Detector and matcher scores, registration accuracy and ground-truth files.
//!
//! Every threshold is a strict inequality. Residuals are measured in image B:
//! `|p_b - H p_a|` with `H` mapping A onto B.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{FilerError, Result};
use crate::matcher::{AffineTransform, Match, Point2};

pub const DEFAULT_TOLERANCE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub h_true: AffineTransform,
    /// `(p_a, p_b)` pairs.
    pub landmarks: Vec<(Point2, Point2)>,
}

impl GroundTruth {
    pub fn new(h_true: AffineTransform, landmarks: Vec<(Point2, Point2)>) -> Self {
        Self { h_true, landmarks }
    }

    pub fn load(affine_path: impl AsRef<Path>, landmarks_path: Option<&Path>) -> Result<Self> {
        let h_true = read_affine(affine_path)?;
        let landmarks = match landmarks_path {
            Some(p) => read_landmarks(p)?,
            None => Vec::new(),
        };
        Ok(Self { h_true, landmarks })
    }

    pub fn save(&self, affine_path: impl AsRef<Path>, landmarks_path: impl AsRef<Path>) -> Result<()> {
        fs::write(affine_path, self.h_true.to_string())?;
        fs::write(landmarks_path, landmarks_csv(&self.landmarks))?;
        Ok(())
    }
}

pub fn read_affine(path: impl AsRef<Path>) -> Result<AffineTransform> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(FilerError::FileNotFound(path.to_path_buf()));
    }
    AffineTransform::parse(&fs::read_to_string(path)?)
}

/// Rows of `x_a,y_a,x_b,y_b`; an optional header line is skipped.
pub fn parse_landmarks(text: &str) -> Result<Vec<(Point2, Point2)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(FilerError::Parse(format!(
                "landmark line {}: expected 4 fields, got {}",
                n + 1,
                fields.len()
            )));
        }
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => out.push((Point2::new(v[0], v[1]), Point2::new(v[2], v[3]))),
            Err(_) if out.is_empty() && n == 0 => continue,
            Err(e) => return Err(FilerError::Parse(format!("landmark line {}: {e}", n + 1))),
        }
    }
    Ok(out)
}

pub fn read_landmarks(path: impl AsRef<Path>) -> Result<Vec<(Point2, Point2)>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(FilerError::FileNotFound(path.to_path_buf()));
    }
    parse_landmarks(&fs::read_to_string(path)?)
}

pub fn landmarks_csv(landmarks: &[(Point2, Point2)]) -> String {
    let mut s = String::from("x_a,y_a,x_b,y_b\n");
    for (a, b) in landmarks {
        s.push_str(&format!("{},{},{},{}\n", a.x, a.y, b.x, b.y));
    }
    s
}

#[inline]
pub fn residual(h: &AffineTransform, a: Point2, b: Point2) -> f64 {
    h.apply(a).distance(&b)
}

/// Pairs whose residual under `h_true` is below `tol`.
pub fn count_correct(pairs: &[(Point2, Point2)], h_true: &AffineTransform, tol: f64) -> usize {
    pairs.iter().filter(|(a, b)| residual(h_true, *a, *b) < tol).count()
}

/// Points of A whose projection lands within `tol` of some point of B.
pub fn count_repeatable(points_a: &[Point2], points_b: &[Point2], h_true: &AffineTransform, tol: f64) -> usize {
    points_a
        .iter()
        .filter(|a| {
            let p = h_true.apply(**a);
            points_b.iter().any(|b| p.distance(b) < tol)
        })
        .count()
}

/// `n_c / ((n1 + n2) / 2)`.
pub fn repeatability(n_c: usize, n1: usize, n2: usize) -> Result<f64> {
    if n1 + n2 == 0 {
        return Err(FilerError::ZeroFeatures);
    }
    Ok(n_c as f64 / ((n1 + n2) as f64 / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EvalReport {
    pub n_c: usize,
    pub rep: f64,
    pub ncm: usize,
    /// Percent.
    pub cmr: f64,
    pub rmse: f64,
    pub me: f64,
    pub runtime: f64,
}

/// Fractions of reports with `n_c > 100` and with `rep > 0.1`.
pub fn stability_ratios(reports: &[EvalReport]) -> Result<(f64, f64)> {
    if reports.is_empty() {
        return Err(FilerError::EmptyReportList);
    }
    let n = reports.len() as f64;
    let many = reports.iter().filter(|r| r.n_c > 100).count() as f64;
    let rep = reports.iter().filter(|r| r.rep > 0.1).count() as f64;
    Ok((many / n, rep / n))
}

/// `(rmse, me)` of landmark residuals under `h_est`.
pub fn registration_accuracy(h_est: &AffineTransform, gt: &GroundTruth) -> Result<(f64, f64)> {
    let n = gt.landmarks.len();
    if n < 4 {
        return Err(FilerError::TooFewLandmarks { found: n, required: 4 });
    }
    let (mut sq, mut abs) = (0.0, 0.0);
    for (a, b) in &gt.landmarks {
        let r = residual(h_est, *a, *b);
        sq += r * r;
        abs += r;
    }
    let me = abs / n as f64;
    // The power-mean inequality holds exactly; rounding must not break it.
    Ok(((sq / n as f64).sqrt().max(me), me))
}

/// Fraction of reports with `ncm > threshold`.
pub fn success_rate(reports: &[EvalReport], threshold: usize) -> Result<f64> {
    if reports.is_empty() {
        return Err(FilerError::EmptyReportList);
    }
    Ok(reports.iter().filter(|r| r.ncm > threshold).count() as f64 / reports.len() as f64)
}

/// Correct-match count and rate of a consensus-filtered match set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchQuality {
    pub ncm: usize,
    pub retained: usize,
    pub putative: usize,
    pub cmr: f64,
}

/// NCM counts retained (inlier) matches that are correct under `h_true`; CMR
/// is that count as a percentage of the retained matches.
pub fn match_quality(matches: &[Match], h_true: &AffineTransform, tol: f64) -> MatchQuality {
    let retained: Vec<(Point2, Point2)> = matches
        .iter()
        .filter(|m| m.inlier)
        .map(|m| (m.point_a, m.point_b))
        .collect();
    let ncm = count_correct(&retained, h_true, tol);
    MatchQuality {
        ncm,
        retained: retained.len(),
        putative: matches.len(),
        cmr: percent(ncm, retained.len()),
    }
}

pub fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Means of every field.
pub fn mean_report(reports: &[EvalReport]) -> Result<MeanReport> {
    if reports.is_empty() {
        return Err(FilerError::EmptyReportList);
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(MeanReport {
        n_c: mean(|r| r.n_c as f64),
        rep: mean(|r| r.rep),
        ncm: mean(|r| r.ncm as f64),
        cmr: mean(|r| r.cmr),
        rmse: mean(|r| r.rmse),
        me: mean(|r| r.me),
        runtime: mean(|r| r.runtime),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanReport {
    pub n_c: f64,
    pub rep: f64,
    pub ncm: f64,
    pub cmr: f64,
    pub rmse: f64,
    pub me: f64,
    pub runtime: f64,
}
