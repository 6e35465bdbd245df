//! Orientation-stack weighting, the dominant-orientation index map, and the
//! log-polar histogram descriptor built on it.
//!
//! The energy layers form a cube indexed by `(x, y, o)`. Each layer is first
//! smoothed spatially by a Gaussian, then the cube is convolved along `o` with
//! the circular kernel `[1, 8, 1]` (orientation is pi-periodic, so the last
//! layer neighbours the first). After per-pixel L2 normalization the index of
//! the strongest layer gives the orientation index map, and descriptors are
//! per-location-bin histograms of that index over a log-polar disc.

use std::f64::consts::PI;

use crate::detector::FeaturePoint;
use crate::error::{FilerError, Result};
use crate::imagecore::{gaussian_blur, ScalarField};

/// Taps of the orientation-axis kernel, centred.
pub const ORIENTATION_TAPS: [f64; 3] = [1.0, 8.0, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct OrientationStack {
    pub layers: Vec<ScalarField>,
}

impl OrientationStack {
    pub fn new(layers: Vec<ScalarField>) -> Result<Self> {
        if let Some(first) = layers.first() {
            for l in &layers[1..] {
                first.ensure_same_dims(l)?;
            }
        }
        Ok(Self { layers })
    }

    pub fn n_orients(&self) -> usize {
        self.layers.len()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.layers.first().map(|l| l.dims())
    }
}

/// Per-pixel index of the strongest layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientationIndexMap {
    width: usize,
    height: usize,
    n_orients: usize,
    omax: Vec<u8>,
}

impl OrientationIndexMap {
    pub fn from_vec(width: usize, height: usize, n_orients: usize, omax: Vec<u8>) -> Result<Self> {
        if omax.len() != width * height {
            return Err(FilerError::DimensionMismatch {
                expected: (width, height),
                actual: (omax.len(), 1),
            });
        }
        if let Some(&bad) = omax.iter().find(|&&o| o as usize >= n_orients) {
            return Err(FilerError::IndexOutOfRange {
                index: bad as usize,
                limit: n_orients,
            });
        }
        Ok(Self {
            width,
            height,
            n_orients,
            omax,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_orients(&self) -> usize {
        self.n_orients
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> usize {
        self.omax[y * self.width + x] as usize
    }

    pub fn data(&self) -> &[u8] {
        &self.omax
    }
}

/// Gaussian-smooths every layer (`sigma <= 0` skips this) and convolves the
/// stack along the orientation axis with the circular `[1, 8, 1]` kernel.
pub fn convolutional_weighting(layers: &[ScalarField], sigma: f64) -> Result<OrientationStack> {
    let n = layers.len();
    if n < 3 {
        return Err(FilerError::TooFewOrientations(n));
    }
    let smoothed: Vec<ScalarField> = layers.iter().map(|l| gaussian_blur(l, sigma)).collect();
    let (w, h) = smoothed[0].dims();
    let mut out = Vec::with_capacity(n);
    for o in 0..n {
        let prev = smoothed[(o + n - 1) % n].data();
        let cur = smoothed[o].data();
        let next = smoothed[(o + 1) % n].data();
        smoothed[o].ensure_same_dims(&smoothed[(o + 1) % n])?;
        let data = (0..w * h)
            .map(|i| ORIENTATION_TAPS[0] * prev[i] + ORIENTATION_TAPS[1] * cur[i] + ORIENTATION_TAPS[2] * next[i])
            .collect();
        out.push(ScalarField::from_vec(w, h, data)?);
    }
    OrientationStack::new(out)
}

/// Divides each pixel's layer vector by `sqrt(sum_o T_o^2 + eps)`.
pub fn normalize_orientation_stack(stack: &OrientationStack, epsilon: f64) -> OrientationStack {
    let Some((w, h)) = stack.dims() else {
        return stack.clone();
    };
    let mut norms = vec![0.0; w * h];
    for l in &stack.layers {
        for (n, &v) in norms.iter_mut().zip(l.data()) {
            *n += v * v;
        }
    }
    for n in &mut norms {
        *n = (*n + epsilon).sqrt();
    }
    let layers = stack
        .layers
        .iter()
        .map(|l| {
            let data = l
                .data()
                .iter()
                .zip(&norms)
                .map(|(&v, &n)| if n > 0.0 { v / n } else { 0.0 })
                .collect();
            ScalarField::from_vec(w, h, data).expect("same dims")
        })
        .collect();
    OrientationStack { layers }
}

/// Per-pixel argmax over layers; ties resolve to the smallest index.
pub fn orientation_index_map(stack: &OrientationStack) -> Result<OrientationIndexMap> {
    let (w, h) = stack.dims().ok_or(FilerError::TooFewOrientations(0))?;
    if stack.n_orients() > u8::MAX as usize {
        return Err(FilerError::InvalidConfig("too many orientations".into()));
    }
    let mut omax = vec![0u8; w * h];
    for (i, slot) in omax.iter_mut().enumerate() {
        let mut best = stack.layers[0].data()[i];
        let mut best_o = 0;
        for (o, l) in stack.layers.iter().enumerate().skip(1) {
            let v = l.data()[i];
            if v > best {
                best = v;
                best_o = o;
            }
        }
        *slot = best_o as u8;
    }
    OrientationIndexMap::from_vec(w, h, stack.n_orients(), omax)
}

pub const RADIAL_BINS: usize = 4;
pub const ANGULAR_BINS: usize = 9;

/// Log-polar disc of 4 rings by 9 sectors. Ring edges double outward:
/// `r/8, r/4, r/2, r`.
#[derive(Debug, Clone)]
pub struct LogPolarGrid {
    radius: f64,
    radial_edges: [f64; RADIAL_BINS],
    /// Disc offsets with their ring index and polar angle in `[0, 2 pi)`.
    offsets: Vec<(isize, isize, usize, f64)>,
}

impl LogPolarGrid {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius >= 1.0) {
            return Err(FilerError::InvalidConfig(format!(
                "log-polar radius must be >= 1, got {radius}"
            )));
        }
        let radial_edges = [radius / 8.0, radius / 4.0, radius / 2.0, radius];
        let ri = radius.floor() as isize;
        let mut offsets = Vec::new();
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                let rho = ((dx * dx + dy * dy) as f64).sqrt();
                if rho > radius {
                    continue;
                }
                let ring = radial_edges.iter().position(|&e| rho <= e).unwrap_or(RADIAL_BINS - 1);
                let phi = (dy as f64).atan2(dx as f64).rem_euclid(2.0 * PI);
                offsets.push((dx, dy, ring, phi));
            }
        }
        Ok(Self {
            radius,
            radial_edges,
            offsets,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn radial_edges(&self) -> &[f64; RADIAL_BINS] {
        &self.radial_edges
    }

    /// Number of pixels inside the disc.
    pub fn disc_size(&self) -> usize {
        self.offsets.len()
    }

    pub fn location_bins(&self) -> usize {
        RADIAL_BINS * ANGULAR_BINS
    }

    pub fn descriptor_len(&self, n_orients: usize) -> usize {
        self.location_bins() * n_orients
    }
}

/// Cyclic orientation-bin shift that compensates a rotation of `rotation`
/// radians: filter orientations span `[0, pi)` in `n_orients` steps.
pub fn orientation_shift(rotation: f64, n_orients: usize) -> usize {
    let steps = (rotation * n_orients as f64 / PI).round() as i64;
    steps.rem_euclid(n_orients as i64) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f64>,
    pub point: FeaturePoint,
}

/// Raw (unnormalized) vote histogram. Every disc pixel votes once.
pub fn descriptor_votes(
    omax: &OrientationIndexMap,
    point: &FeaturePoint,
    grid: &LogPolarGrid,
    rotation: f64,
) -> Result<Vec<f64>> {
    descriptor_votes_shifted(omax, point, grid, rotation, orientation_shift(rotation, omax.n_orients))
}

/// As [`descriptor_votes`] with an explicit orientation-bin shift, for maps
/// whose filter bank was already steered.
pub fn descriptor_votes_shifted(
    omax: &OrientationIndexMap,
    point: &FeaturePoint,
    grid: &LogPolarGrid,
    rotation: f64,
    shift: usize,
) -> Result<Vec<f64>> {
    let (px, py) = point.pixel();
    let r = grid.radius.floor() as isize;
    if px - r < 0 || py - r < 0 || px + r >= omax.width as isize || py + r >= omax.height as isize {
        return Err(FilerError::PatchOutOfBounds {
            x: point.x,
            y: point.y,
            radius: grid.radius,
        });
    }
    let n_o = omax.n_orients;
    let shift = shift % n_o;
    let sector_width = 2.0 * PI / ANGULAR_BINS as f64;
    let mut hist = vec![0.0; grid.descriptor_len(n_o)];
    for &(dx, dy, ring, phi) in &grid.offsets {
        let rel = (phi - rotation).rem_euclid(2.0 * PI);
        let sector = ((rel / sector_width) as usize).min(ANGULAR_BINS - 1);
        let o = omax.get((px + dx) as usize, (py + dy) as usize);
        let bin = (o + n_o - shift) % n_o;
        hist[(ring * ANGULAR_BINS + sector) * n_o + bin] += 1.0;
    }
    Ok(hist)
}

/// L2-normalized log-polar histogram of the orientation index map around
/// `point`. The sampling grid is rotated by `rotation` and orientation bins
/// shifted to match.
pub fn build_descriptor(
    omax: &OrientationIndexMap,
    point: &FeaturePoint,
    grid: &LogPolarGrid,
    rotation: f64,
) -> Result<Descriptor> {
    build_descriptor_shifted(omax, point, grid, rotation, orientation_shift(rotation, omax.n_orients))
}

/// As [`build_descriptor`] with an explicit orientation-bin shift.
pub fn build_descriptor_shifted(
    omax: &OrientationIndexMap,
    point: &FeaturePoint,
    grid: &LogPolarGrid,
    rotation: f64,
    shift: usize,
) -> Result<Descriptor> {
    let mut values = descriptor_votes_shifted(omax, point, grid, rotation, shift)?;
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(FilerError::EmptyPatch);
    }
    values.iter_mut().for_each(|v| *v /= norm);
    Ok(Descriptor { values, point: *point })
}
