//! Synthetic image pairs with exact ground truth, plus the bilinear
//! resampling helpers shared with the mosaic and rotation sweep.
//!
//! Base patterns are continuous functions of A's coordinates, so B is
//! sampled at the exact preimage of each of its pixels and never has empty
//! corners.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{FilerError, Result};
use crate::evalbench::GroundTruth;
use crate::imagecore::{GrayImage, ScalarField};
use crate::matcher::{AffineTransform, Point2};

#[derive(Debug, Clone, PartialEq)]
pub enum BasePattern {
    /// Soft-edged squares of the given side.
    Checkerboard { square: f64 },
    /// Overlapping random polygons on a shaded background.
    Blobs { density: f64 },
    /// Random soft half-plane steps.
    Edges { count: usize },
    /// An image; A is its centre crop.
    Loaded(ScalarField),
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntensityMap {
    Identity,
    Gamma(f64),
    Inversion,
    /// Piecewise-linear through `(input, output)` knots, sorted by input.
    Piecewise(Vec<(f64, f64)>),
}

impl IntensityMap {
    pub fn apply(&self, v: f64) -> f64 {
        match self {
            IntensityMap::Identity => v,
            IntensityMap::Gamma(g) => v.max(0.0).powf(*g),
            IntensityMap::Inversion => 1.0 - v,
            IntensityMap::Piecewise(knots) => {
                let first = knots[0];
                if v <= first.0 {
                    return first.1;
                }
                for w in knots.windows(2) {
                    let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                    if v <= x1 {
                        return if x1 > x0 {
                            y0 + (y1 - y0) * (v - x0) / (x1 - x0)
                        } else {
                            y1
                        };
                    }
                }
                knots[knots.len() - 1].1
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            IntensityMap::Gamma(g) if !(*g > 0.0 && g.is_finite()) => {
                Err(FilerError::InvalidSpec(format!("gamma must be positive, got {g}")))
            }
            IntensityMap::Piecewise(k) if k.len() < 2 || k.windows(2).any(|w| !(w[1].0 >= w[0].0)) => Err(
                FilerError::InvalidSpec("piecewise map needs >= 2 knots sorted by input".into()),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    None,
    Gaussian(f64),
    SaltPepper(f64),
    /// Multiplicative Gaussian noise of the given variance.
    Speckle(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub pattern: BasePattern,
    /// Applied in order.
    pub intensity: Vec<IntensityMap>,
    pub noise: Noise,
    /// Radians, about the image centre.
    pub rotation: f64,
    pub translation: (f64, f64),
    pub warp_amplitude: f64,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            pattern: BasePattern::Blobs { density: 1.0 },
            intensity: vec![IntensityMap::Identity],
            noise: Noise::None,
            rotation: 0.0,
            translation: (0.0, 0.0),
            warp_amplitude: 0.0,
            rng_seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(FilerError::InvalidSpec("images must be at least 8x8".into()));
        }
        for m in &self.intensity {
            m.validate()?;
        }
        let bad_noise = match self.noise {
            Noise::None => false,
            Noise::Gaussian(s) => !(s >= 0.0 && s.is_finite()),
            Noise::SaltPepper(d) => !(0.0..1.0).contains(&d),
            Noise::Speckle(v) => !(v >= 0.0 && v.is_finite()),
        };
        if bad_noise {
            return Err(FilerError::InvalidSpec(format!("bad noise {:?}", self.noise)));
        }
        if !(self.warp_amplitude >= 0.0 && self.warp_amplitude.is_finite()) {
            return Err(FilerError::InvalidSpec("warp amplitude must be >= 0".into()));
        }
        if !self.rotation.is_finite() || !self.translation.0.is_finite() || !self.translation.1.is_finite() {
            return Err(FilerError::InvalidSpec("non-finite geometry".into()));
        }
        match &self.pattern {
            BasePattern::Checkerboard { square } if !(*square >= 2.0) => {
                Err(FilerError::InvalidSpec("checkerboard square must be >= 2".into()))
            }
            BasePattern::Blobs { density } if !(*density > 0.0) => {
                Err(FilerError::InvalidSpec("blob density must be positive".into()))
            }
            BasePattern::Edges { count: 0 } => Err(FilerError::InvalidSpec("need at least one edge".into())),
            BasePattern::Loaded(f) if f.width() == 0 || f.height() == 0 => Err(FilerError::ZeroSizedImage),
            _ => Ok(()),
        }
    }

    pub fn center(&self) -> Point2 {
        Point2::new((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    /// The global affine from A to B.
    pub fn affine(&self) -> AffineTransform {
        AffineTransform::rotation_about(self.rotation, self.center(), self.translation.0, self.translation.1)
    }
}

/// Smooth 0 to 1 transition over about one pixel as `d` goes from `+0.5` to
/// `-0.5`.
fn coverage(d: f64) -> f64 {
    (0.5 - d).clamp(0.0, 1.0)
}

struct Polygon {
    /// Edge half-planes `n . p <= c` with unit normals.
    edges: Vec<(f64, f64, f64)>,
    bbox: (f64, f64, f64, f64),
    value: f64,
}

impl Polygon {
    fn random(rng: &mut ChaCha8Rng, cx: f64, cy: f64) -> Self {
        let k = rng.random_range(3..=6);
        let size = rng.random_range(6.0..28.0);
        let aspect = rng.random_range(0.4..1.0);
        let spin = rng.random_range(0.0..2.0 * PI);
        let mut angles: Vec<f64> = (0..k)
            .map(|i| 2.0 * PI * (i as f64 + rng.random_range(-0.3..0.3)) / k as f64)
            .collect();
        angles.sort_by(f64::total_cmp);
        let (s, c) = spin.sin_cos();
        let verts: Vec<(f64, f64)> = angles
            .iter()
            .map(|a| {
                let (x, y) = (size * a.cos(), size * aspect * a.sin());
                (cx + c * x - s * y, cy + s * x + c * y)
            })
            .collect();
        let mut edges = Vec::with_capacity(k);
        for i in 0..k {
            let (x0, y0) = verts[i];
            let (x1, y1) = verts[(i + 1) % k];
            // Vertices run by increasing angle, so (dy, -dx) points out.
            let (nx, ny) = (y1 - y0, x0 - x1);
            let len = nx.hypot(ny);
            let (nx, ny) = (nx / len, ny / len);
            edges.push((nx, ny, nx * x0 + ny * y0));
        }
        let xs = verts.iter().map(|v| v.0);
        let ys = verts.iter().map(|v| v.1);
        let bbox = (
            xs.clone().fold(f64::INFINITY, f64::min) - 1.0,
            ys.clone().fold(f64::INFINITY, f64::min) - 1.0,
            xs.fold(f64::NEG_INFINITY, f64::max) + 1.0,
            ys.fold(f64::NEG_INFINITY, f64::max) + 1.0,
        );
        Self {
            edges,
            bbox,
            value: rng.random_range(0.0..1.0),
        }
    }

    fn alpha(&self, x: f64, y: f64) -> f64 {
        if x < self.bbox.0 || y < self.bbox.1 || x > self.bbox.2 || y > self.bbox.3 {
            return 0.0;
        }
        let d = self
            .edges
            .iter()
            .map(|&(nx, ny, c)| nx * x + ny * y - c)
            .fold(f64::NEG_INFINITY, f64::max);
        coverage(d)
    }
}

/// A pattern as a function of continuous A coordinates.
enum Field {
    Checker {
        square: f64,
    },
    Blobs {
        shapes: Vec<Polygon>,
        cells: Vec<Vec<usize>>,
        origin: (f64, f64),
        cell: f64,
        cols: usize,
        rows: usize,
        shade: (f64, f64, f64),
    },
    Edges(Vec<(f64, f64, f64, f64)>),
    Image {
        field: ScalarField,
        offset: (f64, f64),
    },
}

impl Field {
    fn build(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Self {
        let (w, h) = (spec.width as f64, spec.height as f64);
        // Preimages of B stay within this many pixels of A's frame.
        let reach = 0.5 * w.hypot(h) + spec.translation.0.hypot(spec.translation.1) + 4.0 * spec.warp_amplitude + 8.0;
        let (x0, y0) = (-reach, -reach);
        let (x1, y1) = (w + reach, h + reach);
        match &spec.pattern {
            BasePattern::Checkerboard { square } => Field::Checker { square: *square },
            BasePattern::Blobs { density } => {
                let area = (x1 - x0) * (y1 - y0);
                let count = (density * area / 900.0).ceil() as usize;
                let shapes: Vec<Polygon> = (0..count)
                    .map(|_| {
                        let cx = rng.random_range(x0..x1);
                        let cy = rng.random_range(y0..y1);
                        Polygon::random(rng, cx, cy)
                    })
                    .collect();
                let cell = 32.0;
                let cols = ((x1 - x0) / cell).ceil() as usize + 1;
                let rows = ((y1 - y0) / cell).ceil() as usize + 1;
                let mut cells = vec![Vec::new(); cols * rows];
                for (i, s) in shapes.iter().enumerate() {
                    let c0 = (((s.bbox.0 - x0) / cell).floor().max(0.0) as usize).min(cols - 1);
                    let c1 = (((s.bbox.2 - x0) / cell).floor().max(0.0) as usize).min(cols - 1);
                    let r0 = (((s.bbox.1 - y0) / cell).floor().max(0.0) as usize).min(rows - 1);
                    let r1 = (((s.bbox.3 - y0) / cell).floor().max(0.0) as usize).min(rows - 1);
                    for r in r0..=r1 {
                        for c in c0..=c1 {
                            cells[r * cols + c].push(i);
                        }
                    }
                }
                let shade = (
                    rng.random_range(0.3..0.6),
                    rng.random_range(-0.2..0.2) / w,
                    rng.random_range(-0.2..0.2) / h,
                );
                Field::Blobs {
                    shapes,
                    cells,
                    origin: (x0, y0),
                    cell,
                    cols,
                    rows,
                    shade,
                }
            }
            BasePattern::Edges { count } => Field::Edges(
                (0..*count)
                    .map(|_| {
                        let a = rng.random_range(0.0..2.0 * PI);
                        let (px, py) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
                        let (nx, ny) = (a.cos(), a.sin());
                        (nx, ny, nx * px + ny * py, rng.random_range(-0.3..0.3))
                    })
                    .collect(),
            ),
            BasePattern::Loaded(f) => Field::Image {
                field: f.clone(),
                offset: ((f.width() as f64 - w) / 2.0, (f.height() as f64 - h) / 2.0),
            },
        }
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Field::Checker { square } => {
                let side = |t: f64| {
                    let cell = (t / square).floor();
                    let into = t - cell * square;
                    let dist = into.min(square - into);
                    let sign = if (cell as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    sign * (dist + 0.5).min(1.0)
                };
                0.5 + 0.4 * side(x + 0.5) * side(y + 0.5)
            }
            Field::Blobs {
                shapes,
                cells,
                origin,
                cell,
                cols,
                rows,
                shade,
            } => {
                let mut v = shade.0 + shade.1 * x + shade.2 * y;
                let c = ((x - origin.0) / cell).floor();
                let r = ((y - origin.1) / cell).floor();
                if c >= 0.0 && r >= 0.0 && (c as usize) < *cols && (r as usize) < *rows {
                    for &i in &cells[r as usize * cols + c as usize] {
                        let a = shapes[i].alpha(x, y);
                        if a > 0.0 {
                            v += a * (shapes[i].value - v);
                        }
                    }
                }
                v.clamp(0.0, 1.0)
            }
            Field::Edges(steps) => {
                let v: f64 = steps
                    .iter()
                    .map(|&(nx, ny, c, amp)| amp * (1.0 - coverage(nx * x + ny * y - c)))
                    .sum();
                (0.5 + v).clamp(0.0, 1.0)
            }
            Field::Image { field, offset } => bilinear(field, x + offset.0, y + offset.1, None),
        }
    }
}

/// Bilinear sample at `(x, y)`. Outside the raster returns `fill`, or the
/// clamped border value when `fill` is `None`.
pub fn bilinear(field: &ScalarField, x: f64, y: f64, fill: Option<f64>) -> f64 {
    let (w, h) = field.dims();
    let (wf, hf) = (w as f64 - 1.0, h as f64 - 1.0);
    if let Some(f) = fill {
        if !(x >= 0.0 && y >= 0.0 && x <= wf && y <= hf) {
            return f;
        }
    }
    let x = x.clamp(0.0, wf);
    let y = y.clamp(0.0, hf);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (xi, yi) = (x0 as usize, y0 as usize);
    let (xj, yj) = ((xi + 1).min(w - 1), (yi + 1).min(h - 1));
    let top = field.get(xi, yi) * (1.0 - fx) + field.get(xj, yi) * fx;
    let bottom = field.get(xi, yj) * (1.0 - fx) + field.get(xj, yj) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resamples `src` into a `width x height` raster: output pixel `p` takes
/// the value of `src` at `h.apply(p)`.
pub fn warp_affine(
    src: &ScalarField,
    h: &AffineTransform,
    width: usize,
    height: usize,
    fill: Option<f64>,
) -> ScalarField {
    ScalarField::from_fn(width, height, |x, y| {
        let q = h.apply(Point2::new(x as f64, y as f64));
        bilinear(src, q.x, q.y, fill)
    })
}

/// Rotates `src` by `angle` about its centre; uncovered pixels get `fill`.
pub fn rotate_about_center(src: &ScalarField, angle: f64, fill: f64) -> ScalarField {
    let (w, h) = src.dims();
    let c = Point2::new((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let back = AffineTransform::rotation_about(-angle, c, 0.0, 0.0);
    warp_affine(src, &back, w, h, Some(fill))
}

/// Sum of three Gaussian displacement bumps, scaled so the largest
/// displacement is about `amplitude`.
struct LocalWarp {
    bumps: Vec<(f64, f64, f64, f64, f64)>,
}

impl LocalWarp {
    fn new(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Self {
        let (w, h) = (spec.width as f64, spec.height as f64);
        let sigma = 0.2 * w.min(h);
        let bumps = (0..3)
            .map(|_| {
                let a = rng.random_range(0.0..2.0 * PI);
                // Shares of the amplitude; three bumps can overlap, so each
                // gets a third to keep the total capped.
                let m = spec.warp_amplitude / 3.0 * rng.random_range(0.7..1.0);
                (
                    rng.random_range(0.0..w),
                    rng.random_range(0.0..h),
                    sigma,
                    m * a.cos(),
                    m * a.sin(),
                )
            })
            .collect();
        Self { bumps }
    }

    fn displacement(&self, p: Point2) -> (f64, f64) {
        self.bumps.iter().fold((0.0, 0.0), |acc, &(cx, cy, s, dx, dy)| {
            let g = (-((p.x - cx).powi(2) + (p.y - cy).powi(2)) / (2.0 * s * s)).exp();
            (acc.0 + g * dx, acc.1 + g * dy)
        })
    }

    fn forward(&self, p: Point2) -> Point2 {
        let (dx, dy) = self.displacement(p);
        Point2::new(p.x + dx, p.y + dy)
    }

    /// Fixed-point inverse; the displacement gradient is far below one.
    fn inverse(&self, q: Point2) -> Point2 {
        let mut p = q;
        for _ in 0..30 {
            let (dx, dy) = self.displacement(p);
            let next = Point2::new(q.x - dx, q.y - dy);
            let done = next.distance(&p) < 1e-12;
            p = next;
            if done {
                break;
            }
        }
        p
    }
}

/// Renders A, the geometrically and radiometrically altered B, and the
/// ground truth (`H` plus a 5x5 landmark grid).
pub fn generate_pair(spec: &SynthSpec) -> Result<(GrayImage, GrayImage, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let field = Field::build(spec, &mut rng);
    let warp = (spec.warp_amplitude > 0.0).then(|| LocalWarp::new(spec, &mut rng));
    let h = spec.affine();
    let h_inv = h.inverse()?;
    let (w, ht) = (spec.width, spec.height);

    let a = ScalarField::from_fn(w, ht, |x, y| field.eval(x as f64, y as f64));
    let map = |v: f64| spec.intensity.iter().fold(v, |acc, m| m.apply(acc));
    let mut b = ScalarField::from_fn(w, ht, |x, y| {
        let mut q = Point2::new(x as f64, y as f64);
        if let Some(wp) = &warp {
            q = wp.inverse(q);
        }
        let p = h_inv.apply(q);
        map(field.eval(p.x, p.y))
    });
    add_noise(&mut b, spec.noise, &mut rng);

    let mut landmarks = Vec::with_capacity(25);
    for j in 0..5 {
        for i in 0..5 {
            let pa = Point2::new(
                (w as f64 - 1.0) * (0.1 + 0.2 * i as f64),
                (ht as f64 - 1.0) * (0.1 + 0.2 * j as f64),
            );
            let mut pb = h.apply(pa);
            if let Some(wp) = &warp {
                pb = wp.forward(pb);
            }
            landmarks.push((pa, pb));
        }
    }
    let clamp = |f: ScalarField| GrayImage::from_field(f.map(|v| v.clamp(0.0, 1.0)));
    Ok((clamp(a)?, clamp(b)?, GroundTruth::new(h, landmarks)))
}

fn add_noise(field: &mut ScalarField, noise: Noise, rng: &mut ChaCha8Rng) {
    match noise {
        Noise::None => {}
        Noise::Gaussian(sigma) => {
            if sigma > 0.0 {
                let n = Normal::new(0.0, sigma).expect("validated sigma");
                field.data_mut().iter_mut().for_each(|v| *v += n.sample(rng));
            }
        }
        Noise::SaltPepper(density) => {
            for v in field.data_mut() {
                if rng.random::<f64>() < density {
                    *v = if rng.random::<bool>() { 1.0 } else { 0.0 };
                }
            }
        }
        Noise::Speckle(var) => {
            if var > 0.0 {
                let n = Normal::new(0.0, var.sqrt()).expect("validated variance");
                field.data_mut().iter_mut().for_each(|v| *v *= 1.0 + n.sample(rng));
            }
        }
    }
}
