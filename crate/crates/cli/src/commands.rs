use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use filer::evalbench::{
    count_repeatable, landmarks_csv, match_quality, mean_report, read_affine, read_landmarks, registration_accuracy,
    repeatability, stability_ratios, success_rate, EvalReport, GroundTruth, MeanReport, DEFAULT_TOLERANCE,
};
use filer::imagecore::{load_grayscale, GrayImage};
use filer::matcher::{analyze_field, match_images, AffineTransform, MatchOutcome, PipelineConfig, Point2, Timings};
use filer::synthgen::{generate_pair, rotate_about_center, BasePattern, IntensityMap, Noise, SynthSpec};

use crate::artifacts::Artifacts;
use crate::render::{checkerboard_mosaic, luma, match_overlay};

/// Success threshold on NCM for the success rate.
const SUCCESS_NCM: usize = 4;

fn load(path: &Path) -> Result<GrayImage> {
    load_grayscale(path).with_context(|| format!("loading {}", path.display()))
}

fn matches_tsv(out: &MatchOutcome) -> String {
    let mut s = String::from("x1\ty1\tx2\ty2\tdistance\tinlier\n");
    for m in &out.matches {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            m.point_a.x,
            m.point_a.y,
            m.point_b.x,
            m.point_b.y,
            m.distance,
            u8::from(m.inlier)
        );
    }
    s
}

#[derive(Serialize)]
struct MatchDiagnostics {
    features_a: usize,
    features_b: usize,
    putative: usize,
    inliers: usize,
    rotation_deg: f64,
    /// Only with a ground-truth transform.
    ncm: Option<usize>,
    cmr: Option<f64>,
    runtime: f64,
    timings: Timings,
}

pub fn cmd_match(a: &Path, b: &Path, truth: Option<&Path>, config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let img_a = load(a)?;
    let img_b = load(b)?;
    let h_true = truth.map(read_affine).transpose()?;
    let out = match_images(&img_a, &img_b, config)?;
    let quality = h_true.map(|h| match_quality(&out.matches, &h, DEFAULT_TOLERANCE));
    let d = &out.diagnostics;
    let diag = MatchDiagnostics {
        features_a: d.features_a,
        features_b: d.features_b,
        putative: d.putative,
        inliers: d.inliers,
        rotation_deg: d.rotation_deg,
        ncm: quality.map(|q| q.ncm),
        cmr: quality.map(|q| q.cmr),
        runtime: d.timings.total_s,
        timings: d.timings.clone(),
    };
    let mut art = Artifacts::new();
    art.add("matches.tsv", matches_tsv(&out));
    art.add("affine.txt", out.affine.to_string());
    art.add_png(
        "overlay.png",
        &match_overlay(img_a.field(), img_b.field(), &out.matches),
    )?;
    art.add("diagnostics.json", serde_json::to_string_pretty(&diag)? + "\n");
    art.commit(out_dir)?;
    eprintln!(
        "{} putative, {} inliers, rotation {:.2} deg",
        d.putative, d.inliers, d.rotation_deg
    );
    Ok(())
}

pub fn cmd_detect(image: &Path, config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let img = load(image)?;
    let analysis = analyze_field(img.field(), config)?;
    let mut s = String::from("x\ty\tscore\tmain_direction\n");
    for f in &analysis.features {
        let dir = f.main_direction.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{}\t{}\t{}\t{}", f.x, f.y, f.score, dir);
    }
    let mut art = Artifacts::new();
    art.add("features.tsv", s);
    art.add_png("structure.png", &luma(&analysis.i_out.rescaled_unit()))?;
    art.add_png("energy.png", &luma(&analysis.et.rescaled_unit()))?;
    art.commit(out_dir)?;
    eprintln!("{} features", analysis.features.len());
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    image_a: PathBuf,
    image_b: PathBuf,
    h_true: PathBuf,
    #[serde(default)]
    landmarks: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ReportRow {
    pub pair: usize,
    pub image_a: String,
    pub image_b: String,
    pub status: String,
    pub n_c: Option<usize>,
    pub rep: Option<f64>,
    pub ncm: Option<usize>,
    pub cmr: Option<f64>,
    pub rmse: Option<f64>,
    pub me: Option<f64>,
    pub runtime: Option<f64>,
}

#[derive(Serialize)]
struct Aggregate {
    pairs_ok: usize,
    pairs_failed: usize,
    mean: MeanReport,
    /// Fraction of pairs with `n_c > 100`.
    stability_n_c: f64,
    /// Fraction of pairs with `rep > 0.1`.
    stability_rep: f64,
    /// Fraction of all pairs, failed ones included, with `ncm > 4`.
    success_rate: f64,
}

#[derive(Serialize)]
struct Report<'a> {
    pairs: &'a [ReportRow],
    aggregate: Aggregate,
}

/// Landmarks for pairs that ship none: a 5x5 grid over A mapped by `h`.
fn grid_landmarks(w: usize, h: usize, t: &AffineTransform) -> Vec<(Point2, Point2)> {
    let mut out = Vec::new();
    for j in 1..=5 {
        for i in 1..=5 {
            let p = Point2::new(w as f64 * i as f64 / 6.0, h as f64 * j as f64 / 6.0);
            out.push((p, t.apply(p)));
        }
    }
    out
}

fn eval_pair(row: &ManifestRow, base: &Path, config: &PipelineConfig) -> Result<EvalReport> {
    let img_a = load(&base.join(&row.image_a))?;
    let img_b = load(&base.join(&row.image_b))?;
    let h_true = read_affine(base.join(&row.h_true))?;
    let landmarks = match &row.landmarks {
        Some(p) => read_landmarks(base.join(p))?,
        None => grid_landmarks(img_a.width(), img_a.height(), &h_true),
    };
    let gt = GroundTruth::new(h_true, landmarks);
    let start = Instant::now();
    let out = match_images(&img_a, &img_b, config)?;
    let runtime = start.elapsed().as_secs_f64();
    let pts = |fs: &[filer::detector::FeaturePoint]| fs.iter().map(|f| Point2::new(f.x, f.y)).collect::<Vec<_>>();
    let (pa, pb) = (pts(&out.features_a), pts(&out.features_b));
    let n_c = count_repeatable(&pa, &pb, &gt.h_true, DEFAULT_TOLERANCE);
    let q = match_quality(&out.matches, &gt.h_true, DEFAULT_TOLERANCE);
    let (rmse, me) = registration_accuracy(&out.affine, &gt)?;
    Ok(EvalReport {
        n_c,
        rep: repeatability(n_c, pa.len(), pb.len())?,
        ncm: q.ncm,
        cmr: q.cmr,
        rmse,
        me,
        runtime,
    })
}

pub fn cmd_eval(manifest: &Path, config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(manifest)
        .with_context(|| format!("reading manifest {}", manifest.display()))?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (i, rec) in reader.deserialize::<ManifestRow>().enumerate() {
        let (a, b, result) = match rec {
            Ok(row) => (
                row.image_a.display().to_string(),
                row.image_b.display().to_string(),
                eval_pair(&row, base, config),
            ),
            Err(e) => (String::new(), String::new(), Err(anyhow!("bad manifest row: {e}"))),
        };
        let row = match result {
            Ok(r) => {
                reports.push(r);
                ReportRow {
                    pair: i,
                    image_a: a,
                    image_b: b,
                    status: "ok".into(),
                    n_c: Some(r.n_c),
                    rep: Some(r.rep),
                    ncm: Some(r.ncm),
                    cmr: Some(r.cmr),
                    rmse: Some(r.rmse),
                    me: Some(r.me),
                    runtime: Some(r.runtime),
                }
            }
            Err(e) => {
                eprintln!("pair {i}: {e:#}");
                ReportRow {
                    pair: i,
                    image_a: a,
                    image_b: b,
                    status: format!("failed: {e:#}"),
                    n_c: None,
                    rep: None,
                    ncm: None,
                    cmr: None,
                    rmse: None,
                    me: None,
                    runtime: None,
                }
            }
        };
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("manifest {} lists no pairs", manifest.display());
    }
    if reports.is_empty() {
        bail!("all {} pairs failed", rows.len());
    }
    let (stability_n_c, stability_rep) = stability_ratios(&reports)?;
    // A pair that could not be registered counts against the success rate.
    let mut attempted = reports.clone();
    attempted.resize(rows.len(), EvalReport::default());
    let aggregate = Aggregate {
        pairs_ok: reports.len(),
        pairs_failed: rows.len() - reports.len(),
        mean: mean_report(&reports)?,
        stability_n_c,
        stability_rep,
        success_rate: success_rate(&attempted, SUCCESS_NCM)?,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    let mut art = Artifacts::new();
    art.add("report.csv", w.into_inner()?);
    let json = serde_json::to_string_pretty(&Report {
        pairs: &rows,
        aggregate,
    })?;
    art.add("report.json", json + "\n");
    art.commit(out_dir)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub angle: f64,
    pub status: String,
    pub ncm: Option<usize>,
    pub cmr: Option<f64>,
    pub runtime: Option<f64>,
}

/// 24 angles, 15 degrees apart.
pub fn default_sweep_angles() -> Vec<f64> {
    (0..24).map(|k| 15.0 * k as f64).collect()
}

pub fn cmd_sweep_rotation(
    a: &Path,
    b: &Path,
    truth: Option<&Path>,
    angles: &[f64],
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<()> {
    if angles.is_empty() {
        bail!("no angles given");
    }
    let img_a = load(a)?;
    let img_b = load(b)?;
    let base = truth.map(read_affine).transpose()?.unwrap_or(AffineTransform::IDENTITY);
    let (w, h) = img_b.dims();
    let center = Point2::new((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut w_csv = csv::Writer::from_writer(Vec::new());
    for &deg in angles {
        let theta = deg.to_radians();
        let rotated = GrayImage::from_field(rotate_about_center(img_b.field(), theta, 0.0))?;
        let h_true = AffineTransform::rotation_about(theta, center, 0.0, 0.0).compose(&base);
        let start = Instant::now();
        let row = match match_images(&img_a, &rotated, config) {
            Ok(out) => {
                let q = match_quality(&out.matches, &h_true, DEFAULT_TOLERANCE);
                SweepRow {
                    angle: deg,
                    status: "ok".into(),
                    ncm: Some(q.ncm),
                    cmr: Some(q.cmr),
                    runtime: Some(start.elapsed().as_secs_f64()),
                }
            }
            Err(e) => SweepRow {
                angle: deg,
                status: format!("failed: {e}"),
                ncm: None,
                cmr: None,
                runtime: Some(start.elapsed().as_secs_f64()),
            },
        };
        eprintln!("{deg}: {}", row.status);
        w_csv.serialize(&row)?;
    }
    let mut art = Artifacts::new();
    art.add("sweep.csv", w_csv.into_inner()?);
    art.commit(out_dir)?;
    Ok(())
}

pub fn cmd_mosaic(a: &Path, b: &Path, affine: &Path, tile: usize, out_dir: &Path) -> Result<()> {
    let img_a = load(a)?;
    let img_b = load(b)?;
    let h = read_affine(affine)?;
    let mosaic = checkerboard_mosaic(img_a.field(), img_b.field(), &h, tile)?;
    let mut art = Artifacts::new();
    art.add_png("mosaic.png", &luma(&mosaic))?;
    art.commit(out_dir)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub count: usize,
    pub size: usize,
    pub angles: Vec<f64>,
    pub pattern: String,
    pub base_image: Option<PathBuf>,
    pub gamma: Option<f64>,
    pub invert: bool,
    pub noise: f64,
    pub warp: f64,
    pub seed: u64,
}

fn pattern(opts: &SynthOptions) -> Result<BasePattern> {
    if let Some(p) = &opts.base_image {
        return Ok(BasePattern::Loaded(load(p)?.into_field()));
    }
    Ok(match opts.pattern.as_str() {
        "blobs" => BasePattern::Blobs { density: 1.0 },
        "checkerboard" => BasePattern::Checkerboard { square: 32.0 },
        "edges" => BasePattern::Edges { count: 24 },
        other => bail!("unknown pattern {other:?}; expected blobs, checkerboard or edges"),
    })
}

pub fn cmd_synth(opts: &SynthOptions, out_dir: &Path) -> Result<()> {
    if opts.count == 0 {
        bail!("count must be positive");
    }
    let angles = if opts.angles.is_empty() {
        vec![0.0]
    } else {
        opts.angles.clone()
    };
    let base = pattern(opts)?;
    let mut intensity = Vec::new();
    if let Some(g) = opts.gamma {
        intensity.push(IntensityMap::Gamma(g));
    }
    if opts.invert {
        intensity.push(IntensityMap::Inversion);
    }
    if intensity.is_empty() {
        intensity.push(IntensityMap::Identity);
    }
    let mut art = Artifacts::new();
    let mut manifest = String::from("image_a,image_b,h_true,landmarks\n");
    for i in 0..opts.count {
        let spec = SynthSpec {
            width: opts.size,
            height: opts.size,
            pattern: base.clone(),
            intensity: intensity.clone(),
            noise: if opts.noise > 0.0 {
                Noise::Gaussian(opts.noise)
            } else {
                Noise::None
            },
            rotation: angles[i % angles.len()].to_radians(),
            warp_amplitude: opts.warp,
            rng_seed: opts.seed.wrapping_add(i as u64),
            ..SynthSpec::default()
        };
        let (a, b, gt) = generate_pair(&spec)?;
        let stem = format!("pair_{i:03}");
        art.add_png(format!("{stem}_a.png"), &luma(a.field()))?;
        art.add_png(format!("{stem}_b.png"), &luma(b.field()))?;
        art.add(format!("{stem}_h.txt"), gt.h_true.to_string());
        art.add(format!("{stem}_landmarks.csv"), landmarks_csv(&gt.landmarks));
        let _ = writeln!(manifest, "{stem}_a.png,{stem}_b.png,{stem}_h.txt,{stem}_landmarks.csv");
    }
    art.add("manifest.csv", manifest);
    art.commit(out_dir)?;
    Ok(())
}
