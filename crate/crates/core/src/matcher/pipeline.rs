use std::time::Instant;

use serde::Serialize;

use super::affine::AffineTransform;
use super::consensus::{fsc_filter, ConsensusParams};
use super::nn::{match_nn, MatchSet};
use super::orientation::{gradient_maps, gradient_polar, main_direction};
use crate::descriptor::{
    build_descriptor_shifted, convolutional_weighting, normalize_orientation_stack, orientation_index_map,
    orientation_shift, Descriptor, LogPolarGrid, OrientationIndexMap,
};
use crate::detector::{
    detect_features, edge_guided_filter, structure_map, DetectorParams, FeaturePoint, GuidedFilterParams,
};
use crate::energy::{energy_maps, local_energy, EnergyParams};
use crate::error::{FilerError, Result};
use crate::filterbank::{apply_filter_bank, build_filter_bank, FilterBankConfig};
use crate::imagecore::{GrayImage, ScalarField};

/// How B's descriptors absorb the estimated rotation besides turning the
/// sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Compensation {
    /// Cyclic shift of orientation bins by the nearest whole filter step.
    BinShift,
    /// Recompute B's orientation index map with filters turned by the
    /// rotation; no bin shift.
    #[default]
    SteerFilters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub filter_bank: FilterBankConfig,
    pub energy: EnergyParams,
    pub guided_sigma_s: f64,
    /// `sigma_r` as a fraction of the range of the total energy map.
    pub guided_sigma_r_fraction: f64,
    pub guided_window_radius: usize,
    pub detector: DetectorParams,
    /// Spatial Gaussian applied to each energy layer before the orientation
    /// kernel.
    pub weighting_sigma: f64,
    pub normalize_epsilon: f64,
    pub descriptor_radius: f64,
    pub direction_bins: usize,
    pub consensus: ConsensusParams,
    /// Inlier bound of the coarse rotation stage.
    pub coarse_delta: f64,
    /// Strongest features per image used by the coarse stage.
    pub coarse_max_features: usize,
    /// Also describe B at `main_direction + pi`, which survives contrast
    /// inversion between the images.
    pub coarse_both_polarities: bool,
    pub rotation_compensation: bool,
    pub compensation: Compensation,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter_bank: FilterBankConfig::default(),
            energy: EnergyParams::default(),
            guided_sigma_s: GuidedFilterParams::DEFAULT_SIGMA_S,
            guided_sigma_r_fraction: GuidedFilterParams::DEFAULT_SIGMA_R_FRACTION,
            guided_window_radius: GuidedFilterParams::DEFAULT_WINDOW_RADIUS,
            detector: DetectorParams::default(),
            weighting_sigma: 1.0,
            normalize_epsilon: 1e-12,
            descriptor_radius: 40.0,
            direction_bins: 36,
            consensus: ConsensusParams::default(),
            coarse_delta: 2.0,
            coarse_max_features: 5000,
            coarse_both_polarities: true,
            rotation_compensation: true,
            compensation: Compensation::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.filter_bank.validate()?;
        self.detector.validate()?;
        self.consensus.validate()?;
        self.guided_params(1.0).validate()?;
        if !(self.guided_sigma_r_fraction > 0.0) {
            return Err(FilerError::InvalidConfig(
                "guided sigma_r fraction must be positive".into(),
            ));
        }
        if self.filter_bank.n_orients < 3 {
            return Err(FilerError::TooFewOrientations(self.filter_bank.n_orients));
        }
        if !(self.descriptor_radius >= 1.0) || self.direction_bins == 0 {
            return Err(FilerError::InvalidConfig(
                "descriptor radius must be >= 1 and direction bins positive".into(),
            ));
        }
        if !(self.coarse_delta > 0.0) || self.coarse_max_features == 0 {
            return Err(FilerError::InvalidConfig(
                "coarse stage needs delta > 0 and at least one feature".into(),
            ));
        }
        Ok(())
    }

    fn guided_params(&self, et_range: f64) -> GuidedFilterParams {
        GuidedFilterParams {
            sigma_s: self.guided_sigma_s,
            sigma_r: (self.guided_sigma_r_fraction * et_range).max(f64::MIN_POSITIVE.sqrt()),
            window_radius: self.guided_window_radius,
        }
    }

    /// Smallest accepted image side.
    pub fn min_side(&self) -> usize {
        2 * self.detector.border_margin + 16
    }
}

/// Everything the matcher needs from one image.
#[derive(Debug, Clone)]
pub struct ImageAnalysis {
    pub image: ScalarField,
    pub et: ScalarField,
    pub i_out: ScalarField,
    pub omax: OrientationIndexMap,
    /// Detected points with their main directions filled in.
    pub features: Vec<FeaturePoint>,
}

/// Filter bank, energy, guided filter, detection, orientation index map and
/// per-feature main directions.
pub fn analyze_field(image: &ScalarField, config: &PipelineConfig) -> Result<ImageAnalysis> {
    config.validate()?;
    let (w, h) = image.dims();
    let min = config.min_side();
    if w < min || h < min {
        return Err(FilerError::ImageTooSmall {
            width: w,
            height: h,
            min_width: min,
            min_height: min,
        });
    }
    let bank = build_filter_bank(w, h, &config.filter_bank)?;
    let stack = apply_filter_bank(image, &bank)?;
    let (oe, maps) = energy_maps(&stack, &config.energy, config.filter_bank.scale_mult)?;
    drop(stack);
    let guided = config.guided_params(maps.et.max() - maps.et.min());
    let j = edge_guided_filter(image, &maps.et, &guided)?;
    let i_out = structure_map(&j, &maps.et)?;
    let mut features = detect_features(&i_out, &config.detector)?;

    let omax = index_map_from_energy(&oe.energy, config)?;

    // Keep only points whose descriptor disc fits.
    let r = config.descriptor_radius.floor() as isize;
    features.retain(|f| {
        let (x, y) = f.pixel();
        x - r >= 0 && y - r >= 0 && x + r < w as isize && y + r < h as isize
    });
    let (gx, gy) = gradient_maps(&i_out)?;
    let (gmag, gangle) = gradient_polar(&gx, &gy)?;
    for f in &mut features {
        f.main_direction = main_direction(f, &gmag, &gangle, config.descriptor_radius, config.direction_bins)?;
    }
    Ok(ImageAnalysis {
        image: image.clone(),
        et: maps.et,
        i_out,
        omax,
        features,
    })
}

fn index_map_from_energy(layers: &[ScalarField], config: &PipelineConfig) -> Result<OrientationIndexMap> {
    let weighted = convolutional_weighting(layers, config.weighting_sigma)?;
    let normalized = normalize_orientation_stack(&weighted, config.normalize_epsilon);
    orientation_index_map(&normalized)
}

/// Orientation index map of `image` with every filter turned by `offset`.
pub fn steered_index_map(image: &ScalarField, config: &PipelineConfig, offset: f64) -> Result<OrientationIndexMap> {
    let bank_config = FilterBankConfig {
        orientation_offset: config.filter_bank.orientation_offset + offset,
        ..config.filter_bank.clone()
    };
    let (w, h) = image.dims();
    let bank = build_filter_bank(w, h, &bank_config)?;
    let stack = apply_filter_bank(image, &bank)?;
    let oe = local_energy(&stack)?;
    index_map_from_energy(&oe.energy, config)
}

fn describe(
    omax: &OrientationIndexMap,
    features: &[FeaturePoint],
    grid: &LogPolarGrid,
    rotation: impl Fn(&FeaturePoint) -> Option<(f64, usize)>,
    limit: usize,
) -> Result<(Vec<Descriptor>, Vec<usize>)> {
    let mut descs = Vec::new();
    let mut owner = Vec::new();
    for (i, f) in features.iter().take(limit).enumerate() {
        if let Some((rot, shift)) = rotation(f) {
            match build_descriptor_shifted(omax, f, grid, rot, shift) {
                Ok(d) => {
                    descs.push(d);
                    owner.push(i);
                }
                Err(FilerError::EmptyPatch) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok((descs, owner))
}

fn remap(matches: &mut MatchSet, owner_a: &[usize], owner_b: &[usize]) {
    for m in matches {
        m.index_a = owner_a[m.index_a];
        m.index_b = owner_b[m.index_b];
    }
}

/// Rotation of B relative to A from main-direction-aligned descriptors and a
/// strict consensus pass. Angle in `(-pi, pi]`.
pub fn coarse_rotation(a: &ImageAnalysis, b: &ImageAnalysis, config: &PipelineConfig) -> Result<f64> {
    let grid = LogPolarGrid::new(config.descriptor_radius)?;
    let limit = config.coarse_max_features;
    let n_o = config.filter_bank.n_orients;
    let by_direction =
        |extra: f64| move |f: &FeaturePoint| f.main_direction.map(|d| (d + extra, orientation_shift(d + extra, n_o)));
    let (da, owner_a) = describe(&a.omax, &a.features, &grid, by_direction(0.0), limit)?;
    let (mut db, mut owner_b) = describe(&b.omax, &b.features, &grid, by_direction(0.0), limit)?;
    if config.coarse_both_polarities {
        let (flipped, owner) = describe(&b.omax, &b.features, &grid, by_direction(std::f64::consts::PI), limit)?;
        db.extend(flipped);
        owner_b.extend(owner);
    }
    let mut putative = match_nn(&da, &db)?;
    remap(&mut putative, &owner_a, &owner_b);
    let params = ConsensusParams {
        delta: config.coarse_delta,
        ..config.consensus
    };
    let (_, h) = fsc_filter(&putative, &params)?;
    Ok(h.rotation_angle())
}

/// Detection through consensus for two images. `rotation` is the
/// compensation applied to B's descriptors.
pub fn match_analyzed(
    a: &ImageAnalysis,
    b: &ImageAnalysis,
    rotation: f64,
    config: &PipelineConfig,
) -> Result<(MatchSet, AffineTransform, usize)> {
    let grid = LogPolarGrid::new(config.descriptor_radius)?;
    let n_o = config.filter_bank.n_orients;
    let (da, owner_a) = describe(&a.omax, &a.features, &grid, |_| Some((0.0, 0)), usize::MAX)?;
    let steered;
    let (omax_b, shift) = match config.compensation {
        Compensation::SteerFilters if rotation != 0.0 => {
            steered = steered_index_map(&b.image, config, rotation)?;
            (&steered, 0)
        }
        Compensation::SteerFilters => (&b.omax, 0),
        Compensation::BinShift => (&b.omax, orientation_shift(rotation, n_o)),
    };
    let (db, owner_b) = describe(omax_b, &b.features, &grid, |_| Some((rotation, shift)), usize::MAX)?;
    let mut putative = match_nn(&da, &db)?;
    remap(&mut putative, &owner_a, &owner_b);
    let count = putative.len();
    let (matches, h) = fsc_filter(&putative, &config.consensus)?;
    Ok((matches, h, count))
}

pub fn estimate_global_rotation(image_a: &GrayImage, image_b: &GrayImage, config: &PipelineConfig) -> Result<f64> {
    let a = analyze_field(image_a.field(), config)?;
    let b = analyze_field(image_b.field(), config)?;
    coarse_rotation(&a, &b, config)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub analysis_s: f64,
    pub rotation_s: f64,
    pub matching_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub features_a: usize,
    pub features_b: usize,
    pub putative: usize,
    pub inliers: usize,
    /// Compensated rotation of B relative to A, in degrees.
    pub rotation_deg: f64,
    pub timings: Timings,
}

#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub matches: MatchSet,
    pub affine: AffineTransform,
    pub diagnostics: Diagnostics,
    pub features_a: Vec<FeaturePoint>,
    pub features_b: Vec<FeaturePoint>,
}

/// Full pipeline on two images.
pub fn match_images(image_a: &GrayImage, image_b: &GrayImage, config: &PipelineConfig) -> Result<MatchOutcome> {
    match_fields(image_a.field(), image_b.field(), config)
}

/// [`match_images`] on raw fields, which need not lie in `[0, 1]`.
pub fn match_fields(image_a: &ScalarField, image_b: &ScalarField, config: &PipelineConfig) -> Result<MatchOutcome> {
    let start = Instant::now();
    let a = analyze_field(image_a, config)?;
    let b = analyze_field(image_b, config)?;
    let analysis_s = start.elapsed().as_secs_f64();

    let t = Instant::now();
    let rotation = if config.rotation_compensation {
        coarse_rotation(&a, &b, config)?
    } else {
        0.0
    };
    let rotation_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (matches, affine, putative) = match_analyzed(&a, &b, rotation, config)?;
    let matching_s = t.elapsed().as_secs_f64();

    let inliers = matches.iter().filter(|m| m.inlier).count();
    Ok(MatchOutcome {
        diagnostics: Diagnostics {
            features_a: a.features.len(),
            features_b: b.features.len(),
            putative,
            inliers,
            rotation_deg: rotation.to_degrees(),
            timings: Timings {
                analysis_s,
                rotation_s,
                matching_s,
                total_s: start.elapsed().as_secs_f64(),
            },
        },
        matches,
        affine,
        features_a: a.features,
        features_b: b.features,
    })
}
