use filer::descriptor::{build_descriptor, LogPolarGrid};
use filer::evalbench::match_quality;
use filer::imagecore::ScalarField;
use filer::matcher::{analyze_field, match_fields, match_images, steered_index_map, Compensation, PipelineConfig};
use filer::synthgen::{generate_pair, SynthSpec};
use filer::FilerError;

fn pair(
    size: usize,
    rotation_deg: f64,
    seed: u64,
) -> (
    filer::imagecore::GrayImage,
    filer::imagecore::GrayImage,
    filer::evalbench::GroundTruth,
) {
    let spec = SynthSpec {
        width: size,
        height: size,
        rotation: rotation_deg.to_radians(),
        rng_seed: seed,
        ..SynthSpec::default()
    };
    generate_pair(&spec).unwrap()
}

#[test]
fn self_match_is_exact() {
    let (a, _, _) = pair(192, 0.0, 11);
    let cfg = PipelineConfig::default();
    let out = match_images(&a, &a, &cfg).unwrap();
    let q = match_quality(&out.matches, &filer::matcher::AffineTransform::IDENTITY, 3.0);
    assert_eq!(q.cmr, 100.0);
    assert!(
        q.ncm as f64 >= 0.9 * out.features_a.len() as f64,
        "{} of {}",
        q.ncm,
        out.features_a.len()
    );
    assert!(out.diagnostics.rotation_deg.abs() < 2.0);
    for (x, y) in out.affine.rows().iter().flatten().zip([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn small_images_rejected() {
    let f = ScalarField::filled(60, 200, 0.5);
    let cfg = PipelineConfig::default();
    assert!(matches!(analyze_field(&f, &cfg), Err(FilerError::ImageTooSmall { .. })));
}

#[test]
fn inlier_flags_follow_returned_model() {
    let (a, b, _) = pair(256, 30.0, 5);
    let cfg = PipelineConfig::default();
    let out = match_images(&a, &b, &cfg).unwrap();
    let delta = cfg.consensus.delta;
    for m in &out.matches {
        let r = out.affine.apply(m.point_a).distance(&m.point_b);
        assert_eq!(m.inlier, r < delta);
    }
    assert_eq!(out.diagnostics.putative, out.matches.len());
    assert!((out.diagnostics.rotation_deg - 30.0).abs() < 2.0);
}

#[test]
fn rotated_pair_matches_well_under_both_compensations() {
    let (a, b, gt) = pair(256, 90.0, 9);
    for compensation in [Compensation::SteerFilters, Compensation::BinShift] {
        let cfg = PipelineConfig {
            compensation,
            ..PipelineConfig::default()
        };
        let out = match_images(&a, &b, &cfg).unwrap();
        let q = match_quality(&out.matches, &gt.h_true, 3.0);
        assert!(q.cmr >= 80.0 && q.ncm >= 50, "{compensation:?} {q:?}");
    }
}

#[test]
fn steering_by_zero_reproduces_index_map() {
    let (a, _, _) = pair(128, 0.0, 3);
    let cfg = PipelineConfig::default();
    let an = analyze_field(a.field(), &cfg).unwrap();
    let steered = steered_index_map(a.field(), &cfg, 0.0).unwrap();
    assert_eq!(steered.data(), an.omax.data());
}

// Scaling both inputs by the same constant leaves the orientation index map
// and the descriptors at any fixed point unchanged. The detected point set
// itself may differ: the structure map subtracts a scale-invariant energy
// from a scale-covariant image.
#[test]
fn index_map_and_descriptors_scale_invariant() {
    let (a, _, _) = pair(160, 0.0, 21);
    let cfg = PipelineConfig::default();
    let base = analyze_field(a.field(), &cfg).unwrap();
    let scaled_field = a.field().map(|v| 2.0 * v);
    let scaled = analyze_field(&scaled_field, &cfg).unwrap();
    assert_eq!(base.omax.data(), scaled.omax.data());
    let grid = LogPolarGrid::new(cfg.descriptor_radius).unwrap();
    assert!(!base.features.is_empty());
    for f in &base.features {
        let d0 = build_descriptor(&base.omax, f, &grid, 0.3).unwrap();
        let d1 = build_descriptor(&scaled.omax, f, &grid, 0.3).unwrap();
        assert_eq!(d0, d1);
    }
    // Raw fields outside [0, 1] are accepted end to end.
    let out = match_fields(a.field(), &scaled_field, &cfg).unwrap();
    assert!(out.matches.iter().any(|m| m.inlier));
}
