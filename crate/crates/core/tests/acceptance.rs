//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use filer::descriptor::{build_descriptor, descriptor_votes, LogPolarGrid, OrientationIndexMap};
use filer::detector::{edge_guided_filter, FeaturePoint, GuidedFilterParams};
use filer::energy::{energy_maps, local_energy, EnergyParams};
use filer::evalbench::{
    count_correct, count_repeatable, match_quality, mean_report, registration_accuracy, repeatability,
    stability_ratios, success_rate, EvalReport, GroundTruth,
};
use filer::filterbank::{apply_filter_bank, build_filter_bank, FilterBankConfig};
use filer::imagecore::{direct_convolve, fft_convolve, Boundary, Fft2d, ScalarField};
use filer::matcher::{
    analyze_field, coarse_rotation, estimate_global_rotation, fsc_filter, gradient_maps, match_analyzed,
    steered_index_map, AffineTransform, ConsensusParams, Match, PipelineConfig, Point2,
};
use filer::synthgen::{generate_pair, IntensityMap, Noise, SynthSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_field(w: usize, h: usize, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::from_fn(w, h, |_, _| rng.random::<f64>())
}

fn angle_diff_deg(a: f64, b: f64) -> f64 {
    ((a - b + 180.0).rem_euclid(360.0) - 180.0).abs()
}

fn spec_512(rotation_deg: f64) -> SynthSpec {
    SynthSpec {
        width: 512,
        height: 512,
        rotation: rotation_deg.to_radians(),
        rng_seed: 7,
        ..SynthSpec::default()
    }
}

fn c1_convolution() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let img = random_field(32, 32, &mut rng);
        let kernel = ScalarField::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        // Kernel centre at the origin of a periodic 32x32 raster.
        let mut embedded = ScalarField::zeros(32, 32);
        for j in 0..5 {
            for i in 0..5 {
                embedded.set((i + 30) % 32, (j + 30) % 32, kernel.get(i, j));
            }
        }
        let spectrum = Fft2d::new(32, 32).forward(&embedded).map_err(|e| e.to_string())?;
        let (re, _) = fft_convolve(&img, &spectrum).map_err(|e| e.to_string())?;
        let direct = direct_convolve(&img, &kernel, Boundary::Periodic).map_err(|e| e.to_string())?;
        let scale = direct.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = re
            .data()
            .iter()
            .zip(direct.data())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err / scale);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-6 && secs < 1.0,
        format!("max relative error {worst:.2e} over 20 images in {secs:.3} s"),
    )
}

fn argmax_in_middle(f: &ScalarField, y: usize) -> usize {
    let w = f.width();
    (w / 4..3 * w / 4)
        .max_by(|&a, &b| f.get(a, y).total_cmp(&f.get(b, y)))
        .unwrap()
}

fn c2_energy() -> Outcome {
    let (w, h, edge) = (64, 48, 32);
    let img = ScalarField::from_fn(w, h, |x, _| if x < edge { 0.2 } else { 0.8 });
    let cfg = FilterBankConfig::default();
    let bank = build_filter_bank(w, h, &cfg).map_err(|e| e.to_string())?;
    let stack = apply_filter_bank(&img, &bank).map_err(|e| e.to_string())?;
    let oe = local_energy(&stack).map_err(|e| e.to_string())?;
    let (_, maps) = energy_maps(&stack, &EnergyParams::default(), cfg.scale_mult).map_err(|e| e.to_string())?;
    // The transform is periodic, so the wrap at x = 0 is a second edge; the
    // search covers the middle half.
    let y = h / 2;
    let e_peak = argmax_in_middle(&oe.energy[0], y);
    let et_peak = argmax_in_middle(&maps.et, y);

    let flat = ScalarField::filled(w, h, 0.37);
    let stack = apply_filter_bank(&flat, &bank).map_err(|e| e.to_string())?;
    let (_, flat_maps) = energy_maps(&stack, &EnergyParams::default(), cfg.scale_mult).map_err(|e| e.to_string())?;
    let flat_zero = flat_maps.et.data().iter().all(|&v| v == 0.0);
    check(
        e_peak.abs_diff(edge) <= 1 && et_peak.abs_diff(edge) <= 1 && flat_zero,
        format!(
            "edge at x={edge}: Energy_0 peak x={e_peak}, ET peak x={et_peak}; constant image ET all zero: {flat_zero}"
        ),
    )
}

fn guided_oracle(input: &ScalarField, guide: &ScalarField, p: &GuidedFilterParams) -> ScalarField {
    let (w, h) = input.dims();
    let r = p.window_radius as isize;
    ScalarField::from_fn(w, h, |x, y| {
        let (mut num, mut den) = (0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let ix = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                let iy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                let gd = (-((dx * dx + dy * dy) as f64) / (2.0 * p.sigma_s * p.sigma_s)).exp();
                let d = guide.get(ix, iy) - guide.get(x, y);
                let gr = (-(d * d) / (2.0 * p.sigma_r * p.sigma_r)).exp();
                num += gd * gr * input.get(ix, iy);
                den += gd * gr;
            }
        }
        num / den
    })
}

fn c3_guided() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let input = random_field(24, 24, &mut rng);
    let guide = random_field(24, 24, &mut rng);
    let p = GuidedFilterParams {
        sigma_s: 4.0,
        sigma_r: 0.1,
        window_radius: 12,
    };
    let out = edge_guided_filter(&input, &guide, &p).map_err(|e| e.to_string())?;
    let exact = out == guided_oracle(&input, &guide, &p);

    let wide = GuidedFilterParams { sigma_r: 1e12, ..p };
    let out = edge_guided_filter(&input, &guide, &wide).map_err(|e| e.to_string())?;
    let n = 2 * p.window_radius + 1;
    let r = p.window_radius as f64;
    let k = ScalarField::from_fn(n, n, |i, j| {
        let (dx, dy) = (i as f64 - r, j as f64 - r);
        (-(dx * dx + dy * dy) / (2.0 * p.sigma_s * p.sigma_s)).exp()
    });
    let total: f64 = k.data().iter().sum();
    let blur = direct_convolve(&input, &k.map(|v| v / total), Boundary::Replicate).map_err(|e| e.to_string())?;
    let rel = out
        .data()
        .iter()
        .zip(blur.data())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / b.abs()));
    check(
        exact && rel < 1e-6,
        format!("nested-loop oracle equal: {exact}; wide-range limit vs Gaussian blur max rel err {rel:.2e}"),
    )
}

fn c4_gradient() -> Outcome {
    let ramp = ScalarField::from_fn(17, 11, |x, _| x as f64);
    let (gx, gy) = gradient_maps(&ramp).map_err(|e| e.to_string())?;
    let mut ok = true;
    for y in 0..11 {
        for x in 0..17 {
            let want_x = if x == 0 || x == 16 { 1.0 } else { 2.0 };
            ok &= gx.get(x, y) == want_x && gy.get(x, y) == 0.0;
        }
    }
    let vramp = ScalarField::from_fn(9, 13, |_, y| 3.0 * y as f64);
    let (gx, gy) = gradient_maps(&vramp).map_err(|e| e.to_string())?;
    for y in 1..12 {
        for x in 0..9 {
            ok &= gy.get(x, y) == 6.0 && gx.get(x, y) == 0.0;
        }
    }
    check(ok, format!("unit ramp G_x = 2 and G_y = 0 bit-exact on interior: {ok}"))
}

fn c5_descriptor() -> Outcome {
    let cfg = PipelineConfig::default();
    let grid = LogPolarGrid::new(cfg.descriptor_radius).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n_o = cfg.filter_bank.n_orients;
    let omax = OrientationIndexMap::from_vec(
        128,
        128,
        n_o,
        (0..128 * 128).map(|_| rng.random_range(0..n_o as u8)).collect(),
    )
    .map_err(|e| e.to_string())?;
    let p = FeaturePoint::new(60.0, 70.0, 1.0);
    let d = build_descriptor(&omax, &p, &grid, 0.7).map_err(|e| e.to_string())?;
    let len = d.values.len();
    let norm = d.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let votes = descriptor_votes(&omax, &p, &grid, 0.7).map_err(|e| e.to_string())?;
    let conserved = votes.iter().sum::<f64>() == grid.disc_size() as f64;

    // Orientation index map of a constant image from the real pipeline.
    let flat = ScalarField::filled(160, 160, 0.5);
    let flat_map = steered_index_map(&flat, &cfg, 0.0).map_err(|e| e.to_string())?;
    let d1 = build_descriptor(&flat_map, &FeaturePoint::new(60.0, 60.0, 1.0), &grid, 0.0).map_err(|e| e.to_string())?;
    let d2 = build_descriptor(&flat_map, &FeaturePoint::new(97.0, 83.0, 1.0), &grid, 0.0).map_err(|e| e.to_string())?;
    let same = d1.values == d2.values;
    check(
        len == 216 && (norm - 1.0).abs() <= 1e-9 && conserved && same,
        format!(
            "length {len}, norm {norm:.12}, votes conserved {conserved}, uniform-field descriptors identical {same}"
        ),
    )
}

fn c6_rotation() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for deg in [15.0, 50.0, 90.0, 180.0, 270.0] {
        let (a, b, _) = generate_pair(&spec_512(deg)).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let est = estimate_global_rotation(&a, &b, &cfg);
        let secs = start.elapsed().as_secs_f64();
        match est {
            Ok(theta) => {
                let err = angle_diff_deg(theta.to_degrees(), deg);
                ok &= err < 10.0 && secs < 30.0;
                lines.push(format!("{deg}: err {err:.2} deg {secs:.1} s"));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("{deg}: {e}"));
            }
        }
    }
    check(ok, lines.join(", "))
}

fn c7_collapse() -> Outcome {
    let cfg = PipelineConfig::default();
    let truth_deg = 30.0;
    let (a, b, gt) = generate_pair(&spec_512(truth_deg)).map_err(|e| e.to_string())?;
    let fa = analyze_field(a.field(), &cfg).map_err(|e| e.to_string())?;
    let fb = analyze_field(b.field(), &cfg).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for err in [0.0, 5.0, 10.0, 15.0, 20.0, 25.0] {
        let (ncm, cmr) = match match_analyzed(&fa, &fb, (truth_deg + err).to_radians(), &cfg) {
            Ok((matches, _, _)) => {
                let q = match_quality(&matches, &gt.h_true, 3.0);
                (q.ncm, q.cmr)
            }
            // No consensus: nothing registered.
            Err(_) => (0, 0.0),
        };
        rows.push((err, ncm, cmr));
    }
    let monotone = rows.windows(2).all(|w| w[1].1 <= w[0].1);
    let collapsed = rows[5].1 as f64 <= 0.05 * rows[0].1 as f64;
    let accurate = rows.iter().filter(|r| r.0 <= 10.0).all(|r| r.2 >= 90.0);
    let table: Vec<String> = rows.iter().map(|(e, n, c)| format!("{e}:{n}/{c:.1}%")).collect();
    check(
        monotone && collapsed && accurate && rows[0].1 > 0,
        format!("error:NCM/CMR {}", table.join(" ")),
    )
}

fn c8_multimodal() -> Outcome {
    let spec = SynthSpec {
        intensity: vec![IntensityMap::Gamma(0.4), IntensityMap::Inversion],
        noise: Noise::Gaussian(0.02),
        warp_amplitude: 2.0,
        ..spec_512(0.0)
    };
    let (a, b, gt) = generate_pair(&spec).map_err(|e| e.to_string())?;
    let out = filer::matcher::match_images(&a, &b, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let q = match_quality(&out.matches, &gt.h_true, 3.0);
    check(
        q.ncm >= 50 && q.cmr >= 80.0,
        format!("NCM {} CMR {:.1}% ({} putative)", q.ncm, q.cmr, q.putative),
    )
}

fn c9_sweep() -> Outcome {
    let cfg = PipelineConfig::default();
    let start = Instant::now();
    let (a, _, _) = generate_pair(&spec_512(0.0)).map_err(|e| e.to_string())?;
    let fa = analyze_field(a.field(), &cfg).map_err(|e| e.to_string())?;
    let mut worst = (f64::INFINITY, 0.0);
    let mut failures = Vec::new();
    for k in 0..24 {
        let deg = 15.0 * k as f64;
        let (_, b, gt) = generate_pair(&spec_512(deg)).map_err(|e| e.to_string())?;
        let result = analyze_field(b.field(), &cfg).and_then(|fb| {
            let theta = coarse_rotation(&fa, &fb, &cfg)?;
            match_analyzed(&fa, &fb, theta, &cfg)
        });
        let cmr = match result {
            Ok((matches, _, _)) => match_quality(&matches, &gt.h_true, 3.0).cmr,
            Err(e) => {
                failures.push(format!("{deg}: {e}"));
                0.0
            }
        };
        if cmr < worst.0 {
            worst = (cmr, deg);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst.0 >= 80.0 && secs < 600.0,
        format!(
            "lowest CMR {:.1}% at {} deg; {:.0} s total{}",
            worst.0,
            worst.1,
            secs,
            if failures.is_empty() {
                String::new()
            } else {
                format!("; errors: {}", failures.join(", "))
            }
        ),
    )
}

fn synthetic_matches(h: &AffineTransform, n: usize, seed: u64) -> Vec<Match> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    (0..n)
        .map(|i| {
            let a = Point2::new(rng.random_range(0.0..512.0), rng.random_range(0.0..512.0));
            let b = if i % 2 == 1 {
                Point2::new(rng.random_range(0.0..512.0), rng.random_range(0.0..512.0))
            } else {
                let p = h.apply(a);
                Point2::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng))
            };
            Match {
                index_a: i,
                index_b: i,
                point_a: a,
                point_b: b,
                distance: rng.random(),
                inlier: false,
            }
        })
        .collect()
}

fn c10_consensus() -> Outcome {
    let h = AffineTransform::rotation_about(0.6, Point2::new(256.0, 256.0), 14.0, -9.0);
    let matches = synthetic_matches(&h, 400, 10);
    let params = ConsensusParams {
        rng_seed: 99,
        ..ConsensusParams::default()
    };
    let (first, h1) = fsc_filter(&matches, &params).map_err(|e| e.to_string())?;
    let (second, h2) = fsc_filter(&matches, &params).map_err(|e| e.to_string())?;
    let bytes = |m: &[Match]| m.iter().map(|x| u8::from(x.inlier)).collect::<Vec<u8>>();
    let identical = bytes(&first) == bytes(&second) && h1.to_string() == h2.to_string();

    let landmarks: Vec<(Point2, Point2)> = (0..5)
        .flat_map(|j| (0..5).map(move |i| Point2::new(40.0 + 108.0 * i as f64, 40.0 + 108.0 * j as f64)))
        .map(|p| (p, h.apply(p)))
        .collect();
    let (rmse, me) = registration_accuracy(&h1, &GroundTruth::new(h, landmarks)).map_err(|e| e.to_string())?;
    check(
        identical && me < 0.5 && rmse < 1.0,
        format!("repeat runs identical {identical}; 50% outliers: ME {me:.3} px, RMSE {rmse:.3} px"),
    )
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn c11_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = Vec::new();
    for set in 0..100 {
        let n = rng.random_range(1..30);
        let reports: Vec<EvalReport> = (0..n)
            .map(|_| {
                let n1 = rng.random_range(0..400usize);
                let n2 = rng.random_range(1..400usize);
                let n_c = rng.random_range(0..=n1.min(n2));
                let rmse = rng.random_range(0.0..5.0);
                EvalReport {
                    n_c,
                    rep: repeatability(n_c, n1, n2).unwrap(),
                    ncm: rng.random_range(0..12),
                    cmr: rng.random_range(0.0..100.0),
                    rmse,
                    me: rng.random_range(0.0..=rmse),
                    runtime: rng.random_range(0.0..20.0),
                }
            })
            .collect();
        let nf = n as f64;
        let (s_nc, s_rep) = stability_ratios(&reports).unwrap();
        let want_nc = reports.iter().filter(|r| r.n_c > 100).count() as f64 / nf;
        let want_rep = reports.iter().filter(|r| r.rep > 0.1).count() as f64 / nf;
        let sr = success_rate(&reports, 4).unwrap();
        let want_sr = reports.iter().filter(|r| r.ncm > 4).count() as f64 / nf;
        if s_nc != want_nc || s_rep != want_rep || sr != want_sr {
            mismatches.push(format!("set {set}: ratios"));
        }
        let mean = mean_report(&reports).unwrap();
        let avg = |f: &dyn Fn(&EvalReport) -> f64| {
            let mut s = 0.0;
            for r in &reports {
                s += f(r);
            }
            s / nf
        };
        if !close(mean.n_c, avg(&|r| r.n_c as f64))
            || !close(mean.rep, avg(&|r| r.rep))
            || !close(mean.ncm, avg(&|r| r.ncm as f64))
            || !close(mean.cmr, avg(&|r| r.cmr))
            || !close(mean.rmse, avg(&|r| r.rmse))
            || !close(mean.me, avg(&|r| r.me))
        {
            mismatches.push(format!("set {set}: means"));
        }

        // Repeatability against twice the count over the sum.
        let (n1, n2) = (rng.random_range(0..500usize), rng.random_range(1..500usize));
        let n_c = rng.random_range(0..=n1.min(n2));
        if !close(repeatability(n_c, n1, n2).unwrap(), 2.0 * n_c as f64 / (n1 + n2) as f64) {
            mismatches.push(format!("set {set}: repeatability"));
        }

        // Residual counts, repeatable points and landmark statistics.
        let h = AffineTransform::from_rows([
            [
                rng.random_range(0.8..1.2),
                rng.random_range(-0.3..0.3),
                rng.random_range(-20.0..20.0),
            ],
            [
                rng.random_range(-0.3..0.3),
                rng.random_range(0.8..1.2),
                rng.random_range(-20.0..20.0),
            ],
        ])
        .unwrap();
        let pairs: Vec<(Point2, Point2)> = (0..rng.random_range(4..60))
            .map(|_| {
                let a = Point2::new(rng.random_range(0.0..300.0), rng.random_range(0.0..300.0));
                let p = h.apply(a);
                (
                    a,
                    Point2::new(p.x + rng.random_range(-5.0..5.0), p.y + rng.random_range(-5.0..5.0)),
                )
            })
            .collect();
        let residuals: Vec<f64> = pairs
            .iter()
            .map(|(a, b)| {
                let m = h.matrix();
                let px = m[0][0] * a.x + m[0][1] * a.y + m[0][2];
                let py = m[1][0] * a.x + m[1][1] * a.y + m[1][2];
                ((b.x - px).powi(2) + (b.y - py).powi(2)).sqrt()
            })
            .collect();
        let tol = rng.random_range(0.5..6.0);
        if count_correct(&pairs, &h, tol) != residuals.iter().filter(|&&r| r < tol).count() {
            mismatches.push(format!("set {set}: count_correct"));
        }
        let pa: Vec<Point2> = pairs.iter().map(|p| p.0).collect();
        let pb: Vec<Point2> = pairs.iter().map(|p| p.1).collect();
        let brute_rep = pa
            .iter()
            .filter(|a| {
                let m = h.matrix();
                let (px, py) = (
                    m[0][0] * a.x + m[0][1] * a.y + m[0][2],
                    m[1][0] * a.x + m[1][1] * a.y + m[1][2],
                );
                pb.iter()
                    .any(|b| ((b.x - px).powi(2) + (b.y - py).powi(2)).sqrt() < tol)
            })
            .count();
        if count_repeatable(&pa, &pb, &h, tol) != brute_rep {
            mismatches.push(format!("set {set}: count_repeatable"));
        }
        let k = residuals.len() as f64;
        let want_me = residuals.iter().sum::<f64>() / k;
        let want_rmse = (residuals.iter().map(|r| r * r).sum::<f64>() / k).sqrt();
        let (rmse, me) = registration_accuracy(&h, &GroundTruth::new(h, pairs.clone())).unwrap();
        if !close(rmse, want_rmse) || !close(me, want_me) || rmse < me {
            mismatches.push(format!("set {set}: registration accuracy"));
        }
    }
    check(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "100 random report sets agree with brute-force recomputation".into()
        } else {
            mismatches.join(", ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("convolution oracle", c1_convolution),
        ("energy correctness", c2_energy),
        ("guided-filter oracle", c3_guided),
        ("gradient exactness", c4_gradient),
        ("descriptor contract", c5_descriptor),
        ("rotation-angle estimation", c6_rotation),
        ("angle-error collapse", c7_collapse),
        ("multimodal robustness", c8_multimodal),
        ("rotation sweep", c9_sweep),
        ("consensus determinism and accuracy", c10_consensus),
        ("metric-suite oracle", c11_metrics),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name} [{secs:.1} s]: {detail}", i + 1);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
