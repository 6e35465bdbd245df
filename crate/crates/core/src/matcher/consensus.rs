use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::affine::{AffineTransform, Point2};
use super::nn::MatchSet;
use crate::error::{FilerError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusParams {
    /// Inlier residual bound in pixels (strict).
    pub delta: f64,
    pub max_iterations: usize,
    pub rng_seed: u64,
    pub min_inliers: usize,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        Self {
            delta: 3.0,
            max_iterations: 10_000,
            rng_seed: 0,
            min_inliers: 5,
        }
    }
}

impl ConsensusParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || self.max_iterations == 0 {
            return Err(FilerError::InvalidConfig(
                "consensus needs delta > 0 and at least one iteration".into(),
            ));
        }
        Ok(())
    }
}

/// Stopping confidence for the adaptive iteration count.
const CONFIDENCE: f64 = 0.999;

fn residual(h: &AffineTransform, a: Point2, b: Point2) -> f64 {
    h.apply(a).distance(&b)
}

/// Inlier count and summed inlier residual of `h`.
fn score(h: &AffineTransform, src: &[Point2], dst: &[Point2], delta: f64) -> (usize, f64) {
    let mut count = 0;
    let mut sum = 0.0;
    for (a, b) in src.iter().zip(dst) {
        let r = residual(h, *a, *b);
        if r < delta {
            count += 1;
            sum += r;
        }
    }
    (count, sum)
}

fn better(cand: (usize, f64), best: (usize, f64)) -> bool {
    cand.0 > best.0 || (cand.0 == best.0 && cand.1 < best.1)
}

fn required_iterations(inlier_fraction: f64) -> usize {
    let w3 = inlier_fraction.powi(3);
    if w3 >= 1.0 {
        return 1;
    }
    if w3 <= 0.0 {
        return usize::MAX;
    }
    let n = (1.0 - CONFIDENCE).ln() / (1.0 - w3).ln();
    if n.is_finite() {
        n.ceil().max(1.0) as usize
    } else {
        usize::MAX
    }
}

/// Seeded minimal-sample consensus for an affine model.
///
/// Three-point samples are drawn from the better-scoring half of the matches
/// (the input is assumed sorted by descriptor distance) and scored on all of
/// them. Iteration `i` draws from its own ChaCha stream keyed by
/// `(rng_seed, i)`. The best model is refit by least squares on its inliers
/// and the matches rescored once. Returns the matches with inlier flags set
/// and the model they were judged against.
pub fn fsc_filter(matches: &MatchSet, params: &ConsensusParams) -> Result<(MatchSet, AffineTransform)> {
    params.validate()?;
    let n = matches.len();
    if n < 3 {
        return Err(FilerError::InsufficientMatches(n));
    }
    let src: Vec<Point2> = matches.iter().map(|m| m.point_a).collect();
    let dst: Vec<Point2> = matches.iter().map(|m| m.point_b).collect();
    let pool = n.div_ceil(2).max(3).min(n);

    let mut best: Option<(AffineTransform, (usize, f64))> = None;
    let mut needed = params.max_iterations;
    let mut iter = 0;
    while iter < needed.min(params.max_iterations) {
        let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
        rng.set_stream(iter as u64);
        iter += 1;
        let idx = sample(&mut rng, pool, 3);
        let s = [idx.index(0), idx.index(1), idx.index(2)];
        let Some(h) = AffineTransform::from_three(s.map(|k| src[k]), s.map(|k| dst[k])) else {
            continue;
        };
        let sc = score(&h, &src, &dst, params.delta);
        if best.as_ref().is_none_or(|(_, b)| better(sc, *b)) {
            // Inlier fraction measured on the sampling pool drives the
            // adaptive stop.
            let in_pool = (0..pool)
                .filter(|&k| residual(&h, src[k], dst[k]) < params.delta)
                .count();
            needed = required_iterations(in_pool as f64 / pool as f64);
            best = Some((h, sc));
        }
    }
    let Some((mut model, mut best_score)) = best else {
        return Err(FilerError::DegenerateGeometry);
    };

    let inliers = |h: &AffineTransform| -> Vec<usize> {
        (0..n).filter(|&k| residual(h, src[k], dst[k]) < params.delta).collect()
    };
    let support = inliers(&model);
    if support.len() >= 3 {
        let s: Vec<Point2> = support.iter().map(|&k| src[k]).collect();
        let d: Vec<Point2> = support.iter().map(|&k| dst[k]).collect();
        if let Some(refit) = AffineTransform::fit_least_squares(&s, &d) {
            let sc = score(&refit, &src, &dst, params.delta);
            if sc.0 >= best_score.0 {
                model = refit;
                best_score = sc;
            }
        }
    }
    if best_score.0 < params.min_inliers.max(3) {
        return Err(FilerError::NoConsensus {
            found: best_score.0,
            required: params.min_inliers.max(3),
        });
    }
    let flagged = matches
        .iter()
        .map(|m| {
            let mut m = *m;
            m.inlier = residual(&model, m.point_a, m.point_b) < params.delta;
            m
        })
        .collect();
    Ok((flagged, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::nn::Match;
    use proptest::prelude::*;
    use rand::Rng;

    fn truth() -> AffineTransform {
        AffineTransform::from_rows([[0.9, -0.35, 12.0], [0.3, 1.05, -7.0]]).unwrap()
    }

    fn synthetic(n: usize, outlier_every: usize, seed: u64) -> MatchSet {
        let h = truth();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let a = Point2::new(rng.random_range(0.0..300.0), rng.random_range(0.0..300.0));
                let b = if outlier_every > 0 && i % outlier_every == 0 {
                    Point2::new(rng.random_range(0.0..300.0), rng.random_range(0.0..300.0))
                } else {
                    h.apply(a)
                };
                Match {
                    index_a: i,
                    index_b: i,
                    point_a: a,
                    point_b: b,
                    distance: i as f64,
                    inlier: false,
                }
            })
            .collect()
    }

    #[test]
    fn exact_model_recovered() {
        let m = synthetic(40, 0, 1);
        let (out, h) = fsc_filter(&m, &ConsensusParams::default()).unwrap();
        assert!(out.iter().all(|x| x.inlier));
        for (a, b) in h.rows().iter().flatten().zip(truth().rows().iter().flatten()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn half_outliers_rejected() {
        let m = synthetic(200, 2, 2);
        let p = ConsensusParams::default();
        let (out, h) = fsc_filter(&m, &p).unwrap();
        let mut err = 0.0;
        for x in &out {
            let r = residual(&h, x.point_a, x.point_b);
            assert_eq!(x.inlier, r < p.delta);
            err += residual(&h, x.point_a, truth().apply(x.point_a));
        }
        assert!(err / out.len() as f64 <= 1e-6);
        assert_eq!(out.iter().filter(|x| x.inlier).count(), 100);
        let (again, h2) = fsc_filter(&m, &p).unwrap();
        assert_eq!(again, out);
        assert_eq!(h2, h);
    }

    #[test]
    fn too_few_and_degenerate() {
        let m = synthetic(2, 0, 3);
        assert!(matches!(
            fsc_filter(&m, &ConsensusParams::default()),
            Err(FilerError::InsufficientMatches(2))
        ));
        let mut line = synthetic(10, 0, 4);
        for (i, x) in line.iter_mut().enumerate() {
            x.point_a = Point2::new(i as f64, 2.0 * i as f64);
        }
        let p = ConsensusParams {
            max_iterations: 50,
            ..ConsensusParams::default()
        };
        assert!(matches!(fsc_filter(&line, &p), Err(FilerError::DegenerateGeometry)));
    }

    #[test]
    fn no_consensus_on_noise() {
        let m = synthetic(30, 1, 5);
        let p = ConsensusParams {
            delta: 0.5,
            min_inliers: 10,
            ..ConsensusParams::default()
        };
        assert!(matches!(fsc_filter(&m, &p), Err(FilerError::NoConsensus { .. })));
    }

    #[test]
    fn adaptive_iterations() {
        assert_eq!(required_iterations(1.0), 1);
        assert_eq!(required_iterations(0.0), usize::MAX);
        assert!(required_iterations(0.5) < required_iterations(0.2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn flags_follow_model_and_repeat(n in 3usize..80, every in 0usize..4, seed in 0u64..500, delta in 0.5f64..5.0) {
            let m = synthetic(n, every, seed);
            let p = ConsensusParams {
                delta,
                rng_seed: seed,
                min_inliers: 3,
                ..ConsensusParams::default()
            };
            match fsc_filter(&m, &p) {
                Ok((out, h)) => {
                    prop_assert_eq!(out.len(), m.len());
                    for x in &out {
                        prop_assert_eq!(x.inlier, residual(&h, x.point_a, x.point_b) < delta);
                    }
                    let (again, h2) = fsc_filter(&m, &p).unwrap();
                    prop_assert_eq!(again, out);
                    prop_assert_eq!(h2, h);
                }
                Err(e) => {
                    let expected = matches!(e, FilerError::NoConsensus { .. } | FilerError::DegenerateGeometry);
                    prop_assert!(expected, "unexpected error {}", e);
                }
            }
        }
    }
}
