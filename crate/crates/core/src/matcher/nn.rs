use serde::Serialize;

use super::affine::Point2;
use crate::descriptor::Descriptor;
use crate::error::{FilerError, Result};

/// A putative correspondence between descriptor `index_a` of image A and
/// `index_b` of image B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Match {
    pub index_a: usize,
    pub index_b: usize,
    pub point_a: Point2,
    pub point_b: Point2,
    pub distance: f64,
    pub inlier: bool,
}

pub type MatchSet = Vec<Match>;

fn flatten(descs: &[Descriptor]) -> Result<(Vec<f64>, usize)> {
    let dim = descs.first().map_or(0, |d| d.values.len());
    let mut flat = Vec::with_capacity(dim * descs.len());
    for d in descs {
        if d.values.len() != dim {
            return Err(FilerError::DimensionMismatch {
                expected: (dim, 1),
                actual: (d.values.len(), 1),
            });
        }
        flat.extend_from_slice(&d.values);
    }
    Ok((flat, dim))
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mutual nearest neighbours under Euclidean distance, sorted by
/// `(distance, index_a)`. Ties pick the lower index.
pub fn match_nn(descs_a: &[Descriptor], descs_b: &[Descriptor]) -> Result<MatchSet> {
    if descs_a.is_empty() || descs_b.is_empty() {
        return Err(FilerError::EmptyDescriptorSet);
    }
    let (fa, dim) = flatten(descs_a)?;
    let (fb, dim_b) = flatten(descs_b)?;
    if dim != dim_b {
        return Err(FilerError::DimensionMismatch {
            expected: (dim, 1),
            actual: (dim_b, 1),
        });
    }
    let (n, m) = (descs_a.len(), descs_b.len());
    let mut best_b = vec![(f64::INFINITY, usize::MAX); n];
    let mut best_a = vec![(f64::INFINITY, usize::MAX); m];
    for i in 0..n {
        let a = &fa[i * dim..(i + 1) * dim];
        let row = &mut best_b[i];
        for (j, col) in best_a.iter_mut().enumerate() {
            let d = squared_distance(a, &fb[j * dim..(j + 1) * dim]);
            if d < row.0 {
                *row = (d, j);
            }
            if d < col.0 {
                *col = (d, i);
            }
        }
    }
    let mut out: MatchSet = best_b
        .iter()
        .enumerate()
        .filter(|&(i, &(_, j))| j != usize::MAX && best_a[j].1 == i)
        .map(|(i, &(d, j))| Match {
            index_a: i,
            index_b: j,
            point_a: Point2::new(descs_a[i].point.x, descs_a[i].point.y),
            point_b: Point2::new(descs_b[j].point.x, descs_b[j].point.y),
            distance: d.sqrt(),
            inlier: false,
        })
        .collect();
    out.sort_by(|p, q| p.distance.total_cmp(&q.distance).then(p.index_a.cmp(&q.index_a)));
    Ok(out)
}
