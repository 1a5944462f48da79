use rayon::prelude::*;

use super::DbscanConfig;
use crate::error::{Error, Result};
use crate::txmodel::{check_same_dim, distance_matrix, FeatureVector, Measure};

/// Distance from `p` to its `k`-th nearest neighbor in `vectors`.
///
/// The entry of `vectors` with `p`'s `source_id` is treated as `p` itself and
/// skipped; other points at the same location count as neighbors at distance 0.
pub fn k_distance(vectors: &[FeatureVector], p: &FeatureVector, k: usize, measure: Measure) -> Result<f64> {
    let mut others: Vec<f64> = vectors
        .iter()
        .filter(|q| q.source_id != p.source_id)
        .map(|q| crate::txmodel::distance(p, q, measure))
        .collect::<Result<_>>()?;
    if k == 0 || others.len() < k {
        return Err(Error::InsufficientPoints { needed: k + 1, got: others.len() + 1 });
    }
    others.sort_by(f64::total_cmp);
    Ok(others[k - 1])
}

/// Per-point k-distance and k-distance neighborhood (ties included).
struct Neighborhoods {
    k_distance: Vec<f64>,
    members: Vec<Vec<usize>>,
}

fn neighborhoods(dist: &[Vec<f64>], k: usize) -> Neighborhoods {
    let n = dist.len();
    let (k_distance, members) = (0..n)
        .into_par_iter()
        .map(|p| {
            let mut row: Vec<f64> = (0..n).filter(|&q| q != p).map(|q| dist[p][q]).collect();
            row.sort_by(f64::total_cmp);
            let kd = row[k - 1];
            let members = (0..n).filter(|&q| q != p && dist[p][q] <= kd).collect();
            (kd, members)
        })
        .unzip();
    Neighborhoods { k_distance, members }
}

/// Local Outlier Factor of every point, aligned with `vectors`.
///
/// Scores near 1 indicate density comparable to the neighbors; larger scores
/// indicate isolation. A point whose neighbors all coincide with it has an
/// unbounded reachability density and scores exactly 1.0. A point with finite
/// density whose neighbors are all coincident duplicates scores infinity.
pub fn lof_scores(vectors: &[FeatureVector], config: &DbscanConfig) -> Result<Vec<f64>> {
    config.validate()?;
    check_same_dim(vectors)?;
    let k = config.lof_k;
    if vectors.len() < k + 1 {
        return Err(Error::InsufficientPoints { needed: k + 1, got: vectors.len() });
    }
    let dist = distance_matrix(vectors, config.measure);
    let hood = neighborhoods(&dist, k);

    let lrd: Vec<f64> = (0..vectors.len())
        .map(|p| {
            let reach: f64 = hood.members[p].iter().map(|&o| hood.k_distance[o].max(dist[p][o])).sum();
            if reach == 0.0 {
                f64::INFINITY
            } else {
                hood.members[p].len() as f64 / reach
            }
        })
        .collect();

    Ok((0..vectors.len())
        .map(|p| {
            if lrd[p].is_infinite() {
                return 1.0;
            }
            let members = &hood.members[p];
            let ratio_sum: f64 = members.iter().map(|&o| lrd[o]).sum::<f64>() / lrd[p];
            ratio_sum / members.len() as f64
        })
        .collect())
}
