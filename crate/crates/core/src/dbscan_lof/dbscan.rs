use std::collections::VecDeque;

use super::DbscanConfig;
use crate::error::Result;
use crate::txmodel::{check_same_dim, distance_matrix, FeatureVector};

/// Density clustering. Returns one label per input point, `None` for noise.
///
/// Points are visited in ascending `source_id` order, so cluster numbering
/// does not depend on input order.
pub fn dbscan_fit(vectors: &[FeatureVector], config: &DbscanConfig) -> Result<Vec<Option<usize>>> {
    config.validate()?;
    check_same_dim(vectors)?;
    let n = vectors.len();
    let dist = distance_matrix(vectors, config.measure);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| vectors[i].source_id);
    // neighbors include the point itself
    let neighbors: Vec<Vec<usize>> =
        (0..n).map(|i| order.iter().copied().filter(|&j| dist[i][j] <= config.epsilon).collect()).collect();
    let is_core = |i: usize| neighbors[i].len() >= config.min_points;

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut next_cluster = 0;
    for &start in &order {
        if visited[start] || !is_core(start) {
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        visited[start] = true;
        labels[start] = Some(cluster);
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            if !is_core(p) {
                continue;
            }
            for &q in &neighbors[p] {
                if labels[q].is_none() {
                    labels[q] = Some(cluster);
                }
                if !visited[q] {
                    visited[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    Ok(labels)
}
