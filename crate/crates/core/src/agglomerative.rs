//! Average-link agglomerative clustering and fixed-count dendrogram cuts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::txmodel::{check_same_dim, distance_matrix, FeatureVector, Measure, TxId};
use crate::verdict::{Algorithm, AlgorithmVerdict, Evidence};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    #[default]
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggloConfig {
    pub linkage: Linkage,
    pub measure: Measure,
    /// Number of clusters the dendrogram is cut into.
    pub cut_clusters: usize,
}

impl Default for AggloConfig {
    fn default() -> Self {
        Self { linkage: Linkage::Average, measure: Measure::Euclidean, cut_clusters: 12 }
    }
}

/// One merge step. Nodes `0..n` are leaves; merge `s` creates node `n + s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// The side containing the smaller leaf id.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaf_ids: Vec<TxId>,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn leaf_count(&self) -> usize {
        self.leaf_ids.len()
    }

    pub fn heights_non_decreasing(&self) -> bool {
        self.merges.windows(2).all(|w| w[0].height <= w[1].height)
    }
}

/// Fits the full merge tree.
///
/// At every step the pair of clusters with the smallest mean cross-pair
/// distance is merged; ties go to the lexicographically smallest
/// (min leaf id, min leaf id) pair. Linkage updates use the Lance-Williams
/// recurrence for average link.
pub fn agglo_fit(vectors: &[FeatureVector], config: &AggloConfig) -> Result<Dendrogram> {
    if config.cut_clusters == 0 {
        return Err(Error::InvalidConfig("cut_clusters must be positive".into()));
    }
    check_same_dim(vectors)?;
    let n = vectors.len();
    let mut dist = distance_matrix(vectors, config.measure);
    let mut size = vec![1usize; n];
    let mut min_leaf: Vec<TxId> = vectors.iter().map(|v| v.source_id).collect();
    let mut node: Vec<usize> = (0..n).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    while active.len() > 1 {
        let mut best: Option<(f64, TxId, TxId, usize, usize)> = None;
        for (ai, &i) in active.iter().enumerate() {
            for &j in &active[ai + 1..] {
                let (a, b) = if min_leaf[i] < min_leaf[j] { (i, j) } else { (j, i) };
                let cand = (dist[i][j], min_leaf[a], min_leaf[b], a, b);
                let better = match &best {
                    None => true,
                    Some(cur) => (cand.0, cand.1, cand.2) < (cur.0, cur.1, cur.2),
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (height, _, _, a, b) = best.expect("at least two active clusters");

        let (na, nb) = (size[a] as f64, size[b] as f64);
        for &o in &active {
            if o != a && o != b {
                let d = (na * dist[a][o] + nb * dist[b][o]) / (na + nb);
                dist[a][o] = d;
                dist[o][a] = d;
            }
        }
        merges.push(Merge { left: node[a], right: node[b], height, size: size[a] + size[b] });
        size[a] += size[b];
        min_leaf[a] = min_leaf[a].min(min_leaf[b]);
        node[a] = n + merges.len() - 1;
        active.retain(|&x| x != b);
    }

    Ok(Dendrogram { leaf_ids: vectors.iter().map(|v| v.source_id).collect(), merges })
}

/// Flat clustering read off a dendrogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub ids: Vec<TxId>,
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Clustering {
    pub fn label(&self, id: TxId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id).map(|i| self.labels[i])
    }
}

/// Undoes the last `k - 1` merges. Clusters are numbered by ascending
/// minimum leaf id.
pub fn cut(dendrogram: &Dendrogram, k: usize) -> Result<Clustering> {
    let n = dendrogram.leaf_count();
    if k == 0 || k > n {
        return Err(Error::OutOfRange(format!("cut into {k} clusters of {n} leaves")));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut rep: Vec<usize> = (0..n).collect();
    for m in &dendrogram.merges[..n - k] {
        let a = find(&mut parent, rep[m.left]);
        let b = find(&mut parent, rep[m.right]);
        parent[b] = a;
        rep.push(a);
    }

    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut groups: Vec<(TxId, usize)> = Vec::new();
    for (i, &r) in roots.iter().enumerate() {
        let id = dendrogram.leaf_ids[i];
        match groups.iter_mut().find(|g| g.1 == r) {
            Some(g) => g.0 = g.0.min(id),
            None => groups.push((id, r)),
        }
    }
    groups.sort();
    let mut labels = vec![0; n];
    let mut sizes = vec![0; groups.len()];
    for (i, r) in roots.iter().enumerate() {
        let c = groups.iter().position(|g| g.1 == *r).expect("root registered");
        labels[i] = c;
        sizes[c] += 1;
    }
    Ok(Clustering { ids: dendrogram.leaf_ids.clone(), labels, sizes })
}

pub fn agglo_flag(clustering: &Clustering, id: TxId, config: &AggloConfig) -> Result<AlgorithmVerdict> {
    let cluster = clustering.label(id).ok_or(Error::UnknownId(id))?;
    let cluster_size = clustering.sizes[cluster];
    Ok(AlgorithmVerdict {
        algorithm: Algorithm::Agglomerative,
        flag: cluster_size == 1,
        evidence: Evidence::Agglomerative {
            cluster,
            cluster_size,
            cut_clusters: clustering.sizes.len().min(config.cut_clusters),
        },
    })
}
