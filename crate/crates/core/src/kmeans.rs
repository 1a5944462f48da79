//! Lloyd's k-means with seeded restarts, sparse-cluster flagging and the
//! Davies-Bouldin validity index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::txmodel::{check_same_dim, FeatureVector, Measure, TxId};
use crate::verdict::{Algorithm, AlgorithmVerdict, Evidence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_runs: usize,
    pub max_optimization_steps: usize,
    pub measure: Measure,
    pub seed: u64,
    /// A cluster with at most this many members is sparse.
    pub min_member_threshold: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 12,
            max_runs: 10,
            max_optimization_steps: 100,
            measure: Measure::Euclidean,
            seed: 0,
            min_member_threshold: 2,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.max_runs == 0 || self.max_optimization_steps == 0 || self.min_member_threshold == 0 {
            return Err(Error::InvalidConfig(
                "k-means k, max_runs, max_optimization_steps and min_member_threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Objective trace of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    /// SSE after every assign/recenter step, in order.
    pub sse: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
}

impl RunTrace {
    pub fn final_sse(&self) -> f64 {
        *self.sse.last().expect("every run records at least one step")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: Vec<Vec<f64>>,
    pub ids: Vec<TxId>,
    /// Cluster index per input point, aligned with `ids`.
    pub labels: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    pub sse: f64,
    pub measure: Measure,
    /// Index into `runs` of the returned solution.
    pub best_run: usize,
    pub runs: Vec<RunTrace>,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn assignment(&self, id: TxId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id).map(|i| self.labels[i])
    }
}

fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Lloyd<'a> {
    points: &'a [FeatureVector],
    measure: Measure,
    dim: usize,
}

impl Lloyd<'_> {
    fn nearest(&self, p: &[f64], centroids: &[Vec<f64>]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d = self.measure.between(p, centroid);
            // strict `<` keeps the lowest index on ties
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }

    fn assign(&self, centroids: &[Vec<f64>]) -> Vec<usize> {
        self.points.iter().map(|p| self.nearest(&p.values, centroids)).collect()
    }

    /// Moves the point farthest from its centroid into each empty cluster.
    fn repair_empty(&self, labels: &mut [usize], centroids: &mut [Vec<f64>]) {
        let k = centroids.len();
        loop {
            let mut sizes = vec![0usize; k];
            for &l in labels.iter() {
                sizes[l] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
            let mut far = None;
            let mut far_d = -1.0;
            for (i, p) in self.points.iter().enumerate() {
                if sizes[labels[i]] < 2 {
                    continue;
                }
                let d = self.measure.between(&p.values, &centroids[labels[i]]);
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
            let Some(i) = far else { return };
            labels[i] = empty;
            centroids[empty] = self.points[i].values.clone();
        }
    }

    fn recenter(&self, labels: &[usize], k: usize) -> Vec<Vec<f64>> {
        let mut sums = vec![vec![0.0; self.dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in self.points.iter().zip(labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(&p.values) {
                *s += v;
            }
        }
        for (s, &c) in sums.iter_mut().zip(&counts) {
            if c > 0 {
                for v in s.iter_mut() {
                    *v /= c as f64;
                }
            }
        }
        sums
    }

    fn sse(&self, labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
        self.points.iter().zip(labels).map(|(p, &l)| squared_euclidean(&p.values, &centroids[l])).sum()
    }

    fn run(&self, initial: Vec<Vec<f64>>, max_steps: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>, RunTrace) {
        let k = initial.len();
        let mut centroids = initial;
        let mut labels = self.assign(&centroids);
        self.repair_empty(&mut labels, &mut centroids);
        centroids = self.recenter(&labels, k);
        let mut trace = RunTrace { seed, sse: vec![self.sse(&labels, &centroids)], steps: 1, converged: false };

        while trace.steps < max_steps {
            let mut next = self.assign(&centroids);
            self.repair_empty(&mut next, &mut centroids);
            trace.steps += 1;
            if next == labels {
                centroids = self.recenter(&labels, k);
                trace.converged = true;
                break;
            }
            labels = next;
            centroids = self.recenter(&labels, k);
            trace.sse.push(self.sse(&labels, &centroids));
        }
        (centroids, labels, trace)
    }
}

/// Indices of the first occurrence of each distinct vector.
fn distinct_indices(vectors: &[FeatureVector]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        if !out.iter().any(|&j| vectors[j].values == v.values) {
            out.push(i);
        }
    }
    out
}

/// Fits k-means with `max_runs` seeded restarts and keeps the lowest-SSE run.
pub fn kmeans_fit(vectors: &[FeatureVector], config: &KMeansConfig) -> Result<KMeansModel> {
    config.validate()?;
    let dim = check_same_dim(vectors)?;
    let distinct = distinct_indices(vectors);
    let k = config.k.min(distinct.len());
    let lloyd = Lloyd { points: vectors, measure: config.measure, dim };

    let runs: Vec<_> = (0..config.max_runs as u64)
        .into_par_iter()
        .map(|run| {
            let seed = crate::seed::derive(config.seed, run);
            let mut rng = crate::seed::rng(seed);
            let picks = rand::seq::index::sample(&mut rng, distinct.len(), k);
            let initial = picks.iter().map(|i| vectors[distinct[i]].values.clone()).collect();
            lloyd.run(initial, config.max_optimization_steps, seed)
        })
        .collect();

    let best_run = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .2.final_sse().total_cmp(&b.1 .2.final_sse()))
        .map(|(i, _)| i)
        .expect("max_runs >= 1");

    let traces = runs.iter().map(|r| r.2.clone()).collect();
    let (centroids, labels, trace) = runs.into_iter().nth(best_run).expect("index in range");
    let mut cluster_sizes = vec![0; k];
    for &l in &labels {
        cluster_sizes[l] += 1;
    }
    Ok(KMeansModel {
        centroids,
        ids: vectors.iter().map(|v| v.source_id).collect(),
        labels,
        cluster_sizes,
        sse: trace.final_sse(),
        measure: config.measure,
        best_run,
        runs: traces,
    })
}

/// Davies-Bouldin index of a fitted model; lower is better.
///
/// Scatter is the mean member-to-centroid distance under the model's measure.
/// Returns `f64::INFINITY` when two non-empty clusters share a centroid.
pub fn davies_bouldin(model: &KMeansModel, vectors: &[FeatureVector]) -> Result<f64> {
    if vectors.len() != model.labels.len() {
        return Err(Error::InsufficientPoints { needed: model.labels.len(), got: vectors.len() });
    }
    let k = model.k();
    let mut scatter = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in vectors.iter().zip(&model.labels) {
        scatter[l] += model.measure.between(&p.values, &model.centroids[l]);
        counts[l] += 1;
    }
    let live: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
    if live.len() < 2 {
        return Err(Error::TooFewClusters);
    }
    for &c in &live {
        scatter[c] /= counts[c] as f64;
    }

    let mut total = 0.0;
    for &i in &live {
        let mut worst = 0.0f64;
        for &j in &live {
            if i == j {
                continue;
            }
            let sep = model.measure.between(&model.centroids[i], &model.centroids[j]);
            if sep == 0.0 {
                return Ok(f64::INFINITY);
            }
            worst = worst.max((scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    Ok(total / live.len() as f64)
}

pub fn kmeans_flag(model: &KMeansModel, id: TxId, config: &KMeansConfig) -> Result<AlgorithmVerdict> {
    let cluster = model.assignment(id).ok_or(Error::UnknownId(id))?;
    let cluster_size = model.cluster_sizes[cluster];
    Ok(AlgorithmVerdict {
        algorithm: Algorithm::KMeans,
        flag: cluster_size <= config.min_member_threshold,
        evidence: Evidence::KMeans { cluster, cluster_size, threshold: config.min_member_threshold },
    })
}
