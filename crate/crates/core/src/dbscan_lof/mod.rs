//! Density clustering (DBSCAN) paired with Local Outlier Factor scoring.
//!
//! With a minimum point count of 1 every point is its own core point, so
//! DBSCAN alone never yields noise. The suspicion rule is therefore the
//! disjunction: noise label, or LOF at or above the configured threshold.

mod dbscan;
mod lof;

use serde::{Deserialize, Serialize};

pub use dbscan::dbscan_fit;
pub use lof::{k_distance, lof_scores};

use crate::error::{Error, Result};
use crate::txmodel::{FeatureVector, Measure, TxId};
use crate::verdict::{Algorithm, AlgorithmVerdict, Evidence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbscanConfig {
    pub epsilon: f64,
    pub min_points: usize,
    pub measure: Measure,
    /// Neighborhood size for LOF.
    pub lof_k: usize,
    pub lof_threshold: f64,
}

impl Default for DbscanConfig {
    fn default() -> Self {
        Self { epsilon: 1_000_000.0, min_points: 1, measure: Measure::Euclidean, lof_k: 5, lof_threshold: 1.5 }
    }
}

impl DbscanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 || self.min_points == 0 || self.lof_k == 0 {
            return Err(Error::InvalidConfig("DBSCAN needs epsilon > 0, min_points >= 1 and lof_k >= 1".into()));
        }
        if self.lof_threshold.is_nan() || self.lof_threshold <= 1.0 {
            return Err(Error::InvalidConfig("LOF threshold must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanResult {
    pub ids: Vec<TxId>,
    /// Cluster per point, `None` for noise; aligned with `ids`.
    pub labels: Vec<Option<usize>>,
    pub lof: Vec<f64>,
}

impl DbscanResult {
    fn index(&self, id: TxId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn label(&self, id: TxId) -> Option<Option<usize>> {
        self.index(id).map(|i| self.labels[i])
    }

    pub fn lof(&self, id: TxId) -> Option<f64> {
        self.index(id).map(|i| self.lof[i])
    }

    pub fn cluster_count(&self) -> usize {
        self.labels.iter().flatten().max().map_or(0, |m| m + 1)
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

/// Runs DBSCAN and LOF over the same points.
pub fn fit(vectors: &[FeatureVector], config: &DbscanConfig) -> Result<DbscanResult> {
    let labels = dbscan_fit(vectors, config)?;
    let lof = lof_scores(vectors, config)?;
    Ok(DbscanResult { ids: vectors.iter().map(|v| v.source_id).collect(), labels, lof })
}

pub fn dbscan_flag(result: &DbscanResult, id: TxId, config: &DbscanConfig) -> Result<AlgorithmVerdict> {
    let i = result.index(id).ok_or(Error::UnknownId(id))?;
    let cluster = result.labels[i];
    let lof = result.lof[i];
    Ok(AlgorithmVerdict {
        algorithm: Algorithm::Dbscan,
        flag: cluster.is_none() || lof >= config.lof_threshold,
        evidence: Evidence::Dbscan { cluster, lof, lof_threshold: config.lof_threshold },
    })
}
