use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::ensemble::KdaVerdict;
use crate::error::{Error, Result};
use crate::txmodel::TxId;
use crate::verdict::Algorithm;

/// Rate naming used in reports. Note the non-standard orientation.
pub const SEMANTICS: &str = "TPR = normal transactions classified normal; \
TNR = normal transactions classified suspicious (false alarms); \
FNR = fraudulent transactions classified suspicious (detections); \
FPR = fraudulent transactions classified normal (misses). \
Standard aliases: recall = FNR rate, false_alarm_rate = TNR rate.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    KMeans,
    Dbscan,
    Agglomerative,
    Kda,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::KMeans, Model::Dbscan, Model::Agglomerative, Model::Kda];

    pub fn label(self) -> &'static str {
        match self {
            Model::KMeans => "K-MEANS",
            Model::Dbscan => "DBSCAN",
            Model::Agglomerative => "AGGLOMERATIVE",
            Model::Kda => "KDA Model",
        }
    }

    pub fn flag(self, v: &KdaVerdict) -> bool {
        match self {
            Model::KMeans => v.flag(Algorithm::KMeans),
            Model::Dbscan => v.flag(Algorithm::Dbscan),
            Model::Agglomerative => v.flag(Algorithm::Agglomerative),
            Model::Kda => v.nf,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub frauds: BTreeSet<TxId>,
    pub normals: BTreeSet<TxId>,
}

impl GroundTruth {
    pub fn is_fraud(&self, id: TxId) -> Option<bool> {
        if self.frauds.contains(&id) {
            Some(true)
        } else if self.normals.contains(&id) {
            Some(false)
        } else {
            None
        }
    }
}

/// A count and its percentage of the class total; no rate for an empty class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub count: usize,
    pub rate: Option<f64>,
}

impl ClassCount {
    fn of(count: usize, total: usize) -> Self {
        Self { count, rate: (total > 0).then(|| 100.0 * count as f64 / total as f64) }
    }

    fn render(&self) -> String {
        match self.rate {
            Some(r) => format!("{}→{:.2}%", self.count, r),
            None => format!("{}→n/a", self.count),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: Model,
    pub flagged_total: usize,
    pub tpr: ClassCount,
    pub tnr: ClassCount,
    pub fnr: ClassCount,
    pub fpr: ClassCount,
    /// Fraction of frauds flagged, in percent (same as the FNR rate).
    pub recall: Option<f64>,
    /// Fraction of normals flagged, in percent (same as the TNR rate).
    pub false_alarm_rate: Option<f64>,
    /// Sorted ids this model flagged.
    pub flagged: Vec<TxId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub normal_total: usize,
    pub fraud_total: usize,
    pub models: Vec<ModelMetrics>,
    pub semantics: String,
}

impl EvaluationReport {
    pub fn model(&self, model: Model) -> &ModelMetrics {
        self.models.iter().find(|m| m.model == model).expect("every model is reported")
    }

    /// Aligned text tables: normal-class rates, then fraud-class rates.
    pub fn render_tables(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Normal transactions (n = {})", self.normal_total);
        let _ = writeln!(out, "{:<3}{:<16}{:>18}{:>18}", "R", "Model", "TPR", "TNR");
        for (i, m) in self.models.iter().enumerate() {
            let _ = writeln!(out, "{:<3}{:<16}{:>18}{:>18}", i + 1, m.model.label(), m.tpr.render(), m.tnr.render());
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Fraudulent transactions (n = {})", self.fraud_total);
        let _ = writeln!(out, "{:<3}{:<16}{:>14}{:>18}{:>18}{:>18}", "R", "Model", "Total Detect", "TNR", "FNR", "FPR");
        for (i, m) in self.models.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<3}{:<16}{:>14}{:>18}{:>18}{:>18}",
                i + 1,
                m.model.label(),
                m.flagged_total,
                m.tnr.render(),
                m.fnr.render(),
                m.fpr.render()
            );
        }
        out
    }
}

/// Tallies detection rates (inverted naming, see `ModelMetrics`) for every model over one verdict per
/// evaluated transaction.
pub fn compute_metrics(truth: &GroundTruth, verdicts: &[KdaVerdict]) -> Result<EvaluationReport> {
    let mut classes = Vec::with_capacity(verdicts.len());
    for v in verdicts {
        classes.push(truth.is_fraud(v.transaction_id).ok_or(Error::UnknownId(v.transaction_id))?);
    }
    let fraud_total = classes.iter().filter(|&&f| f).count();
    let normal_total = classes.len() - fraud_total;

    let models = Model::ALL
        .iter()
        .map(|&model| {
            let mut flagged = Vec::new();
            let (mut normal_flagged, mut fraud_flagged) = (0, 0);
            for (v, &fraud) in verdicts.iter().zip(&classes) {
                if model.flag(v) {
                    flagged.push(v.transaction_id);
                    if fraud {
                        fraud_flagged += 1;
                    } else {
                        normal_flagged += 1;
                    }
                }
            }
            flagged.sort_unstable();
            let tnr = ClassCount::of(normal_flagged, normal_total);
            let fnr = ClassCount::of(fraud_flagged, fraud_total);
            ModelMetrics {
                model,
                flagged_total: flagged.len(),
                tpr: ClassCount::of(normal_total - normal_flagged, normal_total),
                tnr,
                fnr,
                fpr: ClassCount::of(fraud_total - fraud_flagged, fraud_total),
                recall: fnr.rate,
                false_alarm_rate: tnr.rate,
                flagged,
            }
        })
        .collect();
    Ok(EvaluationReport { normal_total, fraud_total, models, semantics: SEMANTICS.to_owned() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Action;

    fn verdict(id: TxId, flags: [bool; 3]) -> KdaVerdict {
        let [nk, nd, na] = flags;
        let nf = crate::ensemble::vote(nk, nd, na);
        KdaVerdict {
            transaction_id: id,
            nk,
            nd,
            na,
            nf,
            action: if nf { Action::Alert } else { Action::Pass },
            verdicts: vec![],
            window_size: 100,
            warm_up: false,
        }
    }

    #[test]
    fn fraud_class_rates() {
        let truth = GroundTruth { frauds: (0..16).collect(), normals: BTreeSet::new() };
        let verdicts: Vec<_> = (0..16).map(|i| verdict(i, [i < 13, i < 13, false])).collect();
        let r = compute_metrics(&truth, &verdicts).unwrap();
        let kda = r.model(Model::Kda);
        assert_eq!(kda.fnr.count, 13);
        assert_eq!(kda.fnr.rate, Some(81.25));
        assert_eq!(kda.fpr.rate, Some(18.75));
        assert_eq!(kda.tpr.rate, None);
        assert_eq!(kda.tnr.rate, None);
        assert_eq!(kda.recall, Some(81.25));
    }

    #[test]
    fn normal_class_rates() {
        let truth = GroundTruth { frauds: BTreeSet::new(), normals: (0..100).collect() };
        let verdicts: Vec<_> = (0..100).map(|i| verdict(i, [i < 4, i < 4, i < 10])).collect();
        let r = compute_metrics(&truth, &verdicts).unwrap();
        let kda = r.model(Model::Kda);
        assert_eq!(kda.tpr.rate, Some(96.0));
        assert_eq!(kda.tnr.rate, Some(4.0));
        assert_eq!(kda.fnr.rate, None);
        assert_eq!(kda.fpr.rate, None);
        assert_eq!(r.model(Model::Agglomerative).tnr.count, 10);
        assert!(r.render_tables().contains("KDA Model"));
    }

    #[test]
    fn unknown_transaction_rejected() {
        let truth = GroundTruth { frauds: BTreeSet::from([1]), normals: BTreeSet::from([2]) };
        assert_eq!(compute_metrics(&truth, &[verdict(3, [false; 3])]).unwrap_err(), Error::UnknownId(3));
    }
}
