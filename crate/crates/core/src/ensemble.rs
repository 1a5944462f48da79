//! The three-algorithm ensemble and its 2-of-3 suspicion vote.
//!
//! For each customer window the ensemble fits k-means and DBSCAN/LOF on the
//! six-column encoding and average-link agglomerative clustering on the
//! three-column encoding, derives one flag per algorithm and fuses them: a
//! transaction is suspicious when at least two algorithms flag it.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::agglomerative::{agglo_fit, agglo_flag, cut, AggloConfig, Clustering};
use crate::dbscan_lof::{self, dbscan_flag, DbscanConfig, DbscanResult};
use crate::error::{Error, Result};
use crate::kmeans::{kmeans_fit, kmeans_flag, KMeansConfig, KMeansModel};
use crate::txmodel::{apply_scaling, encode_window, FeatureSet, Scaling, Transaction, TxId};
use crate::verdict::{Algorithm, AlgorithmVerdict, Evidence};

/// What to do with a suspicious transaction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    AlertOnly,
    AutoStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Pass,
    Alert,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KdaConfig {
    /// Maximum number of transactions in a customer window.
    pub window_size: usize,
    /// Only transactions at most this many days old are in the window.
    pub window_period_days: u32,
    /// Windows shorter than this are never flagged.
    pub min_history: usize,
    pub policy: Policy,
    pub scaling: Scaling,
    pub seed: u64,
    pub kmeans: KMeansConfig,
    pub dbscan: DbscanConfig,
    pub agglomerative: AggloConfig,
}

impl Default for KdaConfig {
    fn default() -> Self {
        Self {
            window_size: 100,
            window_period_days: 90,
            min_history: 10,
            policy: Policy::AlertOnly,
            scaling: Scaling::None,
            seed: 0,
            kmeans: KMeansConfig::default(),
            dbscan: DbscanConfig::default(),
            agglomerative: AggloConfig::default(),
        }
    }
}

impl KdaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 || self.window_period_days == 0 || self.min_history == 0 {
            return Err(Error::InvalidConfig(
                "window_size, window_period_days and min_history must be positive".into(),
            ));
        }
        if self.min_history > self.window_size {
            return Err(Error::InvalidConfig("min_history must not exceed window_size".into()));
        }
        self.kmeans.validate()?;
        self.dbscan.validate()?;
        if self.agglomerative.cut_clusters == 0 {
            return Err(Error::InvalidConfig("cut_clusters must be positive".into()));
        }
        Ok(())
    }
}

/// Fused decision for one transaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdaVerdict {
    pub transaction_id: TxId,
    #[serde(rename = "nK")]
    pub nk: bool,
    #[serde(rename = "nD")]
    pub nd: bool,
    #[serde(rename = "nA")]
    pub na: bool,
    #[serde(rename = "nF")]
    pub nf: bool,
    pub action: Action,
    pub verdicts: Vec<AlgorithmVerdict>,
    pub window_size: usize,
    pub warm_up: bool,
}

impl KdaVerdict {
    pub fn flag(&self, algorithm: Algorithm) -> bool {
        match algorithm {
            Algorithm::KMeans => self.nk,
            Algorithm::Dbscan => self.nd,
            Algorithm::Agglomerative => self.na,
        }
    }

    pub fn verdict(&self, algorithm: Algorithm) -> Option<&AlgorithmVerdict> {
        self.verdicts.iter().find(|v| v.algorithm == algorithm)
    }

    /// Human-readable account of the evidence and the vote.
    pub fn explain(&self) -> String {
        use std::fmt::Write;
        let b = |f: bool| u8::from(f);
        let mut out = String::new();
        let _ = writeln!(out, "transaction {} (window of {})", self.transaction_id, self.window_size);
        for v in &self.verdicts {
            let detail = match &v.evidence {
                Evidence::KMeans { cluster, cluster_size, threshold } => {
                    format!("cluster {cluster} has {cluster_size} member(s); sparse when <= {threshold}")
                }
                Evidence::Dbscan { cluster, lof, lof_threshold } => {
                    let label = cluster.map_or("noise".to_owned(), |c| format!("cluster {c}"));
                    format!("{label}, LOF {lof:.4}; suspicious when noise or LOF >= {lof_threshold}")
                }
                Evidence::Agglomerative { cluster, cluster_size, cut_clusters } => format!(
                    "cluster {cluster} of {cut_clusters} at the cut has {cluster_size} member(s); {}",
                    if *cluster_size == 1 { "singleton" } else { "not a singleton" }
                ),
                Evidence::WarmUp { window_len, min_history } => {
                    format!("warm-up: window of {window_len} is below the minimum history {min_history}")
                }
            };
            let _ = writeln!(out, "  {:<13} flag={} {}", v.algorithm.name(), b(v.flag), detail);
        }
        let _ = writeln!(
            out,
            "  vote: (nK={} and nD={}) or (nK={} and nA={}) or (nD={} and nA={}) => nF={}",
            b(self.nk),
            b(self.nd),
            b(self.nk),
            b(self.na),
            b(self.nd),
            b(self.na),
            b(self.nf)
        );
        let _ = write!(out, "  action: {:?}", self.action);
        out
    }
}

/// Majority of three.
pub fn vote(nk: bool, nd: bool, na: bool) -> bool {
    (nk && nd) || (nk && na) || (nd && na)
}

fn action_for(nf: bool, policy: Policy) -> Action {
    match (nf, policy) {
        (false, _) => Action::Pass,
        (true, Policy::AlertOnly) => Action::Alert,
        (true, Policy::AutoStop) => Action::Stop,
    }
}

/// The customer window as of `as_of`: the most recent `window_size`
/// transactions no later than `as_of` and at most `window_period_days` old.
/// `history` must be one customer's transactions in id order.
pub fn select_window(history: &[Transaction], as_of: NaiveDateTime, config: &KdaConfig) -> Vec<Transaction> {
    let as_of_date = as_of.date();
    let eligible: Vec<&Transaction> = history
        .iter()
        .filter(|t| {
            t.timestamp() <= as_of && (as_of_date - t.trx_date).num_days() <= i64::from(config.window_period_days)
        })
        .collect();
    let skip = eligible.len().saturating_sub(config.window_size);
    eligible[skip..].iter().map(|t| (*t).clone()).collect()
}

/// The three models fitted on one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowModels {
    pub kmeans: KMeansModel,
    pub dbscan: DbscanResult,
    pub agglomerative: Clustering,
    pub kmeans_config: KMeansConfig,
    pub dbscan_config: DbscanConfig,
    pub agglo_config: AggloConfig,
}

/// Fits all three algorithms concurrently on a window of at least two points.
pub fn fit_window(window: &[Transaction], config: &KdaConfig) -> Result<WindowModels> {
    let (mut six, _) = encode_window(window, FeatureSet::SixDim)?;
    let (mut three, _) = encode_window(window, FeatureSet::ThreeDim)?;
    apply_scaling(&mut six, config.scaling);
    apply_scaling(&mut three, config.scaling);
    let n = window.len();

    let kmeans_config =
        KMeansConfig { seed: crate::seed::derive(config.seed, config.kmeans.seed), ..config.kmeans.clone() };
    let dbscan_config =
        DbscanConfig { lof_k: config.dbscan.lof_k.min(n.saturating_sub(1)).max(1), ..config.dbscan.clone() };
    let agglo_config =
        AggloConfig { cut_clusters: config.agglomerative.cut_clusters.min(n), ..config.agglomerative.clone() };

    let (kmeans, (dbscan, agglomerative)) = rayon::join(
        || kmeans_fit(&six, &kmeans_config),
        || {
            rayon::join(
                || {
                    if n < 2 {
                        let labels = dbscan_lof::dbscan_fit(&six, &dbscan_config)?;
                        Ok(DbscanResult { ids: vec![window[0].id], labels, lof: vec![1.0] })
                    } else {
                        dbscan_lof::fit(&six, &dbscan_config)
                    }
                },
                || agglo_fit(&three, &agglo_config).and_then(|d| cut(&d, agglo_config.cut_clusters)),
            )
        },
    );
    Ok(WindowModels {
        kmeans: kmeans?,
        dbscan: dbscan?,
        agglomerative: agglomerative?,
        kmeans_config,
        dbscan_config,
        agglo_config,
    })
}

impl WindowModels {
    pub fn verdict(&self, id: TxId, window_size: usize, policy: Policy) -> Result<KdaVerdict> {
        let k = kmeans_flag(&self.kmeans, id, &self.kmeans_config)?;
        let d = dbscan_flag(&self.dbscan, id, &self.dbscan_config)?;
        let a = agglo_flag(&self.agglomerative, id, &self.agglo_config)?;
        let nf = vote(k.flag, d.flag, a.flag);
        Ok(KdaVerdict {
            transaction_id: id,
            nk: k.flag,
            nd: d.flag,
            na: a.flag,
            nf,
            action: action_for(nf, policy),
            verdicts: vec![k, d, a],
            window_size,
            warm_up: false,
        })
    }
}

fn warm_up_verdict(id: TxId, window_len: usize, config: &KdaConfig) -> KdaVerdict {
    let evidence = Evidence::WarmUp { window_len, min_history: config.min_history };
    KdaVerdict {
        transaction_id: id,
        nk: false,
        nd: false,
        na: false,
        nf: false,
        action: Action::Pass,
        verdicts: Algorithm::ALL
            .iter()
            .map(|&algorithm| AlgorithmVerdict { algorithm, flag: false, evidence: evidence.clone() })
            .collect(),
        window_size: window_len,
        warm_up: true,
    }
}

/// Scores the newest (last) transaction of `window` against a fresh fit of
/// the whole window.
pub fn kda_evaluate(window: &[Transaction], config: &KdaConfig) -> Result<KdaVerdict> {
    config.validate()?;
    let newest = window.last().ok_or(Error::EmptyInput)?;
    if window.len() < config.min_history {
        return Ok(warm_up_verdict(newest.id, window.len(), config));
    }
    fit_window(window, config)?.verdict(newest.id, window.len(), config.policy)
}

/// Fits once on the whole window and scores every member.
pub fn kda_evaluate_offline(window: &[Transaction], config: &KdaConfig) -> Result<Vec<KdaVerdict>> {
    config.validate()?;
    if window.is_empty() {
        return Err(Error::EmptyInput);
    }
    if window.len() < config.min_history {
        return Ok(window.iter().map(|t| warm_up_verdict(t.id, window.len(), config)).collect());
    }
    let models = fit_window(window, config)?;
    window.iter().map(|t| models.verdict(t.id, window.len(), config.policy)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn tx(id: TxId, day: u32, hour: u8, amount: f64) -> Transaction {
        Transaction {
            id,
            pr_code: 1,
            pan: "P".into(),
            term_id: "T".into(),
            merchant_id: "M".into(),
            pos_condition: 1,
            affective_amount: amount,
            trx_date: NaiveDate::from_ymd_opt(2014, 1, 1).unwrap() + chrono::Days::new(u64::from(day)),
            trx_time: hour,
        }
    }

    #[test]
    fn vote_truth_table() {
        for bits in 0u8..8 {
            let (k, d, a) = (bits & 1 == 1, bits & 2 == 2, bits & 4 == 4);
            let count = u8::from(k) + u8::from(d) + u8::from(a);
            assert_eq!(vote(k, d, a), count >= 2, "{k} {d} {a}");
        }
    }

    #[test]
    fn warm_up_passes() {
        let w: Vec<_> = (0..3).map(|i| tx(i, i as u32, 10, 100.0)).collect();
        let v = kda_evaluate(&w, &KdaConfig::default()).unwrap();
        assert!(v.warm_up);
        assert!(!v.nf);
        assert_eq!(v.action, Action::Pass);
        assert!(matches!(v.verdicts[0].evidence, Evidence::WarmUp { window_len: 3, min_history: 10 }));
    }

    #[test]
    fn empty_window() {
        assert_eq!(kda_evaluate(&[], &KdaConfig::default()).unwrap_err(), Error::EmptyInput);
        assert_eq!(kda_evaluate_offline(&[], &KdaConfig::default()).unwrap_err(), Error::EmptyInput);
    }

    #[test]
    fn extreme_amount_is_flagged_and_policy_controls_action() {
        let mut w: Vec<_> = (0..40).map(|i| tx(i, (i / 2) as u32, 12, 50_000.0 + (i % 7) as f64 * 1_000.0)).collect();
        w.push(tx(40, 21, 3, 90_000_000.0));
        let v = kda_evaluate(&w, &KdaConfig::default()).unwrap();
        assert!(v.nk && v.nd && v.na && v.nf);
        assert_eq!(v.action, Action::Alert);
        let stop = KdaConfig { policy: Policy::AutoStop, ..Default::default() };
        assert_eq!(kda_evaluate(&w, &stop).unwrap().action, Action::Stop);
        assert!(v.explain().contains("nF=1"));
    }

    #[test]
    fn window_selection_applies_size_and_period() {
        let history: Vec<_> = (0..250).map(|i| tx(i, (i / 5) as u32, 9, 1.0)).collect();
        let as_of = history.last().unwrap().timestamp();
        let w = select_window(&history, as_of, &KdaConfig::default());
        assert_eq!(w.len(), 100);
        assert_eq!(w.first().unwrap().id, 150);
        assert_eq!(w.last().unwrap().id, 249);

        // 40 old transactions followed by 10 recent ones
        let mut history: Vec<_> = (0..40).map(|i| tx(i, 0, 9, 1.0)).collect();
        history.extend((40..50).map(|i| tx(i, 200, 9, 1.0)));
        let w = select_window(&history, history.last().unwrap().timestamp(), &KdaConfig::default());
        assert_eq!(w.len(), 10);
    }

    #[test]
    fn small_windows_clamp_parameters() {
        let w: Vec<_> = (0..4).map(|i| tx(i, i as u32, 10, 100.0 * (i + 1) as f64)).collect();
        let cfg = KdaConfig { min_history: 2, ..Default::default() };
        let verdicts = kda_evaluate_offline(&w, &cfg).unwrap();
        assert_eq!(verdicts.len(), 4);
        let cfg = KdaConfig { min_history: 1, ..Default::default() };
        let v = kda_evaluate(&w[..1], &cfg).unwrap();
        assert!(v.na, "a one-point window is a singleton at the cut");
    }

    #[test]
    fn config_validation() {
        assert!(KdaConfig { min_history: 200, ..Default::default() }.validate().is_err());
        assert!(KdaConfig::default().validate().is_ok());
    }
}
