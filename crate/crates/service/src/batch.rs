//! Offline scoring of stored customer histories.

use std::fmt::Write;

use kda::repository::{Repository, RepositoryError, ResultsRow};
use kda::{kda_evaluate_offline, select_window, Algorithm, KdaConfig, KdaVerdict, TxId};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error(transparent)]
    Engine(#[from] kda::Error),
    #[error(transparent)]
    Repository(#[from] RepositoryError),
}

/// Flagged transaction ids per algorithm and for the fused vote.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaggedSets {
    pub kmeans: Vec<TxId>,
    pub dbscan: Vec<TxId>,
    pub agglomerative: Vec<TxId>,
    pub kda: Vec<TxId>,
}

impl FlaggedSets {
    fn absorb(&mut self, v: &KdaVerdict) {
        let id = v.transaction_id;
        for (flag, set) in [
            (v.flag(Algorithm::KMeans), &mut self.kmeans),
            (v.flag(Algorithm::Dbscan), &mut self.dbscan),
            (v.flag(Algorithm::Agglomerative), &mut self.agglomerative),
            (v.nf, &mut self.kda),
        ] {
            if flag {
                set.push(id);
            }
        }
    }

    fn sort(&mut self) {
        for s in [&mut self.kmeans, &mut self.dbscan, &mut self.agglomerative, &mut self.kda] {
            s.sort_unstable();
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoricalSummary {
    pub customers: usize,
    pub evaluated: usize,
    /// Transactions in windows too short to score.
    pub warm_up: usize,
    pub flagged: FlaggedSets,
}

impl HistoricalSummary {
    /// Folds one customer's verdicts into the summary.
    pub fn add_customer(&mut self, verdicts: &[KdaVerdict]) {
        self.customers += 1;
        self.evaluated += verdicts.len();
        self.warm_up += verdicts.iter().filter(|v| v.warm_up).count();
        for v in verdicts {
            self.flagged.absorb(v);
        }
    }

    /// Sorts the flagged id lists.
    pub fn finish(mut self) -> Self {
        self.flagged.sort();
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} customer(s), {} transaction(s) evaluated, {} in warm-up windows",
            self.customers, self.evaluated, self.warm_up
        );
        let _ = writeln!(out, "{:<16}{:>8}", "Model", "Flagged");
        for (name, set) in [
            ("K-MEANS", &self.flagged.kmeans),
            ("DBSCAN", &self.flagged.dbscan),
            ("AGGLOMERATIVE", &self.flagged.agglomerative),
            ("KDA Model", &self.flagged.kda),
        ] {
            let _ = writeln!(out, "{name:<16}{:>8}", set.len());
        }
        if !self.flagged.kda.is_empty() {
            let ids: Vec<String> = self.flagged.kda.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "suspicious: {}", ids.join(" "));
        }
        out
    }
}

/// Scores one customer's current window (as of their latest transaction),
/// storing result rows and any verdict not already recorded.
pub fn process_customer(repo: &Repository, pan: &str, config: &KdaConfig) -> Result<Vec<KdaVerdict>, BatchError> {
    let history = repo.history(pan);
    let Some(last) = history.last() else { return Ok(Vec::new()) };
    let as_of = last.timestamp();
    let window = select_window(&history, as_of, config);
    let verdicts = kda_evaluate_offline(&window, config)?;
    let rows: Vec<ResultsRow> = verdicts.iter().flat_map(|v| ResultsRow::from_verdict(v, as_of)).collect();
    repo.store_results(&rows)?;
    for v in &verdicts {
        if repo.verdict(v.transaction_id).is_none() {
            repo.store_verdict(v)?;
        }
    }
    Ok(verdicts)
}

/// Scores every listed customer in order, reporting the number done after each.
pub fn process_historical(
    repo: &Repository,
    pans: &[String],
    config: &KdaConfig,
    mut progress: impl FnMut(usize),
) -> Result<HistoricalSummary, BatchError> {
    let mut summary = HistoricalSummary::default();
    for (i, pan) in pans.iter().enumerate() {
        summary.add_customer(&process_customer(repo, pan, config)?);
        progress(i + 1);
    }
    Ok(summary.finish())
}

/// The window `tx` is scored against online: its customer's history up to
/// `tx`'s hour, with `tx` itself last.
pub fn window_ending_at(repo: &Repository, tx: &kda::Transaction, config: &KdaConfig) -> Vec<kda::Transaction> {
    let mut history: Vec<kda::Transaction> = repo.history(&tx.pan).into_iter().filter(|t| t.id != tx.id).collect();
    history.push(tx.clone());
    select_window(&history, tx.timestamp(), config)
}
