//! Customer histories, per-algorithm result tables, verdicts and alerts.
//!
//! The durable form is a directory of append-only JSON-lines files, one per
//! logical table:
//!
//! | file                          | contents                                 |
//! |-------------------------------|------------------------------------------|
//! | `transactions.jsonl`          | [`Transaction`]                          |
//! | `results_kmeans.jsonl`        | [`ResultsRow`] for k-means               |
//! | `results_dbscan.jsonl`        | [`ResultsRow`] for DBSCAN/LOF            |
//! | `results_agglomerative.jsonl` | [`ResultsRow`] for agglomerative         |
//! | `verdicts.jsonl`              | [`KdaVerdict`], latest per transaction   |
//! | `alerts.jsonl`                | [`AlertRecord`] snapshots, latest wins   |
//!
//! Every acknowledged write is flushed and synced before the call returns. On
//! open the files are replayed into memory; a torn final line left by a crash
//! is truncated away.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{select_window, KdaConfig, KdaVerdict};
use crate::ingest::{self, IngestError, RowError};
use crate::txmodel::{filter_eligible, preprocess, Transaction, TxId};
use crate::verdict::{Algorithm, Evidence};

pub type AlertId = u64;

#[derive(Debug, Error)]
pub enum RepositoryError {
    #[error("transaction {0} already stored")]
    DuplicateId(TxId),
    #[error("unknown alert {0}")]
    UnknownAlert(AlertId),
    #[error("alert {id} is already {status:?}")]
    AlertNotOpen { id: AlertId, status: AlertStatus },
    #[error("transaction {0} already has an alert")]
    AlertExists(TxId),
    #[error("verdict for transaction {0} is not suspicious")]
    NotSuspicious(TxId),
    #[error("corrupt record in {file}:{line}: {message}")]
    Corrupt { file: String, line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertStatus {
    Open,
    Allowed,
    Blocked,
}

impl std::str::FromStr for AlertStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "open" => Ok(Self::Open),
            "allowed" => Ok(Self::Allowed),
            "blocked" => Ok(Self::Blocked),
            other => Err(format!("unknown alert status `{other}`")),
        }
    }
}

/// An inspector's terminal decision on an alert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Allowed,
    Blocked,
}

impl From<Decision> for AlertStatus {
    fn from(d: Decision) -> Self {
        match d {
            Decision::Allowed => AlertStatus::Allowed,
            Decision::Blocked => AlertStatus::Blocked,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub id: AlertId,
    pub transaction_id: TxId,
    pub pan: String,
    pub created_at: DateTime<Utc>,
    pub verdict: KdaVerdict,
    pub status: AlertStatus,
    pub decided_by: Option<String>,
    pub decided_at: Option<DateTime<Utc>>,
}

/// One algorithm's flag for one transaction in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub algorithm: Algorithm,
    pub transaction_id: TxId,
    pub run_at: NaiveDateTime,
    pub flag: bool,
    pub evidence: Evidence,
}

impl ResultsRow {
    pub fn from_verdict(verdict: &KdaVerdict, run_at: NaiveDateTime) -> Vec<ResultsRow> {
        verdict
            .verdicts
            .iter()
            .map(|v| ResultsRow {
                algorithm: v.algorithm,
                transaction_id: verdict.transaction_id,
                run_at,
                flag: v.flag,
                evidence: v.evidence.clone(),
            })
            .collect()
    }
}

/// Outcome of a bulk import.
#[derive(Debug, Default)]
pub struct ImportReport {
    pub accepted: usize,
    /// Rows that did not parse or collided with stored ids.
    pub rejected: Vec<RowError>,
    /// Well-formed rows filtered out as unsettled or non-purchasing.
    pub ineligible: usize,
    pub first_id: Option<TxId>,
}

#[derive(Default)]
struct State {
    transactions: BTreeMap<TxId, Transaction>,
    by_pan: HashMap<String, BTreeSet<TxId>>,
    results: [BTreeMap<(TxId, NaiveDateTime), ResultsRow>; 3],
    verdicts: BTreeMap<TxId, KdaVerdict>,
    alerts: BTreeMap<AlertId, AlertRecord>,
    alert_by_tx: HashMap<TxId, AlertId>,
}

impl State {
    fn insert_tx(&mut self, tx: Transaction) {
        self.by_pan.entry(tx.pan.clone()).or_default().insert(tx.id);
        self.transactions.insert(tx.id, tx);
    }

    fn insert_alert(&mut self, alert: AlertRecord) {
        self.alert_by_tx.insert(alert.transaction_id, alert.id);
        self.alerts.insert(alert.id, alert);
    }
}

fn table_index(a: Algorithm) -> usize {
    match a {
        Algorithm::KMeans => 0,
        Algorithm::Dbscan => 1,
        Algorithm::Agglomerative => 2,
    }
}

const TRANSACTIONS: &str = "transactions.jsonl";
const RESULTS: [&str; 3] = ["results_kmeans.jsonl", "results_dbscan.jsonl", "results_agglomerative.jsonl"];
const VERDICTS: &str = "verdicts.jsonl";
const ALERTS: &str = "alerts.jsonl";

struct LogFiles {
    dir: PathBuf,
    files: HashMap<&'static str, File>,
}

impl LogFiles {
    fn append<T: Serialize>(&mut self, table: &'static str, records: &[T]) -> std::io::Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).map_err(std::io::Error::other)?;
            buf.push(b'\n');
        }
        let file = match self.files.get_mut(table) {
            Some(f) => f,
            None => {
                let f = OpenOptions::new().create(true).append(true).open(self.dir.join(table))?;
                self.files.entry(table).or_insert(f)
            }
        };
        file.write_all(&buf)?;
        file.flush()?;
        file.sync_data()
    }
}

/// Reads every complete record, truncating a torn trailing line.
fn replay<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, RepositoryError> {
    let Ok(mut file) = OpenOptions::new().read(true).write(true).open(path) else {
        return Ok(Vec::new());
    };
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    if complete < bytes.len() {
        file.set_len(complete as u64)?;
        file.seek(SeekFrom::End(0))?;
        file.sync_data()?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(&bytes[..complete]).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| RepositoryError::Corrupt {
            file: name.clone(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Transaction store with an optional on-disk log.
pub struct Repository {
    state: RwLock<State>,
    log: Mutex<Option<LogFiles>>,
}

impl Repository {
    pub fn in_memory() -> Self {
        Self { state: RwLock::new(State::default()), log: Mutex::new(None) }
    }

    /// Opens (creating if needed) a repository directory and replays it.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, RepositoryError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let mut state = State::default();
        for tx in replay::<Transaction>(&dir.join(TRANSACTIONS))? {
            state.insert_tx(tx);
        }
        for (i, table) in RESULTS.iter().enumerate() {
            for row in replay::<ResultsRow>(&dir.join(table))? {
                state.results[i].insert((row.transaction_id, row.run_at), row);
            }
        }
        for v in replay::<KdaVerdict>(&dir.join(VERDICTS))? {
            state.verdicts.insert(v.transaction_id, v);
        }
        for a in replay::<AlertRecord>(&dir.join(ALERTS))? {
            state.insert_alert(a);
        }
        Ok(Self { state: RwLock::new(state), log: Mutex::new(Some(LogFiles { dir, files: HashMap::new() })) })
    }

    fn persist<T: Serialize>(&self, table: &'static str, records: &[T]) -> Result<(), RepositoryError> {
        if let Some(log) = self.log.lock().as_mut() {
            log.append(table, records)?;
        }
        Ok(())
    }

    /// The smallest id greater than every stored id.
    pub fn next_id(&self) -> TxId {
        self.state.read().transactions.keys().next_back().map_or(1, |m| m + 1)
    }

    pub fn append_transaction(&self, tx: Transaction) -> Result<(), RepositoryError> {
        self.append_transactions(vec![tx]).map(|_| ())
    }

    /// Appends a batch atomically: any duplicate id rejects the whole batch.
    pub fn append_transactions(&self, batch: Vec<Transaction>) -> Result<usize, RepositoryError> {
        let mut state = self.state.write();
        let mut seen = BTreeSet::new();
        for tx in &batch {
            if state.transactions.contains_key(&tx.id) || !seen.insert(tx.id) {
                return Err(RepositoryError::DuplicateId(tx.id));
            }
        }
        self.persist(TRANSACTIONS, &batch)?;
        let n = batch.len();
        for tx in batch {
            state.insert_tx(tx);
        }
        Ok(n)
    }

    /// Parses an ingestion file, preprocesses eligible rows with fresh ids and
    /// stores them. Row-level problems are reported, not fatal.
    pub fn import<R: Read>(&self, reader: R) -> Result<ImportReport, RepositoryError> {
        let parsed = ingest::read_transactions(reader)?;
        let mut report = ImportReport { rejected: parsed.errors, ..Default::default() };
        let mut next = self.next_id();
        let mut batch = Vec::new();
        for (line, raw) in parsed.rows {
            if !filter_eligible(&raw) {
                report.ineligible += 1;
                continue;
            }
            match preprocess(&raw, next) {
                Ok(tx) => {
                    batch.push(tx);
                    next += 1;
                }
                Err(e) => report.rejected.push(RowError { line, message: e.to_string() }),
            }
        }
        report.first_id = batch.first().map(|t| t.id);
        report.accepted = self.append_transactions(batch)?;
        report.rejected.sort_by_key(|e| e.line);
        Ok(report)
    }

    pub fn transaction(&self, id: TxId) -> Option<Transaction> {
        self.state.read().transactions.get(&id).cloned()
    }

    pub fn transaction_count(&self) -> usize {
        self.state.read().transactions.len()
    }

    /// Distinct customers, sorted.
    pub fn pans(&self) -> Vec<String> {
        let mut pans: Vec<String> = self.state.read().by_pan.keys().cloned().collect();
        pans.sort();
        pans
    }

    /// A customer's full history in id order.
    pub fn history(&self, pan: &str) -> Vec<Transaction> {
        let state = self.state.read();
        state
            .by_pan
            .get(pan)
            .map(|ids| ids.iter().map(|id| state.transactions[id].clone()).collect())
            .unwrap_or_default()
    }

    pub fn fetch_window(&self, pan: &str, config: &KdaConfig, as_of: NaiveDateTime) -> Vec<Transaction> {
        select_window(&self.history(pan), as_of, config)
    }

    /// Stores result rows in their per-algorithm tables. Rows whose
    /// (algorithm, transaction, run time) key is already present are skipped;
    /// returns the number newly stored.
    pub fn store_results(&self, rows: &[ResultsRow]) -> Result<usize, RepositoryError> {
        let mut state = self.state.write();
        let mut fresh: [Vec<ResultsRow>; 3] = Default::default();
        for row in rows {
            let t = table_index(row.algorithm);
            let key = (row.transaction_id, row.run_at);
            if !state.results[t].contains_key(&key) && !fresh[t].iter().any(|r| (r.transaction_id, r.run_at) == key) {
                fresh[t].push(row.clone());
            }
        }
        for (t, table) in RESULTS.iter().enumerate() {
            self.persist(table, &fresh[t])?;
        }
        let mut n = 0;
        for (t, rows) in fresh.into_iter().enumerate() {
            for row in rows {
                state.results[t].insert((row.transaction_id, row.run_at), row);
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn results(&self, algorithm: Algorithm) -> Vec<ResultsRow> {
        self.state.read().results[table_index(algorithm)].values().cloned().collect()
    }

    pub fn results_for(&self, algorithm: Algorithm, id: TxId) -> Vec<ResultsRow> {
        self.state.read().results[table_index(algorithm)]
            .range((id, NaiveDateTime::MIN)..=(id, NaiveDateTime::MAX))
            .map(|(_, r)| r.clone())
            .collect()
    }

    pub fn store_verdict(&self, verdict: &KdaVerdict) -> Result<(), RepositoryError> {
        let mut state = self.state.write();
        if state.verdicts.get(&verdict.transaction_id) == Some(verdict) {
            return Ok(());
        }
        self.persist(VERDICTS, std::slice::from_ref(verdict))?;
        state.verdicts.insert(verdict.transaction_id, verdict.clone());
        Ok(())
    }

    pub fn verdict(&self, id: TxId) -> Option<KdaVerdict> {
        self.state.read().verdicts.get(&id).cloned()
    }

    /// Opens an alert for a suspicious verdict.
    pub fn open_alert(
        &self,
        verdict: &KdaVerdict,
        pan: &str,
        now: DateTime<Utc>,
    ) -> Result<AlertRecord, RepositoryError> {
        if !verdict.nf {
            return Err(RepositoryError::NotSuspicious(verdict.transaction_id));
        }
        let mut state = self.state.write();
        if state.alert_by_tx.contains_key(&verdict.transaction_id) {
            return Err(RepositoryError::AlertExists(verdict.transaction_id));
        }
        let alert = AlertRecord {
            id: state.alerts.keys().next_back().map_or(1, |m| m + 1),
            transaction_id: verdict.transaction_id,
            pan: pan.to_owned(),
            created_at: now,
            verdict: verdict.clone(),
            status: AlertStatus::Open,
            decided_by: None,
            decided_at: None,
        };
        self.persist(ALERTS, std::slice::from_ref(&alert))?;
        state.insert_alert(alert.clone());
        Ok(alert)
    }

    /// Moves an open alert to a terminal state. Terminal states never change.
    pub fn decide_alert(
        &self,
        id: AlertId,
        decision: Decision,
        inspector: &str,
        now: DateTime<Utc>,
    ) -> Result<AlertRecord, RepositoryError> {
        let mut state = self.state.write();
        let current = state.alerts.get(&id).ok_or(RepositoryError::UnknownAlert(id))?;
        if current.status != AlertStatus::Open {
            return Err(RepositoryError::AlertNotOpen { id, status: current.status });
        }
        let mut next = current.clone();
        next.status = decision.into();
        next.decided_by = Some(inspector.to_owned());
        next.decided_at = Some(now);
        self.persist(ALERTS, std::slice::from_ref(&next))?;
        state.insert_alert(next.clone());
        Ok(next)
    }

    pub fn alert(&self, id: AlertId) -> Option<AlertRecord> {
        self.state.read().alerts.get(&id).cloned()
    }

    pub fn alert_for_transaction(&self, id: TxId) -> Option<AlertRecord> {
        let state = self.state.read();
        state.alert_by_tx.get(&id).and_then(|a| state.alerts.get(a)).cloned()
    }

    pub fn alerts(&self, status: Option<AlertStatus>) -> Vec<AlertRecord> {
        self.state.read().alerts.values().filter(|a| status.is_none_or(|s| a.status == s)).cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{kda_evaluate, Action};
    use chrono::NaiveDate;

    fn tx(id: TxId, pan: &str, day: u64) -> Transaction {
        Transaction {
            id,
            pr_code: 1,
            pan: pan.into(),
            term_id: "T".into(),
            merchant_id: "M".into(),
            pos_condition: 1,
            affective_amount: 10.0 * id as f64,
            trx_date: NaiveDate::from_ymd_opt(2014, 1, 1).unwrap() + chrono::Days::new(day),
            trx_time: 12,
        }
    }

    fn suspicious(id: TxId) -> KdaVerdict {
        let mut window: Vec<Transaction> = (1..=30).map(|i| tx(i, "P", i / 3)).collect();
        window.iter_mut().for_each(|t| t.affective_amount = 100.0 + (t.id % 4) as f64);
        let mut odd = tx(id, "P", 10);
        odd.affective_amount = 5e7;
        odd.trx_time = 3;
        window.push(odd);
        let v = kda_evaluate(&window, &KdaConfig::default()).unwrap();
        assert!(v.nf);
        v
    }

    #[test]
    fn duplicate_ids_rejected_without_side_effects() {
        let repo = Repository::in_memory();
        repo.append_transaction(tx(1, "P", 0)).unwrap();
        assert!(matches!(repo.append_transaction(tx(1, "P", 0)), Err(RepositoryError::DuplicateId(1))));
        assert!(matches!(
            repo.append_transactions(vec![tx(2, "P", 0), tx(2, "P", 0)]),
            Err(RepositoryError::DuplicateId(2))
        ));
        assert_eq!(repo.transaction_count(), 1);
        assert_eq!(repo.next_id(), 2);
    }

    #[test]
    fn window_is_capped_at_window_size() {
        let repo = Repository::in_memory();
        repo.append_transactions((1..=101).map(|i| tx(i, "P", i / 2)).collect()).unwrap();
        let as_of = repo.transaction(101).unwrap().timestamp();
        let w = repo.fetch_window("P", &KdaConfig::default(), as_of);
        assert_eq!(w.len(), 100);
        assert_eq!(w[0].id, 2);
        assert!(repo.fetch_window("nobody", &KdaConfig::default(), as_of).is_empty());
    }

    #[test]
    fn results_go_to_separate_tables() {
        let repo = Repository::in_memory();
        let v = suspicious(99);
        let run_at = NaiveDate::from_ymd_opt(2014, 2, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let rows = ResultsRow::from_verdict(&v, run_at);
        assert_eq!(repo.store_results(&rows).unwrap(), 3);
        assert_eq!(repo.store_results(&rows).unwrap(), 0);
        for a in Algorithm::ALL {
            let stored = repo.results(a);
            assert_eq!(stored.len(), 1);
            assert_eq!(stored[0].algorithm, a);
        }
    }

    #[test]
    fn alert_lifecycle() {
        let repo = Repository::in_memory();
        let v = suspicious(99);
        assert_eq!(v.action, Action::Alert);
        let a = repo.open_alert(&v, "P", Utc::now()).unwrap();
        assert_eq!(a.status, AlertStatus::Open);
        assert!(matches!(repo.open_alert(&v, "P", Utc::now()), Err(RepositoryError::AlertExists(99))));

        let decided = repo.decide_alert(a.id, Decision::Allowed, "inspector-7", Utc::now()).unwrap();
        assert_eq!(decided.status, AlertStatus::Allowed);
        assert_eq!(decided.decided_by.as_deref(), Some("inspector-7"));
        assert!(matches!(
            repo.decide_alert(a.id, Decision::Blocked, "x", Utc::now()),
            Err(RepositoryError::AlertNotOpen { status: AlertStatus::Allowed, .. })
        ));
        assert!(matches!(
            repo.decide_alert(404, Decision::Blocked, "x", Utc::now()),
            Err(RepositoryError::UnknownAlert(404))
        ));
        assert!(repo.alerts(Some(AlertStatus::Open)).is_empty());
        assert_eq!(repo.alerts(None).len(), 1);
    }

    #[test]
    fn alerts_only_for_suspicious_verdicts() {
        let repo = Repository::in_memory();
        let mut v = suspicious(99);
        v.nf = false;
        assert!(matches!(repo.open_alert(&v, "P", Utc::now()), Err(RepositoryError::NotSuspicious(99))));
    }

    #[test]
    fn import_reports_rows() {
        let repo = Repository::in_memory();
        let text = "PrCode,PAN,TermId,MerchantID,PosCondition,AffectiveAmount,TrxDate,TrxTime,Settled,TxnGroup\n\
                    1,P,T,M,1,100,2014-01-01T10:00:00,10,true,retail\n\
                    1,P,T,M,1,-5,2014-01-01T10:00:00,10,true,retail\n\
                    1,P,T,M,1,100,2014-01-01T10:00:00,10,false,retail\n";
        let r = repo.import(text.as_bytes()).unwrap();
        assert_eq!(r.accepted, 1);
        assert_eq!(r.rejected.len(), 1);
        assert_eq!(r.rejected[0].line, 3);
        assert_eq!(r.ineligible, 1);
    }
}
