mod support;

use std::fs::OpenOptions;
use std::io::Write;

use chrono::{TimeZone, Utc};
use kda::repository::{AlertStatus, Decision, Repository, RepositoryError, ResultsRow};
use kda::{kda_evaluate, Algorithm, KdaConfig};
use support::*;

#[test]
fn state_survives_reopen_and_torn_writes() {
    let dir = tempfile::tempdir().unwrap();
    let now = Utc.with_ymd_and_hms(2014, 3, 1, 12, 0, 0).unwrap();
    let mut window: Vec<_> = (1..=30).map(|i| tx(i, i as u32, 12, 50_000.0, "M1")).collect();
    window.push(tx(31, 31, 3, 9e7, "NOVEL"));
    let verdict = kda_evaluate(&window, &KdaConfig::default()).unwrap();
    assert!(verdict.nf);
    {
        let repo = Repository::open(dir.path()).unwrap();
        repo.append_transactions(window.clone()).unwrap();
        let rows = ResultsRow::from_verdict(&verdict, window[30].timestamp());
        assert_eq!(repo.store_results(&rows).unwrap(), 3);
        assert_eq!(repo.store_results(&rows).unwrap(), 0);
        repo.store_verdict(&verdict).unwrap();
        let alert = repo.open_alert(&verdict, "P1", now).unwrap();
        repo.decide_alert(alert.id, Decision::Blocked, "inspector-7", now).unwrap();
    }
    // a crash mid-append leaves a partial line behind
    let mut f = OpenOptions::new().append(true).open(dir.path().join("transactions.jsonl")).unwrap();
    f.write_all(br#"{"id":32,"pr_code":0,"pan":"P1","te"#).unwrap();
    drop(f);

    let repo = Repository::open(dir.path()).unwrap();
    assert_eq!(repo.transaction_count(), 31);
    assert_eq!(repo.history("P1"), window);
    assert_eq!(repo.next_id(), 32);
    assert_eq!(repo.verdict(31), Some(verdict.clone()));
    assert_eq!(repo.results_for(Algorithm::Dbscan, 31).len(), 1);
    let alert = repo.alert_for_transaction(31).unwrap();
    assert_eq!(alert.status, AlertStatus::Blocked);
    assert_eq!(alert.decided_by.as_deref(), Some("inspector-7"));
    assert!(matches!(
        repo.decide_alert(alert.id, Decision::Allowed, "x", now),
        Err(RepositoryError::AlertNotOpen { .. })
    ));

    // the truncated log accepts new appends cleanly
    repo.append_transaction(tx(32, 32, 12, 1.0, "M1")).unwrap();
    drop(repo);
    let repo = Repository::open(dir.path()).unwrap();
    assert_eq!(repo.transaction_count(), 32);
}

#[test]
fn duplicate_ids_reject_whole_batch() {
    let repo = Repository::in_memory();
    repo.append_transaction(tx(5, 0, 12, 1.0, "M")).unwrap();
    let err = repo.append_transactions(vec![tx(6, 0, 12, 1.0, "M"), tx(5, 0, 12, 1.0, "M")]).unwrap_err();
    assert!(matches!(err, RepositoryError::DuplicateId(5)));
    assert_eq!(repo.transaction_count(), 1);
}
