//! Persists a verdict, opens an alert and records an inspector's decision on disk.
use chrono::Utc;
use kda::repository::{Decision, Repository, ResultsRow};
use kda::simgen::{generate_history, CustomerProfile};
use kda::{kda_evaluate, KdaConfig};

fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join(format!("kda-alerts-{}", std::process::id()));
    let repo = Repository::open(&dir)?;
    let profile = CustomerProfile::random("603700000002", 3);
    let mut history = generate_history(&profile, 40, 4)?;
    let mut odd = history.last().unwrap().clone();
    odd.id += 1;
    odd.affective_amount *= 400.0;
    odd.merchant_id = "NEW".into();
    odd.trx_time = 2;
    history.push(odd.clone());
    repo.append_transactions(history)?;

    let config = KdaConfig::default();
    let window = repo.fetch_window(&profile.pan, &config, odd.timestamp());
    let verdict = kda_evaluate(&window, &config)?;
    repo.store_results(&ResultsRow::from_verdict(&verdict, odd.timestamp()))?;
    repo.store_verdict(&verdict)?;
    if verdict.nf {
        let alert = repo.open_alert(&verdict, &profile.pan, Utc::now())?;
        println!("opened alert {} for transaction {}", alert.id, alert.transaction_id);
        let decided = repo.decide_alert(alert.id, Decision::Blocked, "inspector", Utc::now())?;
        println!("alert {} is now {:?}", decided.id, decided.status);
    }
    drop(repo);
    let reopened = Repository::open(&dir)?;
    println!("after reopen: {} transactions, {} alert(s)", reopened.transaction_count(), reopened.alerts(None).len());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
