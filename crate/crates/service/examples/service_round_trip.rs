//! Starts the service in-process, posts a habitual and an anomalous purchase,
//! watches the alert stream and blocks the alert.
use std::time::Duration;

use futures::StreamExt;
use kda::repository::Repository;
use kda::simgen::{generate_history, CustomerProfile};
use kda::KdaConfig;
use kda_service::{router, AppState};
use serde_json::{json, Value};

fn raw(t: &kda::Transaction) -> Value {
    json!({
        "pr_code": t.pr_code, "pan": t.pan, "term_id": t.term_id, "merchant_id": t.merchant_id,
        "pos_condition": t.pos_condition, "affective_amount": t.affective_amount,
        "business_date": t.timestamp(), "settled": true, "txn_group": "retail",
    })
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let profile = CustomerProfile::random("603700000010", 5);
    let history = generate_history(&profile, 50, 6)?;
    let repo = Repository::in_memory();
    repo.append_transactions(history.clone())?;

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let app = router(AppState::new(repo, KdaConfig::default(), None));
    tokio::spawn(async move { axum::serve(listener, app).await });
    let client = reqwest::Client::new();

    let stream = client.get(format!("{base}/alerts/stream")).send().await?;
    let watcher = tokio::spawn(async move {
        let mut body = stream.bytes_stream();
        while let Ok(Some(Ok(chunk))) = tokio::time::timeout(Duration::from_secs(2), body.next()).await {
            print!("stream: {}", String::from_utf8_lossy(&chunk));
        }
    });

    let mut habitual = history[history.len() - 2].clone();
    habitual.trx_date = history.last().unwrap().trx_date;
    let r = client.post(format!("{base}/transactions")).json(&raw(&habitual)).send().await?;
    println!("habitual -> {} action {}", r.status(), r.json::<Value>().await?["verdict"]["action"]);

    let mut odd = history.last().unwrap().clone();
    odd.affective_amount = 5_000_000.0;
    odd.merchant_id = "UNSEEN".into();
    odd.trx_time = 3;
    let r = client.post(format!("{base}/transactions")).json(&raw(&odd)).send().await?;
    let status = r.status();
    let body: Value = r.json().await?;
    println!("anomaly -> {status} action {}", body["verdict"]["action"]);

    if let Some(id) = body["alert"]["id"].as_u64() {
        let r = client
            .post(format!("{base}/alerts/{id}/decision"))
            .json(&json!({"decision": "blocked", "inspector": "demo"}))
            .send()
            .await?;
        println!("decision -> {} status {}", r.status(), r.json::<Value>().await?["status"]);
    }
    watcher.await?;
    Ok(())
}
