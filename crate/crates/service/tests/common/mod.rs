#![allow(dead_code)]

use std::time::Duration;

use futures::StreamExt;
use kda::repository::Repository;
use kda::simgen::{generate_history, CustomerProfile};
use kda::{KdaConfig, Transaction, TxnGroup};
use kda_service::{router, AppState};
use serde_json::{json, Value};

pub struct Server {
    pub base: String,
    pub state: AppState,
    pub client: reqwest::Client,
}

pub async fn spawn(repo: Repository, config: KdaConfig, token: Option<&str>) -> Server {
    let state = AppState::new(repo, config, token.map(str::to_owned));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let app = router(state.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server { base, state, client: reqwest::Client::new() }
}

impl Server {
    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub async fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let r = self.client.post(self.url(path)).json(body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.client.get(self.url(path)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    /// Polls a batch job until it leaves the running state.
    pub async fn wait_job(&self, id: u64) -> Value {
        let mut last_done = 0;
        for _ in 0..600 {
            let (status, job) = self.get(&format!("/jobs/{id}")).await;
            assert_eq!(status, 200);
            let done = job["done"].as_u64().unwrap();
            assert!(done >= last_done, "progress went backwards");
            last_done = done;
            if job["status"] != "running" {
                return job;
            }
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
        panic!("job {id} did not finish");
    }
}

pub const PAN: &str = "603799990001";

pub fn profile() -> CustomerProfile {
    let mut p = CustomerProfile::random(PAN, 42);
    p.amount_mu = 60_000f64.ln();
    p
}

/// A habitual customer with 60 stored transactions.
pub fn habitual_repo() -> (Repository, Vec<Transaction>) {
    let repo = Repository::in_memory();
    let history = generate_history(&profile(), 60, 7).unwrap();
    repo.append_transactions(history.clone()).unwrap();
    (repo, history)
}

pub fn raw_json(t: &Transaction) -> Value {
    json!({
        "pr_code": t.pr_code,
        "pan": t.pan,
        "term_id": t.term_id,
        "merchant_id": t.merchant_id,
        "pos_condition": t.pos_condition,
        "affective_amount": t.affective_amount,
        "business_date": t.timestamp().format("%Y-%m-%dT%H:%M:%S").to_string(),
        "settled": true,
        "txn_group": TxnGroup::Retail.as_str(),
    })
}

/// A repeat of the customer's latest habit, one hour later on the same day.
pub fn habitual_next(history: &[Transaction]) -> Value {
    let last = history.last().unwrap();
    let mut t = history[history.len() - 2].clone();
    t.trx_date = last.trx_date;
    t.trx_time = last.trx_time;
    raw_json(&t)
}

/// Five million at an unseen merchant in the small hours from a new device.
pub fn anomaly(history: &[Transaction]) -> Value {
    let mut t = history.last().unwrap().clone();
    t.affective_amount = 5_000_000.0;
    t.merchant_id = "UNSEEN-MERCHANT".into();
    t.term_id = "UNSEEN-TERM".into();
    t.trx_time = 3;
    t.trx_date = t.trx_date.succ_opt().unwrap();
    t.pos_condition = 99;
    raw_json(&t)
}

/// Reads server-sent events until `n` complete ones arrive.
pub async fn read_events(resp: reqwest::Response, n: usize) -> Vec<(String, Value)> {
    let mut stream = resp.bytes_stream();
    let mut buf = String::new();
    let mut events = Vec::new();
    while events.len() < n {
        let chunk = tokio::time::timeout(Duration::from_secs(5), stream.next())
            .await
            .expect("event within deadline")
            .expect("stream open")
            .unwrap();
        buf.push_str(std::str::from_utf8(&chunk).unwrap());
        while let Some(end) = buf.find("\n\n") {
            let block: String = buf.drain(..end + 2).collect();
            let mut name = String::new();
            let mut data = String::new();
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("event:") {
                    name = v.trim().to_owned();
                } else if let Some(v) = line.strip_prefix("data:") {
                    data.push_str(v.trim_start());
                }
            }
            if !data.is_empty() {
                events.push((name, serde_json::from_str(&data).unwrap()));
            }
        }
    }
    events
}
