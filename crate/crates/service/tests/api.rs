mod common;

use std::time::Duration;

use common::*;
use kda::repository::Repository;
use kda::simgen::{BenchmarkDescriptor, FraudKind, FraudSpec, Population};
use kda::{Algorithm, KdaConfig, Policy};
use serde_json::{json, Value};

#[tokio::test]
async fn habitual_passes_and_anomaly_alerts() {
    let (repo, history) = habitual_repo();
    let s = spawn(repo, KdaConfig::default(), None).await;

    let (status, body) = s.post("/transactions", &habitual_next(&history)).await;
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["verdict"]["action"], "pass");
    assert_eq!(body["verdict"]["nF"], false);
    assert!(body["alert"].is_null());
    assert_eq!(body["transaction"]["id"], 61);

    let (status, body) = s.post("/transactions", &anomaly(&history)).await;
    assert_eq!(status, 201, "{body}");
    assert_eq!(body["verdict"]["action"], "alert");
    assert_eq!(body["alert"]["status"], "open");
    assert_eq!(body["alert"]["transaction_id"], 62);
    let alert_id = body["alert"]["id"].as_u64().unwrap();

    // three result rows and the verdict were persisted
    let repo = s.state.repository();
    for a in Algorithm::ALL {
        assert_eq!(repo.results_for(a, 62).len(), 1);
    }
    let (status, view) = s.get("/transactions/62").await;
    assert_eq!(status, 200);
    assert_eq!(view["verdict"]["nF"], true);
    assert_eq!(view["alert"]["id"], alert_id);

    let (_, open) = s.get("/alerts?status=open").await;
    assert_eq!(open.as_array().unwrap().len(), 1);

    let decision = json!({"decision": "blocked", "inspector": "ana"});
    let (status, decided) = s.post(&format!("/alerts/{alert_id}/decision"), &decision).await;
    assert_eq!(status, 200);
    assert_eq!(decided["status"], "blocked");
    assert_eq!(decided["decided_by"], "ana");

    let (_, alert) = s.get(&format!("/alerts/{alert_id}")).await;
    assert_eq!(alert["status"], "blocked");
    let (status, again) =
        s.post(&format!("/alerts/{alert_id}/decision"), &json!({"decision": "allowed", "inspector": "bo"})).await;
    assert_eq!(status, 409);
    assert_eq!(again["code"], "already_decided");
    let (_, open) = s.get("/alerts?status=open").await;
    assert!(open.as_array().unwrap().is_empty());

    assert_eq!(s.get("/alerts/999").await.0, 404);
    assert_eq!(s.post("/alerts/999/decision", &decision).await.0, 404);
    assert_eq!(s.get("/alerts?status=maybe").await.0, 400);
    assert_eq!(
        s.post(&format!("/alerts/{alert_id}/decision"), &json!({"decision": "allowed", "inspector": " "})).await.0,
        400
    );
}

#[tokio::test]
async fn duplicate_ids_conflict_without_rescoring() {
    let (repo, history) = habitual_repo();
    let s = spawn(repo, KdaConfig::default(), None).await;
    let mut body = anomaly(&history);
    body["id"] = json!(500);
    let (status, first) = s.post("/transactions", &body).await;
    assert_eq!(status, 201);
    assert_eq!(first["transaction"]["id"], 500);

    let (status, err) = s.post("/transactions", &body).await;
    assert_eq!(status, 409);
    assert_eq!(err["code"], "duplicate_id");
    let repo = s.state.repository();
    assert_eq!(repo.results_for(Algorithm::KMeans, 500).len(), 1);
    assert_eq!(repo.alerts(None).len(), 1);

    body["id"] = json!(3);
    assert_eq!(s.post("/transactions", &body).await.0, 409);
}

#[tokio::test]
async fn malformed_invalid_and_ineligible_requests() {
    let (repo, history) = habitual_repo();
    let s = spawn(repo, KdaConfig::default(), None).await;

    let mut unsettled = habitual_next(&history);
    unsettled["settled"] = json!(false);
    let (status, err) = s.post("/transactions", &unsettled).await;
    assert_eq!((status, err["code"].as_str()), (422, Some("ineligible")));

    let mut other = habitual_next(&history);
    other["txn_group"] = json!("other");
    assert_eq!(s.post("/transactions", &other).await.0, 422);

    let r = s
        .client
        .post(s.url("/transactions"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 400);
    let err: Value = r.json().await.unwrap();
    assert_eq!(err["code"], "malformed");

    let mut missing = habitual_next(&history);
    missing.as_object_mut().unwrap().remove("pan");
    assert_eq!(s.post("/transactions", &missing).await.0, 400);

    let mut negative = habitual_next(&history);
    negative["affective_amount"] = json!(-5.0);
    assert_eq!(s.post("/transactions", &negative).await.1["code"], "invalid_transaction");

    assert_eq!(s.state.repository().transaction_count(), 60);
}

#[tokio::test]
async fn auto_stop_policy_returns_forbidden() {
    let (repo, history) = habitual_repo();
    let s = spawn(repo, KdaConfig { policy: Policy::AutoStop, ..Default::default() }, None).await;
    let (status, body) = s.post("/transactions", &anomaly(&history)).await;
    assert_eq!(status, 403);
    assert_eq!(body["verdict"]["action"], "stop");
    assert_eq!(body["alert"]["status"], "open");
}

#[tokio::test]
async fn warm_up_customer_passes() {
    let s = spawn(Repository::in_memory(), KdaConfig::default(), None).await;
    let (_, history) = habitual_repo();
    let (status, body) = s.post("/transactions", &anomaly(&history)).await;
    assert_eq!(status, 200);
    assert_eq!(body["verdict"]["warm_up"], true);
}

#[tokio::test]
async fn stream_fans_out_alerts_and_decisions() {
    let (repo, history) = habitual_repo();
    let s = spawn(repo, KdaConfig::default(), None).await;
    let a = s.client.get(s.url("/alerts/stream")).send().await.unwrap();
    let b = s.client.get(s.url("/alerts/stream")).send().await.unwrap();
    assert_eq!(a.headers()["content-type"], "text/event-stream");

    let started = std::time::Instant::now();
    let (status, body) = s.post("/transactions", &anomaly(&history)).await;
    assert_eq!(status, 201);
    let id = body["alert"]["id"].as_u64().unwrap();
    s.post(&format!("/alerts/{id}/decision"), &json!({"decision": "allowed", "inspector": "ana"})).await;

    let (ea, eb) = tokio::join!(read_events(a, 2), read_events(b, 2));
    assert!(started.elapsed() < Duration::from_secs(1));
    assert_eq!(ea, eb);
    assert_eq!(ea[0].0, "alert");
    assert_eq!(ea[0].1, body["alert"]);
    assert_eq!(ea[1].1["status"], "allowed");
}

#[tokio::test]
async fn same_customer_requests_are_serialized() {
    let s = spawn(Repository::in_memory(), KdaConfig::default(), None).await;
    let (_, history) = habitual_repo();
    let body = habitual_next(&history);
    let posts = (0..20).map(|_| s.post("/transactions", &body));
    let results = futures::future::join_all(posts).await;
    let mut sizes: Vec<u64> = results
        .iter()
        .map(|(st, b)| {
            assert!(*st == 200 || *st == 201);
            b["verdict"]["window_size"].as_u64().unwrap()
        })
        .collect();
    sizes.sort_unstable();
    assert_eq!(sizes, (1..=20).collect::<Vec<_>>());
    let mut ids: Vec<u64> = results.iter().map(|(_, b)| b["transaction"]["id"].as_u64().unwrap()).collect();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), 20);
}

#[tokio::test]
async fn token_guards_everything_but_health() {
    let (repo, history) = habitual_repo();
    let s = spawn(repo, KdaConfig::default(), Some("s3cret")).await;
    assert_eq!(s.client.get(s.url("/healthz")).send().await.unwrap().status().as_u16(), 200);
    let (status, err) = s.get("/alerts").await;
    assert_eq!((status, err["code"].as_str()), (401, Some("unauthorized")));
    let r = s.client.get(s.url("/alerts")).bearer_auth("wrong").send().await.unwrap();
    assert_eq!(r.status().as_u16(), 401);
    let r = s.client.get(s.url("/alerts")).bearer_auth("s3cret").send().await.unwrap();
    assert_eq!(r.status().as_u16(), 200);
    let r = s.client.get(s.url("/alerts/stream?token=s3cret")).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 200);
    let r = s
        .client
        .post(s.url("/transactions"))
        .bearer_auth("s3cret")
        .json(&habitual_next(&history))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 200);
}

#[tokio::test]
async fn customer_window_view() {
    let (repo, history) = habitual_repo();
    let s = spawn(repo, KdaConfig::default(), None).await;
    s.post("/transactions", &anomaly(&history)).await;
    let (status, w) = s.get(&format!("/customers/{PAN}/window")).await;
    assert_eq!(status, 200);
    let txs = w["transactions"].as_array().unwrap();
    let last = txs.last().unwrap();
    assert_eq!(last["transaction"]["id"], 61);
    assert_eq!(last["verdict"]["nF"], true);
    assert!(txs[0]["verdict"].is_null());
    assert_eq!(s.get("/customers/nobody/window").await.0, 404);
    assert_eq!(s.get("/transactions/9999").await.0, 404);
}

fn population_repo(fraud: Option<FraudSpec>) -> (Repository, Population) {
    let d = BenchmarkDescriptor { fraud, db_sweep: None, ..Default::default() };
    let pop = Population::generate(&d).unwrap();
    let repo = Repository::in_memory();
    repo.append_transactions(pop.transactions().cloned().collect()).unwrap();
    (repo, pop)
}

#[tokio::test]
async fn historical_batch_finds_injected_frauds() {
    let (repo, pop) = population_repo(Some(FraudSpec::new(FraudKind::Combined, 16)));
    let s = spawn(repo, KdaConfig { seed: 20140305, ..Default::default() }, None).await;

    let (status, created) = s.post("/batch/historical", &json!({"all": true})).await;
    assert_eq!(status, 202);
    let (status, busy) = s.post("/batch/historical", &json!({})).await;
    assert_eq!((status, busy["code"].as_str()), (409, Some("job_running")));

    let job = s.wait_job(created["job_id"].as_u64().unwrap()).await;
    assert_eq!(job["status"], "completed");
    assert_eq!(job["done"], 100);
    let summary = &job["summary"];
    assert_eq!(summary["evaluated"], 10_000);
    let kda: Vec<u64> = serde_json::from_value(summary["flagged"]["kda"].clone()).unwrap();
    let caught = pop.frauds.iter().filter(|id| kda.contains(id)).count();
    assert!(caught >= 11, "caught {caught}");
    assert_eq!((caught, kda.len()), (16, 229));
    for key in ["kmeans", "dbscan", "agglomerative"] {
        assert!(summary["flagged"][key].is_array());
    }

    let (status, created) = s.post("/batch/historical", &json!({"pan": pop.profiles[3].pan})).await;
    assert_eq!(status, 202);
    let job = s.wait_job(created["job_id"].as_u64().unwrap()).await;
    assert_eq!(job["summary"]["customers"], 1);
    assert_eq!(job["total"], 1);

    assert_eq!(s.post("/batch/historical", &json!({"pan": "nobody"})).await.0, 404);
    assert_eq!(s.post("/batch/historical", &json!({"pan": "x", "all": true})).await.0, 400);
    assert_eq!(s.get("/jobs/77").await.0, 404);
}

#[tokio::test]
async fn historical_batch_on_normal_population_rarely_flags() {
    let (repo, _) = population_repo(None);
    let s = spawn(repo, KdaConfig { seed: 20140305, ..Default::default() }, None).await;
    let (_, created) = s.post("/batch/historical", &json!({"all": true})).await;
    let job = s.wait_job(created["job_id"].as_u64().unwrap()).await;
    let flagged = job["summary"]["flagged"]["kda"].as_array().unwrap().len();
    assert!(flagged * 10 <= 10_000);
    assert_eq!(flagged, 219);
}

#[tokio::test]
async fn empty_repository_batch_and_benchmark_endpoint() {
    let s = spawn(Repository::in_memory(), KdaConfig::default(), None).await;
    let (status, err) = s.post("/batch/historical", &json!({"all": true})).await;
    assert_eq!((status, err["code"].as_str()), (404, Some("empty_repository")));

    let d =
        json!({"customers": 3, "tx_per_customer": 30, "fraud": {"kind": "amount_spike", "count": 2}, "db_sweep": null});
    let (status, report) = s.post("/benchmark", &d).await;
    assert_eq!(status, 200);
    assert_eq!(report["evaluated"], 92);
    assert_eq!(report["report"]["models"].as_array().unwrap().len(), 4);
    assert_eq!(s.post("/benchmark", &json!({"customers": 0})).await.0, 422);
}
