//! Scores a suspicious purchase against a customer's 90-day window and explains the vote.
use kda::simgen::{generate_history, CustomerProfile};
use kda::{kda_evaluate, select_window, KdaConfig};

fn main() -> kda::Result<()> {
    let profile = CustomerProfile::random("603700000001", 1);
    let mut history = generate_history(&profile, 80, 2)?;
    let mut fraud = history.last().unwrap().clone();
    fraud.id += 1;
    fraud.affective_amount = 25_000_000.0;
    fraud.merchant_id = "UNSEEN-MERCHANT".into();
    fraud.trx_time = 3;
    history.push(fraud.clone());

    let config = KdaConfig::default();
    let window = select_window(&history, fraud.timestamp(), &config);
    let verdict = kda_evaluate(&window, &config)?;
    println!("{}", verdict.explain());

    let normal = &history[history.len() - 2];
    let window = select_window(&history[..history.len() - 1], normal.timestamp(), &config);
    println!("\n{}", kda_evaluate(&window, &config)?.explain());
    Ok(())
}
