//! Generates a customer history and injects labelled anomalies of each kind.
use kda::simgen::{generate_history, inject_fraud, CustomerProfile, FraudKind, FraudSpec};

fn main() -> kda::Result<()> {
    let profile = CustomerProfile::random("603700000003", 11);
    println!(
        "profile: hours {:?}, devices {:?}, p99 amount {:.0}",
        profile.hours.support().collect::<Vec<_>>(),
        profile.devices.support().collect::<Vec<_>>(),
        profile.amount_p99()
    );
    let history = generate_history(&profile, 60, 12)?;
    for kind in [
        FraudKind::AmountSpike,
        FraudKind::NovelMerchant,
        FraudKind::OddHour,
        FraudKind::DeviceSwitch,
        FraudKind::Combined,
    ] {
        let (mixed, truth) = inject_fraud(&history, &profile, &FraudSpec::new(kind, 2))?;
        println!("{kind:?}:");
        for t in mixed.iter().filter(|t| truth.contains(&t.id)) {
            println!(
                "  {} {} {:02}h amount {} merchant {} device {}",
                t.id, t.trx_date, t.trx_time, t.affective_amount, t.merchant_id, t.pos_condition
            );
        }
    }
    Ok(())
}
