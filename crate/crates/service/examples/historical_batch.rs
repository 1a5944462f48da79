//! Loads a simulated population, runs offline scoring of every customer and
//! checks the flagged set against the injected frauds.
use kda::repository::Repository;
use kda::simgen::{BenchmarkDescriptor, FraudKind, FraudSpec, Population};
use kda::KdaConfig;
use kda_service::batch::process_historical;

fn main() -> anyhow::Result<()> {
    let descriptor = BenchmarkDescriptor {
        customers: 20,
        fraud: Some(FraudSpec::new(FraudKind::Combined, 5)),
        ..Default::default()
    };
    let population = Population::generate(&descriptor)?;
    let repo = Repository::in_memory();
    repo.append_transactions(population.transactions().cloned().collect())?;

    let summary = process_historical(&repo, &repo.pans(), &KdaConfig::default(), |done| {
        if done % 5 == 0 {
            eprintln!("{done} customers scored");
        }
    })?;
    print!("{}", summary.render());
    let caught = population.frauds.iter().filter(|id| summary.flagged.kda.contains(id)).count();
    println!("caught {caught} of {} injected frauds", population.frauds.len());
    Ok(())
}
