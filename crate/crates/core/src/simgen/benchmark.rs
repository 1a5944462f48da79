use std::collections::BTreeSet;
use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fraud::{inject_fraud, FraudKind, FraudSpec};
use super::metrics::{compute_metrics, EvaluationReport, GroundTruth};
use super::profile::{generate_history, CustomerProfile};
use crate::ensemble::{kda_evaluate, kda_evaluate_offline, select_window, KdaConfig, KdaVerdict};
use crate::error::{Error, Result};
use crate::kmeans::{davies_bouldin, kmeans_fit};
use crate::seed;
use crate::txmodel::{encode_window, FeatureSet, Transaction, TxId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Fit once per customer window and score every member.
    #[default]
    Offline,
    /// Score each transaction on arrival against a fresh fit of its window.
    Online,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "offline" => Ok(Mode::Offline),
            "online" => Ok(Mode::Online),
            other => Err(Error::InvalidDescriptor(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkDescriptor {
    pub customers: usize,
    pub tx_per_customer: usize,
    pub fraud: Option<FraudSpec>,
    pub mode: Mode,
    pub master_seed: u64,
    /// Inclusive K range for the Davies-Bouldin sweep; `None` skips it.
    pub db_sweep: Option<(usize, usize)>,
    pub kda: KdaConfig,
}

impl Default for BenchmarkDescriptor {
    fn default() -> Self {
        Self {
            customers: 100,
            tx_per_customer: 100,
            fraud: Some(FraudSpec::new(FraudKind::Combined, 16)),
            mode: Mode::Offline,
            master_seed: 20140305,
            db_sweep: Some((2, 20)),
            kda: KdaConfig::default(),
        }
    }
}

impl BenchmarkDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.customers == 0 || self.tx_per_customer == 0 {
            return Err(Error::InvalidDescriptor("customers and tx_per_customer must be positive".into()));
        }
        if let Some(f) = &self.fraud {
            f.validate()?;
        }
        if let Some((lo, hi)) = self.db_sweep {
            if lo < 2 || lo > hi {
                return Err(Error::InvalidDescriptor(format!("bad Davies-Bouldin range {lo}..={hi}")));
            }
        }
        self.kda.validate().map_err(|e| Error::InvalidDescriptor(e.to_string()))
    }

    fn kda_config(&self) -> KdaConfig {
        KdaConfig { seed: self.master_seed, ..self.kda.clone() }
    }
}

/// Simulated customers with their histories and the fraud ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub profiles: Vec<CustomerProfile>,
    /// One history per profile, ids unique across the population.
    pub histories: Vec<Vec<Transaction>>,
    pub frauds: BTreeSet<TxId>,
}

impl Population {
    pub fn generate(descriptor: &BenchmarkDescriptor) -> Result<Self> {
        descriptor.validate()?;
        let master = descriptor.master_seed;
        let n = descriptor.customers;

        // frauds per customer: distinct customers first, then round-robin
        let mut per_customer = vec![0usize; n];
        if let Some(spec) = &descriptor.fraud {
            let mut rng = seed::rng(seed::derive(master ^ spec.seed, u64::MAX));
            let order = rand::seq::index::sample(&mut rng, n, n).into_vec();
            for i in 0..spec.count {
                per_customer[order[i % n]] += 1;
            }
        }

        let built: Vec<(CustomerProfile, Vec<Transaction>, BTreeSet<TxId>)> = (0..n)
            .into_par_iter()
            .map(|c| {
                let profile = CustomerProfile::random(format!("6037{:08}", c + 1), seed::derive(master, 2 * c as u64));
                let history =
                    generate_history(&profile, descriptor.tx_per_customer, seed::derive(master, 2 * c as u64 + 1))?;
                match (&descriptor.fraud, per_customer[c]) {
                    (Some(spec), count) if count > 0 => {
                        let spec =
                            FraudSpec { count, seed: seed::derive(master ^ spec.seed, c as u64), ..spec.clone() };
                        let (h, truth) = inject_fraud(&history, &profile, &spec)?;
                        Ok((profile, h, truth))
                    }
                    _ => Ok((profile, history, BTreeSet::new())),
                }
            })
            .collect::<Result<_>>()?;

        let mut next: TxId = 1;
        let mut pop = Population { profiles: Vec::new(), histories: Vec::new(), frauds: BTreeSet::new() };
        for (profile, mut history, truth) in built {
            let offset = next - history[0].id;
            for t in &mut history {
                t.id += offset;
            }
            pop.frauds.extend(truth.iter().map(|id| id + offset));
            next += history.len() as TxId;
            pop.profiles.push(profile);
            pop.histories.push(history);
        }
        Ok(pop)
    }

    pub fn ground_truth(&self) -> GroundTruth {
        let normals = self.histories.iter().flatten().map(|t| t.id).filter(|id| !self.frauds.contains(id)).collect();
        GroundTruth { frauds: self.frauds.clone(), normals }
    }

    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.histories.iter().flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbSweepPoint {
    pub k: usize,
    /// Mean over windows with a finite index.
    pub mean: Option<f64>,
    pub windows: usize,
    /// Windows with coincident centroids or fewer than two clusters.
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub descriptor: BenchmarkDescriptor,
    pub evaluated: usize,
    pub ground_truth: Vec<TxId>,
    pub report: EvaluationReport,
    pub db_sweep: Vec<DbSweepPoint>,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let d = &self.descriptor;
        let _ = writeln!(
            out,
            "{:?} benchmark: {} customers x {} transactions, {} injected fraud(s), seed {}",
            d.mode,
            d.customers,
            d.tx_per_customer,
            self.ground_truth.len(),
            d.master_seed
        );
        let _ = writeln!(out, "{} transactions evaluated\n", self.evaluated);
        out.push_str(&self.report.render_tables());
        if !self.db_sweep.is_empty() {
            let _ = writeln!(out, "\nDavies-Bouldin sweep (k-means, mean over customer windows)");
            let _ = writeln!(out, "{:>4}{:>12}{:>12}", "K", "DB", "degenerate");
            for p in &self.db_sweep {
                let mean = p.mean.map_or("n/a".to_owned(), |m| format!("{m:.4}"));
                let _ = writeln!(out, "{:>4}{:>12}{:>12}", p.k, mean, p.degenerate);
            }
        }
        let _ = writeln!(out, "\n{}", self.report.semantics);
        out
    }
}

fn final_window(history: &[Transaction], config: &KdaConfig) -> Vec<Transaction> {
    match history.last() {
        Some(last) => select_window(history, last.timestamp(), config),
        None => Vec::new(),
    }
}

/// Verdicts for one customer under the given mode.
pub fn evaluate_customer(history: &[Transaction], config: &KdaConfig, mode: Mode) -> Result<Vec<KdaVerdict>> {
    match mode {
        Mode::Offline => {
            let window = final_window(history, config);
            if window.is_empty() {
                return Ok(Vec::new());
            }
            kda_evaluate_offline(&window, config)
        }
        Mode::Online => (0..history.len())
            .map(|i| kda_evaluate(&select_window(&history[..=i], history[i].timestamp(), config), config))
            .collect(),
    }
}

fn db_sweep(pop: &Population, config: &KdaConfig, lo: usize, hi: usize) -> Result<Vec<DbSweepPoint>> {
    let encoded: Vec<_> = pop
        .histories
        .iter()
        .map(|h| final_window(h, config))
        .filter(|w| !w.is_empty())
        .map(|w| encode_window(&w, FeatureSet::SixDim).map(|(v, _)| v))
        .collect::<Result<_>>()?;
    (lo..=hi)
        .map(|k| {
            let km = crate::kmeans::KMeansConfig {
                k,
                seed: seed::derive(config.seed, config.kmeans.seed),
                ..config.kmeans.clone()
            };
            let values: Vec<Option<f64>> = encoded
                .par_iter()
                .map(|v| {
                    let model = kmeans_fit(v, &km)?;
                    Ok(davies_bouldin(&model, v).ok().filter(|d| d.is_finite()))
                })
                .collect::<Result<_>>()?;
            let finite: Vec<f64> = values.iter().flatten().copied().collect();
            Ok(DbSweepPoint {
                k,
                mean: (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64),
                windows: values.len(),
                degenerate: values.len() - finite.len(),
            })
        })
        .collect()
}

/// Generates the population, scores it and tallies the four model rows.
pub fn run_benchmark(descriptor: &BenchmarkDescriptor) -> Result<BenchmarkReport> {
    let pop = Population::generate(descriptor)?;
    let config = descriptor.kda_config();
    let per_customer: Vec<Vec<KdaVerdict>> =
        pop.histories.par_iter().map(|h| evaluate_customer(h, &config, descriptor.mode)).collect::<Result<_>>()?;
    let verdicts: Vec<KdaVerdict> = per_customer.into_iter().flatten().collect();
    let report = compute_metrics(&pop.ground_truth(), &verdicts)?;
    let db_sweep = match descriptor.db_sweep {
        Some((lo, hi)) => db_sweep(&pop, &config, lo, hi)?,
        None => Vec::new(),
    };
    Ok(BenchmarkReport {
        descriptor: descriptor.clone(),
        evaluated: verdicts.len(),
        ground_truth: pop.frauds.iter().copied().collect(),
        report,
        db_sweep,
    })
}
