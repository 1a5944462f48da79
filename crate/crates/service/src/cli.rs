//! The `kda` operator commands.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use kda::repository::Repository;
use kda::simgen::{run_benchmark, BenchmarkDescriptor, FraudSpec, Mode, Population};
use kda::{kda_evaluate, KdaConfig, TxId};
use serde::Serialize;

use crate::batch::{process_historical, window_ending_at};
use crate::config::{load_kda_config, ServiceConfig};
use crate::error::CliError;
use crate::DEFAULT_DESCRIPTOR;

#[derive(Debug, Parser)]
#[command(name = "kda", version, about = "Per-customer clustering ensemble for transaction fraud screening")]
pub struct Cli {
    /// TOML file with engine settings (window, k-means, DBSCAN/LOF, agglomerative, policy).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config file and benchmark descriptor.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Repository directory.
    #[arg(long, global = true, default_value = "kda-data")]
    pub storage: PathBuf,
    /// Also write the result: a JSON file, or a directory for `benchmark`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bulk-load a delimited transaction file.
    Ingest {
        #[arg(long)]
        file: PathBuf,
    },
    /// Score stored histories offline and summarize the flags.
    ProcessHistorical {
        #[arg(long)]
        pan: Option<String>,
    },
    /// Populate storage with synthetic customers.
    Simulate {
        #[arg(long, default_value_t = 100)]
        customers: usize,
        #[arg(long, default_value_t = 100)]
        tx: usize,
        /// `kind:count`, kinds: amount_spike, novel_merchant, odd_hour, device_switch, combined.
        #[arg(long)]
        fraud: Option<FraudSpec>,
    },
    /// Run the synthetic benchmark; without a descriptor the shipped default is used.
    Benchmark {
        #[arg(long)]
        descriptor: Option<PathBuf>,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Run the HTTP service until interrupted.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Static bearer token; also read from KDA_TOKEN.
        #[arg(long, env = "KDA_TOKEN")]
        token: Option<String>,
    },
    /// Show the per-algorithm evidence and vote for one transaction.
    Explain {
        #[arg(long)]
        tx: TxId,
    },
}

fn kda_config(cli: &Cli) -> Result<KdaConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => load_kda_config(path)?,
        None => KdaConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|e| CliError::File(path.to_path_buf(), e))
}

/// Runs one command, writing normal output to `out` and row-level
/// diagnostics to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let config = kda_config(cli)?;
    match &cli.command {
        Command::Ingest { file } => {
            let reader = std::fs::File::open(file).map_err(|e| CliError::File(file.clone(), e))?;
            let repo = Repository::open(&cli.storage)?;
            let report = repo.import(std::io::BufReader::new(reader))?;
            for e in &report.rejected {
                writeln!(err, "{}:{}: {}", file.display(), e.line, e.message)?;
            }
            writeln!(
                out,
                "{} accepted, {} rejected, {} ineligible",
                report.accepted,
                report.rejected.len(),
                report.ineligible
            )?;
            if let Some(path) = &cli.out {
                #[derive(Serialize)]
                struct Summary<'a> {
                    accepted: usize,
                    rejected: Vec<(u64, &'a str)>,
                    ineligible: usize,
                    first_id: Option<TxId>,
                }
                let rejected = report.rejected.iter().map(|e| (e.line, e.message.as_str())).collect();
                write_json(
                    path,
                    &Summary {
                        accepted: report.accepted,
                        rejected,
                        ineligible: report.ineligible,
                        first_id: report.first_id,
                    },
                )?;
            }
        }
        Command::ProcessHistorical { pan } => {
            let repo = Repository::open(&cli.storage)?;
            let pans = match pan {
                Some(p) if repo.history(p).is_empty() => return Err(CliError::UnknownPan(p.clone())),
                Some(p) => vec![p.clone()],
                None => repo.pans(),
            };
            if pans.is_empty() {
                return Err(CliError::EmptyRepository);
            }
            let summary = process_historical(&repo, &pans, &config, |_| {}).map_err(|e| match e {
                crate::batch::BatchError::Engine(e) => CliError::Engine(e),
                crate::batch::BatchError::Repository(e) => CliError::Repository(e),
            })?;
            write!(out, "{}", summary.render())?;
            if let Some(path) = &cli.out {
                write_json(path, &summary)?;
            }
        }
        Command::Simulate { customers, tx, fraud } => {
            let defaults = BenchmarkDescriptor::default();
            let descriptor = BenchmarkDescriptor {
                customers: *customers,
                tx_per_customer: *tx,
                fraud: fraud.clone(),
                master_seed: cli.seed.unwrap_or(defaults.master_seed),
                db_sweep: None,
                kda: config,
                ..defaults
            };
            let population = Population::generate(&descriptor)?;
            let repo = Repository::open(&cli.storage)?;
            let offset = repo.next_id() - 1;
            let batch: Vec<_> =
                population.transactions().map(|t| kda::Transaction { id: t.id + offset, ..t.clone() }).collect();
            let (first, last) = (batch[0].id, batch[batch.len() - 1].id);
            repo.append_transactions(batch)?;
            let frauds: Vec<TxId> = population.frauds.iter().map(|id| id + offset).collect();
            writeln!(
                out,
                "simulated {customers} customer(s), transactions {first}..={last}, {} injected fraud(s)",
                frauds.len()
            )?;
            if !frauds.is_empty() {
                let ids: Vec<String> = frauds.iter().map(ToString::to_string).collect();
                writeln!(out, "fraud ids: {}", ids.join(" "))?;
            }
            if let Some(path) = &cli.out {
                #[derive(Serialize)]
                struct GroundTruth {
                    first_id: TxId,
                    last_id: TxId,
                    frauds: Vec<TxId>,
                }
                write_json(path, &GroundTruth { first_id: first, last_id: last, frauds })?;
            }
        }
        Command::Benchmark { descriptor, mode } => {
            let text = match descriptor {
                Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::File(path.clone(), e))?,
                None => DEFAULT_DESCRIPTOR.to_owned(),
            };
            let mut d: BenchmarkDescriptor =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("descriptor: {e}")))?;
            if let Some(m) = mode {
                d.mode = *m;
            }
            if let Some(seed) = cli.seed {
                d.master_seed = seed;
            }
            if cli.config.is_some() {
                d.kda = config;
            }
            let report = run_benchmark(&d)?;
            let rendered = report.render();
            write!(out, "{rendered}")?;
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| CliError::File(dir.clone(), e))?;
                write_json(&dir.join("report.json"), &report)?;
                let txt = dir.join("report.txt");
                std::fs::write(&txt, &rendered).map_err(|e| CliError::File(txt, e))?;
            }
        }
        Command::Serve { listen, token } => {
            let service = ServiceConfig {
                listen: *listen,
                storage: Some(cli.storage.clone()),
                kda: config,
                token: token.clone(),
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(crate::api::serve(service))?;
        }
        Command::Explain { tx } => {
            let repo = Repository::open(&cli.storage)?;
            let transaction = repo.transaction(*tx).ok_or(CliError::UnknownTransaction(*tx))?;
            let verdict = match repo.verdict(*tx) {
                Some(v) => v,
                None => kda_evaluate(&window_ending_at(&repo, &transaction, &config), &config)?,
            };
            writeln!(
                out,
                "{} {} {:02}h amount {} merchant {} terminal {} pos {} pr {}",
                transaction.pan,
                transaction.trx_date,
                transaction.trx_time,
                transaction.affective_amount,
                transaction.merchant_id,
                transaction.term_id,
                transaction.pos_condition,
                transaction.pr_code
            )?;
            writeln!(out, "{}", verdict.explain())?;
            if let Some(path) = &cli.out {
                write_json(path, &verdict)?;
            }
        }
    }
    Ok(())
}
