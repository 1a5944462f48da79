//! Per-customer clustering ensemble for transaction fraud screening.
//!
//! Every customer's recent history (its *window*) is clustered three ways:
//!
//! * [`kmeans`]: Lloyd's k-means; members of sparse clusters are suspicious.
//! * [`dbscan_lof`]: DBSCAN labels plus Local Outlier Factor scores; noise or
//!   high-LOF points are suspicious.
//! * [`agglomerative`]: average-link hierarchical clustering cut at a fixed
//!   cluster count; singletons are suspicious.
//!
//! [`ensemble`] fuses the three flags with a 2-of-3 vote, online (one new
//! transaction against a fresh fit of its window) or offline (every member of
//! a window). [`repository`] persists histories, per-algorithm results and the
//! alert lifecycle, and [`simgen`] generates seeded synthetic populations with
//! injected fraud and runs the benchmark harness.

pub mod agglomerative;
pub mod dbscan_lof;
pub mod ensemble;
mod error;
pub mod ingest;
pub mod kmeans;
pub mod repository;
pub mod seed;
pub mod simgen;
pub mod txmodel;
pub mod verdict;

pub use ensemble::{kda_evaluate, kda_evaluate_offline, select_window, vote, Action, KdaConfig, KdaVerdict, Policy};
pub use error::{Error, Result};
pub use txmodel::{
    filter_eligible, preprocess, FeatureSet, FeatureVector, Measure, RawTransaction, Transaction, TxId, TxnGroup,
};
pub use verdict::{Algorithm, AlgorithmVerdict, Evidence};
