//! Seeded synthetic customers, fraud injection, evaluation metrics and the
//! benchmark harness.

mod benchmark;
mod fraud;
mod metrics;
mod profile;

pub use benchmark::{run_benchmark, BenchmarkDescriptor, BenchmarkReport, DbSweepPoint, Mode, Population};
pub use fraud::{inject_fraud, FraudKind, FraudSpec};
pub use metrics::{compute_metrics, ClassCount, EvaluationReport, GroundTruth, Model, ModelMetrics};
pub use profile::{generate_history, CustomerProfile, Weighted};
