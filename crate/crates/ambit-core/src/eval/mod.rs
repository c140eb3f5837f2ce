//! Metrics, grouped diagnostics, holdout protocols, and seed aggregation.

mod metrics;
mod quantiles;
mod seed_stats;

pub use metrics::{compute_metrics, cpc_hour_averaged, MetricCore, MetricReport};
pub use quantiles::{quantile_diagnostics, QuantileBinReport, QuantileDiagnostics};
pub use seed_stats::{aggregate_seed_stats, SeedStat};
