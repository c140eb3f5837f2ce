//! Exact additive attribution for the boosted ensemble: path-dependent
//! TreeSHAP, global summaries, example-level waterfalls, and rank-stability
//! diagnostics.

mod stability;
mod summary;
mod treeshap;

pub use stability::{rank_stability, spearman_rho, RankStabilityReport};
pub use summary::{
    global_summary, waterfall_examples, write_attributions_csv, write_summary_csv,
    FeatureSummary, WaterfallRecord, WaterfallSelector,
};
pub use treeshap::{expected_value, shap_values, shap_values_bruteforce, AttributionRow};
