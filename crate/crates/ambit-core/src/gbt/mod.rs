//! From-scratch gradient-boosted regression trees: histogram split search,
//! squared / Poisson / Tweedie objectives, per-feature monotone constraints,
//! and validation-based early stopping.

mod binning;
mod monotone;
mod objective;
mod train;
mod tree;

pub use binning::{BinMapper, DEFAULT_MAX_BINS};
pub use monotone::{enforce_monotone_check, MonotoneReport, MonotoneViolation};
pub use objective::Objective;
pub use train::{train, BoostConfig, Ensemble};
pub use tree::{Tree, TreeNode};
