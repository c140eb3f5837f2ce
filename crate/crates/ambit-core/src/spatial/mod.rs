//! Physical spatial-interaction baselines: unconstrained gravity, margin-
//! constrained variants via IPF, competing destinations, radiation, and
//! opportunity models, plus decay-parameter grid tuning.

mod constrained;
mod gravity;
mod ipf;
mod radiation;
mod tuning;

pub use constrained::{
    attraction_weights, competing_attraction, ConstrainedPredictor, ConstrainedVariant,
    MarginSet, N_HOUR_SLICES,
};
pub use gravity::{fit_gravity_unconstrained, predict_gravity, DecayForm, GravityParams};
pub use radiation::{
    predict_opportunity, predict_radiation, OpportunityField, OpportunityVariant,
};
pub use ipf::{calibrate_ipf, IpfOptions, IpfResult};
pub use tuning::{tune_grid, TuneCandidate, TuneTrace};
