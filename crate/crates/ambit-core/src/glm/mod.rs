//! Poisson-family count GLMs: PPML via IRLS on dense or sparse one-hot
//! designs, zero-augmented training samples, high-dimensional fixed effects
//! on subsamples, and negative-binomial / zero-inflated-Poisson baselines.

mod count_extra;
mod design;
mod fixed_effects;
mod irls;
mod zero_aug;

pub use count_extra::{fit_negbin, fit_zip};
pub use design::{compact_codes, DesignSchema, FeGroupSchema, GlmDesign};
pub use fixed_effects::{fit_ppml_fe, FeConfig, FeMeta, FeRow};
pub use irls::{fit_ppml, predict_glm, GlmFamily, GlmFit, IrlsOptions};
pub use zero_aug::{
    build_zero_augmented_sample, AugRow, ZeroAugConfig, ZeroAugSample, ZeroAugStats,
};
