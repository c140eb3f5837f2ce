//! Gray-box origin-destination (OD) flow modeling.
//!
//! The crate is organized around one pipeline: ingest or synthesize hourly OD
//! flows ([`od`]), assemble a prediction task ([`task`]), fit physical
//! spatial-interaction baselines ([`spatial`]) and Poisson-family GLMs
//! ([`glm`]), learn boosted-tree corrections on top of a baseline in log
//! space ([`residual`], [`gbt`]), attribute the learned corrections back to
//! features ([`shap`]), and score everything under a shared evaluation
//! protocol ([`eval`]).

pub mod error;
pub mod eval;
pub mod features;
pub mod gbt;
pub mod glm;
pub mod models;
pub mod od;
pub mod residual;
pub mod shap;
pub mod spatial;
pub mod task;

pub use error::{Error, Result};
