//! The named model suite: one spec per baseline or composed model in the
//! evaluation protocol, with uniform fit/predict dispatch over a [`Task`].

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{compute_metrics, MetricCore};
use crate::gbt::{self, BoostConfig, Ensemble, Objective};
use crate::glm::{
    build_zero_augmented_sample, fit_negbin, fit_ppml, fit_ppml_fe, fit_zip, predict_glm,
    AugRow, FeConfig, FeMeta, FeRow, GlmDesign, GlmFit, IrlsOptions, ZeroAugConfig,
    ZeroAugStats,
};
use crate::od::{MassDefinition, ZoneTable};
use crate::residual::{
    build_residual_frame, compose_predict, train_residual, AnchorKind, ResidualFrame,
};
use crate::spatial::{
    attraction_weights, competing_attraction, fit_gravity_unconstrained, predict_gravity,
    predict_opportunity, predict_radiation, tune_grid, ConstrainedPredictor,
    ConstrainedVariant, DecayForm, GravityParams, IpfOptions, OpportunityField,
    OpportunityVariant,
};
use crate::task::{Split, Task};

/// Tuning grids, ordered ascending so grid ties resolve toward the smaller
/// parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grids {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub rho: Vec<f64>,
    pub delta: Vec<f64>,
    pub absorption: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            beta: vec![0.5, 1.0, 1.5, 2.0],
            gamma: vec![0.5, 1.0, 1.5, 2.0],
            rho: vec![0.5, 1.0, 1.5, 2.0],
            delta: vec![0.5, 1.0, 1.5, 2.0],
            absorption: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
        }
    }
}

/// Which zone universe zero augmentation draws its matrices from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroUniverse {
    /// Every zone in the zone table.
    Full,
    /// Only zones appearing in the filtered task pairs.
    Task,
}

/// Shared fitting knobs for a whole suite run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub grids: Grids,
    pub zero_aug: ZeroAugConfig,
    pub zero_universe: ZeroUniverse,
    pub fe: FeConfig,
    /// Row cap for the negative-binomial / ZIP subsample.
    pub count_subsample: usize,
    pub boost: BoostConfig,
    pub ipf: IpfOptions,
    pub zip_em_iters: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            grids: Grids::default(),
            zero_aug: ZeroAugConfig {
                sampled_hours: 200,
                zero_budget: 1_000_000,
                zero_pos_ratio_target: None,
                seed: 42,
            },
            zero_universe: ZeroUniverse::Full,
            fe: FeConfig::default(),
            count_subsample: 50_000,
            boost: BoostConfig::default(),
            ipf: IpfOptions::default(),
            zip_em_iters: 30,
        }
    }
}

impl SuiteConfig {
    /// Re-seed every stochastic component for a seed-sweep run.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.boost.seed = seed;
        self.zero_aug.seed = seed;
        self.fe.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum ModelSpec {
    GravityFlow,
    GravityPoi,
    /// 24 independent unconstrained gravity fits by hour of day.
    GravityTimeSegmented,
    PpmlPositive,
    PpmlAll,
    PpmlFe,
    Radiation { mass: MassDefinition },
    DcHourly,
    OriginConstrained { decay: DecayForm, mass: MassDefinition },
    DestinationConstrained { decay: DecayForm, mass: MassDefinition },
    CompetingDestinations { mass: MassDefinition },
    Opportunity { variant: OpportunityVariant, mass: MassDefinition },
    NegBin,
    Zip,
    GbtDirect {
        objective: Objective,
        anchor: Option<AnchorKind>,
        monotone_distance: bool,
    },
    GbtFeSample,
    Ambit {
        anchor: AnchorKind,
        include_base_feature: bool,
        monotone_distance: bool,
    },
}

impl ModelSpec {
    pub fn gbt_direct() -> Self {
        ModelSpec::GbtDirect {
            objective: Objective::Squared,
            anchor: None,
            monotone_distance: false,
        }
    }

    pub fn ambit_poi() -> Self {
        ModelSpec::Ambit {
            anchor: AnchorKind::GravityPoi,
            include_base_feature: true,
            monotone_distance: false,
        }
    }

    pub fn name(&self) -> String {
        match self {
            ModelSpec::GravityFlow => "Gravity (flow mass)".into(),
            ModelSpec::GravityPoi => "Gravity (POI mass)".into(),
            ModelSpec::GravityTimeSegmented => "Gravity (hour segmented)".into(),
            ModelSpec::PpmlPositive => "Gravity (PPML, T>0)".into(),
            ModelSpec::PpmlAll => "Gravity (PPML, all)".into(),
            ModelSpec::PpmlFe => "Gravity (PPML + FE)".into(),
            ModelSpec::Radiation { mass } => match mass {
                MassDefinition::PoiTotal => "Radiation (POI)".into(),
                _ => "Radiation".into(),
            },
            ModelSpec::DcHourly => "DC Gravity (hourly)".into(),
            ModelSpec::OriginConstrained { decay, mass } => {
                constrained_name("Origin-constrained", *decay, *mass)
            }
            ModelSpec::DestinationConstrained { decay, mass } => {
                constrained_name("Destination-constrained", *decay, *mass)
            }
            ModelSpec::CompetingDestinations { mass } => match mass {
                MassDefinition::PoiTotal => "Competing destinations (POI)".into(),
                _ => "Competing destinations".into(),
            },
            ModelSpec::Opportunity { variant, mass } => {
                let poi = matches!(mass, MassDefinition::PoiTotal);
                match (variant, poi) {
                    (OpportunityVariant::Ops, false) => "OPS (opportunities)".into(),
                    (OpportunityVariant::Ops, true) => "OPS (POI)".into(),
                    (OpportunityVariant::InterveningOpportunities, false) => {
                        "Intervening opportunities (flow)".into()
                    }
                    (OpportunityVariant::InterveningOpportunities, true) => {
                        "Intervening opportunities (POI)".into()
                    }
                }
            }
            ModelSpec::NegBin => "Negative Binomial".into(),
            ModelSpec::Zip => "Zero-inflated Poisson".into(),
            ModelSpec::GbtDirect {
                objective, anchor, ..
            } => {
                let base = match objective {
                    Objective::Squared => "GBT Direct".to_string(),
                    Objective::Poisson => "GBT (Poisson)".to_string(),
                    Objective::Tweedie { .. } => "GBT (Tweedie)".to_string(),
                };
                match anchor {
                    None => base,
                    Some(a) => match objective {
                        Objective::Squared => format!("GBT Direct + {}", a.label()),
                        Objective::Poisson => format!("GBT (Poisson + {})", a.label()),
                        Objective::Tweedie { .. } => format!("GBT (Tweedie + {})", a.label()),
                    },
                }
            }
            ModelSpec::GbtFeSample => "GBT (FE-sample size)".into(),
            ModelSpec::Ambit {
                anchor,
                include_base_feature,
                ..
            } => {
                if *include_base_feature {
                    format!("AMBIT (Residual + {})", anchor.label())
                } else {
                    format!("AMBIT ({}, no base feat)", anchor.label())
                }
            }
        }
    }
}

fn constrained_name(prefix: &str, decay: DecayForm, mass: MassDefinition) -> String {
    let decay = match decay {
        DecayForm::Power => "power",
        DecayForm::Exponential => "exp",
    };
    match mass {
        MassDefinition::PoiTotal => format!("{prefix} ({decay}, POI)"),
        _ => format!("{prefix} ({decay})"),
    }
}

/// Diagnostics accumulated while predicting.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PredictNotes {
    /// Rows whose constrained-margin lookup was zero.
    pub zero_margin_rows: usize,
    /// FE levels unseen at fit time (reference-level fallback).
    pub unseen_levels: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum GlmPredictKind {
    PlainGravity {
        mass_o: MassDefinition,
        mass_d: MassDefinition,
    },
    Fe {
        mass_o: MassDefinition,
        mass_d: MassDefinition,
        meta: FeMeta,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FittedInner {
    Gravity {
        params: GravityParams,
        mass_o: MassDefinition,
        mass_d: MassDefinition,
    },
    TimeSegmented {
        params: Vec<Option<GravityParams>>,
        fallback: GravityParams,
        mass_o: MassDefinition,
        mass_d: MassDefinition,
    },
    Glm {
        fit: GlmFit,
        kind: GlmPredictKind,
        aug_stats: Option<ZeroAugStats>,
    },
    Constrained {
        predictor: ConstrainedPredictor,
    },
    Radiation {
        mass: MassDefinition,
        field: OpportunityField,
        outflow: Vec<f64>,
    },
    Opportunity {
        variant: OpportunityVariant,
        mass: MassDefinition,
        field: OpportunityField,
        outflow: Vec<f64>,
        absorption: f64,
    },
    Boosted {
        ensemble: Ensemble,
        anchor: Option<Box<FittedModel>>,
    },
    Ambit {
        anchor: Box<FittedModel>,
        ensemble: Ensemble,
        include_base_feature: bool,
    },
}

/// An immutable fitted model, ready to predict on any row set of the task it
/// was fit against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub name: String,
    pub inner: FittedInner,
    /// Grid-tuning trace when the model was tuned.
    pub tuning: Option<serde_json::Value>,
}

impl FittedModel {
    pub fn predict(&self, task: &Task, rows: &[usize]) -> Result<Vec<f64>> {
        Ok(self.predict_detailed(task, rows)?.0)
    }

    pub fn predict_detailed(
        &self,
        task: &Task,
        rows: &[usize],
    ) -> Result<(Vec<f64>, PredictNotes)> {
        let mut notes = PredictNotes::default();
        let preds = match &self.inner {
            FittedInner::Gravity {
                params,
                mass_o,
                mass_d,
            } => predict_gravity(
                params,
                task.mass(*mass_o),
                task.mass(*mass_d),
                &task.impedance,
                task.pair_cells(rows),
            ),
            FittedInner::TimeSegmented {
                params,
                fallback,
                mass_o,
                mass_d,
            } => {
                let (mo, md) = (task.mass(*mass_o), task.mass(*mass_d));
                task.hod_cells(rows)
                    .map(|(i, j, hod)| {
                        let p = params[hod].as_ref().unwrap_or(fallback);
                        p.rate(mo.get(i), md.get(j), task.impedance.get(i, j))
                    })
                    .collect()
            }
            FittedInner::Glm {
                fit,
                kind,
                aug_stats: _,
            } => {
                let (design, unseen) = glm_prediction_design(task, rows, fit, kind)?;
                notes.unseen_levels = unseen;
                predict_glm(fit, &design)?
            }
            FittedInner::Constrained { predictor } => {
                let (preds, zero_margin) = predictor.predict(task.hod_cells(rows));
                notes.zero_margin_rows = zero_margin;
                preds
            }
            FittedInner::Radiation {
                mass,
                field,
                outflow,
            } => predict_radiation(task.mass(*mass), field, outflow, task.pair_cells(rows)),
            FittedInner::Opportunity {
                variant,
                mass,
                field,
                outflow,
                absorption,
            } => predict_opportunity(
                *variant,
                field,
                task.mass(*mass),
                outflow,
                *absorption,
                task.pair_cells(rows),
            ),
            FittedInner::Boosted { ensemble, anchor } => {
                let base = match anchor {
                    Some(a) => {
                        let (b, inner_notes) = a.predict_detailed(task, rows)?;
                        notes.zero_margin_rows += inner_notes.zero_margin_rows;
                        notes.unseen_levels += inner_notes.unseen_levels;
                        Some(b)
                    }
                    None => None,
                };
                let features = task.features(rows, base.as_deref())?;
                ensemble
                    .predict(&features)?
                    .into_iter()
                    .map(|p| p.max(0.0))
                    .collect()
            }
            FittedInner::Ambit {
                anchor,
                ensemble,
                include_base_feature,
            } => {
                let (baseline, inner_notes) = anchor.predict_detailed(task, rows)?;
                notes.zero_margin_rows += inner_notes.zero_margin_rows;
                notes.unseen_levels += inner_notes.unseen_levels;
                let features =
                    task.features(rows, include_base_feature.then_some(baseline.as_slice()))?;
                compose_predict(ensemble, &baseline, &features)?
            }
        };
        Ok((preds, notes))
    }

    /// Serializable manifest of the fitted parameters.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fit one model spec against a task.
pub fn fit_model(spec: &ModelSpec, task: &Task, config: &SuiteConfig) -> Result<FittedModel> {
    let name = spec.name();
    let train_rows = task.rows(Split::Train);
    let inner: (FittedInner, Option<serde_json::Value>) = match spec {
        ModelSpec::GravityFlow => (
            FittedInner::Gravity {
                params: fit_gravity_unconstrained(
                    &task.flows,
                    train_rows,
                    &task.zones,
                    &task.mass_flow_out,
                    &task.mass_flow_in,
                    &task.impedance,
                )?,
                mass_o: MassDefinition::FlowOut,
                mass_d: MassDefinition::FlowIn,
            },
            None,
        ),
        ModelSpec::GravityPoi => (
            FittedInner::Gravity {
                params: fit_gravity_unconstrained(
                    &task.flows,
                    train_rows,
                    &task.zones,
                    &task.mass_poi,
                    &task.mass_poi,
                    &task.impedance,
                )?,
                mass_o: MassDefinition::PoiTotal,
                mass_d: MassDefinition::PoiTotal,
            },
            None,
        ),
        ModelSpec::GravityTimeSegmented => {
            let fallback = fit_gravity_unconstrained(
                &task.flows,
                train_rows,
                &task.zones,
                &task.mass_flow_out,
                &task.mass_flow_in,
                &task.impedance,
            )?;
            let mut params: Vec<Option<GravityParams>> = vec![None; 24];
            for (hod, slot) in params.iter_mut().enumerate() {
                let rows: Vec<usize> = train_rows
                    .iter()
                    .filter(|&&i| task.flows.row(i).hour.hour_of_day() as usize == hod)
                    .copied()
                    .collect();
                *slot = fit_gravity_unconstrained(
                    &task.flows,
                    &rows,
                    &task.zones,
                    &task.mass_flow_out,
                    &task.mass_flow_in,
                    &task.impedance,
                )
                .ok();
            }
            (
                FittedInner::TimeSegmented {
                    params,
                    fallback,
                    mass_o: MassDefinition::FlowOut,
                    mass_d: MassDefinition::FlowIn,
                },
                None,
            )
        }
        ModelSpec::PpmlPositive => {
            let (design, y) = plain_glm_design(task, train_rows)?;
            let fit = fit_ppml(&design, &y, &IrlsOptions::default())?;
            (
                FittedInner::Glm {
                    fit,
                    kind: GlmPredictKind::PlainGravity {
                        mass_o: MassDefinition::FlowOut,
                        mass_d: MassDefinition::FlowIn,
                    },
                    aug_stats: None,
                },
                None,
            )
        }
        ModelSpec::PpmlAll => {
            let (rows, stats) = zero_augmented_rows(task, config)?;
            let (design, y) = aug_glm_design(task, &rows)?;
            let fit = fit_ppml(&design, &y, &IrlsOptions::default())?;
            (
                FittedInner::Glm {
                    fit,
                    kind: GlmPredictKind::PlainGravity {
                        mass_o: MassDefinition::FlowOut,
                        mass_d: MassDefinition::FlowIn,
                    },
                    aug_stats: Some(stats),
                },
                None,
            )
        }
        ModelSpec::PpmlFe => {
            let (rows, stats) = zero_augmented_rows(task, config)?;
            let fe_rows: Vec<FeRow> = rows
                .iter()
                .map(|r| FeRow {
                    origin_code: r.origin_idx as u32,
                    dest_code: r.dest_idx as u32,
                    hour_of_week: r.hour.hour_of_week(),
                    log_m_o: task.mass_flow_out.get(r.origin_idx).ln(),
                    log_m_d: task.mass_flow_in.get(r.dest_idx).ln(),
                    log_d: task.impedance.get(r.origin_idx, r.dest_idx).ln(),
                    y: r.flow,
                })
                .collect();
            let (fit, meta) = fit_ppml_fe(&fe_rows, &config.fe)?;
            (
                FittedInner::Glm {
                    fit,
                    kind: GlmPredictKind::Fe {
                        mass_o: MassDefinition::FlowOut,
                        mass_d: MassDefinition::FlowIn,
                        meta,
                    },
                    aug_stats: Some(stats),
                },
                None,
            )
        }
        ModelSpec::Radiation { mass } => {
            let field = OpportunityField::build(task.mass(*mass), &task.impedance);
            (
                FittedInner::Radiation {
                    mass: *mass,
                    field,
                    outflow: task.mean_outflow.clone(),
                },
                None,
            )
        }
        ModelSpec::DcHourly => {
            let (beta, trace) = tune_grid("mae", &config.grids.beta, |&beta| {
                let p = ConstrainedPredictor::doubly(
                    DecayForm::Power,
                    beta,
                    &task.impedance,
                    &task.margins,
                    &config.ipf,
                )?;
                validation_mae_cells(task, &p)
            })?;
            let predictor = ConstrainedPredictor::doubly(
                DecayForm::Power,
                beta,
                &task.impedance,
                &task.margins,
                &config.ipf,
            )?;
            (
                FittedInner::Constrained { predictor },
                Some(serde_json::to_value(&trace)?),
            )
        }
        ModelSpec::OriginConstrained { decay, mass } => {
            fit_single_constrained(task, config, ConstrainedVariant::Origin, *decay, *mass)?
        }
        ModelSpec::DestinationConstrained { decay, mass } => {
            fit_single_constrained(task, config, ConstrainedVariant::Destination, *decay, *mass)?
        }
        ModelSpec::CompetingDestinations { mass } => {
            // stage 1: plain origin-constrained decay/attraction exponents
            let grid_bg: Vec<(f64, f64)> = config
                .grids
                .beta
                .iter()
                .flat_map(|&b| config.grids.gamma.iter().map(move |&g| (b, g)))
                .collect();
            let mass_vec = task.mass(*mass);
            let (base, base_trace) = tune_grid("mae", &grid_bg, |&(beta, gamma)| {
                let attraction = attraction_weights(mass_vec, gamma);
                let p = ConstrainedPredictor::single(
                    ConstrainedVariant::Origin,
                    DecayForm::Power,
                    beta,
                    &attraction,
                    &task.impedance,
                    &task.margins,
                );
                validation_mae_cells(task, &p)
            })?;
            // stage 2: competition exponent and accessibility decay
            let grid_rd: Vec<(f64, f64)> = config
                .grids
                .rho
                .iter()
                .flat_map(|&r| config.grids.delta.iter().map(move |&d| (r, d)))
                .collect();
            let (best_rd, trace) = tune_grid("mae", &grid_rd, |&(rho, delta)| {
                let attraction =
                    competing_attraction(mass_vec, &task.impedance, base.1, rho, delta);
                let p = ConstrainedPredictor::single(
                    ConstrainedVariant::Origin,
                    DecayForm::Power,
                    base.0,
                    &attraction,
                    &task.impedance,
                    &task.margins,
                );
                validation_mae_cells(task, &p)
            })?;
            let attraction =
                competing_attraction(mass_vec, &task.impedance, base.1, best_rd.0, best_rd.1);
            let predictor = ConstrainedPredictor::single(
                ConstrainedVariant::Origin,
                DecayForm::Power,
                base.0,
                &attraction,
                &task.impedance,
                &task.margins,
            );
            (
                FittedInner::Constrained { predictor },
                Some(serde_json::json!({
                    "base": serde_json::to_value(&base_trace)?,
                    "competition": serde_json::to_value(&trace)?,
                })),
            )
        }
        ModelSpec::Opportunity { variant, mass } => {
            let mass_vec = task.mass(*mass);
            let field = OpportunityField::build(mass_vec, &task.impedance);
            let outflow = task.mean_outflow.clone();
            let (absorption, trace) = match variant {
                OpportunityVariant::Ops => (0.0, None),
                OpportunityVariant::InterveningOpportunities => {
                    let (l, trace) = tune_grid("mae", &config.grids.absorption, |&l| {
                        let rows = task.rows(Split::Val);
                        let preds = predict_opportunity(
                            *variant,
                            &field,
                            mass_vec,
                            &outflow,
                            l,
                            task.pair_cells(rows),
                        );
                        Ok(compute_metrics(&task.observed(rows), &preds).mae)
                    })?;
                    (l, Some(serde_json::to_value(&trace)?))
                }
            };
            (
                FittedInner::Opportunity {
                    variant: *variant,
                    mass: *mass,
                    field,
                    outflow,
                    absorption,
                },
                trace,
            )
        }
        ModelSpec::NegBin | ModelSpec::Zip => {
            let (rows, stats) = zero_augmented_rows(task, config)?;
            let rows = subsample_aug_rows(rows, config.count_subsample, config.zero_aug.seed);
            let (design, y) = aug_glm_design(task, &rows)?;
            let fit = match spec {
                ModelSpec::NegBin => fit_negbin(&design, &y, &IrlsOptions::default())?,
                _ => fit_zip(&design, &y, config.zip_em_iters, &IrlsOptions::default())?,
            };
            (
                FittedInner::Glm {
                    fit,
                    kind: GlmPredictKind::PlainGravity {
                        mass_o: MassDefinition::FlowOut,
                        mass_d: MassDefinition::FlowIn,
                    },
                    aug_stats: Some(stats),
                },
                None,
            )
        }
        ModelSpec::GbtDirect {
            objective,
            anchor,
            monotone_distance,
        } => {
            let anchor_model = match anchor {
                Some(kind) => Some(Box::new(fit_model(&anchor_spec(*kind), task, config)?)),
                None => None,
            };
            let val_rows = task.rows(Split::Val);
            let (base_train, base_val) = match &anchor_model {
                Some(a) => (
                    Some(a.predict(task, train_rows)?),
                    Some(a.predict(task, val_rows)?),
                ),
                None => (None, None),
            };
            let features = task.features(train_rows, base_train.as_deref())?;
            let val_features = task.features(val_rows, base_val.as_deref())?;
            let mut boost = BoostConfig {
                objective: *objective,
                ..config.boost.clone()
            };
            if *monotone_distance {
                boost.monotone.insert("distance_km".into(), -1);
            }
            let ensemble = gbt::train(
                &features,
                &task.observed(train_rows),
                &val_features,
                &task.observed(val_rows),
                &boost,
            )?;
            (
                FittedInner::Boosted {
                    ensemble,
                    anchor: anchor_model,
                },
                None,
            )
        }
        ModelSpec::GbtFeSample => {
            let capped = subsample_rows(train_rows, config.fe.max_rows, config.fe.seed);
            let val_rows = task.rows(Split::Val);
            let features = task.features(&capped, None)?;
            let val_features = task.features(val_rows, None)?;
            let ensemble = gbt::train(
                &features,
                &task.observed(&capped),
                &val_features,
                &task.observed(val_rows),
                &config.boost,
            )?;
            (
                FittedInner::Boosted {
                    ensemble,
                    anchor: None,
                },
                None,
            )
        }
        ModelSpec::Ambit {
            anchor,
            include_base_feature,
            monotone_distance,
        } => {
            let anchor_model = Box::new(fit_model(&anchor_spec(*anchor), task, config)?);
            let val_rows = task.rows(Split::Val);
            let frame_train = residual_frame(task, &anchor_model, train_rows, *include_base_feature)?;
            let frame_val = residual_frame(task, &anchor_model, val_rows, *include_base_feature)?;
            let mut boost = config.boost.clone();
            if *monotone_distance {
                boost.monotone.insert("distance_km".into(), -1);
            }
            let ensemble = train_residual(&frame_train, &frame_val, &boost)?;
            (
                FittedInner::Ambit {
                    anchor: anchor_model,
                    ensemble,
                    include_base_feature: *include_base_feature,
                },
                None,
            )
        }
    };
    let (inner, tuning) = inner;
    Ok(FittedModel {
        spec: spec.clone(),
        name,
        inner,
        tuning,
    })
}

/// Residual frame for a fitted anchor over the given rows.
pub fn residual_frame(
    task: &Task,
    anchor: &FittedModel,
    rows: &[usize],
    include_base_feature: bool,
) -> Result<ResidualFrame> {
    let baseline = anchor.predict(task, rows)?;
    let features = task.features(rows, include_base_feature.then_some(baseline.as_slice()))?;
    build_residual_frame(task.observed(rows), baseline, features)
}

/// The anchor kinds map onto plain model specs; time-segmented gravity is
/// its own fit below.
fn anchor_spec(kind: AnchorKind) -> ModelSpec {
    match kind {
        AnchorKind::GravityFlow => ModelSpec::GravityFlow,
        AnchorKind::GravityPoi => ModelSpec::GravityPoi,
        AnchorKind::Ppml => ModelSpec::PpmlPositive,
        AnchorKind::PpmlAll => ModelSpec::PpmlAll,
        AnchorKind::GravityDc => ModelSpec::DcHourly,
        AnchorKind::GravityTimeSegmented => ModelSpec::GravityTimeSegmented,
    }
}

fn fit_single_constrained(
    task: &Task,
    config: &SuiteConfig,
    variant: ConstrainedVariant,
    decay: DecayForm,
    mass: MassDefinition,
) -> Result<(FittedInner, Option<serde_json::Value>)> {
    let grid: Vec<(f64, f64)> = config
        .grids
        .beta
        .iter()
        .flat_map(|&b| config.grids.gamma.iter().map(move |&g| (b, g)))
        .collect();
    let mass_vec = task.mass(mass);
    let (best, trace) = tune_grid("mae", &grid, |&(beta, gamma)| {
        let attraction = attraction_weights(mass_vec, gamma);
        let p = ConstrainedPredictor::single(
            variant,
            decay,
            beta,
            &attraction,
            &task.impedance,
            &task.margins,
        );
        validation_mae_cells(task, &p)
    })?;
    let attraction = attraction_weights(mass_vec, best.1);
    let predictor = ConstrainedPredictor::single(
        variant,
        decay,
        best.0,
        &attraction,
        &task.impedance,
        &task.margins,
    );
    Ok((
        FittedInner::Constrained { predictor },
        Some(serde_json::to_value(&trace)?),
    ))
}

fn validation_mae_cells(task: &Task, predictor: &ConstrainedPredictor) -> Result<f64> {
    let rows = task.rows(Split::Val);
    let (preds, _) = predictor.predict(task.hod_cells(rows));
    Ok(compute_metrics(&task.observed(rows), &preds).mae)
}

/// Zone universe for zero augmentation.
fn zero_universe(task: &Task, which: ZeroUniverse) -> Result<ZoneTable> {
    match which {
        ZeroUniverse::Full => Ok(task.zones.clone()),
        ZeroUniverse::Task => {
            let mut used: Vec<bool> = vec![false; task.zones.len()];
            for (o, d) in task.pairs.iter() {
                if let Some(i) = task.zones.index_of(o) {
                    used[i] = true;
                }
                if let Some(j) = task.zones.index_of(d) {
                    used[j] = true;
                }
            }
            let zones: Vec<_> = (0..task.zones.len())
                .filter(|&i| used[i])
                .map(|i| task.zones.zone(i).clone())
                .collect();
            ZoneTable::new(zones)
        }
    }
}

fn zero_augmented_rows(task: &Task, config: &SuiteConfig) -> Result<(Vec<AugRow>, ZeroAugStats)> {
    let universe = zero_universe(task, config.zero_universe)?;
    let sample = build_zero_augmented_sample(
        &task.flows,
        task.rows(Split::Train),
        &task.flows_full,
        &universe,
        task.config.split.train_end,
        &config.zero_aug,
    )?;
    // map universe indices back onto the task zone table
    let remap: Vec<usize> = (0..universe.len())
        .map(|i| task.zones.index_of(universe.id_at(i)).expect("subset zone"))
        .collect();
    let rows = sample
        .rows
        .into_iter()
        .map(|r| AugRow {
            origin_idx: remap[r.origin_idx],
            dest_idx: remap[r.dest_idx],
            ..r
        })
        .collect();
    Ok((rows, sample.stats))
}

fn subsample_aug_rows(mut rows: Vec<AugRow>, cap: usize, seed: u64) -> Vec<AugRow> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if rows.len() <= cap {
        return rows;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rows.shuffle(&mut rng);
    rows.truncate(cap);
    rows
}

fn subsample_rows(rows: &[usize], cap: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if rows.len() <= cap {
        return rows.to_vec();
    }
    let mut out = rows.to_vec();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    out.shuffle(&mut rng);
    out.truncate(cap);
    out.sort_unstable();
    out
}

/// Dense gravity design over positive task rows.
fn plain_glm_design(task: &Task, rows: &[usize]) -> Result<(GlmDesign, Vec<f64>)> {
    let mut log_m_o = Vec::with_capacity(rows.len());
    let mut log_m_d = Vec::with_capacity(rows.len());
    let mut log_d = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    for ((i, j), &row) in task.pair_cells(rows).zip(rows) {
        log_m_o.push(task.mass_flow_out.get(i).ln());
        log_m_d.push(task.mass_flow_in.get(j).ln());
        log_d.push(task.impedance.get(i, j).ln());
        y.push(f64::from(task.flows.row(row).flow));
    }
    let design = GlmDesign::dense(
        &[
            ("log_mass_origin", &log_m_o),
            ("log_mass_dest", &log_m_d),
            ("log_distance", &log_d),
        ],
        rows.len(),
    )?;
    Ok((design, y))
}

/// Dense gravity design over zero-augmented rows.
fn aug_glm_design(task: &Task, rows: &[AugRow]) -> Result<(GlmDesign, Vec<f64>)> {
    let n = rows.len();
    let mut log_m_o = Vec::with_capacity(n);
    let mut log_m_d = Vec::with_capacity(n);
    let mut log_d = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for r in rows {
        log_m_o.push(task.mass_flow_out.get(r.origin_idx).ln());
        log_m_d.push(task.mass_flow_in.get(r.dest_idx).ln());
        log_d.push(task.impedance.get(r.origin_idx, r.dest_idx).ln());
        y.push(r.flow);
    }
    let design = GlmDesign::dense(
        &[
            ("log_mass_origin", &log_m_o),
            ("log_mass_dest", &log_m_d),
            ("log_distance", &log_d),
        ],
        n,
    )?;
    Ok((design, y))
}

fn glm_prediction_design(
    task: &Task,
    rows: &[usize],
    fit: &GlmFit,
    kind: &GlmPredictKind,
) -> Result<(GlmDesign, usize)> {
    let (mass_o, mass_d, is_fe) = match kind {
        GlmPredictKind::PlainGravity { mass_o, mass_d } => (*mass_o, *mass_d, false),
        GlmPredictKind::Fe { mass_o, mass_d, .. } => (*mass_o, *mass_d, true),
    };
    let n = rows.len();
    let mut log_m_o = Vec::with_capacity(n);
    let mut log_m_d = Vec::with_capacity(n);
    let mut log_d = Vec::with_capacity(n);
    let (mo, md) = (task.mass(mass_o), task.mass(mass_d));
    for (i, j) in task.pair_cells(rows) {
        log_m_o.push(mo.get(i).ln());
        log_m_d.push(md.get(j).ln());
        log_d.push(task.impedance.get(i, j).ln());
    }
    let numeric: [(&str, &[f64]); 3] = [
        ("log_mass_origin", &log_m_o),
        ("log_mass_dest", &log_m_d),
        ("log_distance", &log_d),
    ];
    if !is_fe {
        let design = GlmDesign::for_prediction(&fit.schema, &numeric, &[], n)?;
        return Ok((design, 0));
    }
    let mut origin = Vec::with_capacity(n);
    let mut dest = Vec::with_capacity(n);
    let mut how = Vec::with_capacity(n);
    for ((i, j), &row) in task.pair_cells(rows).zip(rows) {
        origin.push(i as u32);
        dest.push(j as u32);
        how.push(task.flows.row(row).hour.hour_of_week());
    }
    let mut fe: Vec<(&str, Vec<u32>)> = vec![
        ("origin", origin.clone()),
        ("dest", dest.clone()),
        ("hour_of_week", how.clone()),
    ];
    if fit.schema.fe_groups.len() == 5 {
        fe.push((
            "origin_x_time",
            origin.iter().zip(&how).map(|(o, h)| o * 168 + h).collect(),
        ));
        fe.push((
            "dest_x_time",
            dest.iter().zip(&how).map(|(d, h)| d * 168 + h).collect(),
        ));
    }
    let fe_refs: Vec<(&str, &[u32])> = fe.iter().map(|(name, v)| (*name, v.as_slice())).collect();
    let design = GlmDesign::for_prediction(&fit.schema, &numeric, &fe_refs, n)?;
    let unseen = design.unseen_levels;
    Ok((design, unseen))
}

/// Fit + evaluate with wall-clock timing; the core of every suite preset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub name: String,
    pub core: MetricCore,
    pub train_s: f64,
    pub pred_s: f64,
    pub notes: PredictNotes,
}

pub fn fit_and_eval(
    spec: &ModelSpec,
    task: &Task,
    config: &SuiteConfig,
    rows: &[usize],
) -> Result<EvalOutcome> {
    let t0 = std::time::Instant::now();
    let model = fit_model(spec, task, config)?;
    let train_s = t0.elapsed().as_secs_f64();
    let t1 = std::time::Instant::now();
    let (preds, notes) = model.predict_detailed(task, rows)?;
    let pred_s = t1.elapsed().as_secs_f64();
    let core = compute_metrics(&task.observed(rows), &preds);
    Ok(EvalOutcome {
        name: model.name,
        core,
        train_s,
        pred_s,
        notes,
    })
}

/// Per (anchor, seed) residual-composition outcome; failures are isolated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationOutcome {
    pub anchor: AnchorKind,
    pub seed: u64,
    pub name: String,
    pub result: std::result::Result<MetricCore, String>,
}

/// Fit AMBIT for each (anchor, seed) and evaluate on the given rows.
pub fn run_anchor_ablation(
    task: &Task,
    anchors: &[AnchorKind],
    config: &SuiteConfig,
    seeds: &[u64],
    rows: &[usize],
) -> Vec<AblationOutcome> {
    let mut out = Vec::with_capacity(anchors.len() * seeds.len());
    for &anchor in anchors {
        for &seed in seeds {
            let spec = ModelSpec::Ambit {
                anchor,
                include_base_feature: true,
                monotone_distance: false,
            };
            let cfg = config.clone().with_seed(seed);
            let result = fit_and_eval(&spec, task, &cfg, rows)
                .map(|o| o.core)
                .map_err(|e| e.to_string());
            out.push(AblationOutcome {
                anchor,
                seed,
                name: spec.name(),
                result,
            });
        }
    }
    out
}

