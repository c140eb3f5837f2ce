//! Exploratory end-to-end run over the model suite on synthetic benchmarks.
//! Run with `cargo test -p ambit-core --test suite_diagnostics -- --nocapture --ignored`.

use ambit_core::gbt::{BoostConfig, Objective};
use ambit_core::models::{fit_and_eval, ModelSpec, SuiteConfig};
use ambit_core::od::{
    generate_synthetic_city, ImpedanceSource, MassDefinition, SamplingMode, SplitSpec,
    SyntheticConfig,
};
use ambit_core::residual::AnchorKind;
use ambit_core::spatial::{DecayForm, OpportunityVariant};
use ambit_core::task::{Split, Task, TaskConfig};

fn build_task(synth: &SyntheticConfig, min_total: u64, max_train: usize) -> Task {
    let city = generate_synthetic_city(synth).unwrap();
    let start = synth.start_hour();
    let n_hours = synth.n_hours as i64;
    let (t_train, t_val) = (n_hours * 7 / 10, n_hours * 85 / 100);
    Task::build(
        city.zones,
        city.flows,
        TaskConfig {
            min_total,
            top_k: usize::MAX,
            split: SplitSpec {
                train_end: start.plus_hours(t_train),
                val_end: start.plus_hours(t_val),
                test_end: start.plus_hours(n_hours),
                sampling: SamplingMode::Random,
                max_train_rows: max_train,
                max_eval_rows: usize::MAX,
                seed: 42,
            },
            impedance: ImpedanceSource::EuclideanCentroid,
        },
        None,
    )
    .unwrap()
}

fn quick_boost() -> BoostConfig {
    BoostConfig {
        n_estimators: 300,
        max_depth: 6,
        learning_rate: 0.05,
        subsample: 0.8,
        colsample: 0.8,
        early_stopping_rounds: 30,
        min_child_weight: 5.0,
        ..Default::default()
    }
}

fn flow_stats(tag: &str, task: &Task) {
    let mut flows: Vec<u32> = task.flows.rows().iter().map(|r| r.flow).collect();
    flows.sort_unstable();
    let n = flows.len();
    println!(
        "{tag} flows: median {} p90 {} p99 {} max {}; in-task flow share {:.3}",
        flows[n / 2],
        flows[n * 9 / 10],
        flows[n * 99 / 100],
        flows[n - 1],
        task.flows.total_flow() as f64 / task.flows_full.total_flow() as f64,
    );
}

#[test]
#[ignore = "diagnostic print run"]
fn print_suite_on_benchmarks() {
    // benchmark A: POI-multiplier city for the residual-improvement check
    let synth_a = SyntheticConfig {
        n_zones: 40,
        n_hours: 400,
        seed: 1234,
        extent_km: 20.0,
        poi_log_sd: 0.4,
        target_mean_flow: Some(0.8),
        hour_amplitude: 0.4,
        poi_multiplier: 0.5,
        zero_inflation: 0.0,
        weekend_factor: 0.7,
        ..SyntheticConfig::default()
    };
    let task_a = build_task(&synth_a, 30, 200_000);
    println!(
        "benchmark A: {} task rows, {} pairs, train {} val {} test {}",
        task_a.flows.len(),
        task_a.pairs.len(),
        task_a.rows(Split::Train).len(),
        task_a.rows(Split::Val).len(),
        task_a.rows(Split::Test).len()
    );
    flow_stats("A", &task_a);
    let cfg = SuiteConfig {
        boost: quick_boost(),
        ..Default::default()
    };
    let test_rows: Vec<usize> = task_a.rows(Split::Test).to_vec();
    for spec in [
        ModelSpec::GravityPoi,
        ModelSpec::ambit_poi(),
        ModelSpec::gbt_direct(),
    ] {
        let out = fit_and_eval(&spec, &task_a, &cfg, &test_rows).unwrap();
        println!(
            "A {:<40} mae {:.4} rmse {:.4} r2 {:?} cpc {:.4} ({:.1}s train)",
            out.name, out.core.mae, out.core.rmse, out.core.r2, out.core.cpc, out.train_s
        );
    }

    // benchmark B: heavy-tailed zero-inflated city for the ordering check
    let synth_b = SyntheticConfig {
        n_zones: 50,
        n_hours: 400,
        seed: 77,
        extent_km: 20.0,
        beta: 1.3,
        target_mean_flow: Some(0.6),
        hour_amplitude: 0.18,
        poi_multiplier: 0.3,
        static_poi_multiplier: true,
        zero_inflation: 0.25,
        hole_inflation: 0.45,
        weekend_factor: 0.45,
        zone_day_shock_sd: 0.65,
        poi_log_sd: 0.45,
        ..SyntheticConfig::default()
    };
    let task_b = build_task(&synth_b, 25, 200_000);
    println!(
        "benchmark B: {} task rows, {} pairs",
        task_b.flows.len(),
        task_b.pairs.len()
    );
    flow_stats("B", &task_b);
    let test_rows: Vec<usize> = task_b.rows(Split::Test).to_vec();
    for spec in [
        ModelSpec::Radiation {
            mass: MassDefinition::FlowOut,
        },
        ModelSpec::OriginConstrained {
            decay: DecayForm::Power,
            mass: MassDefinition::FlowIn,
        },
        ModelSpec::DestinationConstrained {
            decay: DecayForm::Power,
            mass: MassDefinition::FlowOut,
        },
        ModelSpec::DcHourly,
        ModelSpec::CompetingDestinations {
            mass: MassDefinition::FlowIn,
        },
        ModelSpec::Opportunity {
            variant: OpportunityVariant::Ops,
            mass: MassDefinition::FlowOut,
        },
        ModelSpec::Opportunity {
            variant: OpportunityVariant::InterveningOpportunities,
            mass: MassDefinition::FlowOut,
        },
        ModelSpec::PpmlPositive,
        ModelSpec::PpmlAll,
        ModelSpec::NegBin,
        ModelSpec::Zip,
        ModelSpec::GravityFlow,
        ModelSpec::GravityPoi,
        ModelSpec::gbt_direct(),
        ModelSpec::ambit_poi(),
        ModelSpec::GbtDirect {
            objective: Objective::Poisson,
            anchor: None,
            monotone_distance: false,
        },
        ModelSpec::GbtDirect {
            objective: Objective::Tweedie { power: 1.5 },
            anchor: Some(AnchorKind::GravityPoi),
            monotone_distance: false,
        },
    ] {
        match fit_and_eval(&spec, &task_b, &cfg, &test_rows) {
            Ok(out) => {
                let model = ambit_core::models::fit_model(&spec, &task_b, &cfg).unwrap();
                let preds = model.predict(&task_b, &test_rows).unwrap();
                let obs = task_b.observed(&test_rows);
                let ratio: f64 = preds.iter().map(|p| p.max(0.0)).sum::<f64>()
                    / obs.iter().sum::<f64>();
                println!(
                    "B {:<40} mae {:.4} rmse {:.4} r2 {:?} cpc {:.4} vol {:.3} ({:.1}s)",
                    out.name, out.core.mae, out.core.rmse, out.core.r2, out.core.cpc,
                    ratio, out.train_s
                );
            }
            Err(e) => println!("B {:<40} FAILED: {e}", spec.name()),
        }
    }
}
