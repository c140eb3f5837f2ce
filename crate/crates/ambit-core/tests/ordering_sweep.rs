//! One-off sweep to locate a robust parameter region for the ordering
//! benchmark. Run with
//! `cargo test -p ambit-core --test ordering_sweep -- --nocapture --ignored`.

use ambit_core::gbt::BoostConfig;
use ambit_core::models::{fit_and_eval, ModelSpec, SuiteConfig};
use ambit_core::od::{
    generate_synthetic_city, ImpedanceSource, MassDefinition, SamplingMode, SplitSpec,
    SyntheticConfig,
};
use ambit_core::spatial::DecayForm;
use ambit_core::task::{Split, Task, TaskConfig};

fn build(synth: &SyntheticConfig) -> Task {
    let city = generate_synthetic_city(synth).unwrap();
    let start = synth.start_hour();
    let n_hours = synth.n_hours as i64;
    Task::build(
        city.zones,
        city.flows,
        TaskConfig {
            min_total: 25,
            top_k: usize::MAX,
            split: SplitSpec {
                train_end: start.plus_hours(n_hours * 7 / 10),
                val_end: start.plus_hours(n_hours * 85 / 100),
                test_end: start.plus_hours(n_hours),
                sampling: SamplingMode::Random,
                max_train_rows: 200_000,
                max_eval_rows: usize::MAX,
                seed: 42,
            },
            impedance: ImpedanceSource::EuclideanCentroid,
        },
        None,
    )
    .unwrap()
}

#[test]
#[ignore = "parameter sweep"]
fn sweep_ordering_margins() {
    let mk_cfg = |mcw: f64| SuiteConfig {
        boost: BoostConfig {
            n_estimators: 300,
            max_depth: 6,
            learning_rate: 0.05,
            subsample: 0.8,
            colsample: 0.8,
            early_stopping_rounds: 30,
            min_child_weight: mcw,
            ..Default::default()
        },
        ..Default::default()
    };
    for &(weekend, h, mcw) in &[(0.35, 0.45, 10.0)] {
        for &(curvature, shock, n_hours) in &[(0.25, 0.5, 600usize), (0.35, 0.5, 600), (0.25, 0.55, 600), (0.35, 0.55, 600)] {
            let synth = SyntheticConfig {
                n_zones: 50,
                n_hours,
                seed: 77,
                extent_km: 20.0,
                beta: 1.3,
                target_mean_flow: Some(0.6),
                hour_amplitude: 0.2,
                poi_multiplier: h,
                static_poi_multiplier: true,
                zero_inflation: 0.25,
                hole_inflation: 0.45,
                weekend_factor: weekend,
                zone_day_shock_sd: shock,
                distance_curvature: curvature,
                poi_log_sd: 0.45,
                ..SyntheticConfig::default()
            };
            let cfg = mk_cfg(mcw);
            let task = build(&synth);
            let rows: Vec<usize> = task.rows(Split::Test).to_vec();
            let r2 = |spec: &ModelSpec| -> f64 {
                fit_and_eval(spec, &task, &cfg, &rows)
                    .unwrap()
                    .core
                    .r2
                    .unwrap_or(f64::NEG_INFINITY)
            };
            let radiation = r2(&ModelSpec::Radiation {
                mass: MassDefinition::FlowOut,
            });
            let oc = r2(&ModelSpec::OriginConstrained {
                decay: DecayForm::Power,
                mass: MassDefinition::FlowIn,
            });
            let dc = r2(&ModelSpec::DcHourly);
            let ppml = r2(&ModelSpec::PpmlPositive);
            let direct = r2(&ModelSpec::gbt_direct());
            let ambit = r2(&ModelSpec::ambit_poi());
            let max_constr = oc.max(dc);
            println!(
                "wk={weekend:.2} h={h:.2} mcw={mcw} cur={curvature:.2} shock={shock:.2} hrs={n_hours}: rad {radiation:.3} oc {oc:.3} dc {dc:.3} \
                 ppml {ppml:.3} direct {direct:.3} ambit {ambit:.3} | margins: c-r {:.3} p-c {:.3} b-p {:.3}",
                oc.min(dc) - radiation,
                ppml - max_constr,
                direct.min(ambit) - ppml,
            );
        }
    }
}
