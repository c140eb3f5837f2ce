use chrono::NaiveDateTime;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::od::flows::{FlowRow, FlowTable, HourStamp};
use crate::od::impedance::{build_impedance, ImpedanceSource};
use crate::od::ingest::TripRecord;
use crate::od::mass::MASS_SMOOTHING;
use crate::od::zones::{PoiCounts, Zone, ZoneId, ZoneTable};

/// Generative process for a deterministic synthetic city.
///
/// Hourly flows are drawn as
/// `T ~ Poisson(k * m_o^alpha * m_d^gamma * d^-beta * g(hour) * h(o,d,hour))`
/// where the masses are smoothed total POI counts, `g` is a diurnal profile
/// and `h` an optional POI-density-driven multiplier. A fraction of OD pairs
/// can be made structurally zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_zones: usize,
    pub n_hours: usize,
    pub seed: u64,
    /// Side of the square the centroids are drawn in, km.
    pub extent_km: f64,
    /// Log-normal location/scale for per-category POI counts.
    pub poi_log_mean: f64,
    pub poi_log_sd: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    /// Fixed scale; ignored when `target_mean_flow` is set.
    pub scale_k: Option<f64>,
    /// Choose `k` so the mean flow over the full cell set hits this value.
    pub target_mean_flow: Option<f64>,
    /// Amplitude `a` of the diurnal profile `g = 1 + a sin(2 pi hod / 24)`.
    pub hour_amplitude: f64,
    /// Strength `c` of `h = exp(c * clamp(z_o * z_d, -2, 2) * wave)` where
    /// `z` is the standardized log POI density and `wave` is
    /// `cos(2 pi hod / 24)` (or 1 with `static_poi_multiplier`). The product
    /// form makes the deviation a genuine pair-level interaction: it cannot
    /// be absorbed by per-zone margins or additive mass exponents.
    pub poi_multiplier: f64,
    /// Drop the hour wave from the POI multiplier, making it a static
    /// pair-level effect.
    pub static_poi_multiplier: bool,
    /// Probability that an OD pair is structurally zero.
    pub zero_inflation: f64,
    /// Probability that a surviving (pair, hour-of-day) cell is persistently
    /// zero; holes are invisible to per-hour margins and make them leak.
    pub hole_inflation: f64,
    /// Multiplier applied to weekend rates; per-hour-of-day calibrations
    /// blur across the week and cannot absorb it.
    pub weekend_factor: f64,
    /// Std dev of mean-one lognormal day-to-day demand shocks, drawn per
    /// (zone, day) for the origin and destination roles separately. Margin
    /// estimates inherit the sampling noise; pooled regressions average it
    /// away; the test-day draws are irreducible for everyone.
    pub zone_day_shock_sd: f64,
    /// Curvature `c2` of the distance response:
    /// `rate *= exp(c2 * clamp(ln(d / (extent/4)), -2, 2)^2)`. Log-linear
    /// decay (and any power-law seed) cannot represent it.
    pub distance_curvature: f64,
    pub n_boroughs: usize,
    /// First hour of the generated record (ISO-8601, truncated to the hour).
    pub start: String,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_zones: 30,
            n_hours: 14 * 24,
            seed: 42,
            extent_km: 30.0,
            poi_log_mean: 3.0,
            poi_log_sd: 1.0,
            alpha: 1.0,
            gamma: 1.0,
            beta: 1.5,
            scale_k: None,
            target_mean_flow: Some(3.0),
            hour_amplitude: 0.4,
            poi_multiplier: 0.0,
            static_poi_multiplier: false,
            zero_inflation: 0.0,
            hole_inflation: 0.0,
            weekend_factor: 1.0,
            zone_day_shock_sd: 0.0,
            distance_curvature: 0.0,
            n_boroughs: 4,
            // a Monday, so weekly features start aligned
            start: "2025-01-06T00:00:00".to_string(),
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_zones < 2 {
            return bad(format!("n_zones must be >= 2, got {}", self.n_zones));
        }
        if self.n_hours < 1 {
            return bad("n_hours must be >= 1".into());
        }
        if !(self.extent_km > 0.0) {
            return bad("extent_km must be positive".into());
        }
        if !(0.0..1.0).contains(&self.hour_amplitude) {
            return bad("hour_amplitude must be in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.zero_inflation) {
            return bad("zero_inflation must be in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.hole_inflation) {
            return bad("hole_inflation must be in [0, 1)".into());
        }
        if !(self.weekend_factor > 0.0) {
            return bad("weekend_factor must be positive".into());
        }
        if self.zone_day_shock_sd < 0.0 {
            return bad("zone_day_shock_sd must be >= 0".into());
        }
        if self.beta < 0.0 {
            return bad("beta must be nonnegative".into());
        }
        if self.scale_k.is_none() && self.target_mean_flow.is_none() {
            return bad("one of scale_k / target_mean_flow is required".into());
        }
        if self.n_boroughs == 0 || self.n_boroughs > self.n_zones {
            return bad("n_boroughs must be in [1, n_zones]".into());
        }
        Ok(())
    }

    pub fn start_hour(&self) -> HourStamp {
        HourStamp::parse(&self.start).expect("valid start timestamp")
    }
}

/// Everything needed to audit a generated sample against its process.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticManifest {
    pub config: SyntheticConfig,
    pub realized_k: f64,
    pub realized_mean_flow: f64,
    pub positive_rows: usize,
    pub structural_zero_pairs: usize,
    pub hole_cells: usize,
    pub total_flow: u64,
    pub mass_definition: String,
}

#[derive(Debug, Clone)]
pub struct SyntheticCity {
    pub zones: ZoneTable,
    pub flows: FlowTable,
    pub manifest: SyntheticManifest,
}

/// Diurnal profile g.
fn diurnal(amplitude: f64, hod: u32) -> f64 {
    1.0 + amplitude * (2.0 * std::f64::consts::PI * f64::from(hod) / 24.0).sin()
}

/// Hour shape of the POI multiplier.
fn poi_wave(hod: u32) -> f64 {
    (2.0 * std::f64::consts::PI * f64::from(hod) / 24.0).cos()
}

pub fn generate_synthetic_city(config: &SyntheticConfig) -> Result<SyntheticCity> {
    config.validate()?;
    let n = config.n_zones;
    let mut rng_zones = ChaCha8Rng::seed_from_u64(config.seed);
    rng_zones.set_stream(0);

    // zones: centroids uniform in the square, heavy-tailed POI counts,
    // boroughs as vertical bands
    let extent_m = config.extent_km * 1000.0;
    let cell_area = (config.extent_km * config.extent_km) / n as f64;
    let poi_dist = |shift: f64| {
        LogNormal::new(config.poi_log_mean + shift, config.poi_log_sd)
            .map_err(|e| Error::InvalidConfig(format!("poi distribution: {e}")))
    };
    let amenity_dist = poi_dist(0.5)?;
    let shop_dist = poi_dist(0.0)?;
    let office_dist = poi_dist(-0.5)?;
    let mut zones = Vec::with_capacity(n);
    for i in 0..n {
        let x: f64 = rng_zones.random::<f64>() * extent_m;
        let y: f64 = rng_zones.random::<f64>() * extent_m;
        let area = cell_area * (0.5 + rng_zones.random::<f64>());
        let draw = |d: &LogNormal<f64>, rng: &mut ChaCha8Rng| -> u32 {
            d.sample(rng).round().min(1.0e9) as u32
        };
        let poi = PoiCounts {
            amenity: draw(&amenity_dist, &mut rng_zones),
            shop: draw(&shop_dist, &mut rng_zones),
            office: draw(&office_dist, &mut rng_zones),
        };
        let band = ((x / extent_m) * config.n_boroughs as f64) as usize;
        zones.push(Zone {
            id: ZoneId(i as u32 + 1),
            centroid_x_m: x,
            centroid_y_m: y,
            area_km2: area,
            borough: format!("B{}", band.min(config.n_boroughs - 1)),
            poi,
        });
    }
    let zones = ZoneTable::new(zones)?;
    let impedance = build_impedance(&zones, ImpedanceSource::EuclideanCentroid, None)?;

    // generation masses match the estimator's smoothed POI masses exactly
    let masses: Vec<f64> = zones
        .iter()
        .map(|z| f64::from(z.poi.total()) + MASS_SMOOTHING)
        .collect();

    // standardized log POI density drives the h multiplier
    let log_density: Vec<f64> = zones.iter().map(|z| z.poi_density_total().ln_1p()).collect();
    let mean_ld = log_density.iter().sum::<f64>() / n as f64;
    let var_ld =
        log_density.iter().map(|v| (v - mean_ld).powi(2)).sum::<f64>() / n as f64;
    let sd_ld = var_ld.sqrt();
    let z_score: Vec<f64> = log_density
        .iter()
        .map(|v| if sd_ld > 0.0 { (v - mean_ld) / sd_ld } else { 0.0 })
        .collect();

    // structural zeros per pair
    let mut rng_struct = ChaCha8Rng::seed_from_u64(config.seed);
    rng_struct.set_stream(1);
    let mut structural = vec![false; n * n];
    let mut structural_zero_pairs = 0usize;
    if config.zero_inflation > 0.0 {
        for cell in structural.iter_mut() {
            if rng_struct.random::<f64>() < config.zero_inflation {
                *cell = true;
                structural_zero_pairs += 1;
            }
        }
    }
    // persistent (pair, hour-of-day) holes
    let mut holes = vec![false; n * n * 24];
    let mut hole_cells = 0usize;
    if config.hole_inflation > 0.0 {
        for (cell, hole) in holes.iter_mut().enumerate() {
            if structural[cell / 24] {
                continue;
            }
            if rng_struct.random::<f64>() < config.hole_inflation {
                *hole = true;
                hole_cells += 1;
            }
        }
    }

    // per-pair unit rate (before k and hour effects) and the per-hod factors
    let start = config.start_hour();
    // per-hour time multiplier: diurnal profile times the weekend factor
    let time_mult: Vec<f64> = (0..config.n_hours)
        .map(|t| {
            let h = start.plus_hours(t as i64);
            let g = diurnal(config.hour_amplitude, h.hour_of_day());
            if h.is_weekend() {
                g * config.weekend_factor
            } else {
                g
            }
        })
        .collect();
    let w: Vec<f64> = if config.static_poi_multiplier {
        vec![1.0; 24]
    } else {
        (0..24).map(poi_wave).collect()
    };
    // per-hod exposure of each (pair-z, hole) combination
    let mut time_by_hod = [0.0f64; 24];
    for (t, m) in time_mult.iter().enumerate() {
        time_by_hod[start.plus_hours(t as i64).hour_of_day() as usize] += m;
    }

    let mut unit_rate = vec![0.0f64; n * n];
    let mut rate_sum = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if structural[i * n + j] {
                continue;
            }
            let d = impedance.get(i, j);
            let curis = (d / (config.extent_km / 4.0)).ln().clamp(-2.0, 2.0);
            let base = masses[i].powf(config.alpha)
                * masses[j].powf(config.gamma)
                * d.powf(-config.beta)
                * (config.distance_curvature * curis * curis).exp();
            unit_rate[i * n + j] = base;
            let pair_z = (z_score[i] * z_score[j]).clamp(-2.0, 2.0);
            for hod in 0..24 {
                if holes[(i * n + j) * 24 + hod] {
                    continue;
                }
                let h_mult = (config.poi_multiplier * pair_z * w[hod]).exp();
                rate_sum += base * h_mult * time_by_hod[hod];
            }
        }
    }
    let cells_total = (n * n * config.n_hours) as f64;
    let k = match (config.target_mean_flow, config.scale_k) {
        (Some(target), _) => {
            if rate_sum <= 0.0 {
                return Err(Error::InvalidConfig("degenerate generative rate".into()));
            }
            target * cells_total / rate_sum
        }
        (None, Some(k)) => k,
        (None, None) => unreachable!("validated"),
    };

    // per-(zone, day) demand shocks, mean one
    let n_days = (config.n_hours + 23) / 24 + 2;
    let day0 = start.0.div_euclid(24);
    let mut shock_o = vec![1.0f64; n * n_days];
    let mut shock_d = vec![1.0f64; n * n_days];
    if config.zone_day_shock_sd > 0.0 {
        let sd = config.zone_day_shock_sd;
        let shock_dist = LogNormal::new(-0.5 * sd * sd, sd)
            .map_err(|e| Error::InvalidConfig(format!("shock distribution: {e}")))?;
        let mut rng_shocks = ChaCha8Rng::seed_from_u64(config.seed);
        rng_shocks.set_stream(3);
        for s in shock_o.iter_mut() {
            *s = shock_dist.sample(&mut rng_shocks);
        }
        for s in shock_d.iter_mut() {
            *s = shock_dist.sample(&mut rng_shocks);
        }
    }

    // sample flows
    let mut rng_flows = ChaCha8Rng::seed_from_u64(config.seed);
    rng_flows.set_stream(2);
    let mut rows = Vec::new();
    let mut total_flow = 0u64;
    for i in 0..n {
        for j in 0..n {
            let base = unit_rate[i * n + j];
            if base == 0.0 {
                continue;
            }
            let pair_z = (z_score[i] * z_score[j]).clamp(-2.0, 2.0);
            for t in 0..config.n_hours {
                let hour = start.plus_hours(t as i64);
                let hod = hour.hour_of_day() as usize;
                if holes[(i * n + j) * 24 + hod] {
                    continue;
                }
                let day = (hour.0.div_euclid(24) - day0) as usize;
                let rate = k
                    * base
                    * time_mult[t]
                    * (config.poi_multiplier * pair_z * w[hod]).exp()
                    * shock_o[i * n_days + day]
                    * shock_d[j * n_days + day];
                if rate <= 0.0 {
                    continue;
                }
                let draw = Poisson::new(rate)
                    .map_err(|e| Error::InvalidConfig(format!("poisson rate {rate}: {e}")))?
                    .sample(&mut rng_flows);
                let flow = draw as u32;
                if flow > 0 {
                    total_flow += u64::from(flow);
                    rows.push(FlowRow {
                        origin: zones.id_at(i),
                        dest: zones.id_at(j),
                        hour,
                        flow,
                    });
                }
            }
        }
    }
    let flows = FlowTable::from_rows(rows);
    let manifest = SyntheticManifest {
        config: config.clone(),
        realized_k: k,
        realized_mean_flow: total_flow as f64 / cells_total,
        positive_rows: flows.len(),
        structural_zero_pairs,
        hole_cells,
        total_flow,
        mass_definition: format!("poi_total + {MASS_SMOOTHING}"),
    };
    Ok(SyntheticCity {
        zones,
        flows,
        manifest,
    })
}

/// Fabricate trip records for a subset of pairs at a near-constant speed, so
/// the travel-time impedance path can run on synthetic data. Pairs are taken
/// in descending total-flow order until `coverage` of the OD matrix is
/// reached; each gets a handful of noisy constant-speed durations.
pub fn synthetic_trip_sample(
    zones: &ZoneTable,
    flows: &FlowTable,
    coverage: f64,
    speed_kmh: f64,
    seed: u64,
) -> Result<Vec<TripRecord>> {
    if !(0.0..=1.0).contains(&coverage) || speed_kmh <= 0.0 {
        return Err(Error::InvalidConfig(
            "coverage must be in [0,1] and speed positive".into(),
        ));
    }
    let impedance = build_impedance(zones, ImpedanceSource::EuclideanCentroid, None)?;
    let mut totals: std::collections::HashMap<(ZoneId, ZoneId), u64> = Default::default();
    for r in flows.rows() {
        *totals.entry((r.origin, r.dest)).or_default() += u64::from(r.flow);
    }
    let mut ranked: Vec<((ZoneId, ZoneId), u64)> = totals.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let n_pairs = ((zones.len() * zones.len()) as f64 * coverage).round() as usize;
    ranked.truncate(n_pairs);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = LogNormal::new(0.0, 0.05).expect("valid lognormal");
    let when: NaiveDateTime = flows
        .rows()
        .first()
        .map(|r| r.hour.to_datetime())
        .unwrap_or_else(|| HourStamp(0).to_datetime());
    let mut trips = Vec::with_capacity(ranked.len() * 5);
    for ((o, d), _) in ranked {
        let (i, j) = (
            zones.index_of(o).expect("origin in table"),
            zones.index_of(d).expect("dest in table"),
        );
        let km = impedance.get(i, j);
        for _ in 0..5 {
            let minutes = (km / speed_kmh * 60.0) * noise.sample(&mut rng);
            trips.push(TripRecord {
                pickup_datetime: when,
                dropoff_datetime: when + chrono::Duration::minutes(minutes.ceil() as i64),
                pu_zone: o,
                do_zone: d,
                trip_minutes: minutes,
                trip_km: km,
            });
        }
    }
    Ok(trips)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rate_city_has_mean_near_k() {
        // g == 1, h == 1, beta = 0, alpha = gamma = 0, k = 3
        let config = SyntheticConfig {
            n_zones: 10,
            n_hours: 200,
            seed: 7,
            alpha: 0.0,
            gamma: 0.0,
            beta: 0.0,
            scale_k: Some(3.0),
            target_mean_flow: None,
            hour_amplitude: 0.0,
            poi_multiplier: 0.0,
            static_poi_multiplier: false,
            zero_inflation: 0.0,
            ..SyntheticConfig::default()
        };
        let city = generate_synthetic_city(&config).unwrap();
        assert!((city.manifest.realized_k - 3.0).abs() < 1e-12);
        // 20k cells of Poisson(3): sample mean within ~4 sd of 3
        assert!(
            (city.manifest.realized_mean_flow - 3.0).abs() < 0.05,
            "mean {}",
            city.manifest.realized_mean_flow
        );
    }

    #[test]
    fn repeat_seed_repeats_everything() {
        let config = SyntheticConfig {
            n_zones: 12,
            n_hours: 48,
            poi_multiplier: 0.5,
            zero_inflation: 0.2,
            ..SyntheticConfig::default()
        };
        let a = generate_synthetic_city(&config).unwrap();
        let b = generate_synthetic_city(&config).unwrap();
        assert_eq!(a.flows.rows(), b.flows.rows());
        assert_eq!(a.manifest.realized_k, b.manifest.realized_k);
        let c = generate_synthetic_city(&SyntheticConfig {
            seed: 43,
            ..config
        })
        .unwrap();
        assert_ne!(a.flows.rows(), c.flows.rows());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = SyntheticConfig {
            n_zones: 1,
            ..SyntheticConfig::default()
        };
        assert!(generate_synthetic_city(&bad).is_err());
        let bad = SyntheticConfig {
            hour_amplitude: 1.5,
            ..SyntheticConfig::default()
        };
        assert!(generate_synthetic_city(&bad).is_err());
    }

    #[test]
    fn distance_decay_is_recoverable_by_regression() {
        // log-log regression of mean pair flow on distance, with the known
        // mass terms subtracted, must recover -beta within 0.1
        let config = SyntheticConfig {
            n_zones: 50,
            n_hours: 500,
            seed: 11,
            beta: 1.5,
            target_mean_flow: Some(3.0),
            hour_amplitude: 0.0,
            poi_multiplier: 0.0,
            static_poi_multiplier: false,
            zero_inflation: 0.0,
            ..SyntheticConfig::default()
        };
        let city = generate_synthetic_city(&config).unwrap();
        let zones = &city.zones;
        let imp = build_impedance(zones, ImpedanceSource::EuclideanCentroid, None).unwrap();
        let masses: Vec<f64> = zones
            .iter()
            .map(|z| f64::from(z.poi.total()) + MASS_SMOOTHING)
            .collect();
        let n = zones.len();
        let mut pair_total = vec![0.0f64; n * n];
        for r in city.flows.rows() {
            let i = zones.index_of(r.origin).unwrap();
            let j = zones.index_of(r.dest).unwrap();
            pair_total[i * n + j] += f64::from(r.flow);
        }
        // simple 2-parameter OLS: y = a + b log d
        let (mut sx, mut sy, mut sxx, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let total = pair_total[i * n + j];
                if total == 0.0 {
                    continue;
                }
                let mean = total / config.n_hours as f64;
                let y = mean.ln()
                    - config.alpha * masses[i].ln()
                    - config.gamma * masses[j].ln();
                let x = imp.get(i, j).ln();
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                m += 1.0;
            }
        }
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        assert!(
            (slope + config.beta).abs() < 0.1,
            "recovered slope {slope}, expected {}",
            -config.beta
        );
    }

    #[test]
    fn trip_sample_covers_requested_fraction() {
        let city = generate_synthetic_city(&SyntheticConfig {
            n_zones: 10,
            n_hours: 24,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let trips = synthetic_trip_sample(&city.zones, &city.flows, 0.18, 25.0, 5).unwrap();
        let pairs: std::collections::HashSet<(ZoneId, ZoneId)> =
            trips.iter().map(|t| (t.pu_zone, t.do_zone)).collect();
        assert_eq!(pairs.len(), 18);
    }
}
