use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::design::GlmDesign;
use crate::glm::irls::{fit_ppml, GlmFit, IrlsOptions};

/// One training row for the fixed-effects PPML, in raw-code space.
#[derive(Debug, Clone, Copy)]
pub struct FeRow {
    pub origin_code: u32,
    pub dest_code: u32,
    /// Hour-of-week in [0, 168).
    pub hour_of_week: u32,
    pub log_m_o: f64,
    pub log_m_d: f64,
    pub log_d: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FeConfig {
    pub max_rows: usize,
    pub seed: u64,
    /// Include origin x time and destination x time interactions.
    pub include_interactions: bool,
    pub ridge: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FeConfig {
    fn default() -> Self {
        Self {
            max_rows: 100_000,
            seed: 42,
            include_interactions: true,
            ridge: 1e-8,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeMeta {
    pub rows_pre: usize,
    pub rows_post: usize,
    pub origin_levels: usize,
    pub dest_levels: usize,
    pub hour_levels: usize,
    /// Total realized one-hot columns across all FE groups.
    pub categories: usize,
    pub train_seconds: f64,
}

/// Subsample rows, build the sparse one-hot design (origin, destination,
/// hour-of-week, plus origin x time and destination x time interactions) and
/// fit PPML with a small ridge.
pub fn fit_ppml_fe(rows: &[FeRow], config: &FeConfig) -> Result<(GlmFit, FeMeta)> {
    if rows.is_empty() {
        return Err(Error::Empty("no rows for FE fit".into()));
    }
    let rows_pre = rows.len();
    let sample: Vec<FeRow> = if rows.len() <= config.max_rows {
        rows.to_vec()
    } else {
        let mut idx: Vec<usize> = (0..rows.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        idx.shuffle(&mut rng);
        idx.truncate(config.max_rows);
        idx.sort_unstable();
        idx.into_iter().map(|i| rows[i]).collect()
    };
    let n = sample.len();

    let log_m_o: Vec<f64> = sample.iter().map(|r| r.log_m_o).collect();
    let log_m_d: Vec<f64> = sample.iter().map(|r| r.log_m_d).collect();
    let log_d: Vec<f64> = sample.iter().map(|r| r.log_d).collect();
    let y: Vec<f64> = sample.iter().map(|r| r.y).collect();
    let origin: Vec<u32> = sample.iter().map(|r| r.origin_code).collect();
    let dest: Vec<u32> = sample.iter().map(|r| r.dest_code).collect();
    let how: Vec<u32> = sample.iter().map(|r| r.hour_of_week).collect();

    let mut fe: Vec<(&str, Vec<u32>)> = vec![
        ("origin", origin.clone()),
        ("dest", dest.clone()),
        ("hour_of_week", how.clone()),
    ];
    if config.include_interactions {
        let o_t: Vec<u32> = sample
            .iter()
            .map(|r| r.origin_code * 168 + r.hour_of_week)
            .collect();
        let d_t: Vec<u32> = sample
            .iter()
            .map(|r| r.dest_code * 168 + r.hour_of_week)
            .collect();
        fe.push(("origin_x_time", o_t));
        fe.push(("dest_x_time", d_t));
    }
    let fe_refs: Vec<(&str, &[u32])> = fe.iter().map(|(name, v)| (*name, v.as_slice())).collect();
    let design = GlmDesign::with_fixed_effects(
        &[
            ("log_mass_origin", &log_m_o),
            ("log_mass_dest", &log_m_d),
            ("log_distance", &log_d),
        ],
        &fe_refs,
        true,
        n,
    )?;

    // identifiability heuristic: need at least as many rows as columns
    let categories = design.n_cols() - 4;
    if n < design.n_cols() {
        return Err(Error::Unidentifiable(vec![format!(
            "{} rows for {} design columns; raise max_rows or reduce FE groups",
            n,
            design.n_cols()
        )]));
    }

    let started = std::time::Instant::now();
    let fit = fit_ppml(
        &design,
        &y,
        &IrlsOptions {
            tol: config.tol,
            max_iter: config.max_iter,
            ridge: config.ridge,
            variance_shape: 0.0,
        },
    )?;
    let distinct = |v: &[u32]| {
        let mut s = v.to_vec();
        s.sort_unstable();
        s.dedup();
        s.len()
    };
    let meta = FeMeta {
        rows_pre,
        rows_post: n,
        origin_levels: distinct(&origin),
        dest_levels: distinct(&dest),
        hour_levels: distinct(&how),
        categories,
        train_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((fit, meta))
}
