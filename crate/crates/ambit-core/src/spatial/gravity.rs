use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::od::{FlowTable, ImpedanceMatrix, MassVector, ZoneTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayForm {
    /// `f(d) = d^-beta`
    Power,
    /// `f(d) = exp(-beta d)`
    Exponential,
}

impl DecayForm {
    #[inline]
    pub fn eval(self, beta: f64, d: f64) -> f64 {
        match self {
            DecayForm::Power => d.powf(-beta),
            DecayForm::Exponential => (-beta * d).exp(),
        }
    }
}

/// Parameters of the unconstrained gravity rate
/// `k * m_o^alpha * m_d^gamma * f(d)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GravityParams {
    pub k: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub decay_form: DecayForm,
}

impl GravityParams {
    #[inline]
    pub fn rate(&self, m_o: f64, m_d: f64, d: f64) -> f64 {
        self.k * m_o.powf(self.alpha) * m_d.powf(self.gamma) * self.decay_form.eval(self.beta, d)
    }
}

const COLUMN_NAMES: [&str; 4] = ["intercept", "log_mass_origin", "log_mass_dest", "log_distance"];

/// Fit gravity exponents by ordinary least squares of `log T` on
/// `(1, log m_o, log m_d, log d)` over strictly positive training flows.
pub fn fit_gravity_unconstrained(
    flows: &FlowTable,
    train_rows: &[usize],
    zones: &ZoneTable,
    masses_o: &MassVector,
    masses_d: &MassVector,
    impedance: &ImpedanceMatrix,
) -> Result<GravityParams> {
    let mut xs: Vec<[f64; 4]> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for &idx in train_rows {
        let row = flows.row(idx);
        if row.flow == 0 {
            continue;
        }
        let (Some(i), Some(j)) = (zones.index_of(row.origin), zones.index_of(row.dest)) else {
            continue;
        };
        xs.push([
            1.0,
            masses_o.get(i).ln(),
            masses_d.get(j).ln(),
            impedance.get(i, j).ln(),
        ]);
        ys.push(f64::from(row.flow).ln());
    }
    if xs.len() < 4 {
        return Err(Error::Empty(format!(
            "gravity OLS needs >= 4 positive training rows, got {}",
            xs.len()
        )));
    }
    let coef = solve_ols(&xs, &ys)?;
    Ok(GravityParams {
        k: coef[0].exp(),
        alpha: coef[1],
        gamma: coef[2],
        beta: -coef[3],
        decay_form: DecayForm::Power,
    })
}

/// Least squares via normal equations, with a collinearity check that names
/// the offending column.
fn solve_ols(xs: &[[f64; 4]], ys: &[f64]) -> Result<[f64; 4]> {
    let n = xs.len() as f64;
    // zero-variance columns are collinear with the intercept
    for c in 1..4 {
        let mean = xs.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = xs.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
        if var < 1e-14 {
            return Err(Error::RankDeficient {
                column: COLUMN_NAMES[c].to_string(),
            });
        }
    }
    let mut xtx = DMatrix::<f64>::zeros(4, 4);
    let mut xty = DVector::<f64>::zeros(4);
    for (row, &y) in xs.iter().zip(ys) {
        for a in 0..4 {
            xty[a] += row[a] * y;
            for b in 0..4 {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    match xtx.clone().cholesky() {
        Some(chol) => {
            let beta = chol.solve(&xty);
            Ok([beta[0], beta[1], beta[2], beta[3]])
        }
        None => {
            // identify a column whose removal restores full rank
            for drop in 1..4 {
                let keep: Vec<usize> = (0..4).filter(|&c| c != drop).collect();
                let mut sub = DMatrix::<f64>::zeros(3, 3);
                for (a, &ca) in keep.iter().enumerate() {
                    for (b, &cb) in keep.iter().enumerate() {
                        sub[(a, b)] = xtx[(ca, cb)];
                    }
                }
                if sub.cholesky().is_some() {
                    return Err(Error::RankDeficient {
                        column: COLUMN_NAMES[drop].to_string(),
                    });
                }
            }
            Err(Error::RankDeficient {
                column: "unknown".to_string(),
            })
        }
    }
}

/// Evaluate the gravity rate for `(origin_idx, dest_idx)` pairs.
pub fn predict_gravity(
    params: &GravityParams,
    masses_o: &MassVector,
    masses_d: &MassVector,
    impedance: &ImpedanceMatrix,
    pairs: impl Iterator<Item = (usize, usize)>,
) -> Vec<f64> {
    pairs
        .map(|(i, j)| params.rate(masses_o.get(i), masses_d.get(j), impedance.get(i, j)))
        .collect()
}
