use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::od::{FlowTable, HourStamp, ImpedanceMatrix, MassVector, ZoneTable};
use crate::spatial::gravity::DecayForm;
use crate::spatial::ipf::{calibrate_ipf, IpfOptions, IpfResult};

pub const N_HOUR_SLICES: usize = 24;

/// Origin and destination margins per (zone, hour-of-day slice), averaged
/// over the training days in each slice.
///
/// Margins must come from the full, unfiltered flow table so constrained
/// models are calibrated on real totals rather than task-truncated ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginSet {
    n_zones: usize,
    origin: Vec<f64>,
    dest: Vec<f64>,
    /// Distinct training hours falling in each hour-of-day slice.
    pub slice_hours: [usize; N_HOUR_SLICES],
}

impl MarginSet {
    pub fn compute(flows_full: &FlowTable, zones: &ZoneTable, train_end: HourStamp) -> Self {
        let n = zones.len();
        let mut origin = vec![0.0; n * N_HOUR_SLICES];
        let mut dest = vec![0.0; n * N_HOUR_SLICES];
        let mut slice_hours = [0usize; N_HOUR_SLICES];
        for h in flows_full.distinct_hours_before(train_end) {
            slice_hours[h.hour_of_day() as usize] += 1;
        }
        for row in flows_full.rows() {
            if row.hour >= train_end {
                continue;
            }
            let hod = row.hour.hour_of_day() as usize;
            let flow = f64::from(row.flow);
            if let Some(i) = zones.index_of(row.origin) {
                origin[i * N_HOUR_SLICES + hod] += flow;
            }
            if let Some(j) = zones.index_of(row.dest) {
                dest[j * N_HOUR_SLICES + hod] += flow;
            }
        }
        for hod in 0..N_HOUR_SLICES {
            let days = slice_hours[hod];
            if days == 0 {
                continue;
            }
            for z in 0..n {
                origin[z * N_HOUR_SLICES + hod] /= days as f64;
                dest[z * N_HOUR_SLICES + hod] /= days as f64;
            }
        }
        Self {
            n_zones: n,
            origin,
            dest,
            slice_hours,
        }
    }

    pub fn n_zones(&self) -> usize {
        self.n_zones
    }

    #[inline]
    pub fn origin(&self, zone_idx: usize, hod: usize) -> f64 {
        self.origin[zone_idx * N_HOUR_SLICES + hod]
    }

    #[inline]
    pub fn dest(&self, zone_idx: usize, hod: usize) -> f64 {
        self.dest[zone_idx * N_HOUR_SLICES + hod]
    }

    /// Mean hourly outflow per zone across all training hours.
    pub fn mean_hourly_outflow(&self) -> Vec<f64> {
        let total_hours: usize = self.slice_hours.iter().sum();
        (0..self.n_zones)
            .map(|z| {
                let total: f64 = (0..N_HOUR_SLICES)
                    .map(|h| self.origin(z, h) * self.slice_hours[h] as f64)
                    .sum();
                if total_hours > 0 {
                    total / total_hours as f64
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstrainedVariant {
    Origin,
    Destination,
    Doubly,
}

/// Per-destination attraction weights `m^gamma`.
pub fn attraction_weights(mass: &MassVector, gamma: f64) -> Vec<f64> {
    mass.values().iter().map(|m| m.powf(gamma)).collect()
}

/// Competing-destinations attraction `m_j^gamma * A_j^rho` with
/// accessibility `A_j = sum_{k != j} m_k / d_jk^delta`.
pub fn competing_attraction(
    mass: &MassVector,
    impedance: &ImpedanceMatrix,
    gamma: f64,
    rho: f64,
    delta: f64,
) -> Vec<f64> {
    let n = mass.len();
    (0..n)
        .map(|j| {
            let access: f64 = (0..n)
                .filter(|&k| k != j)
                .map(|k| mass.get(k) / impedance.get(j, k).powf(delta))
                .sum();
            mass.get(j).powf(gamma) * access.max(f64::MIN_POSITIVE).powf(rho)
        })
        .collect()
}

/// A fitted constrained allocation: shares plus margins for the single
/// constrained variants, or 24 IPF-balanced matrices for the doubly
/// constrained one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstrainedPredictor {
    variant: ConstrainedVariant,
    n: usize,
    margins: MarginSet,
    /// Origin/Destination: normalized shares, row-major (n x n).
    /// Doubly: empty (the slices carry the predictions).
    shares: Vec<f64>,
    /// Doubly constrained: one balanced matrix per hour-of-day slice.
    slices: Vec<IpfResult>,
    pub ipf_converged: bool,
}

impl ConstrainedPredictor {
    /// Build an origin- or destination-constrained allocation from
    /// attraction weights and a decay function.
    pub fn single(
        variant: ConstrainedVariant,
        decay_form: DecayForm,
        beta: f64,
        attraction: &[f64],
        impedance: &ImpedanceMatrix,
        margins: &MarginSet,
    ) -> Self {
        let n = impedance.n_zones();
        let mut shares = vec![0.0; n * n];
        match variant {
            ConstrainedVariant::Origin => {
                for i in 0..n {
                    let mut denom = 0.0;
                    for j in 0..n {
                        let w = attraction[j] * decay_form.eval(beta, impedance.get(i, j));
                        shares[i * n + j] = w;
                        denom += w;
                    }
                    if denom > 0.0 {
                        for j in 0..n {
                            shares[i * n + j] /= denom;
                        }
                    }
                }
            }
            ConstrainedVariant::Destination => {
                for j in 0..n {
                    let mut denom = 0.0;
                    for i in 0..n {
                        let w = attraction[i] * decay_form.eval(beta, impedance.get(i, j));
                        shares[i * n + j] = w;
                        denom += w;
                    }
                    if denom > 0.0 {
                        for i in 0..n {
                            shares[i * n + j] /= denom;
                        }
                    }
                }
            }
            ConstrainedVariant::Doubly => unreachable!("use ConstrainedPredictor::doubly"),
        }
        Self {
            variant,
            n,
            margins: margins.clone(),
            shares,
            slices: Vec::new(),
            ipf_converged: true,
        }
    }

    /// Doubly constrained gravity: IPF on the decay seed per hour slice.
    pub fn doubly(
        decay_form: DecayForm,
        beta: f64,
        impedance: &ImpedanceMatrix,
        margins: &MarginSet,
        options: &IpfOptions,
    ) -> Result<Self> {
        let n = impedance.n_zones();
        let mut seed = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                seed[i * n + j] = decay_form.eval(beta, impedance.get(i, j));
            }
        }
        let mut slices = Vec::with_capacity(N_HOUR_SLICES);
        let mut all_converged = true;
        for hod in 0..N_HOUR_SLICES {
            let rows: Vec<f64> = (0..n).map(|z| margins.origin(z, hod)).collect();
            let cols: Vec<f64> = (0..n).map(|z| margins.dest(z, hod)).collect();
            if rows.iter().sum::<f64>() <= 0.0 || cols.iter().sum::<f64>() <= 0.0 {
                // no training data in this slice: all-zero predictions
                slices.push(IpfResult {
                    matrix: vec![0.0; n * n],
                    n_rows: n,
                    n_cols: n,
                    row_factors: vec![1.0; n],
                    col_factors: vec![1.0; n],
                    converged: true,
                    iterations: 0,
                    max_rel_error: 0.0,
                });
                continue;
            }
            let r = calibrate_ipf(&seed, n, n, &rows, &cols, options)?;
            all_converged &= r.converged;
            slices.push(r);
        }
        Ok(Self {
            variant: ConstrainedVariant::Doubly,
            n,
            margins: margins.clone(),
            shares: Vec::new(),
            slices,
            ipf_converged: all_converged,
        })
    }

    /// Predict `(origin_idx, dest_idx, hour_of_day)` cells. The second
    /// return value counts rows whose margin was missing (zero), which
    /// predict 0.
    pub fn predict(&self, cells: impl Iterator<Item = (usize, usize, usize)>) -> (Vec<f64>, usize) {
        let mut zero_margin = 0usize;
        let out = cells
            .map(|(i, j, hod)| match self.variant {
                ConstrainedVariant::Origin => {
                    let o = self.margins.origin(i, hod);
                    if o == 0.0 {
                        zero_margin += 1;
                        0.0
                    } else {
                        o * self.shares[i * self.n + j]
                    }
                }
                ConstrainedVariant::Destination => {
                    let d = self.margins.dest(j, hod);
                    if d == 0.0 {
                        zero_margin += 1;
                        0.0
                    } else {
                        d * self.shares[i * self.n + j]
                    }
                }
                ConstrainedVariant::Doubly => self.slices[hod].get(i, j),
            })
            .collect();
        (out, zero_margin)
    }

    /// Full prediction matrix for one hour-of-day slice.
    pub fn slice_matrix(&self, hod: usize) -> Vec<f64> {
        match self.variant {
            ConstrainedVariant::Doubly => self.slices[hod].matrix.clone(),
            ConstrainedVariant::Origin => {
                let mut m = vec![0.0; self.n * self.n];
                for i in 0..self.n {
                    let o = self.margins.origin(i, hod);
                    for j in 0..self.n {
                        m[i * self.n + j] = o * self.shares[i * self.n + j];
                    }
                }
                m
            }
            ConstrainedVariant::Destination => {
                let mut m = vec![0.0; self.n * self.n];
                for j in 0..self.n {
                    let d = self.margins.dest(j, hod);
                    for i in 0..self.n {
                        m[i * self.n + j] = d * self.shares[i * self.n + j];
                    }
                }
                m
            }
        }
    }
}
