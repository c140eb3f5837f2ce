use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IpfOptions {
    /// Maximum relative margin error at convergence.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IpfOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

/// Outcome of iterative proportional fitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IpfResult {
    /// Calibrated matrix, row-major.
    pub matrix: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Cumulative row balancing factors (1 for zero-margin rows).
    pub row_factors: Vec<f64>,
    pub col_factors: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_rel_error: f64,
}

impl IpfResult {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n_cols + j]
    }
}

/// Alternate row/column scaling of `seed` until both margin sets are matched.
///
/// Column targets are rescaled up front so both margin sums agree (sampling
/// can leave them slightly off). Rows/columns with zero target are zeroed and
/// their factors pinned to 1. Structural zeros that make a positive target
/// unreachable show up as `converged = false` with the residual error, never
/// as a silent result.
pub fn calibrate_ipf(
    seed: &[f64],
    n_rows: usize,
    n_cols: usize,
    row_targets: &[f64],
    col_targets: &[f64],
    options: &IpfOptions,
) -> Result<IpfResult> {
    if seed.len() != n_rows * n_cols || row_targets.len() != n_rows || col_targets.len() != n_cols
    {
        return Err(Error::InvalidConfig("IPF shape mismatch".into()));
    }
    if seed.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidConfig("IPF seed must be finite and >= 0".into()));
    }
    let row_sum: f64 = row_targets.iter().sum();
    let col_sum: f64 = col_targets.iter().sum();
    if row_sum <= 0.0 || col_sum <= 0.0 {
        return Err(Error::Empty("IPF targets are all zero".into()));
    }
    let rescale = row_sum / col_sum;
    let col_targets: Vec<f64> = col_targets.iter().map(|v| v * rescale).collect();

    let mut matrix = seed.to_vec();
    for i in 0..n_rows {
        if row_targets[i] == 0.0 {
            for j in 0..n_cols {
                matrix[i * n_cols + j] = 0.0;
            }
        }
    }
    for (j, &t) in col_targets.iter().enumerate() {
        if t == 0.0 {
            for i in 0..n_rows {
                matrix[i * n_cols + j] = 0.0;
            }
        }
    }

    let mut row_factors = vec![1.0; n_rows];
    let mut col_factors = vec![1.0; n_cols];
    let mut max_rel_error = f64::INFINITY;
    let mut iterations = 0;
    for iter in 0..options.max_iter {
        iterations = iter + 1;
        // row pass
        for i in 0..n_rows {
            let target = row_targets[i];
            if target == 0.0 {
                continue;
            }
            let s: f64 = matrix[i * n_cols..(i + 1) * n_cols].iter().sum();
            if s > 0.0 {
                let f = target / s;
                row_factors[i] *= f;
                for v in &mut matrix[i * n_cols..(i + 1) * n_cols] {
                    *v *= f;
                }
            }
        }
        // column pass
        for j in 0..n_cols {
            let target = col_targets[j];
            if target == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for i in 0..n_rows {
                s += matrix[i * n_cols + j];
            }
            if s > 0.0 {
                let f = target / s;
                col_factors[j] *= f;
                for i in 0..n_rows {
                    matrix[i * n_cols + j] *= f;
                }
            }
        }
        max_rel_error = margin_error(&matrix, n_rows, n_cols, row_targets, &col_targets);
        if max_rel_error < options.tol {
            return Ok(IpfResult {
                matrix,
                n_rows,
                n_cols,
                row_factors,
                col_factors,
                converged: true,
                iterations,
                max_rel_error,
            });
        }
    }
    Ok(IpfResult {
        matrix,
        n_rows,
        n_cols,
        row_factors,
        col_factors,
        converged: false,
        iterations,
        max_rel_error,
    })
}

fn margin_error(
    matrix: &[f64],
    n_rows: usize,
    n_cols: usize,
    row_targets: &[f64],
    col_targets: &[f64],
) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n_rows {
        if row_targets[i] > 0.0 {
            let s: f64 = matrix[i * n_cols..(i + 1) * n_cols].iter().sum();
            worst = worst.max((s - row_targets[i]).abs() / row_targets[i]);
        }
    }
    for (j, &t) in col_targets.iter().enumerate() {
        if t > 0.0 {
            let mut s = 0.0;
            for i in 0..n_rows {
                s += matrix[i * n_cols + j];
            }
            worst = worst.max((s - t).abs() / t);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn rank_one_seed_converges_in_one_pass() {
        let seed = vec![1.0; 4];
        let r = calibrate_ipf(&seed, 2, 2, &[1.0, 3.0], &[2.0, 2.0], &IpfOptions::default())
            .unwrap();
        assert!(r.converged);
        let expect = [0.5, 0.5, 1.5, 1.5];
        for (a, b) in r.matrix.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9, "{:?}", r.matrix);
        }
    }

    #[test]
    fn satisfied_margins_are_a_fixed_point() {
        // seed already matches margins: factors stay 1
        let seed = vec![1.0, 2.0, 3.0, 4.0];
        let r = calibrate_ipf(&seed, 2, 2, &[3.0, 7.0], &[4.0, 6.0], &IpfOptions::default())
            .unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        for f in r.row_factors.iter().chain(&r.col_factors) {
            assert!((f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_instances_satisfy_both_margins() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = 10;
            let seed: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() + 0.01).collect();
            let rows: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0 + 0.1).collect();
            let cols: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0 + 0.1).collect();
            let r = calibrate_ipf(&seed, n, n, &rows, &cols, &IpfOptions::default()).unwrap();
            assert!(r.converged, "error {}", r.max_rel_error);
            assert!(r.max_rel_error < 1e-6);
            assert!(r.row_factors.iter().all(|&f| f > 0.0));
            assert!(r.col_factors.iter().all(|&f| f > 0.0));
            // direct summation check against the rescaled targets
            let col_rescale: f64 =
                rows.iter().sum::<f64>() / cols.iter().sum::<f64>();
            for i in 0..n {
                let s: f64 = r.matrix[i * n..(i + 1) * n].iter().sum();
                assert!((s - rows[i]).abs() / rows[i] < 1e-5);
            }
            for j in 0..n {
                let s: f64 = (0..n).map(|i| r.matrix[i * n + j]).sum();
                let t = cols[j] * col_rescale;
                assert!((s - t).abs() / t < 1e-5);
            }
        }
    }

    #[test]
    fn infeasible_structural_zeros_flag_non_convergence() {
        // column 0 needs mass but only row 0 can supply it, and row 0's
        // target is too small
        let seed = vec![1.0, 1.0, 0.0, 1.0];
        let r = calibrate_ipf(&seed, 2, 2, &[1.0, 5.0], &[4.0, 2.0], &IpfOptions::default())
            .unwrap();
        assert!(!r.converged);
        assert!(r.max_rel_error > 1e-6);
    }

    #[test]
    fn zero_margin_rows_are_zeroed_with_unit_factor() {
        let seed = vec![1.0; 9];
        let r = calibrate_ipf(
            &seed,
            3,
            3,
            &[0.0, 2.0, 2.0],
            &[1.0, 1.0, 2.0],
            &IpfOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        for j in 0..3 {
            assert_eq!(r.get(0, j), 0.0);
        }
        assert_eq!(r.row_factors[0], 1.0);
    }
}
