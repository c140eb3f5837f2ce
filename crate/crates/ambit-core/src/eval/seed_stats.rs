use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean with a two-sided Student-t interval half-width across seeds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SeedStat {
    pub mean: f64,
    /// `t_{(1+c)/2, n-1} * sd / sqrt(n)`; 0 for a single seed.
    pub half_width: f64,
    pub n: usize,
}

/// Aggregate per-seed metric values into mean +- CI.
pub fn aggregate_seed_stats(values: &[f64], confidence: f64) -> SeedStat {
    assert!(!values.is_empty(), "need at least one seed value");
    assert!((0.0..1.0).contains(&confidence), "confidence in (0,1)");
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return SeedStat {
            mean,
            half_width: 0.0,
            n,
        };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();
    let t = StudentsT::new(0.0, 1.0, n as f64 - 1.0)
        .expect("valid t distribution")
        .inverse_cdf(0.5 * (1.0 + confidence));
    SeedStat {
        mean,
        half_width: t * sd / (n as f64).sqrt(),
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn textbook_t_interval() {
        let s = aggregate_seed_stats(&[1.0, 2.0, 3.0], 0.95);
        assert!((s.mean - 2.0).abs() < 1e-12);
        // t_{0.975, 2} = 4.302653, sd = 1
        assert!(
            (s.half_width - 4.302653 / 3.0f64.sqrt()).abs() < 1e-4,
            "half width {}",
            s.half_width
        );
    }

    #[test]
    fn identical_values_have_zero_width() {
        let s = aggregate_seed_stats(&[5.0, 5.0, 5.0, 5.0], 0.95);
        assert_eq!(s.half_width, 0.0);
    }

    #[test]
    fn single_seed_reports_mean_only() {
        let s = aggregate_seed_stats(&[3.14], 0.95);
        assert_eq!(s.mean, 3.14);
        assert_eq!(s.half_width, 0.0);
        assert_eq!(s.n, 1);
    }

    #[test]
    fn matches_bootstrap_interval_ordering() {
        // wider-spread samples must get wider intervals, and a bootstrap
        // percentile interval should agree on that ordering
        let tight = [10.0, 10.1, 9.9, 10.05, 9.95];
        let wide = [10.0, 13.0, 7.0, 11.5, 8.5];
        let t_tight = aggregate_seed_stats(&tight, 0.95);
        let t_wide = aggregate_seed_stats(&wide, 0.95);
        assert!(t_wide.half_width > t_tight.half_width);

        let boot_width = |vals: &[f64]| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
            let mut means: Vec<f64> = (0..2000)
                .map(|_| {
                    (0..vals.len())
                        .map(|_| vals[rng.random_range(0..vals.len())])
                        .sum::<f64>()
                        / vals.len() as f64
                })
                .collect();
            means.sort_by(|a, b| a.total_cmp(b));
            means[1949] - means[50]
        };
        assert!(boot_width(&wide) > boot_width(&tight));
    }
}
