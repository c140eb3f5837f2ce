use crate::features::FeatureMatrix;

pub const DEFAULT_MAX_BINS: usize = 256;

/// Per-feature quantile cut points. A value `v` falls in bin
/// `partition_point(cuts, c < v)`; bins `0..=b` are exactly the rows with
/// `v <= cuts[b]`, so `cuts[b]` doubles as the split threshold.
#[derive(Debug, Clone)]
pub struct BinMapper {
    cuts: Vec<Vec<f64>>,
}

impl BinMapper {
    pub fn fit(features: &FeatureMatrix, max_bins: usize) -> Self {
        let cuts = (0..features.n_features())
            .map(|j| {
                let mut sorted = features.column(j).to_vec();
                sorted.sort_by(|a, b| a.total_cmp(b));
                let n = sorted.len();
                let mut cuts: Vec<f64> = (1..max_bins)
                    .map(|q| sorted[(q * n / max_bins).min(n - 1)])
                    .collect();
                cuts.dedup();
                // a cut at the maximum leaves an empty right bin; drop it
                if cuts.last() == sorted.last() {
                    cuts.pop();
                }
                cuts
            })
            .collect();
        Self { cuts }
    }

    #[inline]
    pub fn bin(&self, feature: usize, v: f64) -> u16 {
        self.cuts[feature].partition_point(|c| *c < v) as u16
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }

    /// Threshold for "go left" after bin `b` (inclusive).
    pub fn threshold(&self, feature: usize, bin: usize) -> f64 {
        self.cuts[feature][bin]
    }

    /// Pre-binned column-major matrix.
    pub fn bin_matrix(&self, features: &FeatureMatrix) -> Vec<Vec<u16>> {
        (0..features.n_features())
            .map(|j| {
                features
                    .column(j)
                    .iter()
                    .map(|&v| self.bin(j, v))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(values: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix::new(vec!["x".into()], vec![values]).unwrap()
    }

    #[test]
    fn few_distinct_values_get_their_own_bins() {
        let m = matrix(vec![1.0, 2.0, 2.0, 3.0, 1.0, 3.0]);
        let b = BinMapper::fit(&m, 256);
        assert_eq!(b.n_bins(0), 3);
        assert_eq!(b.bin(0, 1.0), 0);
        assert_eq!(b.bin(0, 2.0), 1);
        assert_eq!(b.bin(0, 3.0), 2);
        // threshold semantics: v <= threshold(bin) goes left
        assert!(1.0 <= b.threshold(0, 0));
        assert!(2.0 > b.threshold(0, 0));
    }

    #[test]
    fn bins_are_balanced_on_continuous_data() {
        let values: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.73).sin()).collect();
        let m = matrix(values.clone());
        let b = BinMapper::fit(&m, 64);
        let mut counts = vec![0usize; b.n_bins(0)];
        for v in &values {
            counts[b.bin(0, *v) as usize] += 1;
        }
        let expect = values.len() / 64;
        for (bin, c) in counts.iter().enumerate() {
            assert!(
                *c >= expect / 2 && *c <= expect * 2,
                "bin {bin} has {c} rows, expected about {expect}"
            );
        }
    }

    #[test]
    fn binning_respects_split_semantics() {
        let values: Vec<f64> = (0..333).map(|i| ((i * 37) % 100) as f64).collect();
        let m = matrix(values.clone());
        let b = BinMapper::fit(&m, 16);
        for bin in 0..b.n_bins(0) - 1 {
            let t = b.threshold(0, bin);
            for &v in &values {
                let goes_left = v <= t;
                let in_left_bins = b.bin(0, v) as usize <= bin;
                assert_eq!(goes_left, in_left_bins, "v={v} bin boundary {t}");
            }
        }
    }
}
