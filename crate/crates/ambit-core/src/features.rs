//! Column-major feature storage shared by the boosted-tree engine, the
//! residual learner, and attribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n_rows: usize,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::FeatureMismatch(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, |c| c.len());
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::FeatureMismatch(format!(
                    "column {name} has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::FeatureMismatch(format!(
                    "column {name} contains non-finite values"
                )));
            }
        }
        Ok(Self {
            names,
            columns,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&[f64]> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(&self.columns[j])
    }

    #[inline]
    pub fn get(&self, row: usize, j: usize) -> f64 {
        self.columns[j][row]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// New matrix keeping `rows` (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&r| c[r]).collect())
            .collect();
        Self {
            names: self.names.clone(),
            columns,
            n_rows: rows.len(),
        }
    }

    /// Append a column, consuming self.
    pub fn with_column(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.n_rows {
            return Err(Error::FeatureMismatch(format!(
                "column {name} has {} rows, expected {}",
                values.len(),
                self.n_rows
            )));
        }
        self.names.push(name.to_string());
        self.columns.push(values);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(FeatureMatrix::new(vec!["a".into()], vec![vec![1.0], vec![2.0]]).is_err());
        assert!(
            FeatureMatrix::new(vec!["a".into(), "b".into()], vec![vec![1.0], vec![2.0, 3.0]])
                .is_err()
        );
        assert!(FeatureMatrix::new(vec!["a".into()], vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn row_selection_preserves_order() {
        let m = FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0, 3.0], vec![10.0, 20.0, 30.0]],
        )
        .unwrap();
        let s = m.select_rows(&[2, 0]);
        assert_eq!(s.column(0), &[3.0, 1.0]);
        assert_eq!(s.column(1), &[30.0, 10.0]);
    }
}
