use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-hot schema for a fixed-effect group: the sorted level codes seen at
/// fit time. The first level is the dropped reference when `drop_reference`
/// is set; unseen codes at prediction time contribute nothing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeGroupSchema {
    pub name: String,
    pub levels: Vec<u32>,
    pub drop_reference: bool,
}

impl FeGroupSchema {
    fn from_codes(name: &str, codes: &[u32], drop_reference: bool) -> Self {
        let mut levels: Vec<u32> = codes.to_vec();
        levels.sort_unstable();
        levels.dedup();
        Self {
            name: name.to_string(),
            levels,
            drop_reference,
        }
    }

    /// Number of columns this group contributes.
    pub fn n_columns(&self) -> usize {
        if self.drop_reference {
            self.levels.len().saturating_sub(1)
        } else {
            self.levels.len()
        }
    }

    /// Column offset within the group for a level code, if it has one.
    fn column_of(&self, code: u32) -> Option<usize> {
        let pos = self.levels.binary_search(&code).ok()?;
        if self.drop_reference {
            pos.checked_sub(1)
        } else {
            Some(pos)
        }
    }
}

/// Column layout shared by fit- and prediction-time designs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignSchema {
    pub numeric_names: Vec<String>,
    pub fe_groups: Vec<FeGroupSchema>,
}

impl DesignSchema {
    pub fn n_cols(&self) -> usize {
        1 + self.numeric_names.len()
            + self.fe_groups.iter().map(|g| g.n_columns()).sum::<usize>()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["intercept".to_string()];
        names.extend(self.numeric_names.iter().cloned());
        for g in &self.fe_groups {
            let skip = usize::from(g.drop_reference);
            for level in g.levels.iter().skip(skip) {
                names.push(format!("{}:{}", g.name, level));
            }
        }
        names
    }
}

#[derive(Debug, Clone)]
enum Storage {
    /// Row-major `n_rows x n_cols`, intercept included.
    Dense(Vec<f64>),
    /// CSR without the implicit intercept (handled separately).
    Sparse {
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

/// A GLM design matrix with implicit intercept, optional one-hot
/// fixed-effect groups, and optional positive row weights.
#[derive(Debug, Clone)]
pub struct GlmDesign {
    pub schema: DesignSchema,
    n_rows: usize,
    n_cols: usize,
    storage: Storage,
    pub row_weights: Option<Vec<f64>>,
    /// Rows whose FE code was absent from the schema (prediction designs).
    pub unseen_levels: usize,
}

/// Numeric column: name plus per-row values.
pub type NumericColumn<'a> = (&'a str, &'a [f64]);
/// Fixed-effect group: name plus per-row level codes.
pub type FeColumn<'a> = (&'a str, &'a [u32]);

impl GlmDesign {
    /// Dense design from numeric columns only.
    pub fn dense(numeric: &[NumericColumn<'_>], n_rows: usize) -> Result<Self> {
        let schema = DesignSchema {
            numeric_names: numeric.iter().map(|(n, _)| n.to_string()).collect(),
            fe_groups: Vec::new(),
        };
        Self::from_parts(schema, numeric, &[], n_rows)
    }

    /// Sparse design with one-hot fixed-effect groups.
    pub fn with_fixed_effects(
        numeric: &[NumericColumn<'_>],
        fe: &[FeColumn<'_>],
        drop_reference: bool,
        n_rows: usize,
    ) -> Result<Self> {
        let schema = DesignSchema {
            numeric_names: numeric.iter().map(|(n, _)| n.to_string()).collect(),
            fe_groups: fe
                .iter()
                .map(|(name, codes)| FeGroupSchema::from_codes(name, codes, drop_reference))
                .collect(),
        };
        Self::from_parts(schema, numeric, fe, n_rows)
    }

    /// Build a prediction design against an existing schema. FE codes not in
    /// the schema fall back to the reference level and are counted.
    pub fn for_prediction(
        schema: &DesignSchema,
        numeric: &[NumericColumn<'_>],
        fe: &[FeColumn<'_>],
        n_rows: usize,
    ) -> Result<Self> {
        Self::from_parts(schema.clone(), numeric, fe, n_rows)
    }

    fn from_parts(
        schema: DesignSchema,
        numeric: &[NumericColumn<'_>],
        fe: &[FeColumn<'_>],
        n_rows: usize,
    ) -> Result<Self> {
        if numeric.len() != schema.numeric_names.len() || fe.len() != schema.fe_groups.len() {
            return Err(Error::FeatureMismatch(format!(
                "expected {} numeric and {} FE groups",
                schema.numeric_names.len(),
                schema.fe_groups.len()
            )));
        }
        for (name, values) in numeric {
            if values.len() != n_rows {
                return Err(Error::FeatureMismatch(format!(
                    "column {name} has {} rows, expected {n_rows}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::FeatureMismatch(format!(
                    "column {name} contains non-finite values"
                )));
            }
        }
        for (name, codes) in fe {
            if codes.len() != n_rows {
                return Err(Error::FeatureMismatch(format!(
                    "FE group {name} has {} rows, expected {n_rows}",
                    codes.len()
                )));
            }
        }
        let n_cols = schema.n_cols();
        let mut unseen = 0usize;
        let storage = if fe.is_empty() {
            let p = n_cols;
            let mut data = vec![0.0; n_rows * p];
            for r in 0..n_rows {
                data[r * p] = 1.0;
                for (c, (_, values)) in numeric.iter().enumerate() {
                    data[r * p + 1 + c] = values[r];
                }
            }
            Storage::Dense(data)
        } else {
            // absolute column offsets per FE group
            let mut offsets = Vec::with_capacity(fe.len());
            let mut cursor = 1 + numeric.len();
            for g in &schema.fe_groups {
                offsets.push(cursor);
                cursor += g.n_columns();
            }
            let nnz_per_row = numeric.len() + fe.len();
            let mut indptr = Vec::with_capacity(n_rows + 1);
            let mut indices = Vec::with_capacity(n_rows * nnz_per_row);
            let mut values = Vec::with_capacity(n_rows * nnz_per_row);
            indptr.push(0);
            for r in 0..n_rows {
                for (c, (_, vals)) in numeric.iter().enumerate() {
                    if vals[r] != 0.0 {
                        indices.push(1 + c);
                        values.push(vals[r]);
                    }
                }
                for (g, (_, codes)) in fe.iter().enumerate() {
                    match schema.fe_groups[g].column_of(codes[r]) {
                        Some(within) => {
                            indices.push(offsets[g] + within);
                            values.push(1.0);
                        }
                        None => {
                            // reference level or unseen code
                            if schema.fe_groups[g].levels.binary_search(&codes[r]).is_err() {
                                unseen += 1;
                            }
                        }
                    }
                }
                indptr.push(indices.len());
            }
            Storage::Sparse {
                indptr,
                indices,
                values,
            }
        };
        Ok(Self {
            schema,
            n_rows,
            n_cols,
            storage,
            row_weights: None,
            unseen_levels: unseen,
        })
    }

    pub fn with_row_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_rows {
            return Err(Error::FeatureMismatch("row weight length".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::FeatureMismatch(
                "row weights must be finite and >= 0".into(),
            ));
        }
        self.row_weights = Some(weights);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    pub fn column_names(&self) -> Vec<String> {
        self.schema.column_names()
    }

    /// `eta = X beta` (intercept included).
    pub fn matvec(&self, beta: &[f64]) -> Vec<f64> {
        debug_assert_eq!(beta.len(), self.n_cols);
        match &self.storage {
            Storage::Dense(data) => {
                let p = self.n_cols;
                (0..self.n_rows)
                    .map(|r| {
                        let row = &data[r * p..(r + 1) * p];
                        row.iter().zip(beta).map(|(x, b)| x * b).sum()
                    })
                    .collect()
            }
            Storage::Sparse {
                indptr,
                indices,
                values,
            } => (0..self.n_rows)
                .map(|r| {
                    let mut acc = beta[0];
                    for k in indptr[r]..indptr[r + 1] {
                        acc += values[k] * beta[indices[k]];
                    }
                    acc
                })
                .collect(),
        }
    }

    /// `X^T v`.
    pub fn t_matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n_rows);
        let mut out = vec![0.0; self.n_cols];
        match &self.storage {
            Storage::Dense(data) => {
                let p = self.n_cols;
                for (r, &vr) in v.iter().enumerate() {
                    if vr == 0.0 {
                        continue;
                    }
                    for c in 0..p {
                        out[c] += data[r * p + c] * vr;
                    }
                }
            }
            Storage::Sparse {
                indptr,
                indices,
                values,
            } => {
                for (r, &vr) in v.iter().enumerate() {
                    if vr == 0.0 {
                        continue;
                    }
                    out[0] += vr;
                    for k in indptr[r]..indptr[r + 1] {
                        out[indices[k]] += values[k] * vr;
                    }
                }
            }
        }
        out
    }

    /// `diag(X^T W X)` for Jacobi preconditioning.
    pub fn weighted_col_squares(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        match &self.storage {
            Storage::Dense(data) => {
                let p = self.n_cols;
                for (r, &wr) in w.iter().enumerate() {
                    for c in 0..p {
                        let x = data[r * p + c];
                        out[c] += wr * x * x;
                    }
                }
            }
            Storage::Sparse {
                indptr,
                indices,
                values,
            } => {
                for (r, &wr) in w.iter().enumerate() {
                    out[0] += wr;
                    for k in indptr[r]..indptr[r + 1] {
                        out[indices[k]] += wr * values[k] * values[k];
                    }
                }
            }
        }
        out
    }

    /// Dense `X^T W X` (only valid for dense storage).
    pub fn weighted_normal_matrix(&self, w: &[f64]) -> nalgebra::DMatrix<f64> {
        let Storage::Dense(data) = &self.storage else {
            panic!("dense normal matrix requested for sparse design");
        };
        let p = self.n_cols;
        let mut xtx = nalgebra::DMatrix::<f64>::zeros(p, p);
        for (r, &wr) in w.iter().enumerate() {
            let row = &data[r * p..(r + 1) * p];
            for a in 0..p {
                let wa = wr * row[a];
                if wa == 0.0 {
                    continue;
                }
                for b in a..p {
                    xtx[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtx[(a, b)] = xtx[(b, a)];
            }
        }
        xtx
    }

    /// Detect empty (all-zero) columns; used for identifiability errors.
    pub fn empty_columns(&self) -> Vec<String> {
        let ones = vec![1.0; self.n_rows];
        let sums = self.weighted_col_squares(&ones);
        let names = self.column_names();
        sums.iter()
            .enumerate()
            .filter(|(_, s)| **s == 0.0)
            .map(|(c, _)| names[c].clone())
            .collect()
    }
}

/// Convenience: map raw codes (e.g. zone ids) to compact u32 codes.
pub fn compact_codes(raw: impl Iterator<Item = u32>) -> (Vec<u32>, HashMap<u32, u32>) {
    let mut map = HashMap::new();
    let mut out = Vec::new();
    for r in raw {
        let next = map.len() as u32;
        let code = *map.entry(r).or_insert(next);
        out.push(code);
    }
    (out, map)
}
