//! Dense row-major feature matrix with named columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense numeric matrix whose columns carry feature names.
///
/// Rows are observations, columns are features. Storage is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major data. `data.len()` must equal `rows * cols`
    /// and `names.len()` must equal `cols`.
    pub fn new(names: Vec<String>, rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if names.len() != cols {
            return Err(Error::InputShape(format!(
                "{} column names for {} columns",
                names.len(),
                cols
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InputShape(format!(
                "data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self {
            names,
            rows,
            cols,
            data,
        })
    }

    /// Builds a matrix from per-row slices of equal length.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let cols = names.len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::InputShape(format!(
                    "row {} has {} values, expected {}",
                    i,
                    row.len(),
                    cols
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            names,
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Column values as an owned vector.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Index of a named column.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Iterator over rows.
    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    /// New matrix keeping only the named columns, in the given order.
    pub fn select_columns(&self, keep: &[String]) -> Result<Self> {
        let mut idx = Vec::with_capacity(keep.len());
        for name in keep {
            match self.column_index(name) {
                Some(i) => idx.push(i),
                None => {
                    return Err(Error::InputShape(format!("no column named '{name}'")));
                }
            }
        }
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for r in 0..self.rows {
            let row = self.row(r);
            for &c in &idx {
                data.push(row[c]);
            }
        }
        Ok(Self {
            names: keep.to_vec(),
            rows: self.rows,
            cols: idx.len(),
            data,
        })
    }

    /// New matrix keeping only the given rows, in the given order.
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let mut data = Vec::with_capacity(keep.len() * self.cols);
        for &r in keep {
            data.extend_from_slice(self.row(r));
        }
        Self {
            names: self.names.clone(),
            rows: keep.len(),
            cols: self.cols,
            data,
        }
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Mean of per-column population variances; used by the RBF gamma default.
    pub fn mean_column_variance(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let n = self.rows as f64;
        let mut total = 0.0;
        for c in 0..self.cols {
            let mut mean = 0.0;
            for r in 0..self.rows {
                mean += self.get(r, c);
            }
            mean /= n;
            let mut var = 0.0;
            for r in 0..self.rows {
                let d = self.get(r, c) - mean;
                var += d * d;
            }
            total += var / n;
        }
        total / self.cols as f64
    }
}
