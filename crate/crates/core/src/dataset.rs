use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An n×d table of real observations with per-column names, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    names: Vec<String>,
    n_rows: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, n_rows: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * names.len() {
            return Err(Error::DimensionMismatch {
                expected: n_rows * names.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            names,
            n_rows,
            values,
        })
    }

    /// Builds a dataset from columns, naming them `X1`, `X2`, ...
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let names = (1..=columns.len()).map(|j| format!("X{j}")).collect();
        Self::from_named_columns(names, columns)
    }

    pub fn from_named_columns(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                found: columns.len(),
            });
        }
        let n = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch(n, c.len()));
        }
        let d = columns.len();
        let mut values = vec![0.0; n * d];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                values[i * d + j] = v;
            }
        }
        Self::new(names, n, values)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[row * d..(row + 1) * d]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, col)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_cols()).map(|j| self.column(j)).collect()
    }

    /// Applies `f(col, value)` to every cell.
    pub fn map(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let d = self.n_cols();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(k % d, v))
            .collect();
        Self {
            names: self.names.clone(),
            n_rows: self.n_rows,
            values,
        }
    }

    /// The rows at the given indices, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self {
            names: self.names.clone(),
            n_rows: rows.len(),
            values,
        }
    }

    /// Returns the index of the first column whose values are all equal.
    pub fn find_constant_column(&self) -> Option<usize> {
        (0..self.n_cols()).find(|&j| {
            let first = self.get(0, j);
            (1..self.n_rows).all(|i| self.get(i, j) == first)
        })
    }
}
