//! Contingency tables and probability tables.
//!
//! Cells are stored row-major, `(0,0), (0,1), …, (r-1,c-1)`. Every vector of
//! per-cell quantities in this crate (gradients, flattened probabilities,
//! sampled counts) uses the same order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sum::compensated;

/// Tolerance on the total mass of an externally supplied probability table.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("row {row} has {found} entries, expected {expected}")]
    NonRectangular {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("negative count {value} at row {row}, column {col}")]
    NegativeCount { row: usize, col: usize, value: i64 },
    #[error("table has no positive entries")]
    EmptyTable,
    #[error("table needs at least 2 non-empty rows and columns, found {rows}x{cols}")]
    TooFewCategories { rows: usize, cols: usize },
    #[error("invalid probability {value} at row {row}, column {col}")]
    InvalidProbability { row: usize, col: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("vector of length {len} cannot be reshaped to {rows}x{cols}")]
    DimensionMismatch {
        len: usize,
        rows: usize,
        cols: usize,
    },
}

/// Observed frequencies of an `r × c` cross-classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    /// Validates a grid of counts.
    ///
    /// Empty rows and columns are allowed here and dropped later by
    /// [`to_probabilities`](Self::to_probabilities), but at least two
    /// non-empty rows and two non-empty columns must remain.
    pub fn from_counts<R: AsRef<[i64]>>(grid: &[R]) -> Result<Self, TableError> {
        let rows = grid.len();
        let cols = grid.first().map_or(0, |r| r.as_ref().len());
        let mut counts = Vec::with_capacity(rows * cols);
        for (i, row) in grid.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(TableError::NonRectangular {
                    row: i,
                    expected: cols,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v < 0 {
                    return Err(TableError::NegativeCount {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                counts.push(v as u64);
            }
        }
        let table = Self::from_raw(rows, cols, counts);
        if table.total == 0 {
            return Err(TableError::EmptyTable);
        }
        let (live_rows, live_cols) = table.nonempty_lines();
        if live_rows.len() < 2 || live_cols.len() < 2 {
            return Err(TableError::TooFewCategories {
                rows: live_rows.len(),
                cols: live_cols.len(),
            });
        }
        Ok(table)
    }

    /// Builds a table without the category-count check. Used for sampled
    /// tables, which may legitimately collapse to fewer than two lines.
    pub(crate) fn from_raw(rows: usize, cols: usize, counts: Vec<u64>) -> Self {
        debug_assert_eq!(counts.len(), rows * cols);
        let total = counts.iter().sum();
        Self {
            rows,
            cols,
            counts,
            total,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Sample size `n`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    /// Row-major counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn to_grid(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.cols).map(<[u64]>::to_vec).collect()
    }

    fn nonempty_lines(&self) -> (Vec<usize>, Vec<usize>) {
        let rows = (0..self.rows)
            .filter(|&i| (0..self.cols).any(|j| self.get(i, j) > 0))
            .collect();
        let cols = (0..self.cols)
            .filter(|&j| (0..self.rows).any(|i| self.get(i, j) > 0))
            .collect();
        (rows, cols)
    }

    /// Relative frequencies `n_ij / n`, with empty rows and columns removed.
    ///
    /// Fails only for tables that collapse below `2 × 2`, which
    /// [`from_counts`](Self::from_counts) already rejects; sampled tables can
    /// reach this.
    pub fn to_probabilities(&self) -> Result<ProbabilityTable, TableError> {
        if self.total == 0 {
            return Err(TableError::EmptyTable);
        }
        let (live_rows, live_cols) = self.nonempty_lines();
        if live_rows.len() < 2 || live_cols.len() < 2 {
            return Err(TableError::TooFewCategories {
                rows: live_rows.len(),
                cols: live_cols.len(),
            });
        }
        let n = self.total as f64;
        let mut p = Vec::with_capacity(live_rows.len() * live_cols.len());
        for &i in &live_rows {
            for &j in &live_cols {
                p.push(self.get(i, j) as f64 / n);
            }
        }
        let row_margins = live_rows
            .iter()
            .map(|&i| (0..self.cols).map(|j| self.get(i, j)).sum::<u64>() as f64 / n)
            .collect();
        let col_margins = live_cols
            .iter()
            .map(|&j| (0..self.rows).map(|i| self.get(i, j)).sum::<u64>() as f64 / n)
            .collect();
        Ok(ProbabilityTable {
            rows: live_rows.len(),
            cols: live_cols.len(),
            p,
            row_margins,
            col_margins,
            dropped_rows: (0..self.rows).filter(|i| !live_rows.contains(i)).collect(),
            dropped_cols: (0..self.cols).filter(|j| !live_cols.contains(j)).collect(),
        })
    }
}

/// Cell probabilities on the simplex, with strictly positive margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    rows: usize,
    cols: usize,
    p: Vec<f64>,
    row_margins: Vec<f64>,
    col_margins: Vec<f64>,
    dropped_rows: Vec<usize>,
    dropped_cols: Vec<usize>,
}

impl ProbabilityTable {
    /// Validates a grid of probabilities summing to one within
    /// [`NORMALIZATION_TOL`]. Zero rows and columns are dropped.
    pub fn from_probabilities<R: AsRef<[f64]>>(grid: &[R]) -> Result<Self, TableError> {
        let rows = grid.len();
        let cols = grid.first().map_or(0, |r| r.as_ref().len());
        let mut flat = Vec::with_capacity(rows * cols);
        for (i, row) in grid.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(TableError::NonRectangular {
                    row: i,
                    expected: cols,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::unflatten(&flat, rows, cols)
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn unflatten(v: &[f64], rows: usize, cols: usize) -> Result<Self, TableError> {
        if v.len() != rows * cols {
            return Err(TableError::DimensionMismatch {
                len: v.len(),
                rows,
                cols,
            });
        }
        for (k, &x) in v.iter().enumerate() {
            if !x.is_finite() || !(0.0..=1.0).contains(&x) {
                return Err(TableError::InvalidProbability {
                    row: k / cols.max(1),
                    col: k % cols.max(1),
                    value: x,
                });
            }
        }
        let sum = compensated(v.iter().copied());
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(TableError::NotNormalized { sum });
        }
        Self::collapse(v, rows, cols)
    }

    fn collapse(v: &[f64], rows: usize, cols: usize) -> Result<Self, TableError> {
        let at = |i: usize, j: usize| v[i * cols + j];
        let live_rows: Vec<usize> = (0..rows)
            .filter(|&i| (0..cols).any(|j| at(i, j) > 0.0))
            .collect();
        let live_cols: Vec<usize> = (0..cols)
            .filter(|&j| (0..rows).any(|i| at(i, j) > 0.0))
            .collect();
        if live_rows.len() < 2 || live_cols.len() < 2 {
            return Err(TableError::TooFewCategories {
                rows: live_rows.len(),
                cols: live_cols.len(),
            });
        }
        let mut p = Vec::with_capacity(live_rows.len() * live_cols.len());
        for &i in &live_rows {
            for &j in &live_cols {
                p.push(at(i, j));
            }
        }
        let (r, c) = (live_rows.len(), live_cols.len());
        let row_margins = (0..r)
            .map(|i| compensated((0..c).map(|j| p[i * c + j])))
            .collect();
        let col_margins = (0..c)
            .map(|j| compensated((0..r).map(|i| p[i * c + j])))
            .collect();
        Ok(Self {
            rows: r,
            cols: c,
            p,
            row_margins,
            col_margins,
            dropped_rows: (0..rows).filter(|i| !live_rows.contains(i)).collect(),
            dropped_cols: (0..cols).filter(|j| !live_cols.contains(j)).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.cols + j]
    }

    /// Row-major cell probabilities `(p_11, p_12, …, p_rc)`.
    pub fn flatten(&self) -> &[f64] {
        &self.p
    }

    pub fn row_margins(&self) -> &[f64] {
        &self.row_margins
    }

    pub fn col_margins(&self) -> &[f64] {
        &self.col_margins
    }

    /// Independence counterpart `p_i· p_·j` of cell `(i, j)`.
    pub fn expected(&self, i: usize, j: usize) -> f64 {
        self.row_margins[i] * self.col_margins[j]
    }

    /// Iterates `(i, j, p_ij, p_i· p_·j)` in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        let c = self.cols;
        self.p
            .iter()
            .enumerate()
            .map(move |(k, &p)| (k / c, k % c, p, self.expected(k / c, k % c)))
    }

    pub fn zero_cells(&self) -> usize {
        self.p.iter().filter(|&&x| x == 0.0).count()
    }

    /// Indices (in the input grid) of rows removed because they were empty.
    pub fn dropped_rows(&self) -> &[usize] {
        &self.dropped_rows
    }

    pub fn dropped_cols(&self) -> &[usize] {
        &self.dropped_cols
    }

    pub fn transpose(&self) -> Self {
        let mut p = Vec::with_capacity(self.p.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                p.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            p,
            row_margins: self.col_margins.clone(),
            col_margins: self.row_margins.clone(),
            dropped_rows: self.dropped_cols.clone(),
            dropped_cols: self.dropped_rows.clone(),
        }
    }

    /// True when every cell is within `tol` of its independence counterpart.
    pub fn is_independent(&self, tol: f64) -> bool {
        self.cells().all(|(_, _, p, q)| (p - q).abs() <= tol)
    }
}
