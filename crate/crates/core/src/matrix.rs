//! Gated cost matrices in compressed-row form.
//!
//! A pair absent from the structure cannot be matched. Misses are implicit
//! and always cost zero, so they are never stored.

use std::fmt::Write as _;

use crate::error::{AssocError, Result};

/// Negative-log-likelihood cost matrix with a per-row sorted sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCostMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    costs: Vec<f64>,
}

impl SparseCostMatrix {
    /// Builds a matrix from per-row `(col, cost)` lists. Each row is sorted
    /// by column; duplicate columns, out-of-range columns and non-finite
    /// costs are rejected.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut costs = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for (k, &(j, c)) in row.iter().enumerate() {
                if j >= n_cols {
                    return Err(AssocError::invalid(format!("column {j} out of range in row {i} (n_cols = {n_cols})")));
                }
                if k > 0 && row[k - 1].0 == j {
                    return Err(AssocError::invalid(format!("duplicate pair ({i}, {j})")));
                }
                if !c.is_finite() {
                    return Err(AssocError::invalid(format!("non-finite cost at ({i}, {j})")));
                }
                cols.push(j);
                costs.push(c);
            }
            row_ptr.push(cols.len());
        }
        Ok(SparseCostMatrix { n_rows, n_cols, row_ptr, cols, costs })
    }

    /// Dense matrix: every row lists all columns.
    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        let n_cols = dense.first().map_or(0, Vec::len);
        let rows = dense
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if r.len() != n_cols {
                    return Err(AssocError::invalid(format!("row {i} has {} entries, expected {n_cols}", r.len())));
                }
                Ok(r.iter().copied().enumerate().collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(n_cols, rows)
    }

    /// Dense matrix with an explicit shape, allowing `0 x N` and `M x 0`.
    pub fn dense_with_shape(n_rows: usize, n_cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(AssocError::invalid("value count does not match shape"));
        }
        let rows = (0..n_rows).map(|i| (0..n_cols).map(|j| (j, values[i * n_cols + j])).collect()).collect();
        Self::from_rows(n_cols, rows)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Column indices stored for `row`, strictly increasing.
    #[inline]
    pub fn row_cols(&self, row: usize) -> &[usize] {
        &self.cols[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    #[inline]
    pub fn row_costs(&self, row: usize) -> &[f64] {
        &self.costs[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_cols(row).iter().copied().zip(self.row_costs(row).iter().copied())
    }

    /// Cost of a stored pair, `None` if the pair is gated out.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let cols = self.row_cols(row);
        if cols.len() == self.n_cols {
            // dense row: column index is the position
            return Some(self.row_costs(row)[col]);
        }
        cols.binary_search(&col).ok().map(|k| self.row_costs(row)[k])
    }

    pub fn is_dense(&self) -> bool {
        self.nnz() == self.n_rows * self.n_cols
    }

    pub fn max_abs_cost(&self) -> f64 {
        self.costs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Sub-matrix keeping only `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> SparseCostMatrix {
        let rows = rows.iter().map(|&i| self.row(i).collect()).collect();
        SparseCostMatrix::from_rows(self.n_cols, rows).expect("rows of a valid matrix")
    }

    /// Writes the text format: `M N` header, then one `i j c` line per pair.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, c) in self.row(i) {
                let _ = writeln!(out, "{i} {j} {c:?}");
            }
        }
        out
    }

    /// Parses the text format written by [`SparseCostMatrix::to_text`].
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(AssocError::Parse { line: 1, msg: "missing header".into() })?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(AssocError::Parse { line: hline, msg: "header must be `M N`".into() });
        }
        let parse_usize = |s: &str, line: usize| {
            s.parse::<usize>().map_err(|e| AssocError::Parse { line, msg: format!("bad index {s:?}: {e}") })
        };
        let n_rows = parse_usize(dims[0], hline)?;
        let n_cols = parse_usize(dims[1], hline)?;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for (line, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(AssocError::Parse { line, msg: "expected `i j c`".into() });
            }
            let i = parse_usize(f[0], line)?;
            let j = parse_usize(f[1], line)?;
            let c: f64 =
                f[2].parse().map_err(|e| AssocError::Parse { line, msg: format!("bad cost {:?}: {e}", f[2]) })?;
            if i >= n_rows || j >= n_cols {
                return Err(AssocError::Parse { line, msg: format!("pair ({i}, {j}) out of range") });
            }
            if !c.is_finite() {
                return Err(AssocError::Parse { line, msg: "cost must be finite".into() });
            }
            if rows[i].iter().any(|&(jj, _)| jj == j) {
                return Err(AssocError::Parse { line, msg: format!("duplicate pair ({i}, {j})") });
            }
            rows[i].push((j, c));
        }
        Self::from_rows(n_cols, rows)
    }
}

/// Likelihood inputs of the association probability: gated pair
/// likelihoods plus per-row and per-column miss probabilities.
#[derive(Debug, Clone)]
pub struct LikelihoodInputs {
    pub n_cols: usize,
    /// Per-row `(col, likelihood)` lists.
    pub likelihoods: Vec<Vec<(usize, f64)>>,
    pub miss_row: Vec<f64>,
    pub miss_col: Vec<f64>,
}

impl LikelihoodInputs {
    fn validate(&self) -> Result<()> {
        if self.miss_row.len() != self.likelihoods.len() {
            return Err(AssocError::invalid("miss_row length must equal the number of rows"));
        }
        if self.miss_col.len() != self.n_cols {
            return Err(AssocError::invalid("miss_col length must equal the number of columns"));
        }
        for (name, probs) in [("row", &self.miss_row), ("column", &self.miss_col)] {
            if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
                return Err(AssocError::invalid(format!("{name} miss probability {p} not in (0, 1]")));
            }
        }
        for (i, row) in self.likelihoods.iter().enumerate() {
            for &(j, l) in row {
                if !l.is_finite() || l <= 0.0 {
                    return Err(AssocError::invalid(format!("likelihood at ({i}, {j}) must be positive, got {l}")));
                }
            }
        }
        Ok(())
    }

    /// Log of the factor dropped by the cost transform:
    /// `sum_i log p(i miss) + sum_j log p(j miss)`.
    pub fn log_miss_constant(&self) -> f64 {
        self.miss_row.iter().map(|p| p.ln()).sum::<f64>() + self.miss_col.iter().map(|p| p.ln()).sum::<f64>()
    }
}

/// Negative log transform of the pair likelihoods:
/// `C_ij = -log L_ij + log p(i miss) + log p(j miss)`.
pub fn build_cost(inputs: &LikelihoodInputs) -> Result<SparseCostMatrix> {
    inputs.validate()?;
    let rows = inputs
        .likelihoods
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .map(|&(j, l)| {
                    let miss_j = inputs.miss_col.get(j).copied().unwrap_or(1.0);
                    (j, -l.ln() + inputs.miss_row[i].ln() + miss_j.ln())
                })
                .collect()
        })
        .collect();
    SparseCostMatrix::from_rows(inputs.n_cols, rows)
}
