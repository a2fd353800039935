//! Associations, their scores, and input hypothesis sets.

use std::fmt;

use crate::error::{AssocError, Result};
use crate::matrix::{LikelihoodInputs, SparseCostMatrix};

/// Reserved column index meaning "this row is missing".
pub const MISS: usize = usize::MAX;

/// One row-to-column mapping with its NLL cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    /// Column matched to each row, or [`MISS`].
    pub row_to: Vec<usize>,
    pub cost: f64,
    pub parent_hypothesis: Option<usize>,
}

impl Association {
    pub fn all_miss(n_rows: usize) -> Self {
        Association { row_to: vec![MISS; n_rows], cost: 0.0, parent_hypothesis: None }
    }

    /// Builds an association from `row_to`, computing its cost from `matrix`.
    pub fn from_row_to(matrix: &SparseCostMatrix, row_to: Vec<usize>) -> Result<Self> {
        let cost = nll_of(matrix, &row_to)?;
        Ok(Association { row_to, cost, parent_hypothesis: None })
    }

    pub fn n_matched(&self) -> usize {
        self.row_to.iter().filter(|&&c| c != MISS).count()
    }

    /// Inverse map of length `n_cols`, `MISS` for unmatched columns.
    pub fn col_to(&self, n_cols: usize) -> Vec<usize> {
        let mut col_to = vec![MISS; n_cols];
        for (i, &j) in self.row_to.iter().enumerate() {
            if j != MISS {
                col_to[j] = i;
            }
        }
        col_to
    }
}

fn nll_of(matrix: &SparseCostMatrix, row_to: &[usize]) -> Result<f64> {
    if row_to.len() != matrix.n_rows() {
        return Err(AssocError::invalid(format!(
            "association has {} rows, matrix has {}",
            row_to.len(),
            matrix.n_rows()
        )));
    }
    let mut total = 0.0;
    for (row, &col) in row_to.iter().enumerate() {
        if col == MISS {
            continue;
        }
        if col >= matrix.n_cols() {
            return Err(AssocError::AbsentPair { row, col });
        }
        total += matrix.get(row, col).ok_or(AssocError::AbsentPair { row, col })?;
    }
    Ok(total)
}

/// Sum of matched costs; misses contribute zero.
pub fn association_nll(matrix: &SparseCostMatrix, assoc: &Association) -> Result<f64> {
    nll_of(matrix, &assoc.row_to)
}

/// Unnormalized association probability: product of matched likelihoods,
/// missing-row probabilities and missing-column probabilities.
pub fn association_probability(inputs: &LikelihoodInputs, row_to: &[usize]) -> Result<f64> {
    // validates inputs as a side effect
    let matrix = crate::matrix::build_cost(inputs)?;
    if let Some(v) = validate_association(&matrix, row_to).err() {
        return Err(AssocError::invalid(v.to_string()));
    }
    let mut p = 1.0;
    let mut col_used = vec![false; inputs.n_cols];
    for (i, &j) in row_to.iter().enumerate() {
        if j == MISS {
            p *= inputs.miss_row[i];
        } else {
            let l = inputs.likelihoods[i].iter().find(|&&(jj, _)| jj == j).map(|&(_, l)| l);
            p *= l.ok_or(AssocError::AbsentPair { row: i, col: j })?;
            col_used[j] = true;
        }
    }
    for (j, used) in col_used.into_iter().enumerate() {
        if !used {
            p *= inputs.miss_col[j];
        }
    }
    Ok(p)
}

/// First invariant violated by an association.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    WrongLength { expected: usize, got: usize },
    DuplicateColumn { col: usize, rows: (usize, usize) },
    InfeasiblePair { row: usize, col: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WrongLength { expected, got } => write!(f, "row_to has length {got}, expected {expected}"),
            Violation::DuplicateColumn { col, rows } => {
                write!(f, "column {col} assigned to rows {} and {}", rows.0, rows.1)
            }
            Violation::InfeasiblePair { row, col } => write!(f, "pair ({row}, {col}) is gated out"),
        }
    }
}

pub fn validate_association(matrix: &SparseCostMatrix, row_to: &[usize]) -> Result<(), Violation> {
    if row_to.len() != matrix.n_rows() {
        return Err(Violation::WrongLength { expected: matrix.n_rows(), got: row_to.len() });
    }
    let mut owner = vec![MISS; matrix.n_cols()];
    for (row, &col) in row_to.iter().enumerate() {
        if col == MISS {
            continue;
        }
        if col >= matrix.n_cols() || matrix.get(row, col).is_none() {
            return Err(Violation::InfeasiblePair { row, col });
        }
        if owner[col] != MISS {
            return Err(Violation::DuplicateColumn { col, rows: (owner[col], row) });
        }
        owner[col] = row;
    }
    Ok(())
}

/// Prior hypotheses over a shared vector of `n_objects` object slots.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    n_objects: usize,
    /// Sorted object indices present in each hypothesis.
    members: Vec<Vec<usize>>,
    /// Prior NLL offset of each hypothesis.
    priors: Vec<f64>,
}

impl HypothesisSet {
    pub fn new(n_objects: usize, members: Vec<Vec<usize>>, priors: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(AssocError::invalid("hypothesis set is empty"));
        }
        if members.len() != priors.len() {
            return Err(AssocError::invalid("one prior per hypothesis is required"));
        }
        if let Some(p) = priors.iter().find(|p| !p.is_finite()) {
            return Err(AssocError::invalid(format!("prior {p} is not finite")));
        }
        let mut members = members;
        for m in &mut members {
            m.sort_unstable();
            m.dedup();
            if m.last().is_some_and(|&o| o >= n_objects) {
                return Err(AssocError::invalid("hypothesis references an object out of range"));
            }
        }
        Ok(HypothesisSet { n_objects, members, priors })
    }

    /// A single hypothesis containing every object with prior 0.
    pub fn single(n_objects: usize) -> Self {
        HypothesisSet { n_objects, members: vec![(0..n_objects).collect()], priors: vec![0.0] }
    }

    /// Builds from a `K x M` membership matrix.
    pub fn from_membership(membership: &[Vec<bool>], priors: Vec<f64>) -> Result<Self> {
        let m = membership.first().map_or(0, Vec::len);
        if membership.iter().any(|r| r.len() != m) {
            return Err(AssocError::invalid("membership rows differ in length"));
        }
        let members =
            membership.iter().map(|r| r.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()).collect();
        Self::new(m, members, priors)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn members(&self, h: usize) -> &[usize] {
        &self.members[h]
    }

    pub fn prior(&self, h: usize) -> f64 {
        self.priors[h]
    }

    pub fn membership_row(&self, h: usize) -> Vec<bool> {
        let mut row = vec![false; self.n_objects];
        for &o in &self.members[h] {
            row[o] = true;
        }
        row
    }
}
