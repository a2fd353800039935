//! Exhaustive enumeration of small instances.

use crate::association::{Association, MISS};
use crate::error::{AssocError, Result};
use crate::kbest::{OutputEntry, OutputSet};
use crate::matrix::SparseCostMatrix;

/// Largest number of associations [`enumerate_all`] will produce.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub associations: Vec<Association>,
    pub count: usize,
}

/// Number of associations of a dense `m x n` matrix: `sum_k C(m,k) C(n,k) k!`.
/// Saturates at `u128::MAX`.
pub fn association_count(m: usize, n: usize) -> u128 {
    let mut total: u128 = 0;
    // term_k = C(m,k) C(n,k) k! = m!/(m-k)! * C(n,k)
    let mut falling: u128 = 1;
    let mut binom: u128 = 1;
    for k in 0..=m.min(n) {
        if k > 0 {
            falling = falling.saturating_mul((m - k + 1) as u128);
            binom = binom.saturating_mul((n - k + 1) as u128) / k as u128;
        }
        total = total.saturating_add(falling.saturating_mul(binom));
    }
    total
}

/// Every valid association exactly once, in row-major choice order
/// (columns ascending, miss last).
pub fn enumerate_all(matrix: &SparseCostMatrix) -> Result<EnumerationResult> {
    let count = association_count(matrix.n_rows(), matrix.n_cols());
    if count > ENUMERATION_LIMIT {
        return Err(AssocError::TooLarge { count, limit: ENUMERATION_LIMIT });
    }
    let mut out = Vec::new();
    let mut row_to = vec![MISS; matrix.n_rows()];
    let mut used = vec![false; matrix.n_cols()];
    recurse(matrix, 0, 0.0, &mut row_to, &mut used, &mut out);
    let count = out.len();
    Ok(EnumerationResult { associations: out, count })
}

fn recurse(
    matrix: &SparseCostMatrix,
    row: usize,
    cost: f64,
    row_to: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<Association>,
) {
    if row == matrix.n_rows() {
        out.push(Association { row_to: row_to.clone(), cost, parent_hypothesis: None });
        return;
    }
    for (j, c) in matrix.row(row) {
        if used[j] {
            continue;
        }
        used[j] = true;
        row_to[row] = j;
        recurse(matrix, row + 1, cost + c, row_to, used, out);
        used[j] = false;
    }
    row_to[row] = MISS;
    recurse(matrix, row + 1, cost, row_to, used, out);
}

/// The K cheapest associations by exhaustive enumeration. Ties keep
/// enumeration order.
pub fn kbest_bruteforce(matrix: &SparseCostMatrix, k: usize) -> Result<OutputSet> {
    let mut all = enumerate_all(matrix)?.associations;
    all.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    all.truncate(k);
    let entries = all
        .into_iter()
        .map(|mut a| {
            a.parent_hypothesis = Some(0);
            OutputEntry { total: a.cost, association: a }
        })
        .collect();
    Ok(OutputSet { entries })
}
