//! Random problem generators and gating.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::association::{HypothesisSet, MISS};
use crate::error::{AssocError, Result};
use crate::kbest::{kbest_single, KBestConfig, OutputSet, Version};
use crate::matrix::SparseCostMatrix;

/// Generator for `(seed, stream)`. Trials of one experiment share the seed
/// and use their index as the stream.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Dense `rows x cols` matrix with entries uniform on `[-2, -1)`.
pub fn random_dense_with<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> SparseCostMatrix {
    let values: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-2.0..-1.0)).collect();
    SparseCostMatrix::dense_with_shape(rows, cols, &values).expect("finite values")
}

/// Square dense matrix with entries uniform on `[-2, -1)`. Every match beats a
/// miss by at least 1, so no top association of a large enough matrix leaves
/// a row missing.
pub fn gen_random_dense(size: usize, seed: u64) -> SparseCostMatrix {
    random_dense_with(size, size, &mut seeded_rng(seed, 0))
}

/// Keeps the `s` cheapest entries of each row, ties to the lower column.
pub fn gate_matrix(matrix: &SparseCostMatrix, s: usize) -> SparseCostMatrix {
    let mut rows = Vec::with_capacity(matrix.n_rows());
    let mut order = Vec::new();
    for r in 0..matrix.n_rows() {
        let cols = matrix.row_cols(r);
        let costs = matrix.row_costs(r);
        if s == 0 {
            rows.push(Vec::new());
            continue;
        }
        if cols.len() <= s {
            rows.push(cols.iter().copied().zip(costs.iter().copied()).collect());
            continue;
        }
        order.clear();
        order.extend(0..cols.len());
        order.select_nth_unstable_by(s - 1, |&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
        order.truncate(s);
        order.sort_unstable();
        rows.push(order.iter().map(|&k| (cols[k], costs[k])).collect());
    }
    SparseCostMatrix::from_rows(matrix.n_cols(), rows).expect("subset of a valid matrix")
}

/// 1-based rank of each entry within its row under the gating order.
fn entry_ranks(matrix: &SparseCostMatrix, r: usize) -> Vec<usize> {
    let costs = matrix.row_costs(r);
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    let mut rank = vec![0; costs.len()];
    for (k, &i) in order.iter().enumerate() {
        rank[i] = k + 1;
    }
    rank
}

/// Smallest gate that every association in `outputs` survives.
pub fn gate_needed(matrix: &SparseCostMatrix, outputs: &OutputSet) -> usize {
    let ranks: Vec<Vec<usize>> = (0..matrix.n_rows()).map(|r| entry_ranks(matrix, r)).collect();
    let mut s = 1;
    for e in outputs.iter() {
        for (r, &c) in e.association.row_to.iter().enumerate() {
            if c != MISS {
                let k = matrix.row_cols(r).binary_search(&c).expect("association uses a present pair");
                s = s.max(ranks[r][k]);
            }
        }
    }
    s
}

/// Smallest `S` for which the gated matrix has the same K best
/// associations as `matrix`.
///
/// Gating with `S` keeps every pair of rank at most `S`, so the gated K-best
/// equals the dense one exactly when every dense top-K association uses
/// only such pairs. `S*` is therefore the largest rank used by the top K.
pub fn min_sufficient_gate(matrix: &SparseCostMatrix, k: usize) -> Result<usize> {
    let outputs = kbest_single(matrix, k, Version::V3.config())?;
    Ok(gate_needed(matrix, &outputs))
}

/// [`min_sufficient_gate`] by re-solving at every `S` from 1 upward.
pub fn min_sufficient_gate_search(matrix: &SparseCostMatrix, k: usize) -> Result<usize> {
    let config = Version::V3.config();
    let dense = kbest_single(matrix, k, config)?;
    let width = (0..matrix.n_rows()).map(|r| matrix.row_cols(r).len()).max().unwrap_or(0).max(1);
    for s in 1..=width {
        let gated = kbest_single(&gate_matrix(matrix, s), k, KBestConfig { sparse: true, ..config })?;
        if same_solutions(&dense, &gated) {
            return Ok(s);
        }
    }
    Ok(width)
}

/// Same associations in the same cost order, up to reordering within ties.
pub fn same_solutions(a: &OutputSet, b: &OutputSet) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let key = |o: &OutputSet| {
        let mut v: Vec<(usize, Vec<usize>)> = o.iter().map(|e| (e.parent(), e.association.row_to.clone())).collect();
        v.sort();
        v
    };
    a.iter().zip(b.iter()).all(|(x, y)| (x.total - y.total).abs() <= 1e-9 * (1.0 + x.total.abs())) && key(a) == key(b)
}

/// Input hypotheses for a second association stage built from first-stage
/// outputs. Each distinct matched `(row, col)` pair becomes one object; an
/// output becomes a hypothesis over its pairs, with its total as prior.
pub fn chain_hypotheses(outputs: &OutputSet) -> Result<(Vec<(usize, usize)>, HypothesisSet)> {
    let mut pairs: Vec<(usize, usize)> = outputs
        .iter()
        .flat_map(|e| e.association.row_to.iter().enumerate().filter(|(_, &c)| c != MISS).map(|(r, &c)| (r, c)))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let members = outputs
        .iter()
        .map(|e| {
            e.association
                .row_to
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != MISS)
                .map(|(r, &c)| pairs.binary_search(&(r, c)).expect("pair collected above"))
                .collect()
        })
        .collect();
    let priors = outputs.totals();
    let hyps = HypothesisSet::new(pairs.len(), members, priors)?;
    Ok((pairs, hyps))
}

/// Two chained random association problems.
#[derive(Debug, Clone)]
pub struct Chain {
    pub stage1: SparseCostMatrix,
    pub stage1_outputs: OutputSet,
    /// Stage-1 `(row, col)` pair behind each stage-2 row.
    pub pairs: Vec<(usize, usize)>,
    pub stage2: SparseCostMatrix,
    pub hypotheses: HypothesisSet,
}

/// Stage 1 is a `size x size` random matrix solved for its `k` best; stage 2
/// has one row per distinct matched pair and `size` fresh columns.
pub fn gen_chain(size: usize, k: usize, seed: u64, stream: u64) -> Result<Chain> {
    if size == 0 {
        return Err(AssocError::invalid("size must be at least 1"));
    }
    let mut rng = seeded_rng(seed, stream);
    let stage1 = random_dense_with(size, size, &mut rng);
    let stage1_outputs = kbest_single(&stage1, k, Version::V3.config())?;
    let (pairs, hypotheses) = chain_hypotheses(&stage1_outputs)?;
    let stage2 = random_dense_with(pairs.len(), size, &mut rng);
    Ok(Chain { stage1, stage1_outputs, pairs, stage2, hypotheses })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_dense_range_and_determinism() {
        let a = gen_random_dense(20, 3);
        assert!(a.is_dense());
        for r in 0..20 {
            assert!(a.row_costs(r).iter().all(|&c| (-2.0..-1.0).contains(&c)));
        }
        assert_eq!(a, gen_random_dense(20, 3));
        assert_ne!(a, gen_random_dense(20, 4));
    }

    #[test]
    fn gate_examples() {
        let m = SparseCostMatrix::from_dense(&[vec![-1.9, -1.2, -1.5]]).unwrap();
        let g = gate_matrix(&m, 2);
        assert_eq!(g.row_cols(0), &[0, 2]);
        assert_eq!(g.row_costs(0), &[-1.9, -1.5]);
        assert_eq!(gate_matrix(&m, 3), m);
        assert_eq!(gate_matrix(&m, 10), m);
    }

    #[test]
    fn gate_examples_min_sufficient() {
        let one = SparseCostMatrix::from_dense(&[vec![-1.0]]).unwrap();
        assert_eq!(min_sufficient_gate(&one, 1).unwrap(), 1);
        assert_eq!(min_sufficient_gate(&one, 5).unwrap(), 1);
        let n = 6;
        let diag: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { -10.0 } else { -1.0 }).collect();
        let d = SparseCostMatrix::dense_with_shape(n, n, &diag).unwrap();
        assert_eq!(min_sufficient_gate(&d, 1).unwrap(), 1);
    }

    #[test]
    fn analytic_gate_matches_search() {
        for seed in 0..15 {
            let m = gen_random_dense(8, seed);
            for k in [1, 5, 30] {
                assert_eq!(min_sufficient_gate(&m, k).unwrap(), min_sufficient_gate_search(&m, k).unwrap());
            }
        }
    }

    #[test]
    fn chain_rows_are_distinct_pairs() {
        let c = gen_chain(6, 10, 1, 0).unwrap();
        assert_eq!(c.stage2.n_rows(), c.pairs.len());
        assert_eq!(c.hypotheses.len(), 10);
        let distinct: std::collections::BTreeSet<(usize, usize)> = c
            .stage1_outputs
            .iter()
            .flat_map(|e| e.association.row_to.iter().enumerate().filter(|(_, &x)| x != MISS).map(|(r, &x)| (r, x)))
            .collect();
        assert_eq!(distinct.len(), c.pairs.len());
        for (h, e) in c.stage1_outputs.iter().enumerate() {
            assert_eq!(c.hypotheses.prior(h), e.total);
            assert_eq!(c.hypotheses.members(h).len(), e.association.n_matched());
        }
    }
}
