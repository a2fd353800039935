//! K-best associations by Murty's partitioning.
//!
//! Solved problems live in a [`SolutionQueue`] whose capacity is the
//! number of outputs still needed, so it never exceeds `K`. A child problem
//! inherits its parent's matching and reductions; one shortest path from
//! the partition row finds its optimum. With early stopping the search is
//! cut off as soon as it cannot beat the worst stored solution.

use crate::association::{Association, HypothesisSet, MISS};
use crate::error::{AssocError, Result};
use crate::matrix::SparseCostMatrix;
use crate::queue::SolutionQueue;
use crate::ssp::{
    check_duals, default_epsilon, Constraints, DualState, Matching, PathProblem, PathStatus, ScanMode, Solver, Target,
};

/// Algorithm switches. Any combination returns the same solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KBestConfig {
    /// Abort subproblem searches that exceed the worst stored cost.
    pub early_stop: bool,
    /// Partition rows in decreasing order of their one-step lower bound.
    pub lookahead: bool,
    /// Heap-based search, for gated matrices.
    pub sparse: bool,
    /// Verify dual feasibility and slackness after every solve.
    pub audit_duals: bool,
    /// Keep the constraints of every pruned subproblem in [`KBestStats`].
    pub record_pruned: bool,
}

/// The cumulative algorithm versions: implicit misses, then early
/// stopping, look-ahead ordering and gating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Version {
    V1,
    V2,
    V3,
    V4,
}

impl Version {
    pub const ALL: [Version; 4] = [Version::V1, Version::V2, Version::V3, Version::V4];

    pub fn config(self) -> KBestConfig {
        let v = self as u8;
        KBestConfig { early_stop: v >= 1, lookahead: v >= 2, sparse: v >= 3, ..Default::default() }
    }

    /// Whether this version expects a gated input matrix.
    pub fn gated(self) -> bool {
        self == Version::V4
    }

    pub fn name(self) -> &'static str {
        match self {
            Version::V1 => "v1",
            Version::V2 => "v2",
            Version::V3 => "v3",
            Version::V4 => "v4",
        }
    }

    pub fn parse(s: &str) -> Option<Version> {
        Version::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s))
    }
}

/// A Murty subproblem together with its solution.
#[derive(Debug, Clone)]
pub struct ProblemNode {
    pub hypothesis: usize,
    /// Rows whose assignment is inherited as mandatory.
    pub fixed_rows: Vec<usize>,
    /// Excluded `(row, col|MISS)` pairs on rows that are still free.
    pub forbidden: Vec<(usize, usize)>,
    /// Prior NLL of the input hypothesis.
    pub prior: f64,
    pub matching: Matching,
    pub duals: DualState,
    /// Prior plus association cost.
    pub total: f64,
    /// Look-ahead bound the node was created with (`-inf` for seeds).
    pub lower_bound: f64,
}

impl ProblemNode {
    pub fn association_cost(&self) -> f64 {
        self.total - self.prior
    }
}

/// One output hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputEntry {
    /// Association over all matrix rows; rows outside the parent hypothesis are `MISS`.
    pub association: Association,
    /// Prior plus association cost.
    pub total: f64,
}

impl OutputEntry {
    pub fn parent(&self) -> usize {
        self.association.parent_hypothesis.unwrap_or(0)
    }
}

/// Outputs sorted by total NLL.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSet {
    pub entries: Vec<OutputEntry>,
}

impl OutputSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.total).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &OutputEntry> {
        self.entries.iter()
    }
}

/// Constraints of a subproblem whose search was cut off.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedNode {
    pub hypothesis: usize,
    pub prior: f64,
    pub constraints: Constraints,
}

#[derive(Debug, Clone, Default)]
pub struct KBestStats {
    pub solved: usize,
    pub pruned: usize,
    pub infeasible: usize,
    /// Largest number of problems held in the queue.
    pub peak_queue: usize,
    pub dual_checks: usize,
    pub pruned_nodes: Vec<PrunedNode>,
}

/// Reusable K-best driver.
#[derive(Debug)]
pub struct KBest {
    solver: Solver,
    config: KBestConfig,
    stats: KBestStats,
    forb_buf: Vec<(usize, usize)>,
    order_buf: Vec<(f64, usize)>,
}

impl KBest {
    pub fn new(config: KBestConfig) -> Self {
        let mode = if config.sparse { ScanMode::Heap } else { ScanMode::Dense };
        KBest {
            solver: Solver::new(mode),
            config,
            stats: KBestStats::default(),
            forb_buf: Vec::new(),
            order_buf: Vec::new(),
        }
    }

    pub fn config(&self) -> KBestConfig {
        self.config
    }

    /// Statistics of the last run.
    pub fn stats(&self) -> &KBestStats {
        &self.stats
    }

    pub fn single(&mut self, matrix: &SparseCostMatrix, k: usize) -> Result<OutputSet> {
        self.mimo(matrix, &HypothesisSet::single(matrix.n_rows()), k)
    }

    /// K globally best `(hypothesis, association)` pairs over all input hypotheses.
    pub fn mimo(&mut self, matrix: &SparseCostMatrix, hyps: &HypothesisSet, k: usize) -> Result<OutputSet> {
        if k == 0 {
            return Err(AssocError::invalid("K must be at least 1"));
        }
        if hyps.is_empty() {
            return Err(AssocError::invalid("hypothesis set is empty"));
        }
        if hyps.n_objects() != matrix.n_rows() {
            return Err(AssocError::invalid(format!(
                "hypotheses cover {} objects, matrix has {} rows",
                hyps.n_objects(),
                matrix.n_rows()
            )));
        }
        self.stats = KBestStats::default();
        let mut queue: SolutionQueue<ProblemNode> = SolutionQueue::new(k);

        for h in 0..hyps.len() {
            let prior = hyps.prior(h);
            let bound = if self.config.early_stop { queue.worst_bound() - prior } else { f64::INFINITY };
            let cons = Constraints { rows: Some(hyps.members(h).to_vec()), ..Default::default() };
            match self.solver.solve(matrix, &cons, bound) {
                Ok(Some(s)) => {
                    self.stats.solved += 1;
                    let node = ProblemNode {
                        hypothesis: h,
                        fixed_rows: Vec::new(),
                        forbidden: Vec::new(),
                        prior,
                        total: prior + s.association.cost,
                        matching: s.matching,
                        duals: s.duals,
                        lower_bound: f64::NEG_INFINITY,
                    };
                    self.audit(matrix, hyps, &node)?;
                    queue.push(node.total, node);
                }
                Ok(None) => {
                    self.stats.pruned += 1;
                    if self.config.record_pruned {
                        self.stats.pruned_nodes.push(PrunedNode { hypothesis: h, prior, constraints: cons });
                    }
                }
                Err(AssocError::Infeasible) => self.stats.infeasible += 1,
                Err(e) => return Err(e),
            }
        }

        let mut out = OutputSet::default();
        while out.len() < k {
            let Some((total, node)) = queue.pop_min() else { break };
            queue.set_capacity(k - out.len() - 1);
            if queue.capacity() > 0 {
                self.partition(matrix, hyps, &node, &mut queue)?;
            }
            let mut row_to = node.matching.row_to;
            let members = hyps.members(node.hypothesis);
            let mut inside = vec![false; row_to.len()];
            for &r in members {
                inside[r] = true;
            }
            for (r, c) in row_to.iter_mut().enumerate() {
                if !inside[r] {
                    *c = MISS;
                }
            }
            out.entries.push(OutputEntry {
                association: Association { row_to, cost: total - node.prior, parent_hypothesis: Some(node.hypothesis) },
                total,
            });
        }
        self.stats.peak_queue = queue.peak_len();
        Ok(out)
    }

    /// One-step lower bound on the cost increase of re-solving `row` with
    /// its current assignment (and `forbidden`) excluded.
    fn lookahead(
        &self,
        matrix: &SparseCostMatrix,
        node: &ProblemNode,
        row: usize,
        forbidden: &[(usize, usize)],
    ) -> f64 {
        let ws = &self.solver.ws;
        let u = node.duals.u[row];
        let current = node.matching.row_to[row];
        let excluded = |j: usize| j == current || forbidden.iter().any(|&(r, c)| r == row && c == j);
        let mut best = f64::INFINITY;
        for (j, c) in matrix.row(row) {
            if ws.col_blocked(j) || excluded(j) {
                continue;
            }
            best = best.min(c - u - node.duals.v[j]);
        }
        if !excluded(MISS) {
            best = best.min(-u);
        }
        best
    }

    fn partition(
        &mut self,
        matrix: &SparseCostMatrix,
        hyps: &HypothesisSet,
        node: &ProblemNode,
        queue: &mut SolutionQueue<ProblemNode>,
    ) -> Result<()> {
        let rows = hyps.members(node.hypothesis);
        let ws = &mut self.solver.ws;
        ws.prepare(matrix.n_rows(), matrix.n_cols());
        for &r in &node.fixed_rows {
            ws.block_row(r);
            let c = node.matching.row_to[r];
            if c != MISS {
                ws.block_col(c);
            }
        }

        let mut order = std::mem::take(&mut self.order_buf);
        order.clear();
        for &r in rows {
            if !self.solver.ws.row_blocked(r) {
                let lb = if self.config.lookahead { self.lookahead(matrix, node, r, &node.forbidden) } else { 0.0 };
                order.push((lb, r));
            }
        }
        if self.config.lookahead {
            // largest bound first: the biggest subproblems are the likeliest to be cut off
            order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        }

        let mut forbidden = std::mem::take(&mut self.forb_buf);
        for (k, &(lb, r)) in order.iter().enumerate() {
            let c = node.matching.row_to[r];
            forbidden.clear();
            forbidden.extend(node.forbidden.iter().copied().filter(|f| !self.solver.ws.row_blocked(f.0)));
            forbidden.push((r, c));

            let worst = queue.worst_bound();
            let lower = if self.config.lookahead { node.total + lb } else { f64::NEG_INFINITY };
            let pruned_early = self.config.early_stop && lower > worst;
            let bound = if self.config.early_stop { worst - node.total } else { f64::INFINITY };

            let outcome = if pruned_early {
                Ok(None)
            } else {
                let p = PathProblem {
                    matrix,
                    matching: &node.matching,
                    duals: &node.duals,
                    rows,
                    forbidden: &forbidden,
                    source: r,
                    freed_col: (c != MISS).then_some(c),
                    target: if c == MISS { Target::Miss } else { Target::Col(c) },
                    bound,
                };
                let mode = self.solver.mode;
                match self.solver.ws.search(&p, mode, true) {
                    Ok(res) if res.status == PathStatus::Found => {
                        let mut matching = node.matching.clone();
                        let mut duals = node.duals.clone();
                        res.apply(matrix, &mut matching, &mut duals, rows);
                        Ok(Some((res.distance, matching, duals)))
                    }
                    Ok(_) => Ok(None),
                    Err(e) => Err(e),
                }
            };

            match outcome {
                Ok(Some((dist, matching, duals))) => {
                    self.stats.solved += 1;
                    let mut fixed_rows = Vec::with_capacity(node.fixed_rows.len() + k);
                    fixed_rows.extend_from_slice(&node.fixed_rows);
                    fixed_rows.extend(order[..k].iter().map(|x| x.1));
                    let child = ProblemNode {
                        hypothesis: node.hypothesis,
                        fixed_rows,
                        forbidden: forbidden.clone(),
                        prior: node.prior,
                        matching,
                        duals,
                        total: node.total + dist,
                        lower_bound: lower,
                    };
                    if self.config.audit_duals {
                        self.audit(matrix, hyps, &child)?;
                    }
                    queue.push(child.total, child);
                }
                Ok(None) => {
                    self.stats.pruned += 1;
                    if self.config.record_pruned {
                        let mut fixed: Vec<(usize, usize)> =
                            node.fixed_rows.iter().map(|&f| (f, node.matching.row_to[f])).collect();
                        fixed.extend(order[..k].iter().map(|&(_, f)| (f, node.matching.row_to[f])));
                        self.stats.pruned_nodes.push(PrunedNode {
                            hypothesis: node.hypothesis,
                            prior: node.prior,
                            constraints: Constraints { rows: Some(rows.to_vec()), fixed, forbidden: forbidden.clone() },
                        });
                    }
                }
                Err(AssocError::Infeasible) => self.stats.infeasible += 1,
                Err(e) => return Err(e),
            }

            // later children keep this row's assignment
            self.solver.ws.block_row(r);
            if c != MISS {
                self.solver.ws.block_col(c);
            }
        }
        self.forb_buf = forbidden;
        self.order_buf = order;
        Ok(())
    }

    fn audit(&mut self, matrix: &SparseCostMatrix, hyps: &HypothesisSet, node: &ProblemNode) -> Result<()> {
        if !self.config.audit_duals {
            return Ok(());
        }
        self.stats.dual_checks += 1;
        let mut fixed_rows = vec![false; matrix.n_rows()];
        let mut fixed_cols = vec![false; matrix.n_cols()];
        for &r in &node.fixed_rows {
            fixed_rows[r] = true;
            if node.matching.row_to[r] != MISS {
                fixed_cols[node.matching.row_to[r]] = true;
            }
        }
        let rows = hyps.members(node.hypothesis);
        check_duals(
            matrix,
            &node.matching,
            &node.duals,
            rows,
            &fixed_rows,
            &fixed_cols,
            &node.forbidden,
            default_epsilon(matrix),
        )?;
        let cost = node
            .matching
            .row_to
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c != MISS)
            .map(|(r, &c)| matrix.get(r, c).unwrap_or(f64::NAN))
            .sum::<f64>();
        let eps = default_epsilon(matrix) * (1.0 + rows.len() as f64);
        if (cost - node.association_cost()).abs() > eps.max(1e-9) {
            return Err(AssocError::DualViolation(format!(
                "tracked cost {} differs from recomputed {cost}",
                node.association_cost()
            )));
        }
        Ok(())
    }
}

/// K lowest-NLL associations of a single input hypothesis.
pub fn kbest_single(matrix: &SparseCostMatrix, k: usize, config: KBestConfig) -> Result<OutputSet> {
    KBest::new(config).single(matrix, k)
}

/// K globally best outputs over all input hypotheses.
pub fn kbest_mimo(matrix: &SparseCostMatrix, hyps: &HypothesisSet, k: usize, config: KBestConfig) -> Result<OutputSet> {
    KBest::new(config).mimo(matrix, hyps, k)
}

/// The look-ahead bound of re-solving `row` of a solved problem without its
/// current assignment: `parent + min_j (C[row,j] - u[row] - v[j])`, the
/// miss contributing `-u[row]`.
pub fn lookahead_bound(matrix: &SparseCostMatrix, node: &ProblemNode, row: usize) -> f64 {
    let mut driver = KBest::new(KBestConfig::default());
    let ws = &mut driver.solver.ws;
    ws.prepare(matrix.n_rows(), matrix.n_cols());
    for &r in &node.fixed_rows {
        let c = node.matching.row_to[r];
        if c != MISS {
            ws.block_col(c);
        }
    }
    node.total + driver.lookahead(matrix, node, row, &node.forbidden)
}

/// Children of a solved node, in the order the driver would create them.
/// Infeasible children are omitted; no child is pruned.
pub fn partition(
    matrix: &SparseCostMatrix,
    hyps: &HypothesisSet,
    node: &ProblemNode,
    lookahead: bool,
) -> Result<Vec<ProblemNode>> {
    let config = KBestConfig { lookahead, ..Default::default() };
    let mut driver = KBest::new(config);
    let mut queue = SolutionQueue::new(usize::MAX);
    driver.partition(matrix, hyps, node, &mut queue)?;
    let mut children = Vec::with_capacity(queue.len());
    while let Some((_, c)) = queue.pop_min() {
        children.push(c);
    }
    Ok(children)
}

/// Seed node of hypothesis `h`: its optimal association with no constraints.
pub fn root_node(matrix: &SparseCostMatrix, hyps: &HypothesisSet, h: usize) -> Result<ProblemNode> {
    let cons = Constraints { rows: Some(hyps.members(h).to_vec()), ..Default::default() };
    let s = Solver::new(ScanMode::Dense).solve(matrix, &cons, f64::INFINITY)?.ok_or(AssocError::Infeasible)?;
    Ok(ProblemNode {
        hypothesis: h,
        fixed_rows: Vec::new(),
        forbidden: Vec::new(),
        prior: hyps.prior(h),
        total: hyps.prior(h) + s.association.cost,
        matching: s.matching,
        duals: s.duals,
        lower_bound: f64::NEG_INFINITY,
    })
}

impl ProblemNode {
    /// The node's constraints in the form accepted by [`Solver::solve`].
    pub fn constraints(&self, hyps: &HypothesisSet) -> Constraints {
        Constraints {
            rows: Some(hyps.members(self.hypothesis).to_vec()),
            fixed: self.fixed_rows.iter().map(|&r| (r, self.matching.row_to[r])).collect(),
            forbidden: self.forbidden.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c2() -> SparseCostMatrix {
        SparseCostMatrix::from_dense(&[vec![-3.0, -1.0], vec![-2.0, -4.0]]).unwrap()
    }

    fn all_configs() -> Vec<KBestConfig> {
        Version::ALL.iter().map(|v| KBestConfig { audit_duals: true, ..v.config() }).collect()
    }

    #[test]
    fn two_by_two_top_two() {
        for cfg in all_configs() {
            let out = kbest_single(&c2(), 2, cfg).unwrap();
            assert_eq!(out.totals(), vec![-7.0, -4.0]);
        }
    }

    #[test]
    fn two_by_two_all_seven() {
        for cfg in all_configs() {
            let out = kbest_single(&c2(), 7, cfg).unwrap();
            assert_eq!(out.totals(), vec![-7.0, -4.0, -3.0, -3.0, -2.0, -1.0, 0.0]);
        }
    }

    #[test]
    fn one_by_one_has_two_associations() {
        let m = SparseCostMatrix::from_dense(&[vec![-1.0]]).unwrap();
        for cfg in all_configs() {
            let out = kbest_single(&m, 3, cfg).unwrap();
            assert_eq!(out.totals(), vec![-1.0, 0.0]);
            assert_eq!(out.entries[1].association.row_to, vec![MISS]);
        }
    }

    #[test]
    fn k_zero_is_invalid() {
        assert!(matches!(kbest_single(&c2(), 0, KBestConfig::default()), Err(AssocError::InvalidInput(_))));
    }

    #[test]
    fn k_one_is_the_optimum() {
        let out = kbest_single(&c2(), 1, Version::V3.config()).unwrap();
        assert_eq!(out.entries[0].association.row_to, vec![0, 1]);
    }

    #[test]
    fn partition_counts_every_active_row() {
        // optimum of this matrix matches rows 0, 1 and leaves row 2 missing
        let m =
            SparseCostMatrix::from_dense(&[vec![-3.0, -1.0, 0.0], vec![-2.0, -4.0, 0.0], vec![1.0, 1.0, 2.0]]).unwrap();
        let hyps = HypothesisSet::single(3);
        let root = root_node(&m, &hyps, 0).unwrap();
        assert_eq!(root.matching.row_to, vec![0, 1, MISS]);
        let children = partition(&m, &hyps, &root, false).unwrap();
        assert_eq!(children.len(), 3);
        let miss_child = children.iter().find(|c| c.forbidden.contains(&(2, MISS))).unwrap();
        assert_eq!(miss_child.matching.row_to, vec![0, 1, 2]);
        assert_eq!(miss_child.total, -5.0);
        // with every column of the earlier rows fixed, row 2 has nowhere to go
        let m2 = SparseCostMatrix::from_dense(&[vec![-3.0, -1.0], vec![-2.0, -4.0], vec![1.0, 1.0]]).unwrap();
        let root2 = root_node(&m2, &hyps, 0).unwrap();
        assert_eq!(partition(&m2, &hyps, &root2, false).unwrap().len(), 2);
    }

    #[test]
    fn lookahead_minimum_of_reduced_row() {
        // u = 0, v = 0, row 0 currently on col 0: remaining reduced values {-1 (col 1), 0 (miss)}
        let hyps = HypothesisSet::single(2);
        let root = root_node(&c2(), &hyps, 0).unwrap();
        let lb = lookahead_bound(&c2(), &root, 0);
        let children = partition(&c2(), &hyps, &root, false).unwrap();
        let child = children.iter().find(|c| c.forbidden.contains(&(0, 0))).unwrap();
        assert!(lb <= child.total + 1e-12);
    }

    #[test]
    fn lookahead_examples() {
        let m = SparseCostMatrix::from_dense(&[vec![-0.7, -0.2, -0.5]]).unwrap();
        let mut node = ProblemNode {
            hypothesis: 0,
            fixed_rows: vec![],
            forbidden: vec![],
            prior: 0.0,
            matching: Matching::from_row_to(vec![0], 3),
            duals: DualState { u: vec![-0.7], v: vec![0.0; 3] },
            total: -0.7,
            lower_bound: f64::NEG_INFINITY,
        };
        // reduced values {0.5, 0.2}, miss at 0.7
        assert!((lookahead_bound(&m, &node, 0) - (-0.7 + 0.2)).abs() < 1e-12);
        node.forbidden = vec![(0, 1), (0, 2)];
        node.duals.u[0] = 0.0;
        node.total = 0.0;
        assert_eq!(lookahead_bound(&m, &node, 0), 0.0);
        node.forbidden.push((0, MISS));
        assert_eq!(lookahead_bound(&m, &node, 0), f64::INFINITY);
    }

    #[test]
    fn mimo_prior_dominance() {
        let hyps = HypothesisSet::new(2, vec![vec![0, 1], vec![0, 1]], vec![0.0, 1e6]).unwrap();
        let out = kbest_mimo(&c2(), &hyps, 5, Version::V3.config()).unwrap();
        assert!(out.iter().all(|e| e.parent() == 0));
    }

    #[test]
    fn mimo_single_hypothesis_matches_single() {
        let hyps = HypothesisSet::single(2);
        let a = kbest_mimo(&c2(), &hyps, 7, Version::V2.config()).unwrap();
        let b = kbest_single(&c2(), 7, Version::V2.config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mimo_rejects_mismatched_hypotheses() {
        let hyps = HypothesisSet::single(3);
        assert!(kbest_mimo(&c2(), &hyps, 1, KBestConfig::default()).is_err());
    }

    #[test]
    fn version_names_round_trip() {
        for v in Version::ALL {
            assert_eq!(Version::parse(v.name()), Some(v));
        }
        assert_eq!(Version::parse("V3"), Some(Version::V3));
        assert!(Version::V4.config().sparse && !Version::V3.config().sparse);
        assert!(!Version::V1.config().early_stop);
    }
}
