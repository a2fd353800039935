//! Successive shortest paths with implicit miss handling.
//!
//! The miss-enabled problem is the square problem augmented with one
//! pseudo-column per row (that row goes missing) and one pseudo-row per
//! column (that column goes missing). All pseudo nodes keep a reduction of
//! zero, so they collapse into a single node, the *pool*, indexed `n_cols`
//! in the search arrays and written θ in comments:
//!
//! * row `r` reaches θ at reduced cost `-u[r]` (r goes missing),
//! * θ reaches column `j` at `-v[j]` (j goes missing),
//! * θ reaches every currently missing row at zero cost (that row's
//!   pseudo-column is handed to the pool, the row continues the path).
//!
//! The pool is expanded at most once per search. After a search the
//! reductions are shifted so the pool reduction is zero again.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::association::{Association, MISS};
use crate::error::{AssocError, Result};
use crate::matrix::SparseCostMatrix;

/// Row/column reductions. The pool reduction is implicit and zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl DualState {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DualState { u: vec![0.0; n_rows], v: vec![0.0; n_cols] }
    }
}

/// Current matching; `MISS` marks missing rows and free columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub row_to: Vec<usize>,
    pub col_to: Vec<usize>,
}

impl Matching {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Matching { row_to: vec![MISS; n_rows], col_to: vec![MISS; n_cols] }
    }

    pub fn from_row_to(row_to: Vec<usize>, n_cols: usize) -> Self {
        let mut col_to = vec![MISS; n_cols];
        for (i, &j) in row_to.iter().enumerate() {
            if j != MISS {
                col_to[j] = i;
            }
        }
        Matching { row_to, col_to }
    }

    pub fn is_consistent(&self) -> bool {
        self.row_to.iter().enumerate().all(|(i, &j)| j == MISS || self.col_to.get(j) == Some(&i))
            && self.col_to.iter().enumerate().all(|(j, &i)| i == MISS || self.row_to.get(i) == Some(&j))
    }
}

/// Where a search may stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Any free column or the miss node. Used when inserting a new row.
    AnyFree,
    /// Only this (freed) column. Other free columns lead into the pool.
    Col(usize),
    /// Only the miss node: the source's own miss slot was freed.
    Miss,
}

/// Frontier selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    /// Linear argmin over the touched columns.
    Dense,
    /// Binary heap with lazy deletion, for gated inputs.
    Heap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStatus {
    Found,
    Pruned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
enum Pred {
    Row(usize),
    #[default]
    Pool,
    FromCol(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Inputs of a single shortest-path search.
#[derive(Clone, Copy)]
pub struct PathProblem<'a> {
    pub matrix: &'a SparseCostMatrix,
    pub matching: &'a Matching,
    pub duals: &'a DualState,
    /// Rows taking part in the problem; blocked rows are skipped.
    pub rows: &'a [usize],
    /// Excluded `(row, col)` pairs; `col == MISS` forbids the row's miss.
    pub forbidden: &'a [(usize, usize)],
    pub source: usize,
    /// Column treated as free although `matching` still assigns it.
    pub freed_col: Option<usize>,
    pub target: Target,
    /// Search stops with [`PathStatus::Pruned`] once the frontier exceeds this.
    pub bound: f64,
}

/// Reusable search buffers. Stamps avoid per-call clearing.
#[derive(Debug, Default)]
pub struct Workspace {
    dist: Vec<f64>,
    pred: Vec<Pred>,
    seen: Vec<u32>,
    done: Vec<u32>,
    epoch: u32,
    row_block: Vec<u32>,
    col_block: Vec<u32>,
    row_forbid: Vec<u32>,
    mask_epoch: u32,
    done_nodes: Vec<usize>,
    scanned_rows: Vec<usize>,
    todo: Vec<usize>,
    heap: BinaryHeap<HeapItem>,
    forb_buf: Vec<usize>,
    n_cols: usize,
}

/// Outcome of a search. Path and distance data stay in the workspace.
#[derive(Debug)]
pub struct PathResult<'w> {
    pub status: PathStatus,
    /// Distance of the terminal (found) or the frontier value that
    /// exceeded the bound (pruned).
    pub distance: f64,
    /// Terminal column, or `MISS` for the miss node.
    pub terminal: usize,
    source: usize,
    ws: &'w Workspace,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sizes buffers for an `n_rows x n_cols` problem and unblocks everything.
    pub fn prepare(&mut self, n_rows: usize, n_cols: usize) {
        let nodes = n_cols + 1;
        if self.dist.len() < nodes {
            self.dist.resize(nodes, 0.0);
            self.pred.resize(nodes, Pred::Pool);
            self.seen.resize(nodes, 0);
            self.done.resize(nodes, 0);
            self.col_block.resize(nodes, 0);
        }
        if self.row_block.len() < n_rows {
            self.row_block.resize(n_rows, 0);
            self.row_forbid.resize(n_rows, 0);
        }
        self.n_cols = n_cols;
        self.mask_epoch = self.mask_epoch.wrapping_add(1);
        if self.mask_epoch == 0 {
            self.row_block.iter_mut().for_each(|s| *s = 0);
            self.col_block.iter_mut().for_each(|s| *s = 0);
            self.mask_epoch = 1;
        }
    }

    /// Removes a row from the problem (fixed or outside the hypothesis).
    pub fn block_row(&mut self, row: usize) {
        self.row_block[row] = self.mask_epoch;
    }

    pub fn block_col(&mut self, col: usize) {
        self.col_block[col] = self.mask_epoch;
    }

    #[inline]
    pub fn row_blocked(&self, row: usize) -> bool {
        self.row_block[row] == self.mask_epoch
    }

    #[inline]
    pub fn col_blocked(&self, col: usize) -> bool {
        self.col_block[col] == self.mask_epoch
    }

    fn begin_search(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.seen.iter_mut().for_each(|s| *s = 0);
            self.done.iter_mut().for_each(|s| *s = 0);
            self.row_forbid.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.done_nodes.clear();
        self.scanned_rows.clear();
        self.todo.clear();
        self.heap.clear();
    }

    /// Shortest path without misses: rows may only end on free columns.
    pub fn shortest_path_dense<'w>(&'w mut self, p: &PathProblem<'_>) -> Result<PathResult<'w>> {
        if p.target != Target::AnyFree {
            return Err(AssocError::invalid("miss-free search only supports inserting a new row"));
        }
        self.search(p, ScanMode::Dense, false)
    }

    /// Shortest path over the implicitly augmented problem, dense scan.
    pub fn shortest_path_augmented<'w>(&'w mut self, p: &PathProblem<'_>) -> Result<PathResult<'w>> {
        self.search(p, ScanMode::Dense, true)
    }

    /// Shortest path over the implicitly augmented problem, heap frontier.
    pub fn shortest_path_sparse<'w>(&'w mut self, p: &PathProblem<'_>) -> Result<PathResult<'w>> {
        self.search(p, ScanMode::Heap, true)
    }

    pub(crate) fn search<'w>(
        &'w mut self,
        p: &PathProblem<'_>,
        mode: ScanMode,
        allow_miss: bool,
    ) -> Result<PathResult<'w>> {
        debug_assert_eq!(self.n_cols, p.matrix.n_cols(), "workspace not prepared for this matrix");
        if !allow_miss && p.target != Target::AnyFree {
            return Err(AssocError::invalid("miss-free search only supports inserting a new row"));
        }
        let theta = p.matrix.n_cols();
        self.begin_search();
        for &(r, _) in p.forbidden {
            self.row_forbid[r] = self.epoch;
        }
        if p.bound < 0.0 && p.bound.is_infinite() {
            return Ok(self.result(PathStatus::Pruned, f64::NEG_INFINITY, MISS, p.source));
        }

        self.expand_row(p, p.source, 0.0, mode, allow_miss);
        loop {
            let Some((node, d)) = self.pop_min(mode) else {
                return Err(AssocError::Infeasible);
            };
            if d > p.bound {
                return Ok(self.result(PathStatus::Pruned, d, MISS, p.source));
            }
            self.done[node] = self.epoch;
            self.done_nodes.push(node);

            if node == theta {
                match p.target {
                    Target::AnyFree | Target::Miss => {
                        return Ok(self.result(PathStatus::Found, d, MISS, p.source));
                    }
                    Target::Col(_) => {
                        self.expand_pool(p, d, mode);
                        continue;
                    }
                }
            }

            let owner = if p.freed_col == Some(node) { MISS } else { p.matching.col_to[node] };
            if owner != MISS {
                self.expand_row(p, owner, d, mode, allow_miss);
                continue;
            }
            match p.target {
                Target::AnyFree => return Ok(self.result(PathStatus::Found, d, node, p.source)),
                Target::Col(c) if c == node => return Ok(self.result(PathStatus::Found, d, node, p.source)),
                _ => {
                    // free column: its pseudo-row hands a miss slot to the pool
                    if self.done[theta] != self.epoch {
                        self.done[theta] = self.epoch;
                        self.done_nodes.push(theta);
                        self.dist[theta] = d;
                        self.pred[theta] = Pred::FromCol(node);
                        if p.target == Target::Miss {
                            return Ok(self.result(PathStatus::Found, d, MISS, p.source));
                        }
                        self.expand_pool(p, d, mode);
                    }
                }
            }
        }
    }

    fn result(&self, status: PathStatus, distance: f64, terminal: usize, source: usize) -> PathResult<'_> {
        PathResult { status, distance, terminal, source, ws: self }
    }

    #[inline]
    fn relax(&mut self, node: usize, d: f64, pred: Pred, mode: ScanMode) {
        if self.seen[node] != self.epoch || d < self.dist[node] {
            let fresh = self.seen[node] != self.epoch;
            self.seen[node] = self.epoch;
            self.dist[node] = d;
            self.pred[node] = pred;
            match mode {
                ScanMode::Dense => {
                    if fresh {
                        self.todo.push(node);
                    }
                }
                ScanMode::Heap => self.heap.push(HeapItem { dist: d, node }),
            }
        }
    }

    fn pop_min(&mut self, mode: ScanMode) -> Option<(usize, f64)> {
        match mode {
            ScanMode::Dense => {
                let mut best: Option<(usize, f64, usize)> = None;
                let mut k = 0;
                while k < self.todo.len() {
                    let node = self.todo[k];
                    if self.done[node] == self.epoch {
                        self.todo.swap_remove(k);
                        continue;
                    }
                    let d = self.dist[node];
                    let better = match best {
                        None => true,
                        Some((bn, bd, _)) => d < bd || (d == bd && node < bn),
                    };
                    if better {
                        best = Some((node, d, k));
                    }
                    k += 1;
                }
                best.map(|(node, d, k)| {
                    self.todo.swap_remove(k);
                    (node, d)
                })
            }
            ScanMode::Heap => {
                while let Some(HeapItem { dist, node }) = self.heap.pop() {
                    if self.done[node] != self.epoch && dist == self.dist[node] {
                        return Some((node, dist));
                    }
                }
                None
            }
        }
    }

    fn expand_row(&mut self, p: &PathProblem<'_>, row: usize, d: f64, mode: ScanMode, allow_miss: bool) {
        self.scanned_rows.push(row);
        let theta = p.matrix.n_cols();
        self.forb_buf.clear();
        if self.row_forbid[row] == self.epoch {
            self.forb_buf.extend(p.forbidden.iter().filter(|f| f.0 == row).map(|f| f.1));
        }
        let ur = p.duals.u[row];
        let cols = p.matrix.row_cols(row);
        let costs = p.matrix.row_costs(row);
        for k in 0..cols.len() {
            let j = cols[k];
            if self.done[j] == self.epoch || self.col_block[j] == self.mask_epoch {
                continue;
            }
            if !self.forb_buf.is_empty() && self.forb_buf.contains(&j) {
                continue;
            }
            let nd = d + costs[k] - ur - p.duals.v[j];
            self.relax(j, nd, Pred::Row(row), mode);
        }
        if allow_miss && self.done[theta] != self.epoch && !self.forb_buf.contains(&MISS) {
            self.relax(theta, d - ur, Pred::Row(row), mode);
        }
    }

    fn expand_pool(&mut self, p: &PathProblem<'_>, d: f64, mode: ScanMode) {
        // exit through a column: that column goes missing
        for j in 0..p.matrix.n_cols() {
            if self.done[j] == self.epoch || self.col_block[j] == self.mask_epoch {
                continue;
            }
            self.relax(j, d - p.duals.v[j], Pred::Pool, mode);
        }
        // exit through a missing row: that row takes part in the path
        for &r in p.rows {
            if r != p.source && !self.row_blocked(r) && p.matching.row_to[r] == MISS {
                self.expand_row(p, r, d, mode, true);
            }
        }
    }
}

impl PathResult<'_> {
    /// Shortest distance to `col` reached during the search, if finalized.
    pub fn column_distance(&self, col: usize) -> Option<f64> {
        (self.ws.done[col] == self.ws.epoch).then(|| self.ws.dist[col])
    }

    /// Shortest distance to the miss node, if finalized.
    pub fn miss_distance(&self) -> Option<f64> {
        self.column_distance(self.ws.n_cols)
    }

    /// Rows expanded by the search.
    pub fn scanned_rows(&self) -> &[usize] {
        &self.ws.scanned_rows
    }

    /// Reroutes the matching along the found path.
    pub fn augment(&self, matching: &mut Matching) {
        assert_eq!(self.status, PathStatus::Found, "cannot augment along a pruned search");
        let ws = self.ws;
        let theta = ws.n_cols;
        let source = self.source;
        let mut node = if self.terminal == MISS { theta } else { self.terminal };
        for _ in 0..=2 * (matching.row_to.len() + theta) + 2 {
            if node == theta {
                match ws.pred[theta] {
                    Pred::Row(r) => {
                        let prev = matching.row_to[r];
                        matching.row_to[r] = MISS;
                        if r == source {
                            return;
                        }
                        node = prev;
                    }
                    Pred::FromCol(j) => node = j,
                    Pred::Pool => unreachable!("miss node has no pool predecessor"),
                }
            } else {
                match ws.pred[node] {
                    Pred::Row(r) => {
                        let prev = matching.row_to[r];
                        matching.row_to[r] = node;
                        matching.col_to[node] = r;
                        if r == source {
                            return;
                        }
                        node = if prev == MISS { theta } else { prev };
                    }
                    Pred::Pool => {
                        matching.col_to[node] = MISS;
                        node = theta;
                    }
                    Pred::FromCol(_) => unreachable!("columns are never entered from a column"),
                }
            }
        }
        unreachable!("path reconstruction did not reach the source row");
    }

    /// Updates the reductions after [`PathResult::augment`]: finalized
    /// columns drop by `p_T - p_j`, row reductions follow from
    /// complementary slackness, and everything is shifted so the pool
    /// reduction stays zero.
    pub fn update_duals(&self, matrix: &SparseCostMatrix, matching: &Matching, duals: &mut DualState, rows: &[usize]) {
        assert_eq!(self.status, PathStatus::Found, "cannot update duals from a pruned search");
        let ws = self.ws;
        let theta = ws.n_cols;
        let p_t = self.distance;
        let mut pool_shift = 0.0;
        for &node in &ws.done_nodes {
            let gap = p_t - ws.dist[node];
            if gap > 0.0 {
                if node == theta {
                    pool_shift = gap;
                } else {
                    duals.v[node] -= gap;
                }
            }
        }
        for &r in &ws.scanned_rows {
            let j = matching.row_to[r];
            duals.u[r] =
                if j == MISS { pool_shift } else { matrix.get(r, j).expect("matched pair is stored") - duals.v[j] };
        }
        if pool_shift != 0.0 {
            for &r in rows {
                if !ws.row_blocked(r) {
                    duals.u[r] -= pool_shift;
                }
            }
            for j in 0..theta {
                if !ws.col_blocked(j) {
                    duals.v[j] += pool_shift;
                }
            }
        }
    }

    pub fn apply(&self, matrix: &SparseCostMatrix, matching: &mut Matching, duals: &mut DualState, rows: &[usize]) {
        self.augment(matching);
        self.update_duals(matrix, matching, duals, rows);
    }
}

/// Constraints of an optimal-assignment solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    /// Active rows; `None` means every row.
    pub rows: Option<Vec<usize>>,
    /// Mandatory `(row, col)` assignments; `col == MISS` fixes a miss.
    pub fixed: Vec<(usize, usize)>,
    /// Excluded `(row, col)` pairs; `col == MISS` forbids the miss.
    pub forbidden: Vec<(usize, usize)>,
}

/// Optimal association together with the state that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub association: Association,
    pub matching: Matching,
    pub duals: DualState,
}

/// Successive-shortest-paths solver owning its search buffers.
#[derive(Debug)]
pub struct Solver {
    pub(crate) ws: Workspace,
    pub(crate) mode: ScanMode,
    rows_buf: Vec<usize>,
}

impl Solver {
    pub fn new(mode: ScanMode) -> Self {
        Solver { ws: Workspace::new(), mode, rows_buf: Vec::new() }
    }

    pub fn mode(&self) -> ScanMode {
        self.mode
    }

    pub fn workspace(&mut self) -> &mut Workspace {
        &mut self.ws
    }

    /// Optimal miss-enabled association honoring `constraints`.
    /// Returns `Ok(None)` when the optimum provably exceeds `bound`.
    pub fn solve(
        &mut self,
        matrix: &SparseCostMatrix,
        constraints: &Constraints,
        bound: f64,
    ) -> Result<Option<Solved>> {
        let (m, n) = (matrix.n_rows(), matrix.n_cols());
        let mut rows = std::mem::take(&mut self.rows_buf);
        rows.clear();
        match &constraints.rows {
            Some(r) => rows.extend(r.iter().copied()),
            None => rows.extend(0..m),
        }
        let out = self.solve_inner(matrix, constraints, &rows, bound, m, n);
        self.rows_buf = rows;
        out
    }

    fn solve_inner(
        &mut self,
        matrix: &SparseCostMatrix,
        constraints: &Constraints,
        rows: &[usize],
        bound: f64,
        m: usize,
        n: usize,
    ) -> Result<Option<Solved>> {
        if let Some(&r) = rows.iter().find(|&&r| r >= m) {
            return Err(AssocError::invalid(format!("row {r} out of range")));
        }
        self.ws.prepare(m, n);
        let mut matching = Matching::empty(m, n);
        let mut fixed_cost = 0.0;
        let mut in_problem = vec![false; m];
        for &r in rows {
            in_problem[r] = true;
        }
        for &(r, c) in &constraints.fixed {
            if r >= m || !in_problem[r] {
                return Err(AssocError::invalid(format!("fixed row {r} is not an active row")));
            }
            if self.ws.row_blocked(r) {
                return Err(AssocError::invalid(format!("row {r} fixed twice")));
            }
            if constraints.forbidden.contains(&(r, c)) {
                return Err(AssocError::invalid(format!("pair ({r}, {c}) is both fixed and forbidden")));
            }
            self.ws.block_row(r);
            if c != MISS {
                let cost = matrix.get(r, c).ok_or(AssocError::AbsentPair { row: r, col: c })?;
                if self.ws.col_blocked(c) {
                    return Err(AssocError::invalid(format!("column {c} fixed to two rows")));
                }
                self.ws.block_col(c);
                matching.row_to[r] = c;
                matching.col_to[c] = r;
                fixed_cost += cost;
            }
        }

        // lower bound on what each remaining row can still contribute
        let row_lb = |r: usize| matrix.row_costs(r).iter().fold(0.0f64, |a, &c| a.min(c));
        let mut remaining_lb: f64 = rows.iter().filter(|&&r| !self.ws.row_blocked(r)).map(|&r| row_lb(r)).sum();

        let mut duals = DualState::zeros(m, n);
        let mut cost = fixed_cost;
        for &r in rows {
            if self.ws.row_blocked(r) {
                continue;
            }
            remaining_lb -= row_lb(r);
            let p = PathProblem {
                matrix,
                matching: &matching,
                duals: &duals,
                rows,
                forbidden: &constraints.forbidden,
                source: r,
                freed_col: None,
                target: Target::AnyFree,
                bound: bound - cost - remaining_lb,
            };
            let mode = self.mode;
            let res = self.ws.search(&p, mode, true)?;
            if res.status == PathStatus::Pruned {
                return Ok(None);
            }
            cost += res.distance;
            res.apply(matrix, &mut matching, &mut duals, rows);
        }
        let mut association = Association { row_to: matching.row_to.clone(), cost, parent_hypothesis: None };
        if cost > bound {
            return Ok(None);
        }
        // rows outside the problem never take part
        for (i, inside) in in_problem.iter().enumerate() {
            if !inside {
                association.row_to[i] = MISS;
            }
        }
        Ok(Some(Solved { association, matching, duals }))
    }
}

/// One-shot optimal solve with a dense-scan solver.
pub fn solve_optimal(matrix: &SparseCostMatrix, constraints: &Constraints, bound: f64) -> Result<Option<Solved>> {
    Solver::new(ScanMode::Dense).solve(matrix, constraints, bound)
}

/// Scale-relative tolerance `1e-9 * (1 + max |C|)`.
pub fn default_epsilon(matrix: &SparseCostMatrix) -> f64 {
    1e-9 * (1.0 + matrix.max_abs_cost())
}

/// Checks dual feasibility and complementary slackness on the active part
/// of a problem. `fixed_rows`/`fixed_cols` are excluded from the check.
#[allow(clippy::too_many_arguments)]
pub fn check_duals(
    matrix: &SparseCostMatrix,
    matching: &Matching,
    duals: &DualState,
    rows: &[usize],
    fixed_rows: &[bool],
    fixed_cols: &[bool],
    forbidden: &[(usize, usize)],
    eps: f64,
) -> Result<()> {
    let bad = |msg: String| Err(AssocError::DualViolation(msg));
    for &r in rows {
        if fixed_rows[r] {
            continue;
        }
        let u = duals.u[r];
        let miss_allowed = !forbidden.contains(&(r, MISS));
        for (j, c) in matrix.row(r) {
            if fixed_cols[j] || forbidden.contains(&(r, j)) {
                continue;
            }
            let red = c - u - duals.v[j];
            if red < -eps {
                return bad(format!("reduced cost {red} < 0 at ({r}, {j})"));
            }
            if matching.row_to[r] == j && red.abs() > eps {
                return bad(format!("matched pair ({r}, {j}) has reduced cost {red}"));
            }
        }
        if miss_allowed && -u < -eps {
            return bad(format!("row {r} reduction {u} > 0"));
        }
        if matching.row_to[r] == MISS && u.abs() > eps {
            return bad(format!("missing row {r} has reduction {u}"));
        }
    }
    for (j, &v) in duals.v.iter().enumerate() {
        if fixed_cols[j] {
            continue;
        }
        if -v < -eps {
            return bad(format!("column {j} reduction {v} > 0"));
        }
        if matching.col_to[j] == MISS && v.abs() > eps {
            return bad(format!("free column {j} has reduction {v}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c2() -> SparseCostMatrix {
        SparseCostMatrix::from_dense(&[vec![-3.0, -1.0], vec![-2.0, -4.0]]).unwrap()
    }

    fn all_rows(m: usize) -> Vec<usize> {
        (0..m).collect()
    }

    fn insert(
        ws: &mut Workspace,
        matrix: &SparseCostMatrix,
        matching: &Matching,
        duals: &DualState,
        rows: &[usize],
        row: usize,
    ) -> (PathStatus, f64, usize) {
        let p = PathProblem {
            matrix,
            matching,
            duals,
            rows,
            forbidden: &[],
            source: row,
            freed_col: None,
            target: Target::AnyFree,
            bound: f64::INFINITY,
        };
        let r = ws.shortest_path_augmented(&p).unwrap();
        (r.status, r.distance, r.terminal)
    }

    #[test]
    fn single_edge_dense() {
        let m = SparseCostMatrix::from_dense(&[vec![-5.0]]).unwrap();
        let mut ws = Workspace::new();
        ws.prepare(1, 1);
        let matching = Matching::empty(1, 1);
        let duals = DualState::zeros(1, 1);
        let p = PathProblem {
            matrix: &m,
            matching: &matching,
            duals: &duals,
            rows: &[0],
            forbidden: &[],
            source: 0,
            freed_col: None,
            target: Target::AnyFree,
            bound: f64::INFINITY,
        };
        let r = ws.shortest_path_dense(&p).unwrap();
        assert_eq!((r.status, r.distance, r.terminal), (PathStatus::Found, -5.0, 0));
    }

    #[test]
    fn negative_infinite_bound_prunes_immediately() {
        let m = c2();
        let mut ws = Workspace::new();
        ws.prepare(2, 2);
        let matching = Matching::empty(2, 2);
        let duals = DualState::zeros(2, 2);
        let p = PathProblem {
            matrix: &m,
            matching: &matching,
            duals: &duals,
            rows: &[0, 1],
            forbidden: &[],
            source: 0,
            freed_col: None,
            target: Target::AnyFree,
            bound: f64::NEG_INFINITY,
        };
        for mode in [ScanMode::Dense, ScanMode::Heap] {
            assert_eq!(ws.search(&p, mode, true).unwrap().status, PathStatus::Pruned);
        }
        assert_eq!(ws.shortest_path_dense(&p).unwrap().status, PathStatus::Pruned);
    }

    #[test]
    fn second_row_takes_direct_edge() {
        // row 0 on col 0, inserting row 1: reduced (1,1) = -4 beats the detour via col 0
        let m = c2();
        let mut ws = Workspace::new();
        ws.prepare(2, 2);
        let matching = Matching::from_row_to(vec![0, MISS], 2);
        let duals = DualState::zeros(2, 2);
        let p = PathProblem {
            matrix: &m,
            matching: &matching,
            duals: &duals,
            rows: &[0, 1],
            forbidden: &[],
            source: 1,
            freed_col: None,
            target: Target::AnyFree,
            bound: f64::INFINITY,
        };
        let r = ws.shortest_path_dense(&p).unwrap();
        assert_eq!((r.status, r.distance, r.terminal), (PathStatus::Found, -4.0, 1));
    }

    #[test]
    fn dense_without_misses_reports_infeasible() {
        let m = SparseCostMatrix::from_rows(1, vec![vec![(0, 1.0)], vec![]]).unwrap();
        let mut ws = Workspace::new();
        ws.prepare(2, 1);
        let matching = Matching::empty(2, 1);
        let duals = DualState::zeros(2, 1);
        let p = PathProblem {
            matrix: &m,
            matching: &matching,
            duals: &duals,
            rows: &[0, 1],
            forbidden: &[],
            source: 1,
            freed_col: None,
            target: Target::AnyFree,
            bound: f64::INFINITY,
        };
        assert_eq!(ws.shortest_path_dense(&p).unwrap_err(), AssocError::Infeasible);
    }

    #[test]
    fn miss_beats_positive_cost() {
        for (c, dist, term) in [(5.0, 0.0, MISS), (-5.0, -5.0, 0)] {
            let m = SparseCostMatrix::from_dense(&[vec![c]]).unwrap();
            let mut ws = Workspace::new();
            ws.prepare(1, 1);
            let (status, d, t) = insert(&mut ws, &m, &Matching::empty(1, 1), &DualState::zeros(1, 1), &[0], 0);
            assert_eq!((status, d, t), (PathStatus::Found, dist, term));
        }
    }

    #[test]
    fn sparse_row_without_pairs_goes_missing() {
        let m = SparseCostMatrix::from_rows(2, vec![vec![(0, -1.0)], vec![]]).unwrap();
        let mut ws = Workspace::new();
        ws.prepare(2, 2);
        let mut duals = DualState::zeros(2, 2);
        duals.u[1] = -0.5;
        let matching = Matching::from_row_to(vec![0, MISS], 2);
        let p = PathProblem {
            matrix: &m,
            matching: &matching,
            duals: &duals,
            rows: &[0, 1],
            forbidden: &[],
            source: 1,
            freed_col: None,
            target: Target::AnyFree,
            bound: f64::INFINITY,
        };
        let r = ws.shortest_path_sparse(&p).unwrap();
        assert_eq!((r.terminal, r.distance), (MISS, 0.5));
    }

    #[test]
    fn forbidden_pair_full_solve_breaks_tie_by_column_index() {
        // [0, MISS] and [1, 0] both cost -3; the lowest column wins the tie
        let cons = Constraints { forbidden: vec![(1, 1)], ..Default::default() };
        let s = solve_optimal(&c2(), &cons, f64::INFINITY).unwrap().unwrap();
        assert_eq!(s.association.cost, -3.0);
        assert_eq!(s.association.row_to, vec![1, 0]);
    }

    #[test]
    fn single_row_duals() {
        let m = SparseCostMatrix::from_dense(&[vec![-5.0]]).unwrap();
        let s = solve_optimal(&m, &Constraints::default(), f64::INFINITY).unwrap().unwrap();
        assert_eq!(s.duals.u, vec![-5.0]);
        assert_eq!(s.duals.v, vec![0.0]);
    }

    #[test]
    fn untouched_column_keeps_reduction() {
        // column 2 is never on a shortest path
        let m = SparseCostMatrix::from_dense(&[vec![-3.0, -1.0, 4.0], vec![-2.0, -4.0, 5.0]]).unwrap();
        let s = solve_optimal(&m, &Constraints::default(), f64::INFINITY).unwrap().unwrap();
        assert_eq!(s.duals.v[2], 0.0);
        assert_eq!(s.association.row_to, vec![0, 1]);
    }

    #[test]
    fn solve_examples() {
        let s = solve_optimal(&c2(), &Constraints { rows: Some(vec![]), ..Default::default() }, f64::INFINITY)
            .unwrap()
            .unwrap();
        assert_eq!((s.association.row_to, s.association.cost), (vec![MISS, MISS], 0.0));

        let s = solve_optimal(&c2(), &Constraints::default(), f64::INFINITY).unwrap().unwrap();
        assert_eq!((s.association.row_to.clone(), s.association.cost), (vec![0, 1], -7.0));
        let eps = default_epsilon(&c2());
        check_duals(&c2(), &s.matching, &s.duals, &all_rows(2), &[false; 2], &[false; 2], &[], eps).unwrap();
    }

    #[test]
    fn fixed_and_bound_handling() {
        let cons = Constraints { fixed: vec![(0, 1)], ..Default::default() };
        let s = solve_optimal(&c2(), &cons, f64::INFINITY).unwrap().unwrap();
        assert_eq!((s.association.row_to, s.association.cost), (vec![1, 0], -3.0));

        let bad = Constraints { fixed: vec![(0, 1), (1, 1)], ..Default::default() };
        assert!(matches!(solve_optimal(&c2(), &bad, f64::INFINITY), Err(AssocError::InvalidInput(_))));
        let bad = Constraints { fixed: vec![(0, 1), (0, 0)], ..Default::default() };
        assert!(solve_optimal(&c2(), &bad, f64::INFINITY).is_err());

        assert!(solve_optimal(&c2(), &Constraints::default(), -7.5).unwrap().is_none());
        assert!(solve_optimal(&c2(), &Constraints::default(), -7.0).unwrap().is_some());
    }

    #[test]
    fn forbidden_miss_forces_a_match() {
        let m = SparseCostMatrix::from_dense(&[vec![3.0]]).unwrap();
        let cons = Constraints { forbidden: vec![(0, MISS)], ..Default::default() };
        let s = solve_optimal(&m, &cons, f64::INFINITY).unwrap().unwrap();
        assert_eq!((s.association.row_to, s.association.cost), (vec![0], 3.0));
        let cons = Constraints { forbidden: vec![(0, MISS), (0, 0)], ..Default::default() };
        assert_eq!(solve_optimal(&m, &cons, f64::INFINITY).unwrap_err(), AssocError::Infeasible);
    }

    #[test]
    fn heap_matches_dense_on_small_dense_input() {
        let m = SparseCostMatrix::from_dense(&[
            vec![-1.0, 0.5, -2.0],
            vec![-1.5, -0.3, 0.7],
            vec![0.2, -1.1, -0.9],
            vec![-2.2, 0.1, -0.4],
        ])
        .unwrap();
        let a = Solver::new(ScanMode::Dense).solve(&m, &Constraints::default(), f64::INFINITY).unwrap().unwrap();
        let b = Solver::new(ScanMode::Heap).solve(&m, &Constraints::default(), f64::INFINITY).unwrap().unwrap();
        assert_eq!(a.association, b.association);
    }
}
