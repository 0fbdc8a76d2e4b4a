//! Shortest augmenting path solver for the gated assignment problem.
//!
//! Rows are tracks; columns are the `m` detections followed by the `n` gate
//! columns. Off-diagonal gate entries are never useful (each track owns its
//! gate column) and are treated as absent edges.
//!
//! For warm starts the problem is made square with `m` dummy rows that reach
//! every column at zero cost. A solved rectangular state extends to the
//! square one by parking a dummy on each free column with zero potential, so
//! Murty subproblems can be re-solved with a single augmentation from the
//! parent's optimum and potentials.

use super::lex::LexCost;
use super::{Assignment, AssignmentError, ConstraintSet, CostMatrix};

const NONE: usize = usize::MAX;

/// Which rows and columns take part in a (sub)problem, and which edges are
/// excluded.
#[derive(Debug, Clone)]
pub(crate) struct Subproblem {
    pub row_active: Vec<bool>,
    pub col_active: Vec<bool>,
    pub forbidden: Vec<Vec<usize>>,
}

impl Subproblem {
    pub fn full(n: usize, m: usize) -> Self {
        Self {
            row_active: vec![true; n],
            col_active: vec![true; m + n],
            forbidden: vec![Vec::new(); n],
        }
    }

    #[inline]
    fn edge(&self, cost: &CostMatrix, row: usize, col: usize) -> Option<LexCost> {
        if !self.col_active[col] {
            return None;
        }
        if row >= cost.n_tracks() {
            return Some(LexCost::ZERO);
        }
        if self.forbidden[row].contains(&col) {
            return None;
        }
        let m = cost.n_detections();
        if col < m {
            Some(LexCost::from_cost(cost.entry(row, col)))
        } else if col - m == row {
            Some(LexCost::from_cost(cost.gate(row)))
        } else {
            None
        }
    }
}

/// Matching plus dual potentials. Column index `cols` is the virtual root
/// used during an augmentation.
#[derive(Debug, Clone)]
pub(crate) struct LapState {
    cols: usize,
    col_row: Vec<usize>,
    row_col: Vec<usize>,
    u: Vec<LexCost>,
    v: Vec<LexCost>,
}

impl LapState {
    pub fn new(n: usize, cols: usize) -> Self {
        Self {
            cols,
            col_row: vec![NONE; cols + 1],
            row_col: vec![NONE; n],
            u: vec![LexCost::ZERO; n],
            v: vec![LexCost::ZERO; cols + 1],
        }
    }

    pub fn column_of(&self, row: usize) -> Option<usize> {
        let c = self.row_col[row];
        (c != NONE).then_some(c)
    }

    /// Records a pair outside the solver (pinned or fixed rows).
    pub fn fix(&mut self, row: usize, col: usize) {
        self.row_col[row] = col;
        self.col_row[col] = row;
    }

    /// Frees `row`, returning the column it held.
    pub fn release(&mut self, row: usize) -> Option<usize> {
        let c = self.column_of(row)?;
        self.row_col[row] = NONE;
        self.col_row[c] = NONE;
        Some(c)
    }

    /// Parks a zero-cost dummy row on every free column.
    pub fn add_dummies(&mut self, sub: &Subproblem) {
        for col in 0..self.cols {
            if sub.col_active[col] && self.col_row[col] == NONE {
                let d = self.row_col.len();
                self.row_col.push(col);
                self.u.push(LexCost::ZERO);
                self.col_row[col] = d;
            }
        }
    }

    /// Dijkstra-style augmentation from the free row `root_row`.
    /// Returns false when no augmenting path exists.
    pub fn augment(&mut self, cost: &CostMatrix, sub: &Subproblem, root_row: usize) -> bool {
        let cols = self.cols;
        let root = cols;
        let mut minv = vec![LexCost::UNREACHED; cols];
        let mut way = vec![root; cols];
        let mut used = vec![false; cols + 1];
        self.col_row[root] = root_row;
        let mut j0 = root;
        loop {
            used[j0] = true;
            let i0 = self.col_row[j0];
            let mut delta = LexCost::UNREACHED;
            let mut j1 = NONE;
            for j in 0..cols {
                if used[j] || !sub.col_active[j] {
                    continue;
                }
                if let Some(c) = sub.edge(cost, i0, j) {
                    let cur = c - self.u[i0] - self.v[j];
                    if minv[j].is_unreached() || cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                // strict comparison: the lowest column index wins ties
                if !minv[j].is_unreached() && (delta.is_unreached() || minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == NONE {
                self.col_row[root] = NONE;
                return false;
            }
            for j in 0..=cols {
                if used[j] {
                    let r = self.col_row[j];
                    self.u[r] += delta;
                    self.v[j] -= delta;
                } else if !minv[j].is_unreached() {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if self.col_row[j0] == NONE {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            let r = self.col_row[j1];
            self.col_row[j0] = r;
            self.row_col[r] = j0;
            j0 = j1;
            if j0 == root {
                break;
            }
        }
        self.col_row[root] = NONE;
        true
    }

    pub fn to_assignment(&self, cost: &CostMatrix) -> Assignment {
        let m = cost.n_detections();
        let track_to_detection: Vec<Option<usize>> = self
            .row_col
            .iter()
            .take(cost.n_tracks())
            .map(|&c| (c != NONE && c < m).then_some(c))
            .collect();
        Assignment::from_tracks(cost, track_to_detection)
    }
}

/// Builds the subproblem and partial state implied by user constraints:
/// pinned and forced-unassigned rows are removed along with their columns.
pub(crate) fn constrained_start(
    cost: &CostMatrix,
    constraints: &ConstraintSet,
) -> Result<(Subproblem, LapState), AssignmentError> {
    constraints.validate(cost.n_tracks(), cost.n_detections())?;
    let n = cost.n_tracks();
    let m = cost.n_detections();
    let mut sub = Subproblem::full(n, m);
    let mut state = LapState::new(n, m + n);
    for &(i, j) in constraints.pinned() {
        sub.row_active[i] = false;
        sub.col_active[j] = false;
        state.fix(i, j);
    }
    for &i in constraints.forced_unassigned() {
        sub.row_active[i] = false;
        sub.col_active[m + i] = false;
        state.fix(i, m + i);
    }
    for &(i, j) in constraints.forbidden() {
        sub.forbidden[i].push(j);
    }
    Ok((sub, state))
}

/// Solves a subproblem from a partial state by augmenting every free active row.
pub(crate) fn complete(cost: &CostMatrix, sub: &Subproblem, state: &mut LapState) -> bool {
    for row in 0..cost.n_tracks() {
        if sub.row_active[row] && state.column_of(row).is_none() && !state.augment(cost, sub, row) {
            return false;
        }
    }
    true
}

/// Globally optimal gated assignment.
///
/// Ties are broken deterministically: tracks are inserted in index order and
/// each augmentation prefers the lowest column index among equal reduced
/// costs.
pub fn solve_lap(cost: &CostMatrix) -> Assignment {
    solve_constrained(cost, &ConstraintSet::default()).expect("unconstrained problems are always solvable")
}

/// Optimal assignment subject to pinned, forbidden, and forced-unassigned
/// constraints.
pub fn solve_constrained(cost: &CostMatrix, constraints: &ConstraintSet) -> Result<Assignment, AssignmentError> {
    solve_with_state(cost, constraints).map(|(a, _, _)| a)
}

pub(crate) fn solve_with_state(
    cost: &CostMatrix,
    constraints: &ConstraintSet,
) -> Result<(Assignment, Subproblem, LapState), AssignmentError> {
    let (sub, mut state) = constrained_start(cost, constraints)?;
    // every row keeps its own gate column, so this cannot fail
    let ok = complete(cost, &sub, &mut state);
    debug_assert!(ok);
    Ok((state.to_assignment(cost), sub, state))
}
