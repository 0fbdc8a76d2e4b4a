//! K-best assignments by Murty's partitioning.
//!
//! Each popped solution `S` over free rows `r_1 < … < r_p` spawns children
//! where child `k` excludes `(r_k, S(r_k))` and fixes `r_1 … r_{k-1}` to their
//! values in `S`. The children partition the parent's solution space minus
//! `S`, so the stream contains no duplicates. A child differs from its parent
//! by one excluded edge, so in the square embedding its optimum is one
//! augmentation away from the parent's optimum with the parent's potentials.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::lap::{self, LapState, Subproblem};
use super::{Assignment, AssignmentError, ConstraintSet, CostMatrix};

struct Node {
    assignment: Assignment,
    sub: Subproblem,
    state: LapState,
    seq: u64,
}

impl Node {
    fn key(&self) -> (f64, &[Option<usize>], u64) {
        (
            self.assignment.total_cost,
            &self.assignment.track_to_detection,
            self.seq,
        )
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ca, ta, sa) = self.key();
        let (cb, tb, sb) = other.key();
        ca.total_cmp(&cb).then_with(|| ta.cmp(tb)).then_with(|| sa.cmp(&sb))
    }
}

/// Lazily ranked assignments in nondecreasing total cost.
///
/// The first item is always the optimum returned by
/// [`solve_constrained`](super::solve_constrained). Later items are the
/// remaining finite-cost assignments; if the optimum itself has infinite cost
/// (no finite assignment exists) it is the only item.
pub struct KBest<'a> {
    cost: &'a CostMatrix,
    heap: BinaryHeap<Reverse<Node>>,
    seq: u64,
}

impl<'a> KBest<'a> {
    pub fn new(cost: &'a CostMatrix, constraints: &ConstraintSet) -> Result<Self, AssignmentError> {
        let (assignment, sub, mut state) = lap::solve_with_state(cost, constraints)?;
        state.add_dummies(&sub);
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(Node {
            assignment,
            sub,
            state,
            seq: 0,
        }));
        Ok(Self { cost, heap, seq: 1 })
    }

    fn expand(&mut self, node: &Node) {
        if !node.assignment.total_cost.is_finite() {
            return;
        }
        let n = self.cost.n_tracks();
        let mut sub = node.sub.clone();
        for row in 0..n {
            if !sub.row_active[row] {
                continue;
            }
            let Some(col) = node.state.column_of(row) else {
                continue;
            };
            let mut child_sub = sub.clone();
            child_sub.forbidden[row].push(col);
            let mut state = node.state.clone();
            state.release(row);
            if state.augment(self.cost, &child_sub, row) {
                let assignment = state.to_assignment(self.cost);
                if assignment.total_cost.is_finite() {
                    self.heap.push(Reverse(Node {
                        assignment,
                        sub: child_sub,
                        state,
                        seq: self.seq,
                    }));
                    self.seq += 1;
                }
            }
            // later children keep this row at its current column
            sub.row_active[row] = false;
            sub.col_active[col] = false;
        }
    }
}

impl Iterator for KBest<'_> {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        let Reverse(node) = self.heap.pop()?;
        self.expand(&node);
        Some(node.assignment)
    }
}

/// The `k` lowest-cost assignments (fewer if fewer finite ones exist).
pub fn murty_k_best(cost: &CostMatrix, k: usize) -> Vec<Assignment> {
    KBest::new(cost, &ConstraintSet::default())
        .expect("unconstrained problems are always solvable")
        .take(k)
        .collect()
}

/// [`murty_k_best`] restricted to assignments satisfying `constraints`.
pub fn murty_k_best_constrained(
    cost: &CostMatrix,
    constraints: &ConstraintSet,
    k: usize,
) -> Result<Vec<Assignment>, AssignmentError> {
    Ok(KBest::new(cost, constraints)?.take(k).collect())
}
