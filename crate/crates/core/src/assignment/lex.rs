use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Sub, SubAssign};

/// Cost in the lexicographic group ℤ × ℝ: the integer part counts `+∞`
/// entries, the real part sums the finite ones.
///
/// Shortest-augmenting-path solvers only need an ordered abelian group, so
/// running them over this type minimizes the number of infinite entries
/// first and the finite cost second. That keeps ungated problems with more
/// tracks than detections well defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LexCost {
    pub inf: i64,
    pub fin: f64,
}

impl LexCost {
    pub const ZERO: LexCost = LexCost { inf: 0, fin: 0.0 };
    /// Sentinel for unreached columns; never used in arithmetic.
    pub const UNREACHED: LexCost = LexCost {
        inf: i64::MAX,
        fin: 0.0,
    };

    pub fn from_cost(c: f64) -> Self {
        if c.is_finite() {
            LexCost { inf: 0, fin: c }
        } else {
            LexCost { inf: 1, fin: 0.0 }
        }
    }

    pub fn is_unreached(&self) -> bool {
        self.inf == i64::MAX
    }
}

impl Eq for LexCost {}

impl PartialOrd for LexCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LexCost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.inf
            .cmp(&other.inf)
            .then_with(|| self.fin.total_cmp(&other.fin))
    }
}

impl Add for LexCost {
    type Output = LexCost;
    fn add(self, rhs: LexCost) -> LexCost {
        LexCost {
            inf: self.inf + rhs.inf,
            fin: self.fin + rhs.fin,
        }
    }
}

impl Sub for LexCost {
    type Output = LexCost;
    fn sub(self, rhs: LexCost) -> LexCost {
        LexCost {
            inf: self.inf - rhs.inf,
            fin: self.fin - rhs.fin,
        }
    }
}

impl AddAssign for LexCost {
    fn add_assign(&mut self, rhs: LexCost) {
        *self = *self + rhs;
    }
}

impl SubAssign for LexCost {
    fn sub_assign(&mut self, rhs: LexCost) {
        *self = *self - rhs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_count_dominates() {
        let a = LexCost { inf: 0, fin: 1e9 };
        let b = LexCost::from_cost(f64::INFINITY);
        assert!(a < b);
        assert!(LexCost::from_cost(2.0) < LexCost::from_cost(3.0));
        assert_eq!(b - b, LexCost::ZERO);
    }
}
