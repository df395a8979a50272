//! Integer allocations of a fixed total across baskets.

use alloc::vec::Vec;

use crate::design::MAX_BASKETS;
use crate::error::{Error, Result};

/// Every allocation `(n_1, …, n_K)` with `Σ n_i = total` and each
/// `n_i = min + j_i · step` for a non-negative integer `j_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllocationGrid {
    k: usize,
    total: u64,
    min: u64,
    step: u64,
    /// Number of steps shared out across baskets.
    spare: u64,
}

impl AllocationGrid {
    pub fn new(k: usize, total: u64, min: u64, step: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidGrid("at least one basket is required"));
        }
        if k > MAX_BASKETS {
            return Err(Error::TooManyBaskets { k, max: MAX_BASKETS });
        }
        if step == 0 {
            return Err(Error::InvalidGrid("step must be at least 1"));
        }
        if min == 0 {
            return Err(Error::InvalidGrid("minimum basket size must be at least 1"));
        }
        let floor = min
            .checked_mul(k as u64)
            .filter(|f| *f <= total)
            .ok_or(Error::InvalidGrid("minimum basket sizes exceed the total"))?;
        let rest = total - floor;
        if rest % step != 0 {
            return Err(Error::InvalidGrid("total minus the minimum sizes must be a multiple of step"));
        }
        Ok(AllocationGrid { k, total, min, step, spare: rest / step })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `C(spare + K − 1, K − 1)`, saturating.
    pub fn row_count(&self) -> u128 {
        let n = self.spare as u128 + self.k as u128 - 1;
        let r = self.k as u128 - 1;
        let mut c: u128 = 1;
        for i in 0..r {
            c = match c.checked_mul(n - i) {
                Some(v) => v / (i + 1),
                None => return u128::MAX,
            };
        }
        c
    }

    /// Allocations in lexicographic order.
    pub fn iter(&self) -> Allocations {
        let mut steps = alloc::vec![0; self.k];
        steps[self.k - 1] = self.spare;
        Allocations { grid: *self, steps: Some(steps) }
    }

    /// Allocations sorted by Gini impurity ascending (largest `Σ n²` first),
    /// ties broken lexicographically.
    pub fn sorted(&self) -> Vec<Vec<u64>> {
        let mut rows: Vec<(u128, Vec<u64>)> = self.iter().map(|a| (sum_of_squares(&a), a)).collect();
        rows.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        rows.into_iter().map(|(_, a)| a).collect()
    }
}

/// Lexicographic iterator over an [`AllocationGrid`].
#[derive(Debug, Clone)]
pub struct Allocations {
    grid: AllocationGrid,
    steps: Option<Vec<u64>>,
}

impl Iterator for Allocations {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let steps = self.steps.as_mut()?;
        let g = self.grid;
        let out = steps.iter().map(|j| g.min + j * g.step).collect();
        // Advance: find the rightmost position (excluding the last) that can
        // take one more step from the tail.
        let k = steps.len();
        let mut advanced = false;
        if k > 1 {
            for i in (0..k - 1).rev() {
                let tail: u64 = steps[i + 1..].iter().sum();
                if tail > 0 {
                    steps[i] += 1;
                    for s in &mut steps[i + 1..] {
                        *s = 0;
                    }
                    steps[k - 1] = tail - 1;
                    advanced = true;
                    break;
                }
            }
        }
        if !advanced {
            self.steps = None;
        }
        Some(out)
    }
}

fn sum_of_squares(counts: &[u64]) -> u128 {
    counts.iter().map(|&n| n as u128 * n as u128).sum()
}

/// `1 − Σ (n_i / N)²`.
pub fn allocation_gini(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let t = total as f64;
    1.0 - sum_of_squares(counts) as f64 / (t * t)
}

pub fn allocation_proportions(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&n| n as f64 / total as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_basket_counts() {
        let g = AllocationGrid::new(2, 150, 10, 1).unwrap();
        assert_eq!(g.row_count(), 131);
        assert_eq!(g.iter().count(), 131);
        let g = AllocationGrid::new(2, 150, 10, 5).unwrap();
        assert_eq!(g.row_count(), 27);
        let rows = g.sorted();
        assert_eq!(rows.len(), 27);
        assert_eq!(rows[0], alloc::vec![10, 140]);
        assert_eq!(rows[1], alloc::vec![140, 10]);
        assert_eq!(rows[26], alloc::vec![75, 75]);
    }

    #[test]
    fn three_basket_lexicographic() {
        let g = AllocationGrid::new(3, 6, 1, 1).unwrap();
        let rows: Vec<_> = g.iter().collect();
        assert_eq!(rows.len() as u128, g.row_count());
        assert_eq!(rows.first().unwrap(), &alloc::vec![1, 1, 4]);
        assert_eq!(rows.last().unwrap(), &alloc::vec![4, 1, 1]);
        let mut sorted = rows.clone();
        sorted.sort();
        assert_eq!(rows, sorted);
        assert!(rows.iter().all(|r| r.iter().sum::<u64>() == 6));
    }

    #[test]
    fn single_basket() {
        let g = AllocationGrid::new(1, 50, 10, 5).unwrap();
        assert_eq!(g.iter().collect::<Vec<_>>(), alloc::vec![alloc::vec![50]]);
    }

    #[test]
    fn invalid_grids() {
        assert!(AllocationGrid::new(2, 150, 10, 0).is_err());
        assert!(AllocationGrid::new(2, 150, 0, 1).is_err());
        assert!(AllocationGrid::new(2, 15, 10, 1).is_err());
        assert!(AllocationGrid::new(2, 150, 10, 7).is_err());
    }

    #[test]
    fn gini_of_equal_split() {
        assert!((allocation_gini(&[50, 50, 50]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(allocation_proportions(&[30, 120]), alloc::vec![0.2, 0.8]);
    }
}
