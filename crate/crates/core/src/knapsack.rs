//! 0-1 knapsack oracles: exact dynamic programming over integral capacity,
//! the profit-density greedy, and the fractional relaxation. All three
//! maximize and accept arbitrary real item values; items with nonpositive
//! value are never selected, which matters because training hands these
//! oracles sign-flipped coefficient vectors.

use crate::problem::{dot, SolutionVector};

pub const ORACLE_EXACT: &str = "knap-exact";
pub const ORACLE_GREEDY: &str = "knap-greedy";
pub const ORACLE_RELAX: &str = "knap-relax";

/// Constraint side of a 0-1 knapsack: integral weights and capacity. Item
/// values arrive per solve as the objective coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnapsackData {
    pub weights: Vec<u32>,
    pub capacity: u32,
}

impl KnapsackData {
    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.weights.is_empty() {
            return Err("knapsack has no items".into());
        }
        Ok(())
    }
}

/// Exact maximization by dynamic programming over capacity. Ties between
/// taking and skipping an item break toward skipping, so among optimal
/// selections the lexicographically smallest one is returned.
pub fn solve_exact(data: &KnapsackData, values: &[f64]) -> SolutionVector {
    assert_eq!(values.len(), data.weights.len());
    let n = values.len();
    let cap = data.capacity as usize;

    // dp[i][c]: best value over items[i..] within capacity c. Suffix form
    // so reconstruction runs forward and ties break toward skipping the
    // earliest items, yielding the lexicographically smallest optimum.
    let width = cap + 1;
    let mut dp = vec![0.0f64; (n + 1) * width];
    for i in (0..n).rev() {
        let w = data.weights[i] as usize;
        let v = values[i];
        let (row, next) = dp[i * width..].split_at_mut(width);
        for c in 0..width {
            let mut best = next[c];
            if v > 0.0 && w <= c {
                let take = next[c - w] + v;
                if take > best {
                    best = take;
                }
            }
            row[c] = best;
        }
    }

    let mut assignment = vec![0.0; n];
    let mut c = cap;
    for i in 0..n {
        if dp[i * width + c] != dp[(i + 1) * width + c] {
            assignment[i] = 1.0;
            c -= data.weights[i] as usize;
        }
    }

    let objective = dot(values, &assignment);
    SolutionVector::new(assignment, objective, ORACLE_EXACT)
}

/// Items in greedy order: positive value, sorted by value per unit weight,
/// densest first. Zero-weight items with positive value count as infinitely
/// dense. Ties keep the lower index first.
fn density_order(data: &KnapsackData, values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = values[a] * data.weights[b] as f64;
        let rb = values[b] * data.weights[a] as f64;
        // ra < rb  <=>  values[a]/weights[a] < values[b]/weights[b], cast to
        // cross products so zero weights order correctly.
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    order
}

/// Greedy maximization: take items in density order while they fit.
pub fn solve_greedy(data: &KnapsackData, values: &[f64]) -> SolutionVector {
    assert_eq!(values.len(), data.weights.len());
    let mut assignment = vec![0.0; values.len()];
    let mut remaining = data.capacity;
    for i in density_order(data, values) {
        if data.weights[i] <= remaining {
            assignment[i] = 1.0;
            remaining -= data.weights[i];
        }
    }
    let objective = dot(values, &assignment);
    SolutionVector::new(assignment, objective, ORACLE_GREEDY)
}

/// Fractional relaxation: fill in density order, splitting at most one item
/// at the capacity boundary. Upper-bounds the exact optimum.
pub fn solve_relaxation(data: &KnapsackData, values: &[f64]) -> SolutionVector {
    assert_eq!(values.len(), data.weights.len());
    let mut assignment = vec![0.0; values.len()];
    let mut remaining = data.capacity as f64;
    for i in density_order(data, values) {
        let w = data.weights[i] as f64;
        if w <= remaining {
            assignment[i] = 1.0;
            remaining -= w;
        } else {
            if remaining > 0.0 {
                assignment[i] = remaining / w;
            }
            break;
        }
    }
    let objective = dot(values, &assignment);
    SolutionVector::new(assignment, objective, ORACLE_RELAX)
}
