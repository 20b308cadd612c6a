//! Mixed-integer solving by best-first branch and bound over the simplex.
//! Nodes are ordered by their parent relaxation bound, branching splits the
//! most fractional integral column, and the down branch is queued first so
//! ties resolve the same way on every run. Warmstart hooks: an incumbent to
//! start the cutoff at, an external objective bound to prune with, and a
//! pool of past solutions to mine incumbents from.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::problem::dot;
use crate::simplex::{LpProblem, SimplexSolver, FEAS_TOL, Relation};

#[derive(Clone, Debug)]
pub struct MipConfig {
    /// Stop once (incumbent - bound) / max(1e-9, |incumbent|) drops here.
    pub gap_tolerance: f64,
    /// Maximum nodes to process before giving up.
    pub node_limit: u64,
    /// How far a value may sit from an integer and still count as integral.
    pub integrality_tol: f64,
    /// Feasible integral assignment to start the cutoff from.
    pub incumbent: Option<Vec<f64>>,
    /// Externally known upper bound on the optimal objective; subtrees that
    /// cannot reach it are pruned.
    pub objective_bound: Option<f64>,
}

impl Default for MipConfig {
    fn default() -> Self {
        MipConfig {
            gap_tolerance: 0.0,
            node_limit: 1_000_000,
            integrality_tol: 1e-6,
            incumbent: None,
            objective_bound: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MipOutcome {
    pub assignment: Vec<f64>,
    pub objective: f64,
    /// Tightest proven lower bound on the optimum at termination.
    pub best_bound: f64,
    /// Relative gap between objective and best bound at termination.
    pub gap: f64,
    /// Nodes whose relaxation was solved.
    pub nodes: u64,
    /// Simplex iterations summed over all node relaxations.
    pub lp_iterations: u64,
}

struct Node {
    bound: f64,
    seq: u64,
    deltas: Vec<(usize, f64, f64)>,
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
        // BinaryHeap is a max-heap; rank lowest bound (then lowest seq) as
        // greatest so it pops first.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn prune_margin(reference: f64) -> f64 {
    1e-9 * reference.abs().max(1.0)
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    (incumbent - bound) / incumbent.abs().max(1e-9)
}

fn feasible_objective(
    problem: &LpProblem,
    integral: &[bool],
    x: &[f64],
    integrality_tol: f64,
) -> Option<f64> {
    if x.len() != problem.n_vars() {
        return None;
    }
    for (j, &(lo, up)) in problem.bounds.iter().enumerate() {
        if x[j] < lo - FEAS_TOL || x[j] > up + FEAS_TOL {
            return None;
        }
        if integral[j] && (x[j] - x[j].round()).abs() > integrality_tol {
            return None;
        }
    }
    for row in &problem.constraints {
        let lhs = dot(&row.coeffs, x);
        let ok = match row.relation {
            Relation::Le => lhs <= row.rhs + FEAS_TOL,
            Relation::Ge => lhs >= row.rhs - FEAS_TOL,
            Relation::Eq => (lhs - row.rhs).abs() <= FEAS_TOL,
        };
        if !ok {
            return None;
        }
    }
    Some(dot(&problem.objective, x))
}

fn most_fractional(x: &[f64], integral: &[bool], tol: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (j, &v) in x.iter().enumerate() {
        if !integral[j] || (v - v.round()).abs() <= tol {
            continue;
        }
        let dist = ((v - v.floor()) - 0.5).abs();
        match best {
            Some((_, _, d)) if dist >= d => {}
            _ => best = Some((j, v, dist)),
        }
    }
    best.map(|(j, v, _)| (j, v))
}

/// Solve `problem` with the columns flagged in `integral` restricted to
/// integer values.
pub fn solve_mip(problem: &LpProblem, integral: &[bool], config: &MipConfig) -> Result<MipOutcome> {
    problem.validate()?;
    if integral.len() != problem.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: problem.n_vars(),
            got: integral.len(),
        });
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    if let Some(cand) = &config.incumbent {
        if let Some(obj) = feasible_objective(problem, integral, cand, config.integrality_tol) {
            best = Some((cand.clone(), obj));
        }
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq: 0,
        deltas: Vec::new(),
    });
    let mut seq = 1u64;
    let mut nodes = 0u64;
    let mut lp_iterations = 0u64;
    let mut stop_bound: Option<f64> = None;
    let mut limit_hit = false;

    while let Some(node) = heap.pop() {
        if let Some((_, inc)) = &best {
            if node.bound >= inc - prune_margin(*inc) {
                continue;
            }
            if relative_gap(*inc, node.bound) <= config.gap_tolerance {
                stop_bound = Some(node.bound);
                break;
            }
        }
        if let Some(ob) = config.objective_bound {
            if node.bound > ob + prune_margin(ob) {
                continue;
            }
        }
        if nodes >= config.node_limit {
            stop_bound = Some(node.bound);
            limit_hit = true;
            break;
        }
        nodes += 1;

        let mut solver = SimplexSolver::new(problem)?;
        for &(v, l, u) in &node.deltas {
            solver.override_bound(v, l, u)?;
        }
        let relaxed = match solver.solve_cold() {
            Ok(out) => out,
            Err(Error::Infeasible) => continue,
            Err(e) => return Err(e),
        };
        lp_iterations += relaxed.iterations;
        let bound = relaxed.objective;

        if let Some((_, inc)) = &best {
            if bound >= inc - prune_margin(*inc) {
                continue;
            }
        }
        if let Some(ob) = config.objective_bound {
            if bound > ob + prune_margin(ob) {
                continue;
            }
        }

        match most_fractional(&relaxed.assignment, integral, config.integrality_tol) {
            None => {
                let mut x = relaxed.assignment;
                for (j, xi) in x.iter_mut().enumerate() {
                    if integral[j] {
                        *xi = xi.round();
                    }
                }
                let obj = dot(&problem.objective, &x);
                if best.as_ref().map_or(true, |(_, inc)| obj < inc - 1e-12) {
                    best = Some((x, obj));
                }
            }
            Some((q, v)) => {
                let mut lo_q = problem.bounds[q].0;
                let mut up_q = problem.bounds[q].1;
                for &(var, l, u) in &node.deltas {
                    if var == q {
                        lo_q = l;
                        up_q = u;
                    }
                }
                let mut down = node.deltas.clone();
                down.push((q, lo_q, v.floor()));
                heap.push(Node {
                    bound,
                    seq,
                    deltas: down,
                });
                seq += 1;
                let mut up = node.deltas;
                up.push((q, v.ceil(), up_q));
                heap.push(Node {
                    bound,
                    seq,
                    deltas: up,
                });
                seq += 1;
            }
        }
    }

    match best {
        Some((assignment, objective)) => {
            let best_bound = stop_bound.unwrap_or(objective);
            let gap = relative_gap(objective, best_bound).max(0.0);
            Ok(MipOutcome {
                assignment,
                objective,
                best_bound,
                gap,
                nodes,
                lp_iterations,
            })
        }
        None if limit_hit => Err(Error::NodeLimit {
            limit: config.node_limit,
        }),
        None => Err(Error::Infeasible),
    }
}

/// Bounded FIFO pool of integral solutions seen so far. All entries share
/// one constraint structure, so every entry stays feasible and can seed a
/// later solve under different objective coefficients.
pub struct SolutionPool {
    entries: Mutex<VecDeque<Arc<Vec<f64>>>>,
    capacity: usize,
}

impl SolutionPool {
    pub fn new(capacity: usize) -> Self {
        SolutionPool {
            entries: Mutex::new(VecDeque::new()),
            capacity: capacity.max(1),
        }
    }

    pub fn insert(&self, assignment: Vec<f64>) {
        let mut entries = self.entries.lock().unwrap();
        if entries.len() == self.capacity {
            entries.pop_front();
        }
        entries.push_back(Arc::new(assignment));
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entry with the lowest objective under the given coefficients.
    pub fn best_under(&self, objective: &[f64]) -> Option<(Arc<Vec<f64>>, f64)> {
        let entries = self.entries.lock().unwrap();
        let mut best: Option<(Arc<Vec<f64>>, f64)> = None;
        for entry in entries.iter() {
            let value = dot(objective, entry);
            match &best {
                Some((_, have)) if value >= *have => {}
                _ => best = Some((Arc::clone(entry), value)),
            }
        }
        best
    }
}

/// Mine the pool for the best prior solution under new coefficients.
pub fn warmstart_pool_lookup(
    pool: &SolutionPool,
    objective: &[f64],
) -> Option<(Arc<Vec<f64>>, f64)> {
    pool.best_under(objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knapsack::{self, KnapsackData};
    use crate::simplex::{solve_lp, Constraint};
    use proptest::prelude::*;

    fn knapsack_mip(data: &KnapsackData, values: &[f64]) -> (LpProblem, Vec<bool>) {
        let problem = LpProblem {
            objective: values.iter().map(|v| -v).collect(),
            constraints: vec![Constraint {
                coeffs: data.weights.iter().map(|w| *w as f64).collect(),
                relation: Relation::Le,
                rhs: data.capacity as f64,
            }],
            bounds: vec![(0.0, 1.0); values.len()],
        };
        let integral = vec![true; values.len()];
        (problem, integral)
    }

    #[test]
    fn matches_dynamic_programming_on_a_knapsack() {
        let data = KnapsackData {
            weights: vec![5, 4, 3],
            capacity: 7,
        };
        let values = [10.0, 7.0, 4.0];
        let (problem, integral) = knapsack_mip(&data, &values);
        let out = solve_mip(&problem, &integral, &MipConfig::default()).unwrap();
        assert!((out.objective + 11.0).abs() < 1e-9);
        assert_eq!(out.assignment, vec![0.0, 1.0, 1.0]);
        assert_eq!(out.gap, 0.0);
    }

    #[test]
    fn mixed_integrality_matches_fixing_the_integer_column() {
        // One integer column in 0..=3, two continuous; brute-force the
        // integer column and solve the remaining LP as the reference.
        let problem = LpProblem {
            objective: vec![-2.0, -1.3, -1.1],
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0, 1.0, 1.0],
                    relation: Relation::Le,
                    rhs: 3.5,
                },
                Constraint {
                    coeffs: vec![1.0, 2.0, 0.0],
                    relation: Relation::Le,
                    rhs: 3.2,
                },
            ],
            bounds: vec![(0.0, 3.0), (0.0, 1.0), (0.0, 1.0)],
        };
        let integral = vec![true, false, false];

        let mut reference = f64::INFINITY;
        for k in 0..=3 {
            let mut fixed = problem.clone();
            fixed.bounds[0] = (k as f64, k as f64);
            if let Ok(out) = solve_lp(&fixed, None) {
                reference = reference.min(out.objective);
            }
        }

        let out = solve_mip(&problem, &integral, &MipConfig::default()).unwrap();
        assert!(
            (out.objective - reference).abs() < 1e-7,
            "branch and bound {} vs fixing {}",
            out.objective,
            reference
        );
        assert!((out.assignment[0] - out.assignment[0].round()).abs() < 1e-6);
    }

    #[test]
    fn gap_tolerance_stops_early() {
        let data = KnapsackData {
            weights: vec![5, 4, 3],
            capacity: 7,
        };
        let values = [10.0, 7.0, 4.0];
        let (problem, integral) = knapsack_mip(&data, &values);
        let config = MipConfig {
            gap_tolerance: 0.25,
            ..Default::default()
        };
        let out = solve_mip(&problem, &integral, &config).unwrap();
        assert!(out.gap <= 0.25 + 1e-12);
        assert!(
            feasible_objective(&problem, &integral, &out.assignment, 1e-6).is_some(),
            "early stop must still return a feasible integral solution"
        );
        assert!(out.best_bound <= out.objective);
    }

    #[test]
    fn node_limit_without_incumbent_errors() {
        let data = KnapsackData {
            weights: vec![2, 3],
            capacity: 4,
        };
        let (problem, integral) = knapsack_mip(&data, &[3.0, 4.0]);
        let config = MipConfig {
            node_limit: 1,
            ..Default::default()
        };
        match solve_mip(&problem, &integral, &config) {
            Err(Error::NodeLimit { limit: 1 }) => {}
            other => panic!("expected node limit error, got {other:?}"),
        }
    }

    #[test]
    fn seeded_incumbent_is_returned_when_already_optimal() {
        let data = KnapsackData {
            weights: vec![5, 4, 3],
            capacity: 7,
        };
        let values = [10.0, 7.0, 4.0];
        let (problem, integral) = knapsack_mip(&data, &values);

        let cold = solve_mip(&problem, &integral, &MipConfig::default()).unwrap();
        let seeded = solve_mip(
            &problem,
            &integral,
            &MipConfig {
                incumbent: Some(vec![0.0, 1.0, 1.0]),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(seeded.objective, -11.0);
        assert_eq!(seeded.assignment, vec![0.0, 1.0, 1.0]);
        assert!(
            seeded.nodes <= cold.nodes,
            "seeding explored {} nodes, cold {}",
            seeded.nodes,
            cold.nodes
        );
    }

    #[test]
    fn tight_root_with_incumbent_stops_at_one_node() {
        // Root relaxation is integral here, so the incumbent is confirmed
        // immediately and nothing is branched.
        let data = KnapsackData {
            weights: vec![1, 1],
            capacity: 2,
        };
        let (problem, integral) = knapsack_mip(&data, &[3.0, 2.0]);
        let out = solve_mip(
            &problem,
            &integral,
            &MipConfig {
                incumbent: Some(vec![1.0, 1.0]),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.nodes, 1);
        assert_eq!(out.objective, -5.0);
    }

    #[test]
    fn infeasible_incumbent_is_ignored() {
        let data = KnapsackData {
            weights: vec![5, 4, 3],
            capacity: 7,
        };
        let values = [10.0, 7.0, 4.0];
        let (problem, integral) = knapsack_mip(&data, &values);
        let out = solve_mip(
            &problem,
            &integral,
            &MipConfig {
                // Violates the capacity row.
                incumbent: Some(vec![1.0, 1.0, 1.0]),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((out.objective + 11.0).abs() < 1e-9);
    }

    #[test]
    fn valid_objective_bound_preserves_the_optimum() {
        let data = KnapsackData {
            weights: vec![5, 4, 3],
            capacity: 7,
        };
        let values = [10.0, 7.0, 4.0];
        let (problem, integral) = knapsack_mip(&data, &values);
        let out = solve_mip(
            &problem,
            &integral,
            &MipConfig {
                objective_bound: Some(-11.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((out.objective + 11.0).abs() < 1e-9);
    }

    #[test]
    fn pool_returns_best_entry_and_evicts_oldest() {
        let pool = SolutionPool::new(2);
        pool.insert(vec![1.0, 0.0]);
        pool.insert(vec![0.0, 1.0]);

        let (best, value) = warmstart_pool_lookup(&pool, &[5.0, 2.0]).unwrap();
        assert_eq!(*best, vec![0.0, 1.0]);
        assert_eq!(value, 2.0);

        pool.insert(vec![1.0, 1.0]);
        assert_eq!(pool.len(), 2);
        // The oldest entry [1, 0] is gone; under these coefficients the
        // best survivor is [0, 1].
        let (best, _) = pool.best_under(&[0.1, 5.0]).unwrap();
        assert_eq!(*best, vec![0.0, 1.0]);
    }

    #[test]
    fn empty_pool_yields_nothing() {
        let pool = SolutionPool::new(4);
        assert!(pool.is_empty());
        assert!(pool.best_under(&[1.0]).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn agrees_with_dynamic_programming(
            items in prop::collection::vec((1u32..9, -5.0f64..12.0), 1..8),
            capacity in 0u32..30,
        ) {
            let data = KnapsackData {
                weights: items.iter().map(|(w, _)| *w).collect(),
                capacity,
            };
            let values: Vec<f64> = items.iter().map(|(_, v)| *v).collect();
            let (problem, integral) = knapsack_mip(&data, &values);

            let mip = solve_mip(&problem, &integral, &MipConfig::default()).unwrap();
            let dp = knapsack::solve_exact(&data, &values);
            prop_assert!((mip.objective + dp.objective).abs() < 1e-7,
                "branch and bound {} vs dp {}", -mip.objective, dp.objective);
        }
    }
}
