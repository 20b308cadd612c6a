//! Oracle dispatch: one handle that solves any instance family under a
//! chosen solve mode, carrying warmstart state (simplex bases, solution
//! pools) across the many related solves a training run makes. Regret is
//! defined here because it is always measured through an oracle.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::knapsack::{self, KnapsackData};
use crate::milp::{solve_mip, MipConfig, SolutionPool};
use crate::problem::{dot, ConstraintData, Family, OptInstance, Sense, SolutionVector};
use crate::scheduling::ScheduleModel;
use crate::simplex::{Constraint, LpProblem, Relation, SimplexSolver};

/// How an oracle should solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleSpec {
    /// Prove optimality: dynamic programming for knapsacks, branch and
    /// bound to gap zero elsewhere.
    Exact,
    /// Density greedy; knapsacks only.
    Greedy,
    /// Continuous relaxation.
    Relaxation,
    /// Branch and bound stopping at the given relative gap.
    MipGap(f64),
}

impl OracleSpec {
    pub fn descriptor(&self, family: Family) -> String {
        match self {
            OracleSpec::Exact => format!("{}-exact", family.as_str()),
            OracleSpec::Greedy => format!("{}-greedy", family.as_str()),
            OracleSpec::Relaxation => format!("{}-relax", family.as_str()),
            OracleSpec::MipGap(gap) => format!("{}-mip(gap={gap})", family.as_str()),
        }
    }

    /// Whether this oracle returns the optimum of the problem it solves.
    /// Greedy does not, and neither does a positive gap tolerance.
    pub fn finds_optimum(&self) -> bool {
        match self {
            OracleSpec::Exact | OracleSpec::Relaxation => true,
            OracleSpec::Greedy => false,
            OracleSpec::MipGap(gap) => *gap == 0.0,
        }
    }
}

impl std::str::FromStr for OracleSpec {
    type Err = Error;

    /// `exact`, `greedy`, `relax`, or `mip:GAP` with a nonnegative
    /// relative gap, e.g. `mip:0.05`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(OracleSpec::Exact),
            "greedy" => Ok(OracleSpec::Greedy),
            "relax" => Ok(OracleSpec::Relaxation),
            other => {
                if let Some(gap) = other.strip_prefix("mip:") {
                    let gap: f64 = gap.parse().map_err(|_| {
                        Error::Config(format!("`{gap}` is not a valid mip gap"))
                    })?;
                    if !(gap >= 0.0) {
                        return Err(Error::Config("mip gap must be nonnegative".into()));
                    }
                    return Ok(OracleSpec::MipGap(gap));
                }
                Err(Error::Config(format!(
                    "unknown oracle `{other}`, expected exact, greedy, relax, or mip:GAP"
                )))
            }
        }
    }
}

/// Which warmstarts the oracle is allowed to use. None of them may change
/// what is returned, only how fast it is found.
#[derive(Clone, Copy, Debug)]
pub struct WarmstartPolicy {
    /// Keep the simplex basis between relaxation solves on one structure.
    pub reuse_basis: bool,
    /// Seed branch and bound with pool or caller-provided solutions.
    pub seed_incumbent: bool,
    /// Add a caller-provided objective bound: a pruning cutoff for branch
    /// and bound, an extra constraint row for relaxation solves.
    pub bound_cut: bool,
}

impl Default for WarmstartPolicy {
    fn default() -> Self {
        WarmstartPolicy {
            reuse_basis: true,
            seed_incumbent: true,
            bound_cut: false,
        }
    }
}

impl WarmstartPolicy {
    pub fn cold() -> Self {
        WarmstartPolicy {
            reuse_basis: false,
            seed_incumbent: false,
            bound_cut: false,
        }
    }
}

/// Optional per-solve context a caller can pass down.
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveHints<'a> {
    /// Known feasible solution to start from, typically the cached true
    /// optimum of the same instance.
    pub incumbent: Option<&'a SolutionVector>,
    /// Native-sense objective value of a known feasible solution.
    pub objective_bound: Option<f64>,
}

/// Counters accumulated across every solve a handle performs.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleStats {
    pub solves: u64,
    pub seconds: f64,
    pub lp_iterations: u64,
    pub mip_nodes: u64,
    pub warm_solves: u64,
}

struct SchedState {
    model: Arc<ScheduleModel>,
    lp: Option<SimplexSolver>,
    pool: SolutionPool,
}

struct LpState {
    solver: Option<SimplexSolver>,
}

pub struct OracleHandle {
    spec: OracleSpec,
    policy: WarmstartPolicy,
    sched: Mutex<HashMap<u64, SchedState>>,
    lps: Mutex<HashMap<u64, LpState>>,
    stats: Mutex<OracleStats>,
}

const POOL_CAPACITY: usize = 256;

impl OracleHandle {
    pub fn new(spec: OracleSpec) -> Self {
        Self::with_policy(spec, WarmstartPolicy::default())
    }

    pub fn with_policy(spec: OracleSpec, policy: WarmstartPolicy) -> Self {
        OracleHandle {
            spec,
            policy,
            sched: Mutex::new(HashMap::new()),
            lps: Mutex::new(HashMap::new()),
            stats: Mutex::new(OracleStats::default()),
        }
    }

    pub fn spec(&self) -> OracleSpec {
        self.spec
    }

    pub fn policy(&self) -> WarmstartPolicy {
        self.policy
    }

    pub fn descriptor_for(&self, instance: &OptInstance) -> String {
        self.spec.descriptor(instance.family())
    }

    pub fn stats(&self) -> OracleStats {
        *self.stats.lock().unwrap()
    }

    pub fn solve(&self, instance: &OptInstance, coeffs: &[f64]) -> Result<SolutionVector> {
        self.solve_with(instance, coeffs, SolveHints::default())
    }

    /// Solve one instance under the given coefficients. The returned
    /// objective is in the instance's native sense and always equals the
    /// inner product of `coeffs` with the returned assignment.
    pub fn solve_with(
        &self,
        instance: &OptInstance,
        coeffs: &[f64],
        hints: SolveHints,
    ) -> Result<SolutionVector> {
        instance.check_coeffs(coeffs)?;
        let start = Instant::now();
        let mut solution = match instance.data() {
            ConstraintData::Knapsack(data) => self.solve_knapsack(instance, data, coeffs, hints),
            ConstraintData::Scheduling(_) => self.solve_scheduling(instance, coeffs, hints),
            ConstraintData::Lp(problem) => self.solve_lp_family(instance, problem, coeffs),
        }?;
        let seconds = start.elapsed().as_secs_f64();
        solution.solve_seconds = seconds;
        let mut stats = self.stats.lock().unwrap();
        stats.solves += 1;
        stats.seconds += seconds;
        Ok(solution)
    }

    fn unsupported(&self, family: Family) -> Error {
        Error::OracleUnsupported {
            oracle: self.spec.descriptor(family),
            family: family.as_str().to_string(),
        }
    }

    /// Values the underlying maximizer should see.
    fn maximize_values(instance: &OptInstance, coeffs: &[f64]) -> Vec<f64> {
        match instance.sense() {
            Sense::Maximize => coeffs.to_vec(),
            Sense::Minimize => coeffs.iter().map(|c| -c).collect(),
        }
    }

    /// Coefficients the internal minimizers should see.
    fn minimize_coeffs(instance: &OptInstance, coeffs: &[f64]) -> Vec<f64> {
        match instance.sense() {
            Sense::Minimize => coeffs.to_vec(),
            Sense::Maximize => coeffs.iter().map(|c| -c).collect(),
        }
    }

    fn bound_to_internal(instance: &OptInstance, native: f64) -> f64 {
        match instance.sense() {
            Sense::Minimize => native,
            Sense::Maximize => -native,
        }
    }

    fn solve_knapsack(
        &self,
        instance: &OptInstance,
        data: &KnapsackData,
        coeffs: &[f64],
        hints: SolveHints,
    ) -> Result<SolutionVector> {
        let values = Self::maximize_values(instance, coeffs);
        let mut solution = match self.spec {
            OracleSpec::Exact => knapsack::solve_exact(data, &values),
            OracleSpec::Greedy => knapsack::solve_greedy(data, &values),
            OracleSpec::Relaxation => knapsack::solve_relaxation(data, &values),
            OracleSpec::MipGap(gap) => {
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
                let config = MipConfig {
                    gap_tolerance: gap,
                    incumbent: if self.policy.seed_incumbent {
                        hints.incumbent.map(|s| s.assignment.clone())
                    } else {
                        None
                    },
                    objective_bound: if self.policy.bound_cut {
                        hints
                            .objective_bound
                            .map(|b| Self::bound_to_internal(instance, b))
                    } else {
                        None
                    },
                    ..Default::default()
                };
                let out = solve_mip(&problem, &integral, &config)?;
                let mut stats = self.stats.lock().unwrap();
                stats.lp_iterations += out.lp_iterations;
                stats.mip_nodes += out.nodes;
                drop(stats);
                SolutionVector::new(
                    out.assignment,
                    0.0,
                    self.spec.descriptor(Family::Knapsack),
                )
            }
        };
        solution.objective = dot(coeffs, &solution.assignment);
        solution.oracle = self.spec.descriptor(Family::Knapsack);
        Ok(solution)
    }

    fn solve_scheduling(
        &self,
        instance: &OptInstance,
        coeffs: &[f64],
        hints: SolveHints,
    ) -> Result<SolutionVector> {
        let internal = Self::minimize_coeffs(instance, coeffs);
        let mut map = self.sched.lock().unwrap();
        let state = match map.entry(instance.structure_key()) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                let sched = match instance.data() {
                    ConstraintData::Scheduling(s) => s,
                    _ => unreachable!("scheduling dispatch on non-scheduling instance"),
                };
                e.insert(SchedState {
                    model: Arc::new(ScheduleModel::build(sched)?),
                    lp: None,
                    pool: SolutionPool::new(POOL_CAPACITY),
                })
            }
        };
        let model = Arc::clone(&state.model);
        let objective = model.objective_for(&internal)?;

        let raw = match self.spec {
            OracleSpec::Greedy => return Err(self.unsupported(Family::Scheduling)),
            OracleSpec::Relaxation => {
                let internal_bound = hints
                    .objective_bound
                    .map(|b| Self::bound_to_internal(instance, b));
                if self.policy.bound_cut && internal_bound.is_some() {
                    // The cut changes the row set, so this solve cannot
                    // reuse the persistent solver or its basis.
                    let mut problem = model.problem_for(&internal)?;
                    problem.constraints.push(Constraint {
                        coeffs: objective.clone(),
                        relation: Relation::Le,
                        rhs: internal_bound.unwrap(),
                    });
                    let mut solver = SimplexSolver::new(&problem)?;
                    let out = solver.solve_cold()?;
                    let mut stats = self.stats.lock().unwrap();
                    stats.lp_iterations += out.iterations;
                    drop(stats);
                    out.assignment
                } else {
                    if state.lp.is_none() {
                        state.lp = Some(SimplexSolver::new(model.base_problem())?);
                    }
                    let solver = state.lp.as_mut().unwrap();
                    solver.set_objective(&objective)?;
                    let out = if self.policy.reuse_basis {
                        solver.solve()?
                    } else {
                        solver.solve_cold()?
                    };
                    let mut stats = self.stats.lock().unwrap();
                    stats.lp_iterations += out.iterations;
                    if out.warmstarted {
                        stats.warm_solves += 1;
                    }
                    drop(stats);
                    out.assignment
                }
            }
            OracleSpec::Exact | OracleSpec::MipGap(_) => {
                let gap = match self.spec {
                    OracleSpec::MipGap(g) => g,
                    _ => 0.0,
                };
                let problem = model.problem_for(&internal)?;
                let incumbent = if self.policy.seed_incumbent {
                    hints
                        .incumbent
                        .and_then(|s| s.raw.as_ref())
                        .map(|r| r.as_ref().clone())
                        .or_else(|| state.pool.best_under(&objective).map(|(x, _)| x.as_ref().clone()))
                } else {
                    None
                };
                let config = MipConfig {
                    gap_tolerance: gap,
                    incumbent,
                    objective_bound: if self.policy.bound_cut {
                        hints
                            .objective_bound
                            .map(|b| Self::bound_to_internal(instance, b))
                    } else {
                        None
                    },
                    ..Default::default()
                };
                let out = solve_mip(&problem, model.integral(), &config)?;
                let mut stats = self.stats.lock().unwrap();
                stats.lp_iterations += out.lp_iterations;
                stats.mip_nodes += out.nodes;
                if config.incumbent.is_some() {
                    stats.warm_solves += 1;
                }
                drop(stats);
                if self.policy.seed_incumbent {
                    state.pool.insert(out.assignment.clone());
                }
                out.assignment
            }
        };

        let usage = model.usage_of(&raw);
        let objective_native = dot(coeffs, &usage);
        let mut solution = SolutionVector::new(
            usage,
            objective_native,
            self.spec.descriptor(Family::Scheduling),
        );
        solution.raw = Some(Arc::new(raw));
        Ok(solution)
    }

    fn solve_lp_family(
        &self,
        instance: &OptInstance,
        problem: &LpProblem,
        coeffs: &[f64],
    ) -> Result<SolutionVector> {
        match self.spec {
            OracleSpec::Exact | OracleSpec::Relaxation => {}
            _ => return Err(self.unsupported(Family::Lp)),
        }
        let internal = Self::minimize_coeffs(instance, coeffs);
        let mut map = self.lps.lock().unwrap();
        let state = map
            .entry(instance.structure_key())
            .or_insert(LpState { solver: None });
        if state.solver.is_none() {
            state.solver = Some(SimplexSolver::new(problem)?);
        }
        let solver = state.solver.as_mut().unwrap();
        solver.set_objective(&internal)?;
        let out = if self.policy.reuse_basis {
            solver.solve()?
        } else {
            solver.solve_cold()?
        };
        let mut stats = self.stats.lock().unwrap();
        stats.lp_iterations += out.iterations;
        if out.warmstarted {
            stats.warm_solves += 1;
        }
        drop(stats);
        let objective = dot(coeffs, &out.assignment);
        Ok(SolutionVector::new(
            out.assignment,
            objective,
            self.spec.descriptor(Family::Lp),
        ))
    }
}

/// Decision regret of predicted coefficients against the truth: how much
/// worse the decision optimized for the prediction performs under the true
/// coefficients, measured through `oracle`. Nonnegative whenever the oracle
/// finds true optima; tiny negative noise is clamped to zero then.
pub fn regret(
    instance: &OptInstance,
    true_coeffs: &[f64],
    predicted_coeffs: &[f64],
    oracle: &OracleHandle,
) -> Result<f64> {
    let v_pred = oracle.solve(instance, predicted_coeffs)?;
    let v_true = oracle.solve(instance, true_coeffs)?;
    Ok(regret_of(instance, true_coeffs, &v_pred, &v_true, oracle))
}

/// Regret from already-computed solutions; used when the true solution is
/// cached.
pub fn regret_of(
    instance: &OptInstance,
    true_coeffs: &[f64],
    v_pred: &SolutionVector,
    v_true: &SolutionVector,
    oracle: &OracleHandle,
) -> f64 {
    let sign = match instance.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let raw = sign * (dot(true_coeffs, &v_pred.assignment) - dot(true_coeffs, &v_true.assignment));
    if oracle.spec().finds_optimum() && raw < 0.0 && raw >= -1e-6 {
        0.0
    } else {
        raw
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::canonicalize;
    use crate::scheduling::{generate_instance, InstanceClass, SchedulingInstance, Task};

    fn knapsack_instance() -> OptInstance {
        OptInstance::knapsack(
            "toy",
            KnapsackData {
                weights: vec![5, 4, 3],
                capacity: 7,
            },
        )
        .unwrap()
    }

    #[test]
    fn knapsack_exact_solves_in_native_sense() {
        let inst = knapsack_instance();
        let oracle = OracleHandle::new(OracleSpec::Exact);
        let sol = oracle.solve(&inst, &[10.0, 7.0, 4.0]).unwrap();
        assert_eq!(sol.assignment, vec![0.0, 1.0, 1.0]);
        assert_eq!(sol.objective, 11.0);
        assert_eq!(sol.oracle, "knap-exact");
    }

    #[test]
    fn canonical_instance_flips_objective_but_not_decision() {
        let inst = knapsack_instance();
        let coeffs = [10.0, 7.0, 4.0];
        let (canon, canon_coeffs) = canonicalize(&inst, &coeffs).unwrap();

        let oracle = OracleHandle::new(OracleSpec::Exact);
        let native = oracle.solve(&inst, &coeffs).unwrap();
        let canonical = oracle.solve(&canon, &canon_coeffs).unwrap();
        assert_eq!(native.assignment, canonical.assignment);
        assert_eq!(canonical.objective, -native.objective);
    }

    #[test]
    fn regret_is_zero_under_positive_scaling() {
        let inst = knapsack_instance();
        let oracle = OracleHandle::new(OracleSpec::Exact);
        let truth = [10.0, 7.0, 4.0];
        let scaled: Vec<f64> = truth.iter().map(|v| 2.5 * v).collect();
        assert_eq!(regret(&inst, &truth, &scaled, &oracle).unwrap(), 0.0);
    }

    #[test]
    fn regret_counts_objective_loss_of_the_wrong_decision() {
        let inst = knapsack_instance();
        let oracle = OracleHandle::new(OracleSpec::Exact);
        let truth = [10.0, 7.0, 4.0];
        // These predictions pick item 0 alone (value 10) over the true
        // best pair worth 11.
        let off = [10.0, 1.0, 1.0];
        let r = regret(&inst, &truth, &off, &oracle).unwrap();
        assert!((r - 1.0).abs() < 1e-9, "regret {r}");
    }

    #[test]
    fn greedy_regret_can_go_negative_and_is_not_clamped() {
        // Greedy misses the optimum under the true values but finds it
        // under these predictions, so the "regret" of predicting is
        // negative: the prediction accidentally helps.
        let inst = OptInstance::knapsack(
            "greedy-trap",
            KnapsackData {
                weights: vec![3, 2, 2],
                capacity: 4,
            },
        )
        .unwrap();
        let oracle = OracleHandle::new(OracleSpec::Greedy);
        let truth = [7.0, 4.0, 4.0];
        let pred = [1.0, 4.0, 4.0];
        let r = regret(&inst, &truth, &pred, &oracle).unwrap();
        assert!(r < 0.0, "expected negative greedy regret, got {r}");
    }

    #[test]
    fn scheduling_relaxation_reuses_its_basis_across_days() {
        let sched = generate_instance(InstanceClass::Easy10, 1).unwrap();
        let inst = OptInstance::scheduling("day-0", sched).unwrap();
        let day1 = inst.share("day-1");

        let oracle = OracleHandle::new(OracleSpec::Relaxation);
        let n = inst.coeff_len();
        let prices0: Vec<f64> = (0..n).map(|i| 10.0 + (i as f64 * 0.7).sin() * 5.0).collect();
        let prices1: Vec<f64> = (0..n).map(|i| 11.0 + (i as f64 * 0.9).cos() * 5.0).collect();

        let a = oracle.solve(&inst, &prices0).unwrap();
        let b = oracle.solve(&day1, &prices1).unwrap();
        assert!(oracle.stats().warm_solves >= 1, "second solve should be warm");

        // A cold handle must agree on both objectives.
        let cold = OracleHandle::with_policy(OracleSpec::Relaxation, WarmstartPolicy::cold());
        let a_cold = cold.solve(&inst, &prices0).unwrap();
        let b_cold = cold.solve(&day1, &prices1).unwrap();
        assert!((a.objective - a_cold.objective).abs() < 1e-6);
        assert!((b.objective - b_cold.objective).abs() < 1e-6);
    }

    #[test]
    fn scheduling_solutions_live_in_price_space() {
        let sched = SchedulingInstance {
            machine_count: 1,
            capacity: 1,
            horizon: 3,
            slots_per_price: 1,
            tasks: vec![
                Task {
                    duration: 1,
                    earliest_start: 0,
                    latest_end: 3,
                    resource: 1,
                    power: 2.0,
                },
                Task {
                    duration: 1,
                    earliest_start: 0,
                    latest_end: 3,
                    resource: 1,
                    power: 1.0,
                },
            ],
        };
        let inst = OptInstance::scheduling("tiny", sched).unwrap();
        let oracle = OracleHandle::new(OracleSpec::Exact);
        let prices = [3.0, 1.0, 2.0];
        let sol = oracle.solve(&inst, &prices).unwrap();
        assert_eq!(sol.assignment.len(), 3);
        assert!((dot(&prices, &sol.assignment) - sol.objective).abs() < 1e-12);
        // Heavier task takes the cheap slot: usage (0, 2, 1) costs 4.
        assert_eq!(sol.assignment, vec![0.0, 2.0, 1.0]);
        assert!(sol.raw.is_some());
    }

    #[test]
    fn scheduling_exact_seeds_from_its_pool() {
        let sched = generate_instance(InstanceClass::Easy10, 2).unwrap();
        let inst = OptInstance::scheduling("day-0", sched).unwrap();
        let oracle = OracleHandle::new(OracleSpec::Exact);
        let n = inst.coeff_len();
        let prices: Vec<f64> = (0..n).map(|i| 10.0 + (i % 5) as f64).collect();

        let first = oracle.solve(&inst, &prices).unwrap();
        let before = oracle.stats().warm_solves;
        let second = oracle.solve(&inst.share("day-1"), &prices).unwrap();
        assert_eq!(first.objective, second.objective);
        assert!(oracle.stats().warm_solves > before);
    }

    #[test]
    fn greedy_rejects_scheduling() {
        let sched = generate_instance(InstanceClass::Easy10, 1).unwrap();
        let inst = OptInstance::scheduling("day", sched).unwrap();
        let oracle = OracleHandle::new(OracleSpec::Greedy);
        let prices = vec![1.0; inst.coeff_len()];
        match oracle.solve(&inst, &prices) {
            Err(Error::OracleUnsupported { .. }) => {}
            other => panic!("expected unsupported, got {other:?}"),
        }
    }

    #[test]
    fn incumbent_hint_feeds_branch_and_bound() {
        let inst = knapsack_instance();
        let oracle = OracleHandle::new(OracleSpec::MipGap(0.0));
        let truth = [10.0, 7.0, 4.0];
        let known = SolutionVector::new(vec![0.0, 1.0, 1.0], 11.0, "knap-exact");
        let sol = oracle
            .solve_with(
                &inst,
                &truth,
                SolveHints {
                    incumbent: Some(&known),
                    objective_bound: None,
                },
            )
            .unwrap();
        assert_eq!(sol.objective, 11.0);
        assert_eq!(sol.assignment, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn oracle_specs_parse_from_strings() {
        assert_eq!("exact".parse::<OracleSpec>().unwrap(), OracleSpec::Exact);
        assert_eq!("greedy".parse::<OracleSpec>().unwrap(), OracleSpec::Greedy);
        assert_eq!(
            "relax".parse::<OracleSpec>().unwrap(),
            OracleSpec::Relaxation
        );
        assert_eq!(
            "mip:0.05".parse::<OracleSpec>().unwrap(),
            OracleSpec::MipGap(0.05)
        );
        assert!("mip:-1".parse::<OracleSpec>().is_err());
        assert!("cplex".parse::<OracleSpec>().is_err());
    }
}
