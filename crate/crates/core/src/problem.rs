use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::knapsack::KnapsackData;
use crate::scheduling::SchedulingInstance;
use crate::simplex::LpProblem;

/// Optimization direction of an instance's native objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        }
    }
}

/// Problem family an instance belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Knapsack,
    Scheduling,
    Lp,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Knapsack => "knap",
            Family::Scheduling => "sched",
            Family::Lp => "lp",
        }
    }
}

/// Constraint content of an instance, everything except the objective.
#[derive(Debug)]
pub enum ConstraintData {
    Knapsack(KnapsackData),
    Scheduling(SchedulingInstance),
    Lp(LpProblem),
}

/// Shared constraint structure. Many instances (one per day of prices, say)
/// can point at the same structure, which lets solver state such as a simplex
/// basis or a solution pool carry over between them.
#[derive(Debug)]
pub struct Structure {
    key: u64,
    pub data: ConstraintData,
}

static NEXT_STRUCTURE_KEY: AtomicU64 = AtomicU64::new(1);

impl Structure {
    fn new(data: ConstraintData) -> Self {
        Structure {
            key: NEXT_STRUCTURE_KEY.fetch_add(1, Ordering::Relaxed),
            data,
        }
    }

    /// Identity of this structure, unique per process.
    pub fn key(&self) -> u64 {
        self.key
    }
}

/// A single optimization instance: an objective coefficient slot (filled in
/// at solve time) over a fixed constraint structure.
#[derive(Clone, Debug)]
pub struct OptInstance {
    pub id: String,
    sense: Sense,
    coeff_len: usize,
    structure: Arc<Structure>,
}

impl OptInstance {
    pub fn knapsack(id: impl Into<String>, data: KnapsackData) -> Result<Self> {
        let id = id.into();
        data.validate().map_err(|e| Error::invalid_instance(&id, e))?;
        let coeff_len = data.weights.len();
        Ok(OptInstance {
            id,
            sense: Sense::Maximize,
            coeff_len,
            structure: Arc::new(Structure::new(ConstraintData::Knapsack(data))),
        })
    }

    pub fn scheduling(id: impl Into<String>, inst: SchedulingInstance) -> Result<Self> {
        let id = id.into();
        inst.validate().map_err(|e| Error::invalid_instance(&id, e))?;
        let coeff_len = inst.price_count();
        Ok(OptInstance {
            id,
            sense: Sense::Minimize,
            coeff_len,
            structure: Arc::new(Structure::new(ConstraintData::Scheduling(inst))),
        })
    }

    pub fn lp(id: impl Into<String>, problem: LpProblem) -> Result<Self> {
        let id = id.into();
        problem
            .validate()
            .map_err(|e| Error::invalid_instance(&id, e.to_string()))?;
        let coeff_len = problem.bounds.len();
        Ok(OptInstance {
            id,
            sense: Sense::Minimize,
            coeff_len,
            structure: Arc::new(Structure::new(ConstraintData::Lp(problem))),
        })
    }

    /// New instance over the same structure, typically one per day of
    /// coefficients. Sharing keeps warmstart state applicable across days.
    pub fn share(&self, id: impl Into<String>) -> Self {
        OptInstance {
            id: id.into(),
            sense: self.sense,
            coeff_len: self.coeff_len,
            structure: Arc::clone(&self.structure),
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn coeff_len(&self) -> usize {
        self.coeff_len
    }

    pub fn family(&self) -> Family {
        match self.structure.data {
            ConstraintData::Knapsack(_) => Family::Knapsack,
            ConstraintData::Scheduling(_) => Family::Scheduling,
            ConstraintData::Lp(_) => Family::Lp,
        }
    }

    pub fn data(&self) -> &ConstraintData {
        &self.structure.data
    }

    pub fn structure_key(&self) -> u64 {
        self.structure.key
    }

    /// Same instance re-tagged as a minimization problem.
    pub fn canonical(&self) -> Self {
        let mut out = self.clone();
        out.sense = Sense::Minimize;
        out
    }

    /// Check that `coeffs` fits this instance's objective slot.
    pub fn check_coeffs(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.coeff_len {
            return Err(Error::DimensionMismatch {
                expected: self.coeff_len,
                got: coeffs.len(),
            });
        }
        Ok(())
    }
}

/// Rewrite an (instance, coefficients) pair in minimize sense. Maximization
/// flips coefficient signs; minimization passes through. Idempotent.
pub fn canonicalize(instance: &OptInstance, coeffs: &[f64]) -> Result<(OptInstance, Vec<f64>)> {
    instance.check_coeffs(coeffs)?;
    let canonical_coeffs = match instance.sense {
        Sense::Minimize => coeffs.to_vec(),
        Sense::Maximize => coeffs.iter().map(|c| -c).collect(),
    };
    Ok((instance.canonical(), canonical_coeffs))
}

/// A solution in the instance's coefficient space: `objective` always equals
/// `dot(coeffs, assignment)` under the coefficients the oracle was given.
#[derive(Clone, Debug)]
pub struct SolutionVector {
    /// Decision vector, same length as the instance's coefficients. For
    /// scheduling this is the per-price-period energy usage implied by the
    /// raw schedule, so the inner product with prices is the energy cost.
    pub assignment: Vec<f64>,
    /// Objective value in the instance's native sense.
    pub objective: f64,
    /// Descriptor of the oracle that produced this solution.
    pub oracle: String,
    /// Wall time the solve took.
    pub solve_seconds: f64,
    /// Full variable vector for families whose decision space is wider than
    /// the coefficient space. Used to seed later solves.
    pub raw: Option<Arc<Vec<f64>>>,
}

impl SolutionVector {
    pub fn new(assignment: Vec<f64>, objective: f64, oracle: impl Into<String>) -> Self {
        SolutionVector {
            assignment,
            objective,
            oracle: oracle.into(),
            solve_seconds: 0.0,
            raw: None,
        }
    }
}

/// Inner product of two equal-length vectors.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_knapsack() -> OptInstance {
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
    fn canonicalize_flips_max_and_keeps_min() {
        let inst = toy_knapsack();
        let coeffs = vec![10.0, 7.0, 4.0];
        let (canon, c) = canonicalize(&inst, &coeffs).unwrap();
        assert_eq!(canon.sense(), Sense::Minimize);
        assert_eq!(c, vec![-10.0, -7.0, -4.0]);

        let (canon2, c2) = canonicalize(&canon, &c).unwrap();
        assert_eq!(canon2.sense(), Sense::Minimize);
        assert_eq!(c2, c, "second application must be identity");
    }

    #[test]
    fn canonicalize_rejects_wrong_length() {
        let inst = toy_knapsack();
        assert!(canonicalize(&inst, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn shared_instances_keep_one_structure() {
        let a = toy_knapsack();
        let b = a.share("day-2");
        assert_eq!(a.structure_key(), b.structure_key());
        assert_eq!(b.id, "day-2");

        let c = toy_knapsack();
        assert_ne!(a.structure_key(), c.structure_key());
    }

    #[test]
    fn dot_matches_manual_sum() {
        assert_eq!(dot(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 32.0);
        assert_eq!(dot(&[], &[]), 0.0);
    }
}
