//! Training regimes over day batches. All three share one loop: predict a
//! day's minimize-sense coefficients, form a coefficient-space gradient,
//! chain it onto the linear model, and record a curve point per epoch.
//!
//! `mse` fits the targets and never touches a solver. `mse-r` fits the
//! targets but selects its epoch (and, in the grid variant, its
//! hyperparameters) by validation regret, so its solver bill is the
//! validation evaluation. `spo` descends the regret surrogate directly:
//! the gradient of a day is v*(theta) - v*(2 theta_hat - theta), which
//! costs one oracle solve per day on top of a one-time solve per day for
//! the true solutions.
//!
//! Curve columns: `train_loss` is always mean squared error on the
//! training split, whatever the regime optimizes, and `solver_s` counts
//! only the seconds the regime needed to produce its model.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Prepared;
use crate::error::{Error, Result};
use crate::evaluation::{mean_mse, CurvePoint, LearningCurve, RegretEvaluator};
use crate::model::{LinearModel, OptimizerState};
use crate::oracle::{OracleHandle, OracleSpec, SolveHints, WarmstartPolicy};
use crate::problem::{canonicalize, dot, OptInstance, SolutionVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Mse,
    MseR,
    Spo,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Mse => "mse",
            Regime::MseR => "mse-r",
            Regime::Spo => "spo",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Regime::Mse),
            "mse-r" => Ok(Regime::MseR),
            "spo" => Ok(Regime::Spo),
            other => Err(Error::Config(format!(
                "unknown regime `{other}`, expected mse, mse-r, or spo"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Step size for the regret-surrogate phase; falls back to
    /// `learning_rate`. Subgradients scale with the decision vector, so
    /// problems with large assignments (scheduling usage) want a much
    /// smaller step than their squared-error phase.
    pub spo_learning_rate: Option<f64>,
    pub momentum: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Leading epochs that use squared-error updates before the regret
    /// surrogate takes over. Counts toward `epochs`; ignored outside the
    /// spo regime.
    pub pretrain_epochs: usize,
    /// Stop training once the regime's attributed solver seconds reach
    /// this. Checked before each day's solves and at epoch boundaries, so
    /// the overshoot is at most one day's worth.
    pub solver_budget_seconds: Option<f64>,
    /// Also track test regret at every curve point.
    pub track_test: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 0.01,
            spo_learning_rate: None,
            momentum: 0.0,
            seed: 0,
            shuffle: true,
            pretrain_epochs: 6,
            solver_budget_seconds: None,
            track_test: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub regime: Regime,
    /// The model the regime delivers: the final state for mse and spo, the
    /// best validation-regret epoch for mse-r.
    pub model: LinearModel,
    pub optimizer: OptimizerState,
    pub best_model: LinearModel,
    pub best_epoch: usize,
    pub best_val_regret: f64,
    pub curve: LearningCurve,
    pub solver_seconds: f64,
    /// Oracle calls made by the training loop itself (zero outside the spo
    /// regime); cache misses and surrogate solves both count.
    pub train_solves: usize,
    pub budget_exhausted: bool,
}

/// True solutions keyed by instance id, solved on first request.
#[derive(Debug, Default)]
pub struct TrueSolutionCache {
    map: HashMap<String, SolutionVector>,
}

impl TrueSolutionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get_or_solve(
        &mut self,
        oracle: &OracleHandle,
        instance: &OptInstance,
        coeffs: &[f64],
    ) -> Result<SolutionVector> {
        if let Some(hit) = self.map.get(&instance.id) {
            return Ok(hit.clone());
        }
        let solved = oracle.solve(instance, coeffs)?;
        self.map.insert(instance.id.clone(), solved.clone());
        Ok(solved)
    }
}

/// One subgradient of the regret surrogate at `predicted_coeffs`, all in
/// minimize sense: solve under `2 predicted - true` seeded with the known
/// true solution, and return the difference of the two assignments.
pub fn spo_subgradient(
    oracle: &OracleHandle,
    instance: &OptInstance,
    true_coeffs: &[f64],
    predicted_coeffs: &[f64],
    v_true: &SolutionVector,
) -> Result<Vec<f64>> {
    let spo_coeffs: Vec<f64> = predicted_coeffs
        .iter()
        .zip(true_coeffs)
        .map(|(p, t)| 2.0 * p - t)
        .collect();
    let hints = SolveHints {
        incumbent: Some(v_true),
        objective_bound: Some(dot(&spo_coeffs, &v_true.assignment)),
    };
    let v_spo = oracle.solve_with(instance, &spo_coeffs, hints)?;
    Ok(v_true
        .assignment
        .iter()
        .zip(&v_spo.assignment)
        .map(|(t, s)| t - s)
        .collect())
}

fn mse_coeff_grad(preds: &[f64], targets: &[f64]) -> Vec<f64> {
    let scale = 2.0 / preds.len() as f64;
    preds
        .iter()
        .zip(targets)
        .map(|(p, y)| scale * (p - y))
        .collect()
}

struct SpoParts {
    oracle: OracleHandle,
    /// Canonical instance and targets per training day, index-aligned
    /// with `Prepared::train`.
    canon: Vec<(OptInstance, Vec<f64>)>,
    cache: TrueSolutionCache,
    pretrain_epochs: usize,
}

fn run_loop(
    regime: Regime,
    data: &Prepared,
    config: &TrainConfig,
    evaluator: &RegretEvaluator,
    mut spo: Option<SpoParts>,
) -> Result<TrainOutcome> {
    if data.train.is_empty() {
        return Err(Error::Data("no training days".into()));
    }
    let started = Instant::now();
    let mut model = LinearModel::zeros(data.n_features);
    let mut opt = OptimizerState::new(config.learning_rate, config.momentum, data.n_features);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    let canon_targets: Vec<Vec<f64>> = data
        .train
        .iter()
        .map(|day| canonicalize(&day.instance, &day.targets).map(|(_, t)| t))
        .collect::<Result<_>>()?;

    let mut meta = vec![
        ("regime".to_string(), regime.as_str().to_string()),
        ("learning_rate".to_string(), format!("{}", config.learning_rate)),
        ("momentum".to_string(), format!("{}", config.momentum)),
        ("seed".to_string(), format!("{}", config.seed)),
    ];
    if let Some(lr) = config.spo_learning_rate {
        meta.push(("spo_learning_rate".to_string(), format!("{lr}")));
    }
    if let Some(parts) = &spo {
        meta.push((
            "oracle".to_string(),
            parts.oracle.descriptor_for(&data.train[0].instance),
        ));
    }
    let mut curve = LearningCurve::new(meta);

    let mut attributed = 0.0f64;
    let mut budget_exhausted = false;
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_model = model.clone();

    let record = |epoch: usize,
                      model: &LinearModel,
                      attributed: &mut f64,
                      curve: &mut LearningCurve,
                      spo: &Option<SpoParts>|
     -> Result<f64> {
        let train_loss = mean_mse(model, &data.train);
        let before = evaluator.solver_seconds();
        let val_regret = evaluator.mean_regret(model, &data.validation)?;
        if regime == Regime::MseR {
            *attributed += evaluator.solver_seconds() - before;
        }
        if let Some(parts) = spo {
            *attributed = parts.oracle.stats().seconds;
        }
        let test_regret = if config.track_test {
            evaluator.mean_regret(model, &data.test)?
        } else {
            f64::NAN
        };
        curve.points.push(CurvePoint {
            epoch,
            solver_s: *attributed,
            wall_s: started.elapsed().as_secs_f64(),
            train_loss,
            val_regret,
            test_regret,
        });
        Ok(val_regret)
    };

    let val0 = record(0, &model, &mut attributed, &mut curve, &spo)?;
    if val0 < best_val {
        best_val = val0;
        best_epoch = 0;
    }

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let spo_active = spo
            .as_ref()
            .is_some_and(|parts| epoch > parts.pretrain_epochs);
        opt.learning_rate = if spo_active {
            config.spo_learning_rate.unwrap_or(config.learning_rate)
        } else {
            config.learning_rate
        };

        for &i in &order {
            let day = &data.train[i];
            let preds = model.predict_day(&day.features);
            let coeff_grad = if spo_active {
                let parts = spo.as_mut().expect("spo parts present when active");
                if let Some(budget) = config.solver_budget_seconds {
                    if parts.oracle.stats().seconds >= budget {
                        budget_exhausted = true;
                        break;
                    }
                }
                let (instance, targets) = &parts.canon[i];
                let v_true = parts.cache.get_or_solve(&parts.oracle, instance, targets)?;
                spo_subgradient(&parts.oracle, instance, targets, &preds, &v_true)?
            } else {
                mse_coeff_grad(&preds, &canon_targets[i])
            };
            let (grad_w, grad_b) = LinearModel::chain_gradient(&day.features, &coeff_grad);
            model.apply_gradient(&mut opt, &grad_w, grad_b);
        }

        let val = record(epoch, &model, &mut attributed, &mut curve, &spo)?;
        if val < best_val {
            best_val = val;
            best_epoch = epoch;
            best_model = model.clone();
        }
        if budget_exhausted {
            break;
        }
        if let Some(budget) = config.solver_budget_seconds {
            if attributed >= budget && epoch < config.epochs {
                budget_exhausted = true;
                break;
            }
        }
    }

    let train_solves = spo
        .as_ref()
        .map_or(0, |parts| parts.oracle.stats().solves as usize);
    Ok(TrainOutcome {
        regime,
        model,
        optimizer: opt,
        best_model,
        best_epoch,
        best_val_regret: best_val,
        curve,
        solver_seconds: attributed,
        train_solves,
        budget_exhausted,
    })
}

/// Two-stage baseline: fit the targets, keep the final model. Validation
/// and test regret on the curve are reporting only, so no solver time is
/// attributed.
pub fn train_mse(
    data: &Prepared,
    config: &TrainConfig,
    evaluator: &RegretEvaluator,
) -> Result<TrainOutcome> {
    run_loop(Regime::Mse, data, config, evaluator, None)
}

/// Two-stage fit with regret-based epoch selection: same updates as
/// [`train_mse`], but the delivered model is the epoch with the lowest
/// validation regret, and the validation solves are billed as solver time.
pub fn train_mse_r(
    data: &Prepared,
    config: &TrainConfig,
    evaluator: &RegretEvaluator,
) -> Result<TrainOutcome> {
    let mut outcome = run_loop(Regime::MseR, data, config, evaluator, None)?;
    outcome.model = outcome.best_model.clone();
    Ok(outcome)
}

#[derive(Clone, Debug)]
pub struct HyperGrid {
    pub learning_rates: Vec<f64>,
    pub momenta: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            learning_rates: vec![1e-4, 1e-3, 1e-2, 1e-1],
            momenta: vec![0.0, 0.5, 0.9],
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GridCell {
    pub learning_rate: f64,
    pub momentum: f64,
    pub best_epoch: usize,
    pub best_val_regret: f64,
}

/// [`train_mse_r`] over a hyperparameter grid, keeping the combination
/// with the lowest validation regret. Ties go to the earlier grid cell.
pub fn train_mse_r_grid(
    data: &Prepared,
    base: &TrainConfig,
    grid: &HyperGrid,
    evaluator: &RegretEvaluator,
) -> Result<(TrainOutcome, Vec<GridCell>)> {
    if grid.learning_rates.is_empty() || grid.momenta.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    let mut cells = Vec::with_capacity(grid.learning_rates.len() * grid.momenta.len());
    let mut winner: Option<TrainOutcome> = None;
    for &lr in &grid.learning_rates {
        for &momentum in &grid.momenta {
            let config = TrainConfig {
                learning_rate: lr,
                momentum,
                ..*base
            };
            let outcome = train_mse_r(data, &config, evaluator)?;
            cells.push(GridCell {
                learning_rate: lr,
                momentum,
                best_epoch: outcome.best_epoch,
                best_val_regret: outcome.best_val_regret,
            });
            let better = winner
                .as_ref()
                .is_none_or(|w| outcome.best_val_regret < w.best_val_regret);
            if better {
                winner = Some(outcome);
            }
        }
    }
    Ok((winner.expect("grid has at least one cell"), cells))
}

/// Regret-surrogate training. The attributed solver time covers the true
/// solutions (solved once each, on first use) and the per-day surrogate
/// solves; the oracle's warmstart policy decides how much the true
/// solutions help those solves.
pub fn train_spo(
    data: &Prepared,
    config: &TrainConfig,
    spec: OracleSpec,
    policy: WarmstartPolicy,
    evaluator: &RegretEvaluator,
) -> Result<TrainOutcome> {
    let canon = data
        .train
        .iter()
        .map(|day| canonicalize(&day.instance, &day.targets))
        .collect::<Result<Vec<_>>>()?;
    let parts = SpoParts {
        oracle: OracleHandle::with_policy(spec, policy),
        canon,
        cache: TrueSolutionCache::new(),
        pretrain_epochs: config.pretrain_epochs,
    };
    run_loop(Regime::Spo, data, config, evaluator, Some(parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{prepare, synthesize, to_weighted_knapsack, DayData, KnapsackTransform, SplitSpec, SynthConfig};
    use crate::knapsack::KnapsackData;
    use crate::model::Standardizer;
    use crate::problem::Sense;

    fn worked_example_day() -> DayData {
        let instance = OptInstance::knapsack(
            "day-0",
            KnapsackData {
                weights: vec![5, 4, 3],
                capacity: 7,
            },
        )
        .unwrap();
        DayData {
            instance,
            features: vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            targets: vec![10.0, 7.0, 4.0],
        }
    }

    fn single_day_prepared() -> Prepared {
        let day = worked_example_day();
        Prepared {
            train: vec![day.clone()],
            validation: vec![day.clone()],
            test: vec![day],
            n_features: 3,
            standardizer: Standardizer::identity(3),
        }
    }

    fn small_knapsack_prepared(noise: f64, seed: u64) -> Prepared {
        let data = synthesize(&SynthConfig {
            days: 30,
            slots_per_day: 8,
            n_features: 6,
            noise_scale: noise,
            seed,
        })
        .unwrap();
        let (priced, template) = to_weighted_knapsack(
            &data,
            &KnapsackTransform {
                value_noise_sd: 0.0,
                seed: seed + 1,
                ..KnapsackTransform::default()
            },
        )
        .unwrap();
        prepare(&priced, &template, &SplitSpec::default(), true).unwrap()
    }

    #[test]
    fn subgradient_matches_the_worked_example() {
        let day = worked_example_day();
        let (canon, true_coeffs) = canonicalize(&day.instance, &day.targets).unwrap();
        assert_eq!(canon.sense(), Sense::Minimize);
        assert_eq!(true_coeffs, vec![-10.0, -7.0, -4.0]);

        let oracle = OracleHandle::new(OracleSpec::Exact);
        let v_true = oracle.solve(&canon, &true_coeffs).unwrap();
        assert_eq!(v_true.assignment, vec![0.0, 1.0, 1.0]);

        let predicted = vec![-10.0, -2.0, -4.0];
        let g = spo_subgradient(&oracle, &canon, &true_coeffs, &predicted, &v_true).unwrap();
        assert_eq!(g, vec![-1.0, 1.0, 1.0]);

        // At the truth the surrogate solve recovers the true solution and
        // the subgradient vanishes.
        let g0 = spo_subgradient(&oracle, &canon, &true_coeffs, &true_coeffs, &v_true).unwrap();
        assert_eq!(g0, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn mse_gradient_agrees_with_central_differences() {
        let day = worked_example_day();
        let features = vec![
            vec![0.3, -1.2, 0.7],
            vec![1.1, 0.4, -0.5],
            vec![-0.8, 0.9, 0.2],
        ];
        let targets = vec![2.0, -1.0, 0.5];
        let model = LinearModel {
            weights: vec![0.25, -0.5, 0.75],
            bias: 0.125,
        };
        let _ = day;

        let loss = |m: &LinearModel| -> f64 {
            let preds = m.predict_day(&features);
            preds
                .iter()
                .zip(&targets)
                .map(|(p, y)| (p - y) * (p - y))
                .sum::<f64>()
                / targets.len() as f64
        };

        let preds = model.predict_day(&features);
        let (grad_w, grad_b) = LinearModel::chain_gradient(&features, &mse_coeff_grad(&preds, &targets));

        let h = 1e-6;
        for j in 0..3 {
            let mut up = model.clone();
            up.weights[j] += h;
            let mut down = model.clone();
            down.weights[j] -= h;
            let numeric = (loss(&up) - loss(&down)) / (2.0 * h);
            assert!(
                (numeric - grad_w[j]).abs() < 1e-6 * numeric.abs().max(1.0),
                "weight {j}: numeric {numeric}, analytic {}",
                grad_w[j]
            );
        }
        let mut up = model.clone();
        up.bias += h;
        let mut down = model.clone();
        down.bias -= h;
        let numeric = (loss(&up) - loss(&down)) / (2.0 * h);
        assert!((numeric - grad_b).abs() < 1e-6 * numeric.abs().max(1.0));
    }

    #[test]
    fn mse_training_reduces_loss_and_is_deterministic() {
        let prepared = small_knapsack_prepared(0.0, 5);
        let config = TrainConfig {
            epochs: 12,
            learning_rate: 0.002,
            momentum: 0.5,
            seed: 3,
            pretrain_epochs: 0,
            ..TrainConfig::default()
        };
        let evaluator = RegretEvaluator::new(OracleSpec::Exact);
        let a = train_mse(&prepared, &config, &evaluator).unwrap();
        assert_eq!(a.curve.points.len(), 13);
        let first = a.curve.points.first().unwrap().train_loss;
        let last = a.curve.points.last().unwrap().train_loss;
        assert!(
            last < first * 0.1,
            "loss barely moved: {first} -> {last}"
        );
        assert_eq!(a.solver_seconds, 0.0);
        assert!(!a.budget_exhausted);

        let b = train_mse(&prepared, &config, &RegretEvaluator::new(OracleSpec::Exact)).unwrap();
        assert_eq!(a.model, b.model);
        assert!(a.curve.matches_ignoring_time(&b.curve));
    }

    #[test]
    fn mse_r_delivers_the_best_validation_epoch() {
        let prepared = small_knapsack_prepared(2.0, 8);
        let config = TrainConfig {
            epochs: 6,
            learning_rate: 0.003,
            seed: 1,
            pretrain_epochs: 0,
            ..TrainConfig::default()
        };
        let evaluator = RegretEvaluator::new(OracleSpec::Exact);
        let outcome = train_mse_r(&prepared, &config, &evaluator).unwrap();
        assert_eq!(outcome.model, outcome.best_model);
        let min_val = outcome
            .curve
            .points
            .iter()
            .map(|p| p.val_regret)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(outcome.best_val_regret, min_val);
        assert_eq!(
            outcome.curve.points[outcome.best_epoch].val_regret,
            min_val
        );
        assert!(outcome.solver_seconds > 0.0);
    }

    #[test]
    fn grid_search_prefers_the_lowest_validation_regret() {
        let prepared = small_knapsack_prepared(1.0, 13);
        let base = TrainConfig {
            epochs: 4,
            seed: 2,
            pretrain_epochs: 0,
            track_test: false,
            ..TrainConfig::default()
        };
        let grid = HyperGrid {
            learning_rates: vec![1e-5, 3e-3],
            momenta: vec![0.0, 0.9],
        };
        let evaluator = RegretEvaluator::new(OracleSpec::Exact);
        let (winner, cells) = train_mse_r_grid(&prepared, &base, &grid, &evaluator).unwrap();
        assert_eq!(cells.len(), 4);
        let min_cell = cells
            .iter()
            .map(|c| c.best_val_regret)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(winner.best_val_regret, min_cell);
        let lr_used: f64 = winner.curve.meta.iter().find(|(k, _)| k == "learning_rate").unwrap().1.parse().unwrap();
        assert!(cells.iter().any(|c| c.learning_rate == lr_used && c.best_val_regret == min_cell));
    }

    #[test]
    fn spo_drives_the_worked_example_to_zero_regret() {
        let prepared = single_day_prepared();
        let config = TrainConfig {
            epochs: 20,
            learning_rate: 0.05,
            momentum: 0.0,
            seed: 0,
            shuffle: false,
            pretrain_epochs: 0,
            ..TrainConfig::default()
        };
        let evaluator = RegretEvaluator::new(OracleSpec::Exact);
        let outcome = train_spo(
            &prepared,
            &config,
            OracleSpec::Exact,
            WarmstartPolicy::default(),
            &evaluator,
        )
        .unwrap();
        assert_eq!(outcome.curve.points.last().unwrap().val_regret, 0.0);
        assert!(outcome.solver_seconds > 0.0);
        assert!(!outcome.budget_exhausted);

        let again = train_spo(
            &prepared,
            &config,
            OracleSpec::Exact,
            WarmstartPolicy::default(),
            &RegretEvaluator::new(OracleSpec::Exact),
        )
        .unwrap();
        assert_eq!(outcome.model, again.model);
        assert!(outcome.curve.matches_ignoring_time(&again.curve));
    }

    #[test]
    fn zero_budget_stops_spo_before_any_surrogate_solve() {
        let prepared = single_day_prepared();
        let config = TrainConfig {
            epochs: 10,
            pretrain_epochs: 0,
            solver_budget_seconds: Some(0.0),
            ..TrainConfig::default()
        };
        let evaluator = RegretEvaluator::new(OracleSpec::Exact);
        let outcome = train_spo(
            &prepared,
            &config,
            OracleSpec::Exact,
            WarmstartPolicy::default(),
            &evaluator,
        )
        .unwrap();
        assert!(outcome.budget_exhausted);
        assert_eq!(outcome.solver_seconds, 0.0);
        assert_eq!(outcome.curve.points.len(), 2);
    }

    #[test]
    fn pretraining_epochs_use_squared_error_updates() {
        let prepared = single_day_prepared();
        let config = TrainConfig {
            epochs: 3,
            learning_rate: 0.001,
            seed: 0,
            shuffle: false,
            pretrain_epochs: 3,
            ..TrainConfig::default()
        };
        let evaluator = RegretEvaluator::new(OracleSpec::Exact);
        let spo = train_spo(
            &prepared,
            &config,
            OracleSpec::Exact,
            WarmstartPolicy::default(),
            &evaluator,
        )
        .unwrap();
        let mse = train_mse(&prepared, &config, &RegretEvaluator::new(OracleSpec::Exact)).unwrap();
        assert_eq!(spo.model, mse.model);
        assert_eq!(spo.solver_seconds, 0.0);
    }
}
