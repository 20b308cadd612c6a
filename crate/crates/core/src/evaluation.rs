//! Measurement: learning curves and their CSV form, regret evaluation over
//! prepared splits with cached true solutions, and small aggregation
//! helpers for repeated runs.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Mutex;

use crate::data::DayData;
use crate::error::{Error, Result};
use crate::model::LinearModel;
use crate::oracle::{regret_of, OracleHandle, OracleSpec, WarmstartPolicy};
use crate::problem::{Sense, SolutionVector};

/// One curve row. `solver_s` and `wall_s` are cumulative seconds; the
/// losses describe the model as of `epoch` completed epochs, so epoch 0 is
/// the untrained model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub epoch: usize,
    pub solver_s: f64,
    pub wall_s: f64,
    pub train_loss: f64,
    pub val_regret: f64,
    pub test_regret: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearningCurve {
    /// Free-form `key value` pairs written as `#` comment lines.
    pub meta: Vec<(String, String)>,
    pub points: Vec<CurvePoint>,
}

const CURVE_HEADER: &str = "epoch,solver_s,wall_s,train_loss,val_regret,test_regret";

impl LearningCurve {
    pub fn new(meta: Vec<(String, String)>) -> Self {
        LearningCurve {
            meta,
            points: Vec::new(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.meta {
            let _ = writeln!(out, "# {key} {value}");
        }
        out.push_str(CURVE_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.epoch, p.solver_s, p.wall_s, p.train_loss, p.val_regret, p.test_regret
            );
        }
        out
    }

    pub fn from_csv_str(text: &str, origin: &str) -> Result<Self> {
        let mut meta = Vec::new();
        let mut points = Vec::new();
        let mut saw_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# ") {
                let (key, value) = rest
                    .split_once(' ')
                    .ok_or_else(|| Error::parse(origin, lineno, "metadata needs `key value`"))?;
                meta.push((key.to_string(), value.to_string()));
                continue;
            }
            if !saw_header {
                if line != CURVE_HEADER {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("expected header `{CURVE_HEADER}`"),
                    ));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected 6 fields, found {}", fields.len()),
                ));
            }
            let epoch = fields[0]
                .parse()
                .map_err(|_| Error::parse(origin, lineno, "epoch is not an integer"))?;
            let mut nums = [0.0f64; 5];
            for (slot, field) in nums.iter_mut().zip(&fields[1..]) {
                *slot = field.parse().map_err(|_| {
                    Error::parse(origin, lineno, format!("`{field}` is not a number"))
                })?;
            }
            points.push(CurvePoint {
                epoch,
                solver_s: nums[0],
                wall_s: nums[1],
                train_loss: nums[2],
                val_regret: nums[3],
                test_regret: nums[4],
            });
        }
        if !saw_header {
            return Err(Error::Data(format!("{origin}: missing curve header")));
        }
        Ok(LearningCurve { meta, points })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_str(&text, &path.display().to_string())
    }

    /// Equality of everything except the timing columns, which depend on
    /// the machine rather than the run.
    pub fn matches_ignoring_time(&self, other: &Self) -> bool {
        self.meta == other.meta
            && self.points.len() == other.points.len()
            && self.points.iter().zip(&other.points).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_loss.to_bits() == b.train_loss.to_bits()
                    && a.val_regret.to_bits() == b.val_regret.to_bits()
                    && a.test_regret.to_bits() == b.test_regret.to_bits()
            })
    }
}

/// The (training loss, validation regret) pairs of a curve, the series a
/// two-stage fit is judged by.
pub fn mse_vs_regret_trace(curve: &LearningCurve) -> Vec<(f64, f64)> {
    curve
        .points
        .iter()
        .map(|p| (p.train_loss, p.val_regret))
        .collect()
}

/// Mean and sample standard deviation. The deviation is 0 for fewer than
/// two values.
pub fn aggregate(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (values.len() - 1) as f64).sqrt())
}

#[derive(Clone, Debug)]
pub struct SplitReport {
    pub mean_regret: f64,
    pub mean_mse: f64,
    pub per_day_regret: Vec<f64>,
}

/// Regret measurement against one oracle, with each day's true solution
/// solved once and cached under the day's instance id.
pub struct RegretEvaluator {
    handle: OracleHandle,
    truths: Mutex<HashMap<String, SolutionVector>>,
}

impl RegretEvaluator {
    pub fn new(spec: OracleSpec) -> Self {
        Self::with_policy(spec, WarmstartPolicy::default())
    }

    pub fn with_policy(spec: OracleSpec, policy: WarmstartPolicy) -> Self {
        RegretEvaluator {
            handle: OracleHandle::with_policy(spec, policy),
            truths: Mutex::new(HashMap::new()),
        }
    }

    pub fn oracle(&self) -> &OracleHandle {
        &self.handle
    }

    pub fn solver_seconds(&self) -> f64 {
        self.handle.stats().seconds
    }

    fn true_solution(&self, day: &DayData) -> Result<SolutionVector> {
        if let Some(hit) = self.truths.lock().unwrap().get(&day.instance.id) {
            return Ok(hit.clone());
        }
        let solved = self.handle.solve(&day.instance, &day.targets)?;
        self.truths
            .lock()
            .unwrap()
            .insert(day.instance.id.clone(), solved.clone());
        Ok(solved)
    }

    /// Regret of the model's decision on one day. The model predicts
    /// minimize-sense coefficients; they are mapped back to the
    /// instance's native sense before solving.
    pub fn day_regret(&self, model: &LinearModel, day: &DayData) -> Result<f64> {
        let preds = native_predictions(model, day);
        let v_pred = self.handle.solve(&day.instance, &preds)?;
        let v_true = self.true_solution(day)?;
        Ok(regret_of(
            &day.instance,
            &day.targets,
            &v_pred,
            &v_true,
            &self.handle,
        ))
    }

    pub fn mean_regret(&self, model: &LinearModel, days: &[DayData]) -> Result<f64> {
        if days.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for day in days {
            total += self.day_regret(model, day)?;
        }
        Ok(total / days.len() as f64)
    }

    pub fn evaluate(&self, model: &LinearModel, days: &[DayData]) -> Result<SplitReport> {
        let mut per_day_regret = Vec::with_capacity(days.len());
        for day in days {
            per_day_regret.push(self.day_regret(model, day)?);
        }
        let mean_regret = if per_day_regret.is_empty() {
            0.0
        } else {
            per_day_regret.iter().sum::<f64>() / per_day_regret.len() as f64
        };
        Ok(SplitReport {
            mean_regret,
            mean_mse: mean_mse(model, days),
            per_day_regret,
        })
    }
}

/// Map minimize-sense model output back to the day's native sense.
pub fn native_predictions(model: &LinearModel, day: &DayData) -> Vec<f64> {
    let mut preds = model.predict_day(&day.features);
    if day.instance.sense() == Sense::Maximize {
        for p in &mut preds {
            *p = -*p;
        }
    }
    preds
}

/// Mean squared error between predictions and targets, averaged over every
/// slot of every day. Squared error is sense-invariant, so this compares in
/// native coordinates.
pub fn mean_mse(model: &LinearModel, days: &[DayData]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for day in days {
        let preds = native_predictions(model, day);
        total += preds
            .iter()
            .zip(&day.targets)
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>();
        count += day.targets.len();
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DayData;
    use crate::knapsack::KnapsackData;
    use crate::problem::OptInstance;

    fn curve_fixture() -> LearningCurve {
        let mut curve = LearningCurve::new(vec![
            ("regime".into(), "spo".into()),
            ("config".into(), "deadbeef cafe".into()),
        ]);
        curve.points.push(CurvePoint {
            epoch: 0,
            solver_s: 0.0,
            wall_s: 0.125,
            train_loss: 10.5,
            val_regret: 3.25,
            test_regret: 3.5,
        });
        curve.points.push(CurvePoint {
            epoch: 1,
            solver_s: 1.5,
            wall_s: 2.0,
            train_loss: 8.0,
            val_regret: 2.75,
            test_regret: 3.0,
        });
        curve
    }

    fn knapsack_day() -> DayData {
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

    #[test]
    fn curve_csv_round_trips_exactly() {
        let curve = curve_fixture();
        let text = curve.to_csv_string();
        let back = LearningCurve::from_csv_str(&text, "mem").unwrap();
        assert_eq!(curve, back);
        assert_eq!(text, back.to_csv_string());
    }

    #[test]
    fn curve_parser_rejects_malformed_input() {
        assert!(LearningCurve::from_csv_str("", "mem").is_err());
        assert!(LearningCurve::from_csv_str("epoch,wrong\n", "mem").is_err());
        let bad_row = format!("{CURVE_HEADER}\n0,1,2\n");
        let err = LearningCurve::from_csv_str(&bad_row, "mem")
            .unwrap_err()
            .to_string();
        assert!(err.contains("mem:2:"), "unexpected error: {err}");
        let bad_num = format!("{CURVE_HEADER}\n0,1,2,x,4,5\n");
        assert!(LearningCurve::from_csv_str(&bad_num, "mem").is_err());
    }

    #[test]
    fn trajectory_comparison_ignores_timing_columns() {
        let a = curve_fixture();
        let mut b = curve_fixture();
        b.points[1].wall_s = 99.0;
        b.points[1].solver_s = 42.0;
        assert!(a.matches_ignoring_time(&b));
        b.points[1].val_regret += 0.0625;
        assert!(!a.matches_ignoring_time(&b));
    }

    #[test]
    fn trace_pairs_training_loss_with_validation_regret() {
        let curve = curve_fixture();
        assert_eq!(
            mse_vs_regret_trace(&curve),
            vec![(10.5, 3.25), (8.0, 2.75)]
        );
    }

    #[test]
    fn aggregate_matches_hand_computation() {
        let (mean, sd) = aggregate(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((mean - 5.0).abs() < 1e-12);
        assert!((sd - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(aggregate(&[3.0]), (3.0, 0.0));
        assert!(aggregate(&[]).0.is_nan());
    }

    #[test]
    fn perfect_predictions_have_zero_regret_and_truths_are_cached() {
        let day = knapsack_day();
        let evaluator = RegretEvaluator::new(OracleSpec::Exact);
        // Model output is minimize-sense, so recovering a maximize
        // instance's targets means predicting their negation.
        let model = LinearModel {
            weights: vec![-10.0, -7.0, -4.0],
            bias: 0.0,
        };
        let days = vec![day];
        assert_eq!(evaluator.mean_regret(&model, &days).unwrap(), 0.0);
        let after_first = evaluator.oracle().stats().solves;
        assert_eq!(after_first, 2);
        assert_eq!(evaluator.mean_regret(&model, &days).unwrap(), 0.0);
        assert_eq!(evaluator.oracle().stats().solves, after_first + 1);
    }

    #[test]
    fn biased_model_pays_the_worked_example_regret() {
        let day = knapsack_day();
        let evaluator = RegretEvaluator::new(OracleSpec::Exact);
        // Predicts native values [10, 2, 4]: picks item 0 for 10 instead
        // of items 1 and 2 for 11.
        let model = LinearModel {
            weights: vec![-10.0, -2.0, -4.0],
            bias: 0.0,
        };
        let report = evaluator.evaluate(&model, &[day]).unwrap();
        assert!((report.mean_regret - 1.0).abs() < 1e-12);
        let expected_mse = (0.0 + 25.0 + 0.0) / 3.0;
        assert!((report.mean_mse - expected_mse).abs() < 1e-12);
    }
}
