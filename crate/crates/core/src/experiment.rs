//! The experiment harness: a TOML config describes data, family, regimes,
//! oracles, and training settings; `run_experiment` trains every regime
//! across replications (in parallel, one leg per regime and seed), writes
//! learning curves, checkpoints, and per-leg plus aggregated reports under
//! the output directory, and returns the same numbers in memory.
//!
//! Replication `r` trains with seed `seed + r` in every regime, so regimes
//! are compared on matched shuffling streams over identical data.
//!
//! Environment overrides: `PREDOPT_OUT_DIR` replaces the configured output
//! directory, `PREDOPT_PARALLELISM` caps the number of worker threads.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::data::{
    ingest_csv, prepare, synthesize, to_weighted_knapsack, Dataset, KnapsackTransform, Prepared,
    SplitSpec, SynthConfig,
};
use crate::error::{Error, Result};
use crate::evaluation::aggregate;
use crate::evaluation::RegretEvaluator;
use crate::model::save_checkpoint;
use crate::oracle::{OracleSpec, WarmstartPolicy};
use crate::problem::OptInstance;
use crate::scheduling::{generate_instance, InstanceClass};
use crate::training::{
    train_mse, train_mse_r, train_mse_r_grid, train_spo, HyperGrid, Regime, TrainConfig,
};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// `knapsack` or `scheduling`.
    pub family: String,
    /// Any of `mse`, `mse-r`, `spo`.
    pub regimes: Vec<String>,
    /// Training oracle for the spo regime.
    #[serde(default = "default_oracle")]
    pub oracle: String,
    /// Oracle regret is measured against, for every regime.
    #[serde(default = "default_oracle")]
    pub eval_oracle: String,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub knapsack: KnapsackSection,
    #[serde(default)]
    pub scheduling: SchedulingSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_seed() -> u64 {
    7
}

fn default_oracle() -> String {
    "exact".into()
}

fn default_replications() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// CSV to ingest; omit to synthesize.
    pub source: Option<PathBuf>,
    pub days: usize,
    pub slots_per_day: usize,
    pub features: usize,
    pub noise_scale: f64,
    pub standardize: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: None,
            days: 300,
            slots_per_day: 48,
            features: 8,
            noise_scale: 1.0,
            standardize: true,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnapsackSection {
    pub weight_choices: Vec<u32>,
    pub value_noise_sd: f64,
    pub capacity_fraction: f64,
}

impl Default for KnapsackSection {
    fn default() -> Self {
        let t = KnapsackTransform::default();
        KnapsackSection {
            weight_choices: t.weight_choices,
            value_noise_sd: t.value_noise_sd,
            capacity_fraction: t.capacity_fraction,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulingSection {
    /// `easy10`, `easy15`, `easy20`, or `hardlike`.
    pub class: String,
}

impl Default for SchedulingSection {
    fn default() -> Self {
        SchedulingSection {
            class: "easy10".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        let s = SplitSpec::default();
        SplitSection {
            train: s.train,
            validation: s.validation,
            test: s.test,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Step size for the regret-surrogate phase; 0 reuses `learning_rate`.
    pub spo_learning_rate: f64,
    pub momentum: f64,
    pub shuffle: bool,
    pub pretrain_epochs: usize,
    /// Solver-second budget per leg; 0 disables the budget.
    pub budget_seconds: f64,
    pub track_test: bool,
    /// Run the mse-r regime as a grid search over the default
    /// hyperparameter grid instead of the single configured combination.
    pub grid: bool,
    pub warm_basis: bool,
    pub warm_incumbent: bool,
    pub bound_cut: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        let w = WarmstartPolicy::default();
        TrainSection {
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            spo_learning_rate: 0.0,
            momentum: t.momentum,
            shuffle: t.shuffle,
            pretrain_epochs: t.pretrain_epochs,
            budget_seconds: 0.0,
            track_test: t.track_test,
            grid: false,
            warm_basis: w.reuse_basis,
            warm_incumbent: w.seed_incumbent,
            bound_cut: w.bound_cut,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub write_checkpoints: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("runs"),
            write_checkpoints: true,
        }
    }
}

impl ExperimentConfig {
    pub fn regimes(&self) -> Result<Vec<Regime>> {
        if self.regimes.is_empty() {
            return Err(Error::Config("no regimes requested".into()));
        }
        self.regimes.iter().map(|s| s.parse()).collect()
    }

    pub fn training_oracle(&self) -> Result<OracleSpec> {
        self.oracle.parse()
    }

    pub fn evaluation_oracle(&self) -> Result<OracleSpec> {
        self.eval_oracle.parse()
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train: self.split.train,
            validation: self.split.validation,
            test: self.split.test,
        }
    }

    pub fn train_config(&self, replication: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            learning_rate: self.train.learning_rate,
            spo_learning_rate: (self.train.spo_learning_rate > 0.0)
                .then_some(self.train.spo_learning_rate),
            momentum: self.train.momentum,
            seed: self.seed + replication as u64,
            shuffle: self.train.shuffle,
            pretrain_epochs: self.train.pretrain_epochs,
            solver_budget_seconds: (self.train.budget_seconds > 0.0)
                .then_some(self.train.budget_seconds),
            track_test: self.train.track_test,
        }
    }

    pub fn warmstart_policy(&self) -> WarmstartPolicy {
        WarmstartPolicy {
            reuse_basis: self.train.warm_basis,
            seed_incumbent: self.train.warm_incumbent,
            bound_cut: self.train.bound_cut,
        }
    }
}

/// Short hex digest identifying a config text, stamped into every output
/// file so curves and reports can be traced back to what produced them.
pub fn config_digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(12);
    for byte in digest.iter().take(6) {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

pub fn load_config(path: &Path) -> Result<(ExperimentConfig, String)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let config: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok((config, config_digest(&text)))
}

/// Assemble the dataset and instance template the config describes and
/// prepare it for training. Returns ingest warnings alongside.
pub fn build_prepared(config: &ExperimentConfig) -> Result<(Prepared, Vec<String>)> {
    let (base, warnings): (Dataset, Vec<String>) = match &config.data.source {
        Some(path) => ingest_csv(path)?,
        None => (
            synthesize(&SynthConfig {
                days: config.data.days,
                slots_per_day: config.data.slots_per_day,
                n_features: config.data.features,
                noise_scale: config.data.noise_scale,
                seed: config.seed,
            })?,
            Vec::new(),
        ),
    };
    let split = config.split_spec();
    let prepared = match config.family.as_str() {
        "knapsack" => {
            let transform = KnapsackTransform {
                weight_choices: config.knapsack.weight_choices.clone(),
                value_noise_sd: config.knapsack.value_noise_sd,
                capacity_fraction: config.knapsack.capacity_fraction,
                seed: config.seed + 1,
            };
            let (priced, template) = to_weighted_knapsack(&base, &transform)?;
            prepare(&priced, &template, &split, config.data.standardize)?
        }
        "scheduling" => {
            let class = InstanceClass::parse(&config.scheduling.class).ok_or_else(|| {
                Error::Config(format!(
                    "unknown scheduling class `{}`",
                    config.scheduling.class
                ))
            })?;
            let instance = generate_instance(class, config.seed)?;
            let template = OptInstance::scheduling("scheduling-template", instance)?;
            prepare(&base, &template, &split, config.data.standardize)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown family `{other}`, expected knapsack or scheduling"
            )))
        }
    };
    Ok((prepared, warnings))
}

#[derive(Clone, Debug)]
pub struct LegReport {
    pub regime: Regime,
    pub replication: usize,
    pub seed: u64,
    pub test_regret: f64,
    pub test_mse: f64,
    pub best_epoch: usize,
    pub solver_seconds: f64,
    pub wall_seconds: f64,
    pub budget_exhausted: bool,
    pub curve_path: PathBuf,
}

#[derive(Clone, Debug)]
pub struct AggregateLine {
    pub regime: Regime,
    pub runs: usize,
    pub mean_test_regret: f64,
    pub sd_test_regret: f64,
    pub mean_solver_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub name: String,
    pub digest: String,
    pub out_dir: PathBuf,
    pub legs: Vec<LegReport>,
    pub aggregates: Vec<AggregateLine>,
    pub warnings: Vec<String>,
}

fn out_dir_for(config: &ExperimentConfig) -> PathBuf {
    let base = std::env::var_os("PREDOPT_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| config.output.dir.clone());
    base.join(&config.name)
}

fn parallelism_override() -> Result<Option<usize>> {
    match std::env::var("PREDOPT_PARALLELISM") {
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .map_err(|_| Error::Config(format!("PREDOPT_PARALLELISM=`{raw}` is not a count")))?;
            Ok((n > 0).then_some(n))
        }
        Err(_) => Ok(None),
    }
}

pub fn run_experiment(config: &ExperimentConfig, digest: &str) -> Result<ExperimentReport> {
    let regimes = config.regimes()?;
    let training_oracle = config.training_oracle()?;
    let evaluation_oracle = config.evaluation_oracle()?;
    if config.replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    let (prepared, warnings) = build_prepared(config)?;
    let out_dir = out_dir_for(config);
    std::fs::create_dir_all(&out_dir).map_err(|source| Error::Write {
        path: out_dir.clone(),
        source,
    })?;

    let legs_spec: Vec<(Regime, usize)> = regimes
        .iter()
        .flat_map(|&regime| (0..config.replications).map(move |rep| (regime, rep)))
        .collect();

    let run_leg = |&(regime, rep): &(Regime, usize)| -> Result<LegReport> {
        let train_config = config.train_config(rep);
        let evaluator = RegretEvaluator::new(evaluation_oracle);
        let started = Instant::now();
        let outcome = match regime {
            Regime::Mse => train_mse(&prepared, &train_config, &evaluator)?,
            Regime::MseR => {
                if config.train.grid {
                    train_mse_r_grid(&prepared, &train_config, &HyperGrid::default(), &evaluator)?.0
                } else {
                    train_mse_r(&prepared, &train_config, &evaluator)?
                }
            }
            Regime::Spo => train_spo(
                &prepared,
                &train_config,
                training_oracle,
                config.warmstart_policy(),
                &evaluator,
            )?,
        };
        let wall_seconds = started.elapsed().as_secs_f64();
        let test = evaluator.evaluate(&outcome.model, &prepared.test)?;

        let mut curve = outcome.curve.clone();
        curve.meta.insert(0, ("name".into(), config.name.clone()));
        curve.meta.insert(1, ("config".into(), digest.to_string()));
        curve.meta.insert(2, ("family".into(), config.family.clone()));
        curve
            .meta
            .insert(3, ("replication".into(), format!("{rep}")));
        let stem = format!("{}-r{rep}", regime.as_str());
        let curve_path = out_dir.join(format!("{stem}.curve.csv"));
        curve.write_csv(&curve_path)?;
        if config.output.write_checkpoints {
            save_checkpoint(
                &out_dir.join(format!("{stem}.model.txt")),
                &outcome.model,
                &outcome.optimizer,
            )?;
        }

        Ok(LegReport {
            regime,
            replication: rep,
            seed: train_config.seed,
            test_regret: test.mean_regret,
            test_mse: test.mean_mse,
            best_epoch: outcome.best_epoch,
            solver_seconds: outcome.solver_seconds,
            wall_seconds,
            budget_exhausted: outcome.budget_exhausted,
            curve_path,
        })
    };

    let legs: Vec<LegReport> = match parallelism_override()? {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| legs_spec.par_iter().map(run_leg).collect::<Result<_>>())?
        }
        None => legs_spec.par_iter().map(run_leg).collect::<Result<_>>()?,
    };

    let aggregates = regimes
        .iter()
        .map(|&regime| {
            let finals: Vec<f64> = legs
                .iter()
                .filter(|l| l.regime == regime)
                .map(|l| l.test_regret)
                .collect();
            let solver: Vec<f64> = legs
                .iter()
                .filter(|l| l.regime == regime)
                .map(|l| l.solver_seconds)
                .collect();
            let (mean_test_regret, sd_test_regret) = aggregate(&finals);
            AggregateLine {
                regime,
                runs: finals.len(),
                mean_test_regret,
                sd_test_regret,
                mean_solver_seconds: aggregate(&solver).0,
            }
        })
        .collect();

    let report = ExperimentReport {
        name: config.name.clone(),
        digest: digest.to_string(),
        out_dir: out_dir.clone(),
        legs,
        aggregates,
        warnings,
    };
    std::fs::write(out_dir.join("report.csv"), render_legs(&report)).map_err(|source| {
        Error::Write {
            path: out_dir.join("report.csv"),
            source,
        }
    })?;
    std::fs::write(out_dir.join("summary.csv"), render_summary(&report)).map_err(|source| {
        Error::Write {
            path: out_dir.join("summary.csv"),
            source,
        }
    })?;
    Ok(report)
}

fn render_legs(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# name {}", report.name);
    let _ = writeln!(out, "# config {}", report.digest);
    out.push_str("regime,replication,seed,test_regret,test_mse,best_epoch,solver_s,wall_s,budget_exhausted\n");
    for leg in &report.legs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            leg.regime.as_str(),
            leg.replication,
            leg.seed,
            leg.test_regret,
            leg.test_mse,
            leg.best_epoch,
            leg.solver_seconds,
            leg.wall_seconds,
            leg.budget_exhausted
        );
    }
    out
}

fn render_summary(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# name {}", report.name);
    let _ = writeln!(out, "# config {}", report.digest);
    out.push_str("regime,runs,mean_test_regret,sd_test_regret,mean_solver_s\n");
    for line in &report.aggregates {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            line.regime.as_str(),
            line.runs,
            line.mean_test_regret,
            line.sd_test_regret,
            line.mean_solver_seconds
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::LearningCurve;

    fn minimal_toml(dir: &Path) -> String {
        format!(
            r#"
name = "tiny"
family = "knapsack"
regimes = ["mse", "spo"]
replications = 2

[data]
days = 12
slots_per_day = 4
features = 6
noise_scale = 0.5

[train]
epochs = 2
learning_rate = 0.001
pretrain_epochs = 1

[output]
dir = "{}"
"#,
            dir.display()
        )
    }

    #[test]
    fn config_parses_with_defaults_and_rejects_unknown_keys() {
        let config: ExperimentConfig = toml::from_str(
            r#"
name = "x"
family = "knapsack"
regimes = ["mse"]
"#,
        )
        .unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.replications, 1);
        assert_eq!(config.data.days, 300);
        assert_eq!(config.train.epochs, 10);
        assert!(config.train.warm_basis);
        assert_eq!(config.regimes().unwrap(), vec![Regime::Mse]);

        let bad: std::result::Result<ExperimentConfig, _> = toml::from_str(
            r#"
name = "x"
family = "knapsack"
regimes = ["mse"]
oracel = "exact"
"#,
        );
        assert!(bad.is_err());

        let config: ExperimentConfig = toml::from_str(
            r#"
name = "x"
family = "knapsack"
regimes = ["made-up"]
"#,
        )
        .unwrap();
        assert!(config.regimes().is_err());
    }

    #[test]
    fn digest_is_stable_and_content_sensitive() {
        let a = config_digest("name = \"x\"\n");
        assert_eq!(a.len(), 12);
        assert_eq!(a, config_digest("name = \"x\"\n"));
        assert_ne!(a, config_digest("name = \"y\"\n"));
    }

    #[test]
    fn experiment_writes_curves_reports_and_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let config: ExperimentConfig = toml::from_str(&minimal_toml(dir.path())).unwrap();
        let report = run_experiment(&config, "abc123").unwrap();

        assert_eq!(report.legs.len(), 4);
        assert_eq!(report.aggregates.len(), 2);
        assert_eq!(report.aggregates[0].runs, 2);
        let out = dir.path().join("tiny");
        for stem in ["mse-r0", "mse-r1", "spo-r0", "spo-r1"] {
            assert!(out.join(format!("{stem}.curve.csv")).is_file());
            assert!(out.join(format!("{stem}.model.txt")).is_file());
        }
        assert!(out.join("report.csv").is_file());
        assert!(out.join("summary.csv").is_file());

        let curve = LearningCurve::read_csv(&out.join("spo-r1.curve.csv")).unwrap();
        assert_eq!(curve.points.len(), 3);
        let meta: std::collections::HashMap<_, _> = curve.meta.iter().cloned().collect();
        assert_eq!(meta["config"], "abc123");
        assert_eq!(meta["regime"], "spo");
        assert_eq!(meta["replication"], "1");

        // Replications share data but not shuffling, so they land on
        // different models.
        let r0 = LearningCurve::read_csv(&out.join("mse-r0.curve.csv")).unwrap();
        let r1 = LearningCurve::read_csv(&out.join("mse-r1.curve.csv")).unwrap();
        assert_ne!(
            r0.points.last().unwrap().train_loss,
            r1.points.last().unwrap().train_loss
        );
    }

    #[test]
    fn reruns_reproduce_everything_but_timing() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let config_a: ExperimentConfig = toml::from_str(&minimal_toml(dir_a.path())).unwrap();
        let config_b: ExperimentConfig = toml::from_str(&minimal_toml(dir_b.path())).unwrap();
        let report_a = run_experiment(&config_a, "d1").unwrap();
        let report_b = run_experiment(&config_b, "d1").unwrap();

        for (a, b) in report_a.legs.iter().zip(&report_b.legs) {
            assert_eq!(a.regime, b.regime);
            assert_eq!(a.test_regret.to_bits(), b.test_regret.to_bits());
            assert_eq!(a.test_mse.to_bits(), b.test_mse.to_bits());
            let curve_a = LearningCurve::read_csv(&a.curve_path).unwrap();
            let mut curve_b = LearningCurve::read_csv(&b.curve_path).unwrap();
            // Same digest, differing only in the temp directory name.
            curve_b.meta = curve_a.meta.clone();
            assert!(curve_a.matches_ignoring_time(&curve_b));
        }
    }

    #[test]
    fn environment_overrides_redirect_output_and_cap_threads() {
        let dir = tempfile::tempdir().unwrap();
        let ignored = tempfile::tempdir().unwrap();
        let mut config: ExperimentConfig = toml::from_str(&minimal_toml(ignored.path())).unwrap();
        config.regimes = vec!["mse".into()];
        config.replications = 1;

        std::env::set_var("PREDOPT_OUT_DIR", dir.path());
        std::env::set_var("PREDOPT_PARALLELISM", "1");
        let result = run_experiment(&config, "env1");
        std::env::remove_var("PREDOPT_OUT_DIR");
        std::env::remove_var("PREDOPT_PARALLELISM");
        let report = result.unwrap();

        assert!(report.out_dir.starts_with(dir.path()));
        assert!(dir.path().join("tiny").join("report.csv").is_file());
        assert!(!ignored.path().join("tiny").exists());
    }

    #[test]
    fn scheduling_family_runs_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let toml_text = format!(
            r#"
name = "sched-tiny"
family = "scheduling"
regimes = ["spo"]
oracle = "relax"
eval_oracle = "relax"

[data]
days = 10
slots_per_day = 48
features = 6
noise_scale = 0.5

[scheduling]
class = "easy10"

[train]
epochs = 1
pretrain_epochs = 0
learning_rate = 0.001

[output]
dir = "{}"
write_checkpoints = false
"#,
            dir.path().display()
        );
        let config: ExperimentConfig = toml::from_str(&toml_text).unwrap();
        let digest = config_digest(&toml_text);
        let report = run_experiment(&config, &digest).unwrap();
        assert_eq!(report.legs.len(), 1);
        assert!(report.legs[0].solver_seconds > 0.0);
        assert!(report.legs[0].test_regret.is_finite());
    }
}
