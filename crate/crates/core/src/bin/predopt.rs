use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use predopt::data::{emit_csv, synthesize, SynthConfig};
use predopt::evaluation::aggregate;
use predopt::experiment::{build_prepared, load_config, run_experiment};
use predopt::model::load_checkpoint;
use predopt::training::{train_mse_r_grid, HyperGrid};
use predopt::{LearningCurve, RegretEvaluator};

#[derive(Parser)]
#[command(
    name = "predopt",
    version,
    about = "Train linear predictors against downstream optimization regret"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic day-batched dataset as CSV.
    Synth(SynthArgs),
    /// Run every regime and replication an experiment config describes.
    Train(ConfigArgs),
    /// Grid-search mse-r hyperparameters for an experiment config.
    Sweep(ConfigArgs),
    /// Evaluate a saved checkpoint on one split of a config's data.
    Eval(EvalArgs),
    /// Summarize the learning curves in a run directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 300)]
    days: usize,
    /// Slots per day, the decision dimension.
    #[arg(long, default_value_t = 48)]
    slots: usize,
    #[arg(long, default_value_t = 8)]
    features: usize,
    /// 0 makes targets exactly linear in the features.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment TOML.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Experiment TOML describing the data and evaluation oracle.
    #[arg(long)]
    config: PathBuf,
    /// Checkpoint written by `train` or `predopt::model::save_checkpoint`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Which split to evaluate: train, validation, or test.
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding `*.curve.csv` files from one or more runs.
    #[arg(long)]
    dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => synth(args),
        Command::Train(args) => train(args),
        Command::Sweep(args) => sweep(args),
        Command::Eval(args) => eval(args),
        Command::Report(args) => report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("predopt: {e}");
            ExitCode::FAILURE
        }
    }
}

fn synth(args: SynthArgs) -> predopt::Result<()> {
    let dataset = synthesize(&SynthConfig {
        days: args.days,
        slots_per_day: args.slots,
        n_features: args.features,
        noise_scale: args.noise,
        seed: args.seed,
    })?;
    emit_csv(&dataset, &args.out)?;
    println!(
        "wrote {} days x {} slots x {} features to {}",
        dataset.len(),
        dataset.slots_per_day,
        dataset.n_features,
        args.out.display()
    );
    Ok(())
}

fn train(args: ConfigArgs) -> predopt::Result<()> {
    let (config, digest) = load_config(&args.config)?;
    let report = run_experiment(&config, &digest)?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    println!("experiment {} (config {})", report.name, report.digest);
    println!("{:<8} {:>3} {:>14} {:>12} {:>10} {:>9}", "regime", "rep", "test_regret", "test_mse", "solver_s", "budget");
    for leg in &report.legs {
        println!(
            "{:<8} {:>3} {:>14.6} {:>12.4} {:>10.3} {:>9}",
            leg.regime.as_str(),
            leg.replication,
            leg.test_regret,
            leg.test_mse,
            leg.solver_seconds,
            if leg.budget_exhausted { "hit" } else { "-" }
        );
    }
    println!();
    println!("{:<8} {:>4} {:>14} {:>12} {:>10}", "regime", "runs", "mean_regret", "sd_regret", "solver_s");
    for line in &report.aggregates {
        println!(
            "{:<8} {:>4} {:>14.6} {:>12.6} {:>10.3}",
            line.regime.as_str(),
            line.runs,
            line.mean_test_regret,
            line.sd_test_regret,
            line.mean_solver_seconds
        );
    }
    println!();
    println!("outputs in {}", report.out_dir.display());
    Ok(())
}

fn sweep(args: ConfigArgs) -> predopt::Result<()> {
    let (config, digest) = load_config(&args.config)?;
    let (prepared, warnings) = build_prepared(&config)?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    let evaluator = RegretEvaluator::new(config.evaluation_oracle()?);
    let base = config.train_config(0);
    let (winner, cells) = train_mse_r_grid(&prepared, &base, &HyperGrid::default(), &evaluator)?;
    println!("mse-r sweep for {} (config {digest})", config.name);
    println!("{:>13} {:>9} {:>11} {:>15}", "learning_rate", "momentum", "best_epoch", "best_val_regret");
    for cell in &cells {
        println!(
            "{:>13} {:>9} {:>11} {:>15.6}",
            cell.learning_rate, cell.momentum, cell.best_epoch, cell.best_val_regret
        );
    }
    let lr = winner
        .curve
        .meta
        .iter()
        .find(|(k, _)| k == "learning_rate")
        .map(|(_, v)| v.as_str())
        .unwrap_or("?");
    let momentum = winner
        .curve
        .meta
        .iter()
        .find(|(k, _)| k == "momentum")
        .map(|(_, v)| v.as_str())
        .unwrap_or("?");
    println!();
    println!(
        "winner: learning_rate {lr}, momentum {momentum}, epoch {}, validation regret {:.6}",
        winner.best_epoch, winner.best_val_regret
    );
    Ok(())
}

fn eval(args: EvalArgs) -> predopt::Result<()> {
    let (config, _) = load_config(&args.config)?;
    let (model, _) = load_checkpoint(&args.checkpoint)?;
    let (prepared, warnings) = build_prepared(&config)?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    let days = match args.split.as_str() {
        "train" => &prepared.train,
        "validation" => &prepared.validation,
        "test" => &prepared.test,
        other => {
            return Err(predopt::Error::Config(format!(
                "unknown split `{other}`, expected train, validation, or test"
            )))
        }
    };
    let evaluator = RegretEvaluator::new(config.evaluation_oracle()?);
    let report = evaluator.evaluate(&model, days)?;
    println!(
        "{} split of {}: {} days, mean regret {:.6}, mean squared error {:.4}",
        args.split,
        config.name,
        days.len(),
        report.mean_regret,
        report.mean_mse
    );
    Ok(())
}

fn report(args: ReportArgs) -> predopt::Result<()> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.dir)
        .map_err(|source| predopt::Error::Read {
            path: args.dir.clone(),
            source,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".curve.csv"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(predopt::Error::Data(format!(
            "no *.curve.csv files under {}",
            args.dir.display()
        )));
    }

    println!(
        "{:<24} {:<8} {:>3} {:>7} {:>14} {:>14} {:>10}",
        "curve", "regime", "rep", "epochs", "final_val", "final_test", "solver_s"
    );
    let mut by_regime: Vec<(String, Vec<f64>)> = Vec::new();
    for path in &paths {
        let curve = LearningCurve::read_csv(path)?;
        let meta = |key: &str| -> String {
            curve
                .meta
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .unwrap_or_else(|| "?".into())
        };
        let Some(last) = curve.points.last() else {
            continue;
        };
        let regime = meta("regime");
        println!(
            "{:<24} {:<8} {:>3} {:>7} {:>14.6} {:>14.6} {:>10.3}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("?"),
            regime,
            meta("replication"),
            last.epoch,
            last.val_regret,
            last.test_regret,
            last.solver_s
        );
        match by_regime.iter_mut().find(|(r, _)| *r == regime) {
            Some((_, finals)) => finals.push(last.test_regret),
            None => by_regime.push((regime, vec![last.test_regret])),
        }
    }

    println!();
    println!("{:<8} {:>4} {:>16} {:>14}", "regime", "runs", "mean_final_test", "sd");
    for (regime, finals) in &by_regime {
        let (mean, sd) = aggregate(finals);
        println!("{:<8} {:>4} {:>16.6} {:>14.6}", regime, finals.len(), mean, sd);
    }
    Ok(())
}
