//! The predictor: one linear map from per-slot features to a per-slot
//! objective coefficient, shared across all slots of a day. Training moves
//! it with momentum SGD; coefficient-space gradients are chained onto the
//! weights here so every regime updates through the same code path.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(n_features: usize) -> Self {
        LinearModel {
            weights: vec![0.0; n_features],
            bias: 0.0,
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn predict_one(&self, features: &[f64]) -> f64 {
        debug_assert_eq!(features.len(), self.weights.len());
        self.bias
            + self
                .weights
                .iter()
                .zip(features)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }

    /// Predict the whole day's coefficient vector, one row of features per
    /// slot.
    pub fn predict_day(&self, features: &[Vec<f64>]) -> Vec<f64> {
        features.iter().map(|row| self.predict_one(row)).collect()
    }

    /// Chain a coefficient-space gradient through the feature rows:
    /// d(loss)/d(weights) when d(loss)/d(coefficient s) = `coeff_grad[s]`.
    pub fn chain_gradient(features: &[Vec<f64>], coeff_grad: &[f64]) -> (Vec<f64>, f64) {
        debug_assert_eq!(features.len(), coeff_grad.len());
        let p = features.first().map_or(0, |row| row.len());
        let mut grad_w = vec![0.0; p];
        let mut grad_b = 0.0;
        for (row, &g) in features.iter().zip(coeff_grad) {
            if g == 0.0 {
                continue;
            }
            for (acc, x) in grad_w.iter_mut().zip(row) {
                *acc += g * x;
            }
            grad_b += g;
        }
        (grad_w, grad_b)
    }

    /// One descent step with the optimizer's momentum state.
    pub fn apply_gradient(&mut self, state: &mut OptimizerState, grad_w: &[f64], grad_b: f64) {
        debug_assert_eq!(grad_w.len(), self.weights.len());
        for ((v, w), g) in state
            .velocity
            .iter_mut()
            .zip(self.weights.iter_mut())
            .zip(grad_w)
        {
            *v = state.momentum * *v + g;
            *w -= state.learning_rate * *v;
        }
        state.velocity_bias = state.momentum * state.velocity_bias + grad_b;
        self.bias -= state.learning_rate * state.velocity_bias;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
    velocity_bias: f64,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, momentum: f64, n_features: usize) -> Self {
        OptimizerState {
            learning_rate,
            momentum,
            velocity: vec![0.0; n_features],
            velocity_bias: 0.0,
        }
    }
}

/// Per-feature affine scaling fitted on the training split only.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Identity scaling, for data that must pass through untouched.
    pub fn identity(n_features: usize) -> Self {
        Standardizer {
            mean: vec![0.0; n_features],
            scale: vec![1.0; n_features],
        }
    }

    pub fn fit<'a, I>(rows: I, n_features: usize) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut mean = vec![0.0; n_features];
        let mut m2 = vec![0.0; n_features];
        let mut count = 0.0;
        for row in rows {
            count += 1.0;
            for j in 0..n_features {
                let delta = row[j] - mean[j];
                mean[j] += delta / count;
                m2[j] += delta * (row[j] - mean[j]);
            }
        }
        let scale = m2
            .iter()
            .map(|&s| {
                let sd = if count > 0.0 { (s / count).sqrt() } else { 0.0 };
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for j in 0..row.len() {
            row[j] = (row[j] - self.mean[j]) / self.scale[j];
        }
    }
}

fn fmt_floats(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out
}

fn parse_floats(origin: &str, lineno: usize, s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|_| Error::parse(origin, lineno, format!("`{tok}` is not a number")))
        })
        .collect()
}

/// Serialize model plus optimizer state as plain text. Floats print in
/// shortest round-trip form, so loading restores bit-identical values.
pub fn checkpoint_text(model: &LinearModel, state: &OptimizerState) -> String {
    let mut out = String::from("predopt-checkpoint v1\n");
    let _ = writeln!(out, "features {}", model.n_features());
    let _ = writeln!(out, "bias {}", model.bias);
    let _ = writeln!(out, "weights {}", fmt_floats(&model.weights));
    let _ = writeln!(out, "lr {}", state.learning_rate);
    let _ = writeln!(out, "momentum {}", state.momentum);
    let _ = writeln!(out, "velocity_bias {}", state.velocity_bias);
    let _ = writeln!(out, "velocity {}", fmt_floats(&state.velocity));
    out
}

pub fn parse_checkpoint(text: &str, origin: &str) -> Result<(LinearModel, OptimizerState)> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty file".into()))?;
    if header.1.trim() != "predopt-checkpoint v1" {
        return Err(Error::Checkpoint(format!(
            "unrecognized header `{}`",
            header.1.trim()
        )));
    }

    let mut features: Option<usize> = None;
    let mut bias: Option<f64> = None;
    let mut weights: Option<Vec<f64>> = None;
    let mut lr: Option<f64> = None;
    let mut momentum: Option<f64> = None;
    let mut velocity_bias: Option<f64> = None;
    let mut velocity: Option<Vec<f64>> = None;

    for (idx, raw) in lines {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line.split_once(' ').ok_or_else(|| {
            Error::parse(origin, lineno, format!("`{line}` has no value"))
        })?;
        match key {
            "features" => {
                features = Some(rest.trim().parse().map_err(|_| {
                    Error::parse(origin, lineno, "feature count is not an integer")
                })?)
            }
            "bias" => bias = Some(parse_floats(origin, lineno, rest)?[0]),
            "weights" => weights = Some(parse_floats(origin, lineno, rest)?),
            "lr" => lr = Some(parse_floats(origin, lineno, rest)?[0]),
            "momentum" => momentum = Some(parse_floats(origin, lineno, rest)?[0]),
            "velocity_bias" => velocity_bias = Some(parse_floats(origin, lineno, rest)?[0]),
            "velocity" => velocity = Some(parse_floats(origin, lineno, rest)?),
            other => {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("unknown checkpoint field `{other}`"),
                ))
            }
        }
    }

    let features = features.ok_or_else(|| Error::Checkpoint("missing `features`".into()))?;
    let weights = weights.ok_or_else(|| Error::Checkpoint("missing `weights`".into()))?;
    let velocity = velocity.ok_or_else(|| Error::Checkpoint("missing `velocity`".into()))?;
    if weights.len() != features || velocity.len() != features {
        return Err(Error::Checkpoint(format!(
            "expected {features} weights and velocities, found {} and {}",
            weights.len(),
            velocity.len()
        )));
    }
    let model = LinearModel {
        weights,
        bias: bias.ok_or_else(|| Error::Checkpoint("missing `bias`".into()))?,
    };
    let state = OptimizerState {
        learning_rate: lr.ok_or_else(|| Error::Checkpoint("missing `lr`".into()))?,
        momentum: momentum.ok_or_else(|| Error::Checkpoint("missing `momentum`".into()))?,
        velocity_bias: velocity_bias
            .ok_or_else(|| Error::Checkpoint("missing `velocity_bias`".into()))?,
        velocity,
    };
    Ok((model, state))
}

pub fn save_checkpoint(path: &Path, model: &LinearModel, state: &OptimizerState) -> Result<()> {
    std::fs::write(path, checkpoint_text(model, state)).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<(LinearModel, OptimizerState)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_checkpoint(&text, &path.display().to_string())
}
