//! Day-batched datasets: each point is one day of per-slot feature rows and
//! per-slot objective coefficients in the instance's native sense. Splits
//! are chronological, CSV is the interchange format, and `prepare` turns a
//! dataset plus an instance template into training-ready day batches that
//! all share one constraint structure.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::knapsack::KnapsackData;
use crate::model::Standardizer;
use crate::problem::OptInstance;

#[derive(Clone, Debug, PartialEq)]
pub struct DataPoint {
    pub id: String,
    /// One feature row per slot.
    pub features: Vec<Vec<f64>>,
    /// Native objective coefficient per slot.
    pub targets: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub points: Vec<DataPoint>,
    pub slots_per_day: usize,
    pub n_features: usize,
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>, slots_per_day: usize, n_features: usize) -> Result<Self> {
        for point in &points {
            if point.targets.len() != slots_per_day || point.features.len() != slots_per_day {
                return Err(Error::Data(format!(
                    "day `{}` has {} slots, expected {slots_per_day}",
                    point.id,
                    point.targets.len().max(point.features.len()),
                )));
            }
            if let Some(row) = point.features.iter().find(|row| row.len() != n_features) {
                return Err(Error::Data(format!(
                    "day `{}` has a row with {} features, expected {n_features}",
                    point.id,
                    row.len(),
                )));
            }
        }
        Ok(Dataset {
            points,
            slots_per_day,
            n_features,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Chronological split: the first `train` fraction of days, then the
    /// next `validation` fraction, then everything left. Counts are floored
    /// so the test split absorbs the remainder.
    pub fn split(&self, spec: &SplitSpec) -> Result<(&[DataPoint], &[DataPoint], &[DataPoint])> {
        let (n_train, n_val) = spec.counts(self.len())?;
        let (train, rest) = self.points.split_at(n_train);
        let (validation, test) = rest.split_at(n_val);
        Ok((train, validation, test))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
        }
    }
}

impl SplitSpec {
    pub fn counts(&self, n: usize) -> Result<(usize, usize)> {
        if self.train <= 0.0 || self.validation <= 0.0 || self.test <= 0.0 {
            return Err(Error::Data("split fractions must be positive".into()));
        }
        if ((self.train + self.validation + self.test) - 1.0).abs() > 1e-9 {
            return Err(Error::Data("split fractions must sum to 1".into()));
        }
        let n_train = (n as f64 * self.train).floor() as usize;
        let n_val = (n as f64 * self.validation).floor() as usize;
        if n_train == 0 || n_val == 0 || n_train + n_val >= n {
            return Err(Error::Data(format!(
                "{n} days are too few for a {}/{}/{} split",
                self.train, self.validation, self.test
            )));
        }
        Ok((n_train, n_val))
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v}")
}

/// Write a dataset as CSV with header `day,slot,target,f0..`. Floats are
/// printed in shortest round-trip form, so emit and ingest compose to the
/// identity on files this function wrote.
pub fn emit_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut text = String::from("day,slot,target");
    for j in 0..dataset.n_features {
        let _ = write!(text, ",f{j}");
    }
    text.push('\n');
    for point in &dataset.points {
        for slot in 0..dataset.slots_per_day {
            let _ = write!(text, "{},{slot},{}", point.id, fmt_float(point.targets[slot]));
            for x in &point.features[slot] {
                let _ = write!(text, ",{}", fmt_float(*x));
            }
            text.push('\n');
        }
    }
    std::fs::write(path, text).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Read a dataset written by [`emit_csv`] (or anything matching its
/// layout). Days are taken in file order; a day whose slot count differs
/// from the first day's is skipped with a warning rather than an error.
pub fn ingest_csv(path: &Path) -> Result<(Dataset, Vec<String>)> {
    let origin = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{origin}: {e}")))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{origin}: {e}")))?
        .clone();
    if headers.len() < 3 || &headers[0] != "day" || &headers[1] != "slot" || &headers[2] != "target"
    {
        return Err(Error::parse(
            &origin,
            1,
            "expected header `day,slot,target,f0,..`",
        ));
    }
    let n_features = headers.len() - 3;

    let mut warnings = Vec::new();
    let mut groups: Vec<DataPoint> = Vec::new();
    let mut current: Option<DataPoint> = None;

    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("{origin}: {e}")))?;
        let lineno = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(0);
        if record.len() != headers.len() {
            return Err(Error::parse(
                &origin,
                lineno,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let day = record[0].to_string();
        let slot: usize = record[1]
            .parse()
            .map_err(|_| Error::parse(&origin, lineno, "slot is not an integer"))?;
        let mut floats = Vec::with_capacity(n_features + 1);
        for field in record.iter().skip(2) {
            floats.push(field.parse::<f64>().map_err(|_| {
                Error::parse(&origin, lineno, format!("`{field}` is not a number"))
            })?);
        }
        let target = floats[0];
        let row = floats[1..].to_vec();

        let switch = current.as_ref().is_some_and(|p| p.id != day);
        if switch {
            groups.push(current.take().unwrap());
        }
        let point = current.get_or_insert_with(|| DataPoint {
            id: day.clone(),
            features: Vec::new(),
            targets: Vec::new(),
        });
        if point.id != day {
            return Err(Error::parse(&origin, lineno, "rows are not grouped by day"));
        }
        if slot != point.targets.len() {
            return Err(Error::parse(
                &origin,
                lineno,
                format!("expected slot {}, found {slot}", point.targets.len()),
            ));
        }
        point.targets.push(target);
        point.features.push(row);
    }
    if let Some(point) = current.take() {
        groups.push(point);
    }
    if groups.is_empty() {
        return Err(Error::Data(format!("{origin}: no data rows")));
    }
    if groups.iter().any(|g| {
        groups
            .iter()
            .filter(|other| other.id == g.id)
            .count()
            > 1
    }) {
        return Err(Error::Data(format!(
            "{origin}: a day id appears in more than one block"
        )));
    }

    let slots_per_day = groups[0].targets.len();
    let mut points = Vec::with_capacity(groups.len());
    for group in groups {
        if group.targets.len() == slots_per_day {
            points.push(group);
        } else {
            warnings.push(format!(
                "{origin}: day `{}` has {} slots, expected {slots_per_day}; skipped",
                group.id,
                group.targets.len()
            ));
        }
    }
    let dataset = Dataset::new(points, slots_per_day, n_features)?;
    Ok((dataset, warnings))
}

#[derive(Clone, Copy, Debug)]
pub struct SynthConfig {
    pub days: usize,
    pub slots_per_day: usize,
    pub n_features: usize,
    /// 0 makes the targets an exact linear function of the features;
    /// larger values mix in autocorrelated noise and a term no linear
    /// model can express.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            days: 300,
            slots_per_day: 48,
            n_features: 8,
            noise_scale: 1.0,
            seed: 7,
        }
    }
}

pub(crate) const TRUTH_WEIGHTS: [f64; 6] = [12.0, -4.0, 3.0, -2.0, 18.0, -9.0];
pub(crate) const TRUTH_BIAS: f64 = 40.0;
const SCARCITY_SCALE: f64 = 45.0;
const SCARCITY_KNEE: f64 = 1.0;

/// Generate a calendar-flavored dataset: slot-of-day and day-of-week
/// harmonics, a load proxy, a wind proxy, scarcity and oversupply margins,
/// and standard-normal padding features. Targets follow fixed linear truth
/// weights on the first six features plus `noise_scale` worth of AR(1)
/// noise and a load-times-wind interaction. When a seventh feature is
/// present it acts as a scarcity margin: slots whose margin exceeds a knee
/// get a price spike proportional to the excess. An eighth feature acts
/// the same way as an oversupply margin driving price dips. Both tails
/// mimic real price series, and because the effects are hinge-shaped no
/// linear model can represent them: squared-error fits systematically
/// under-rank the tail slots that dominate downstream decisions.
pub fn synthesize(config: &SynthConfig) -> Result<Dataset> {
    if config.n_features < 6 {
        return Err(Error::Data("synthesis needs at least 6 features".into()));
    }
    if config.days == 0 || config.slots_per_day == 0 {
        return Err(Error::Data("synthesis needs at least one day and slot".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let s = config.slots_per_day as f64;
    let tau = std::f64::consts::TAU;

    let mut points = Vec::with_capacity(config.days);
    for day in 0..config.days {
        let dow = (day % 7) as f64;
        let mut features = Vec::with_capacity(config.slots_per_day);
        let mut targets = Vec::with_capacity(config.slots_per_day);
        let mut ar = 0.0;
        for slot in 0..config.slots_per_day {
            let t = slot as f64;
            let mut row = Vec::with_capacity(config.n_features);
            row.push((tau * t / s).sin());
            row.push((tau * t / s).cos());
            row.push((tau * dow / 7.0).sin());
            row.push((tau * dow / 7.0).cos());
            let load = 0.7 * (tau * (t + s / 4.0) / s).sin()
                + 0.25 * (tau * day as f64 / 30.0).sin()
                + 0.1 * unit.sample(&mut rng);
            row.push(load);
            let wind = 0.5 * (2.0 * tau * t / s).cos() + 0.3 * unit.sample(&mut rng);
            row.push(wind);
            for _ in 6..config.n_features {
                row.push(unit.sample(&mut rng));
            }

            let linear: f64 = TRUTH_BIAS
                + TRUTH_WEIGHTS
                    .iter()
                    .zip(&row)
                    .map(|(w, x)| w * x)
                    .sum::<f64>();
            ar = 0.8 * ar + 3.0 * unit.sample(&mut rng);
            let hinge = |margin: Option<&f64>| (margin.copied().unwrap_or(0.0) - SCARCITY_KNEE).max(0.0);
            let spike = SCARCITY_SCALE * (hinge(row.get(6)) - hinge(row.get(7)));
            let target = linear + config.noise_scale * (ar + 2.0 * load * wind + spike);
            features.push(row);
            targets.push(target);
        }
        points.push(DataPoint {
            id: format!("day-{day:04}"),
            features,
            targets,
        });
    }
    Dataset::new(points, config.slots_per_day, config.n_features)
}

#[derive(Clone, Debug)]
pub struct KnapsackTransform {
    pub weight_choices: Vec<u32>,
    pub value_noise_sd: f64,
    /// Capacity as a fraction of the total item weight.
    pub capacity_fraction: f64,
    pub seed: u64,
}

impl Default for KnapsackTransform {
    fn default() -> Self {
        KnapsackTransform {
            weight_choices: vec![3, 5, 7],
            value_noise_sd: 25.0,
            capacity_fraction: 0.5,
            seed: 11,
        }
    }
}

/// Rebuild the targets as weighted item values: slot `t` gets a weight
/// drawn once from `weight_choices` (shared by every day), and each day's
/// value becomes `(target + noise) * weight`. Returns the transformed
/// dataset together with the knapsack instance template the values price.
pub fn to_weighted_knapsack(
    dataset: &Dataset,
    config: &KnapsackTransform,
) -> Result<(Dataset, OptInstance)> {
    if config.weight_choices.is_empty() || config.weight_choices.contains(&0) {
        return Err(Error::Data("weight choices must be positive".into()));
    }
    if !(config.capacity_fraction > 0.0 && config.capacity_fraction <= 1.0) {
        return Err(Error::Data("capacity fraction must be in (0, 1]".into()));
    }
    if !(config.value_noise_sd >= 0.0) {
        return Err(Error::Data("value noise must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let weights: Vec<u32> = (0..dataset.slots_per_day)
        .map(|_| config.weight_choices[rng.gen_range(0..config.weight_choices.len())])
        .collect();
    let total: u64 = weights.iter().map(|&w| u64::from(w)).sum();
    let capacity = ((total as f64 * config.capacity_fraction).floor() as u64).max(1) as u32;

    let noise = Normal::new(0.0, config.value_noise_sd.max(f64::MIN_POSITIVE))
        .expect("value noise distribution");
    let points = dataset
        .points
        .iter()
        .map(|point| {
            let targets = point
                .targets
                .iter()
                .zip(&weights)
                .map(|(&v, &w)| {
                    let xi = if config.value_noise_sd > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                    (v + xi) * f64::from(w)
                })
                .collect();
            DataPoint {
                id: point.id.clone(),
                features: point.features.clone(),
                targets,
            }
        })
        .collect();

    let transformed = Dataset::new(points, dataset.slots_per_day, dataset.n_features)?;
    let template = OptInstance::knapsack(
        "knapsack-template",
        KnapsackData {
            weights,
            capacity,
        },
    )?;
    Ok((transformed, template))
}

/// One training-ready day: an instance sharing the template's structure,
/// standardized feature rows, and native-sense targets.
#[derive(Clone, Debug)]
pub struct DayData {
    pub instance: OptInstance,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: Vec<DayData>,
    pub validation: Vec<DayData>,
    pub test: Vec<DayData>,
    pub n_features: usize,
    pub standardizer: Standardizer,
}

/// Split chronologically, fit the standardizer on the training split only,
/// and pair every day with an instance derived from `template` so oracle
/// caches keyed on the structure apply across days.
pub fn prepare(
    dataset: &Dataset,
    template: &OptInstance,
    spec: &SplitSpec,
    standardize: bool,
) -> Result<Prepared> {
    if template.coeff_len() != dataset.slots_per_day {
        return Err(Error::DimensionMismatch {
            expected: template.coeff_len(),
            got: dataset.slots_per_day,
        });
    }
    let (train, validation, test) = dataset.split(spec)?;
    let standardizer = if standardize {
        Standardizer::fit(
            train
                .iter()
                .flat_map(|p| p.features.iter().map(|row| row.as_slice())),
            dataset.n_features,
        )
    } else {
        Standardizer::identity(dataset.n_features)
    };

    let build = |points: &[DataPoint]| -> Vec<DayData> {
        points
            .iter()
            .map(|point| {
                let mut features = point.features.clone();
                for row in &mut features {
                    standardizer.transform_row(row);
                }
                DayData {
                    instance: template.share(point.id.clone()),
                    features,
                    targets: point.targets.clone(),
                }
            })
            .collect()
    };

    Ok(Prepared {
        train: build(train),
        validation: build(validation),
        test: build(test),
        n_features: dataset.n_features,
        standardizer,
    })
}
