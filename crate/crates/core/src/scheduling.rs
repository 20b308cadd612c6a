//! Day-ahead machine scheduling against time-varying energy prices. Tasks
//! with release/deadline windows, a resource demand, and a power draw run
//! uninterrupted on one of a set of identical machines; each machine has a
//! per-slot resource capacity, and no task may cross the end of the horizon.
//! The MILP uses one binary per feasible (task, machine, start) triple.
//! Objective coefficients are energy prices per price period, so the same
//! constraint structure is reused day after day with fresh prices.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::simplex::{Constraint, LpProblem, Relation};

#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    /// Time slots the task runs for, without interruption.
    pub duration: u32,
    /// First slot the task may start in.
    pub earliest_start: u32,
    /// Slot by which the task must have finished (exclusive).
    pub latest_end: u32,
    /// Resource units consumed on its machine in every active slot.
    pub resource: u32,
    /// Power drawn in every active slot; multiplies the slot price.
    pub power: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchedulingInstance {
    pub machine_count: u32,
    /// Per-machine, per-slot resource capacity.
    pub capacity: u32,
    /// Number of time slots in the day.
    pub horizon: u32,
    /// Consecutive slots sharing one price; the price vector has
    /// `horizon / slots_per_price` entries.
    pub slots_per_price: u32,
    pub tasks: Vec<Task>,
}

impl SchedulingInstance {
    pub fn price_count(&self) -> usize {
        (self.horizon / self.slots_per_price) as usize
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.machine_count == 0 {
            return Err("no machines".into());
        }
        if self.horizon == 0 {
            return Err("empty horizon".into());
        }
        if self.slots_per_price == 0 || self.horizon % self.slots_per_price != 0 {
            return Err(format!(
                "horizon {} is not a multiple of slots_per_price {}",
                self.horizon, self.slots_per_price
            ));
        }
        if self.tasks.is_empty() {
            return Err("no tasks".into());
        }
        for (j, t) in self.tasks.iter().enumerate() {
            if t.duration == 0 {
                return Err(format!("task {j} has zero duration"));
            }
            if t.latest_end > self.horizon {
                return Err(format!("task {j} ends after the horizon"));
            }
            if t.earliest_start + t.duration > t.latest_end {
                return Err(format!("task {j} cannot fit its window"));
            }
            if t.resource > self.capacity {
                return Err(format!("task {j} exceeds machine capacity"));
            }
            if !t.power.is_finite() || t.power < 0.0 {
                return Err(format!("task {j} has invalid power"));
            }
        }
        Ok(())
    }
}

/// One binary start decision: task `task` starts at slot `start` on
/// machine `machine`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StartVar {
    pub task: usize,
    pub machine: usize,
    pub start: u32,
}

/// The MILP skeleton for one instance: rows and variables are fixed, only
/// the objective changes with the day's prices.
#[derive(Debug)]
pub struct ScheduleModel {
    vars: Vec<StartVar>,
    base: LpProblem,
    integral: Vec<bool>,
    /// Per variable: (price period, energy drawn in that period).
    price_load: Vec<Vec<(usize, f64)>>,
    price_count: usize,
}

impl ScheduleModel {
    pub fn build(inst: &SchedulingInstance) -> Result<Self> {
        inst.validate()
            .map_err(|e| Error::invalid_instance("scheduling", e))?;
        let horizon = inst.horizon as usize;
        let machines = inst.machine_count as usize;

        let mut vars = Vec::new();
        let mut price_load = Vec::new();
        for (j, task) in inst.tasks.iter().enumerate() {
            for machine in 0..machines {
                for start in task.earliest_start..=(task.latest_end - task.duration) {
                    vars.push(StartVar {
                        task: j,
                        machine,
                        start,
                    });
                    let mut load: Vec<(usize, f64)> = Vec::new();
                    for slot in start..start + task.duration {
                        let period = (slot / inst.slots_per_price) as usize;
                        match load.last_mut() {
                            Some((p, l)) if *p == period => *l += task.power,
                            _ => load.push((period, task.power)),
                        }
                    }
                    price_load.push(load);
                }
            }
        }

        let n = vars.len();
        let mut constraints = Vec::new();

        for j in 0..inst.tasks.len() {
            let mut coeffs = vec![0.0; n];
            for (v, var) in vars.iter().enumerate() {
                if var.task == j {
                    coeffs[v] = 1.0;
                }
            }
            constraints.push(Constraint {
                coeffs,
                relation: Relation::Eq,
                rhs: 1.0,
            });
        }

        for machine in 0..machines {
            for slot in 0..horizon {
                let mut coeffs = vec![0.0; n];
                let mut any = false;
                for (v, var) in vars.iter().enumerate() {
                    if var.machine != machine {
                        continue;
                    }
                    let task = &inst.tasks[var.task];
                    if (var.start as usize) <= slot && slot < (var.start + task.duration) as usize {
                        coeffs[v] = task.resource as f64;
                        any = true;
                    }
                }
                if any {
                    constraints.push(Constraint {
                        coeffs,
                        relation: Relation::Le,
                        rhs: inst.capacity as f64,
                    });
                }
            }
        }

        Ok(ScheduleModel {
            integral: vec![true; n],
            base: LpProblem {
                objective: vec![0.0; n],
                constraints,
                bounds: vec![(0.0, 1.0); n],
            },
            price_load,
            price_count: inst.price_count(),
            vars,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn price_count(&self) -> usize {
        self.price_count
    }

    pub fn vars(&self) -> &[StartVar] {
        &self.vars
    }

    pub fn integral(&self) -> &[bool] {
        &self.integral
    }

    /// Constraint rows shared by every day.
    pub fn base_problem(&self) -> &LpProblem {
        &self.base
    }

    /// Objective coefficients for one day of prices.
    pub fn objective_for(&self, prices: &[f64]) -> Result<Vec<f64>> {
        if prices.len() != self.price_count {
            return Err(Error::DimensionMismatch {
                expected: self.price_count,
                got: prices.len(),
            });
        }
        Ok(self
            .price_load
            .iter()
            .map(|load| load.iter().map(|&(p, l)| l * prices[p]).sum())
            .collect())
    }

    /// Full problem for one day of prices.
    pub fn problem_for(&self, prices: &[f64]) -> Result<LpProblem> {
        let mut problem = self.base.clone();
        problem.objective = self.objective_for(prices)?;
        Ok(problem)
    }

    /// Project a start-variable vector to energy usage per price period.
    /// The inner product of prices with this projection equals the
    /// schedule's energy cost, fractional solutions included.
    pub fn usage_of(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.vars.len());
        let mut usage = vec![0.0; self.price_count];
        for (v, load) in self.price_load.iter().enumerate() {
            if x[v] != 0.0 {
                for &(p, l) in load {
                    usage[p] += x[v] * l;
                }
            }
        }
        usage
    }
}

/// Build the day's MILP: constraint rows, price-derived objective, and the
/// integrality mask.
pub fn build_milp(inst: &SchedulingInstance, prices: &[f64]) -> Result<(LpProblem, Vec<bool>)> {
    let model = ScheduleModel::build(inst)?;
    let problem = model.problem_for(prices)?;
    Ok((problem, model.integral.clone()))
}

/// Size classes for generated instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceClass {
    /// 10 tasks on 3 machines, hourly slots.
    Easy10,
    /// 15 tasks on 3 machines, hourly slots.
    Easy15,
    /// 20 tasks on 3 machines, hourly slots.
    Easy20,
    /// 20 tasks on 3 machines, half-hour slots over the same day, so every
    /// price period spans two slots and relaxations get noticeably harder.
    /// Task windows span the whole horizon, making the schedule chase cheap
    /// periods wherever they fall.
    HardLike,
}

impl InstanceClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            InstanceClass::Easy10 => "easy10",
            InstanceClass::Easy15 => "easy15",
            InstanceClass::Easy20 => "easy20",
            InstanceClass::HardLike => "hardlike",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "easy10" => Some(InstanceClass::Easy10),
            "easy15" => Some(InstanceClass::Easy15),
            "easy20" => Some(InstanceClass::Easy20),
            "hardlike" => Some(InstanceClass::HardLike),
            _ => None,
        }
    }
}

/// Greedy earliest-fit placement; proves the instance schedulable.
fn placeable(inst: &SchedulingInstance) -> bool {
    let horizon = inst.horizon as usize;
    let machines = inst.machine_count as usize;
    let mut used = vec![vec![0u32; horizon]; machines];

    let mut order: Vec<usize> = (0..inst.tasks.len()).collect();
    order.sort_by_key(|&j| (inst.tasks[j].earliest_start, j));

    'tasks: for &j in &order {
        let t = &inst.tasks[j];
        for start in t.earliest_start..=(t.latest_end - t.duration) {
            for m in 0..machines {
                let fits = (start..start + t.duration)
                    .all(|s| used[m][s as usize] + t.resource <= inst.capacity);
                if fits {
                    for s in start..start + t.duration {
                        used[m][s as usize] += t.resource;
                    }
                    continue 'tasks;
                }
            }
        }
        return false;
    }
    true
}

/// Generate a random schedulable instance of the given class. The same
/// seed always yields the same instance.
pub fn generate_instance(class: InstanceClass, seed: u64) -> Result<SchedulingInstance> {
    let (n_tasks, horizon, slots_per_price, max_duration) = match class {
        InstanceClass::Easy10 => (10, 48, 1, 8),
        InstanceClass::Easy15 => (15, 48, 1, 8),
        InstanceClass::Easy20 => (20, 48, 1, 8),
        InstanceClass::HardLike => (20, 96, 2, 4),
    };
    let machine_count = 3;
    let capacity = 10;

    let slack_cap = match class {
        InstanceClass::HardLike => horizon,
        _ => 12 * slots_per_price,
    };

    for attempt in 0..50u64 {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9E3779B97F4A7C15)));
        let tasks = (0..n_tasks)
            .map(|_| {
                let duration = rng.gen_range(1..=max_duration);
                let earliest_start = rng.gen_range(0..=horizon - duration);
                let max_slack = horizon - earliest_start - duration;
                let slack = rng.gen_range(0..=max_slack.min(slack_cap));
                let power = (rng.gen_range(1.0..10.0) * 10.0f64).round() / 10.0;
                Task {
                    duration,
                    earliest_start,
                    latest_end: earliest_start + duration + slack,
                    resource: rng.gen_range(1..=5),
                    power,
                }
            })
            .collect();
        let inst = SchedulingInstance {
            machine_count,
            capacity,
            horizon,
            slots_per_price,
            tasks,
        };
        if placeable(&inst) {
            return Ok(inst);
        }
    }
    Err(Error::invalid_instance(
        class.as_str(),
        format!("no schedulable instance found for seed {seed}"),
    ))
}

/// Write an instance in the sectioned text format.
pub fn emit_instance(inst: &SchedulingInstance) -> String {
    let mut out = String::new();
    out.push_str(&format!("machines {}\n", inst.machine_count));
    out.push_str(&format!("capacity {}\n", inst.capacity));
    out.push_str(&format!("horizon {}\n", inst.horizon));
    out.push_str(&format!("slots_per_price {}\n", inst.slots_per_price));
    out.push_str(&format!("tasks {}\n", inst.tasks.len()));
    out.push_str("# duration earliest_start latest_end resource power\n");
    for t in &inst.tasks {
        out.push_str(&format!(
            "task {} {} {} {} {}\n",
            t.duration, t.earliest_start, t.latest_end, t.resource, t.power
        ));
    }
    out
}

/// Parse the sectioned text format. `origin` names the source in errors.
pub fn parse_instance(text: &str, origin: &str) -> Result<SchedulingInstance> {
    let mut header: Vec<(String, u64, usize)> = Vec::new();
    let mut tasks: Vec<Task> = Vec::new();
    let mut expected_tasks: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "machines" | "capacity" | "horizon" | "slots_per_price" | "tasks" => {
                if fields.len() != 2 {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("`{}` takes exactly one value", fields[0]),
                    ));
                }
                let value: u64 = fields[1].parse().map_err(|_| {
                    Error::parse(origin, lineno, format!("`{}` is not an integer", fields[1]))
                })?;
                if fields[0] == "tasks" {
                    expected_tasks = Some(value as usize);
                } else {
                    header.push((fields[0].to_string(), value, lineno));
                }
            }
            "task" => {
                if expected_tasks.is_none() {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        "task line before the `tasks` count",
                    ));
                }
                if fields.len() != 6 {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        "task lines need duration, earliest_start, latest_end, resource, power",
                    ));
                }
                let int = |s: &str| -> Result<u32> {
                    s.parse().map_err(|_| {
                        Error::parse(origin, lineno, format!("`{s}` is not an integer"))
                    })
                };
                let power: f64 = fields[5].parse().map_err(|_| {
                    Error::parse(origin, lineno, format!("`{}` is not a number", fields[5]))
                })?;
                tasks.push(Task {
                    duration: int(fields[1])?,
                    earliest_start: int(fields[2])?,
                    latest_end: int(fields[3])?,
                    resource: int(fields[4])?,
                    power,
                });
            }
            other => {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("unknown directive `{other}`"),
                ));
            }
        }
    }

    let get = |key: &str| -> Result<u32> {
        header
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| *v as u32)
            .ok_or_else(|| Error::parse(origin, 0, format!("missing `{key}` header")))
    };
    let inst = SchedulingInstance {
        machine_count: get("machines")?,
        capacity: get("capacity")?,
        horizon: get("horizon")?,
        slots_per_price: get("slots_per_price")?,
        tasks,
    };
    match expected_tasks {
        None => return Err(Error::parse(origin, 0, "missing `tasks` header")),
        Some(n) if n != inst.tasks.len() => {
            return Err(Error::parse(
                origin,
                0,
                format!("header promises {n} tasks, found {}", inst.tasks.len()),
            ));
        }
        _ => {}
    }
    inst.validate()
        .map_err(|e| Error::parse(origin, 0, e))?;
    Ok(inst)
}

/// Check a raw start-variable vector against the instance and return its
/// energy cost under the given prices.
pub fn validate_schedule(
    model: &ScheduleModel,
    inst: &SchedulingInstance,
    x: &[f64],
    prices: &[f64],
) -> Result<f64> {
    if x.len() != model.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: model.n_vars(),
            got: x.len(),
        });
    }
    let mut chosen = vec![0u32; inst.tasks.len()];
    let horizon = inst.horizon as usize;
    let machines = inst.machine_count as usize;
    let mut used = vec![vec![0u32; horizon]; machines];
    for (v, &val) in x.iter().enumerate() {
        if (val - 1.0).abs() < 1e-6 {
            let var = model.vars[v];
            let t = &inst.tasks[var.task];
            chosen[var.task] += 1;
            for s in var.start..var.start + t.duration {
                used[var.machine][s as usize] += t.resource;
            }
        } else if val.abs() > 1e-6 {
            return Err(Error::invalid_instance(
                "schedule",
                format!("variable {v} is fractional ({val})"),
            ));
        }
    }
    for (j, &count) in chosen.iter().enumerate() {
        if count != 1 {
            return Err(Error::invalid_instance(
                "schedule",
                format!("task {j} is scheduled {count} times"),
            ));
        }
    }
    for (m, row) in used.iter().enumerate() {
        for (s, &u) in row.iter().enumerate() {
            if u > inst.capacity {
                return Err(Error::invalid_instance(
                    "schedule",
                    format!("machine {m} over capacity at slot {s}"),
                ));
            }
        }
    }
    let usage = model.usage_of(x);
    Ok(crate::problem::dot(prices, &usage))
}
