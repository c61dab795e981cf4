//! Acceptance-ratio sweeps over generated task sets, optional simulation of
//! accepted sets, and the CSV form of the results.
//!
//! Every task set of a sweep gets its own seed, `base_seed + global index`
//! where the index counts sets across all points in order. Results are
//! therefore identical whatever the thread count.

use std::io::{Read, Write};
use std::path::Path;

use num_traits::{One, Signed};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, Verdict, XPolicy};
use crate::gen::{self, GenError, GenParams, RRatio};
use crate::model::{self, TaskSet};
use crate::rational::{self, Rational};
use crate::sim::{self, Scenario, SimError};

/// Largest denominator of the `x` used in simulations.
pub const SIM_X_DENOMINATOR: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Uavg,
    Lambda,
    Alpha,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Uavg => "uavg",
            Axis::Lambda => "lambda",
            Axis::Alpha => "alpha",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Axis::Uavg, Axis::Lambda, Axis::Alpha].into_iter().find(|a| a.as_str() == s)
    }
}

/// A schedulability test applied to each generated set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestKind {
    /// The EDF-VD utilization test (plain-EDF verdicts count as accepted).
    #[serde(rename = "edfvd")]
    EdfVd,
    /// Plain EDF with full reservations: `U_LO^LO + U_HI^HI <= 1`.
    #[serde(rename = "worst_case_edf")]
    WorstCaseEdf,
}

impl TestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::EdfVd => "edfvd",
            TestKind::WorstCaseEdf => "worst_case_edf",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [TestKind::EdfVd, TestKind::WorstCaseEdf].into_iter().find(|t| t.as_str() == s)
    }
}

fn default_sets_per_point() -> usize {
    1000
}

fn default_tests() -> Vec<TestKind> {
    vec![TestKind::EdfVd]
}

fn default_scenarios() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Axis,
    #[serde(with = "rational::serde_rational_vec")]
    pub axis_values: Vec<Rational>,
    /// Generator parameters; the swept field is overridden per point and
    /// `seed` is the base seed.
    #[serde(default)]
    pub fixed: GenParams,
    #[serde(default = "default_sets_per_point")]
    pub sets_per_point: usize,
    #[serde(default = "default_tests")]
    pub tests: Vec<TestKind>,
    #[serde(default)]
    pub validate_with_sim: bool,
    #[serde(default = "default_scenarios")]
    pub sim_scenarios_per_set: usize,
}

impl SweepConfig {
    pub fn new(axis: Axis, axis_values: Vec<Rational>, fixed: GenParams) -> Self {
        SweepConfig {
            axis,
            axis_values,
            fixed,
            sets_per_point: default_sets_per_point(),
            tests: default_tests(),
            validate_with_sim: false,
            sim_scenarios_per_set: default_scenarios(),
        }
    }

    /// Generator parameters at one axis value.
    pub fn params_at(&self, value: &Rational) -> GenParams {
        let mut p = self.fixed.clone();
        match self.axis {
            Axis::Uavg => p.u_target = value.clone(),
            Axis::Lambda => p.lambda = value.clone(),
            Axis::Alpha => p.r_ratio = RRatio::Fixed(value.recip()),
        }
        p
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: String| Err(SweepError::Config(m));
        if self.sets_per_point == 0 {
            return bad("sets_per_point must be at least 1".into());
        }
        if self.tests.is_empty() {
            return bad("at least one test is needed".into());
        }
        for v in &self.axis_values {
            let in_unit = v.is_positive() && v <= &Rational::one();
            if matches!(self.axis, Axis::Lambda | Axis::Alpha) && !in_unit {
                return bad(format!("{} values must lie in (0, 1], got {v}", self.axis.as_str()));
            }
            self.params_at(v).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed CSV row {row}: {message}")]
    Parse { row: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: Rational,
    pub test: TestKind,
    pub accepted: usize,
    pub total: usize,
    pub ratio: f64,
    /// Accepted sets whose simulation missed a deadline or broke a rule.
    pub sim_misses: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Ratios of one test in axis order.
    pub fn ratios(&self, test: TestKind) -> Vec<f64> {
        self.rows.iter().filter(|r| r.test == test).map(|r| r.ratio).collect()
    }

    pub fn total_sim_misses(&self) -> usize {
        self.rows.iter().map(|r| r.sim_misses).sum()
    }
}

/// Whether `test` accepts the set, and the verdict used to simulate it.
pub fn apply_test(test: TestKind, task_set: &TaskSet) -> Result<Option<Verdict>, SweepError> {
    let u = model::utilizations(task_set).map_err(|e| SweepError::Config(e.to_string()))?;
    Ok(match test {
        TestKind::EdfVd => Some(analysis::analyze(&u, XPolicy::Min)).filter(Verdict::is_schedulable),
        TestKind::WorstCaseEdf => analysis::worst_case_reservation_test(&u).then_some(Verdict::WorstCaseReservationEdf),
    })
}

/// Outcome of simulating an accepted set under several scenarios.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SoundnessReport {
    pub scenarios: usize,
    /// Scenarios with at least one miss or checker violation.
    pub failed_scenarios: usize,
    pub mode_switches: usize,
    /// Descriptions of the first few problems.
    pub details: Vec<String>,
}

/// The `x` used for the `k`-th simulation of a set with this verdict:
/// `1` for plain EDF, otherwise a point of the admissible range with a
/// bounded denominator, alternating between its low and high ends.
pub fn simulation_x(verdict: &Verdict, k: usize) -> Option<Rational> {
    match verdict {
        Verdict::WorstCaseReservationEdf => Some(Rational::one()),
        Verdict::SchedulableEdfVd { range, .. } => {
            let policy = if k % 2 == 0 { XPolicy::Min } else { XPolicy::Max };
            Some(range.pick_with_denominator(policy, SIM_X_DENOMINATOR))
        }
        Verdict::Unschedulable(_) => None,
    }
}

/// Simulates an accepted set under `scenarios` seeded full-budget
/// scenarios and checks every trace.
pub fn check_soundness(task_set: &TaskSet, verdict: &Verdict, scenarios: usize, seed: u64) -> Result<SoundnessReport, SweepError> {
    let horizon = sim::default_horizon(task_set);
    let mut report = SoundnessReport {
        scenarios,
        ..SoundnessReport::default()
    };
    for k in 0..scenarios {
        let Some(x) = simulation_x(verdict, k) else { break };
        let scenario = Scenario::full_budgets(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64));
        let trace = sim::simulate(task_set, &x, &scenario, &horizon)?;
        report.mode_switches += usize::from(trace.mode_switch.is_some());
        let violations = sim::check_trace(task_set, &x, &trace);
        if !violations.is_empty() || !trace.misses.is_empty() {
            report.failed_scenarios += 1;
            if report.details.len() < 3 {
                report.details.push(format!(
                    "x={} scenario seed {}: {}",
                    rational::display(&x),
                    scenario.seed,
                    violations.first().map_or_else(|| "deadline miss".to_string(), |v| v.to_string())
                ));
            }
        }
    }
    Ok(report)
}

struct SetOutcome {
    point: usize,
    accepted: Vec<bool>,
    missed: Vec<bool>,
}

/// Runs the sweep on the current rayon pool.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult, SweepError> {
    config.validate()?;
    let n = config.sets_per_point;
    let base = config.fixed.seed;
    let params: Vec<GenParams> = config.axis_values.iter().map(|v| config.params_at(v)).collect();
    let outcomes: Vec<SetOutcome> = (0..params.len() * n)
        .into_par_iter()
        .map(|g| {
            let point = g / n;
            let seed = base.wrapping_add(g as u64);
            let ts = gen::generate_task_set(&params[point].with_seed(seed))?;
            let mut accepted = Vec::with_capacity(config.tests.len());
            let mut missed = Vec::with_capacity(config.tests.len());
            for &test in &config.tests {
                let verdict = apply_test(test, &ts)?;
                let miss = match (&verdict, config.validate_with_sim) {
                    (Some(v), true) => check_soundness(&ts, v, config.sim_scenarios_per_set, seed)?.failed_scenarios > 0,
                    _ => false,
                };
                accepted.push(verdict.is_some());
                missed.push(miss);
            }
            Ok(SetOutcome { point, accepted, missed })
        })
        .collect::<Result<_, SweepError>>()?;

    let mut rows = Vec::with_capacity(params.len() * config.tests.len());
    for (point, value) in config.axis_values.iter().enumerate() {
        for (ti, &test) in config.tests.iter().enumerate() {
            let here = outcomes.iter().filter(|o| o.point == point);
            let accepted = here.clone().filter(|o| o.accepted[ti]).count();
            let sim_misses = here.filter(|o| o.missed[ti]).count();
            rows.push(SweepRow {
                axis: config.axis,
                value: value.clone(),
                test,
                accepted,
                total: n,
                ratio: accepted as f64 / n as f64,
                sim_misses,
            });
        }
    }
    Ok(SweepResult { rows })
}

pub const CSV_HEADER: [&str; 7] = ["axis", "value", "test", "accepted", "total", "ratio", "sim_misses"];

/// Writes `axis,value,test,accepted,total,ratio,sim_misses` with a header
/// row and LF line endings; ratios carry four decimals.
pub fn emit_csv(result: &SweepResult, out: impl Write) -> Result<(), SweepError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &result.rows {
        w.write_record([
            r.axis.as_str().to_string(),
            format!("{}", rational::to_f64(&r.value)),
            r.test.as_str().to_string(),
            r.accepted.to_string(),
            r.total.to_string(),
            format!("{:.4}", r.ratio),
            r.sim_misses.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(result: &SweepResult, path: &Path) -> Result<(), SweepError> {
    let file = std::fs::File::create(path)?;
    emit_csv(result, std::io::BufWriter::new(file))
}

/// Parses the output of [`emit_csv`]. Values come back as the exact
/// decimals that were printed.
pub fn read_csv(input: impl Read) -> Result<SweepResult, SweepError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(SweepError::Parse {
            row: 0,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let err = |m: &str| SweepError::Parse { row, message: m.to_string() };
        let num = |k: usize| rec[k].parse::<usize>().map_err(|_| err(CSV_HEADER[k]));
        rows.push(SweepRow {
            axis: Axis::parse(&rec[0]).ok_or_else(|| err("axis"))?,
            value: rational::parse_rational(&rec[1]).map_err(|_| err("value"))?,
            test: TestKind::parse(&rec[2]).ok_or_else(|| err("test"))?,
            accepted: num(3)?,
            total: num(4)?,
            ratio: rec[5].parse().map_err(|_| err("ratio"))?,
            sim_misses: num(6)?,
        });
    }
    Ok(SweepResult { rows })
}

/// Axis values `start, start + step, ..., end` as exact decimals.
pub fn decimal_range(start: &str, end: &str, step: &str) -> Vec<Rational> {
    let p = |s: &str| rational::parse_rational(s).expect("decimal literal");
    let (mut v, end, step) = (p(start), p(end), p(step));
    let mut out = Vec::new();
    while v <= end {
        out.push(v.clone());
        v += &step;
    }
    out
}
