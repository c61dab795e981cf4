//! Discrete-event uniprocessor simulation of IMC and EMC task sets under
//! EDF-VD.
//!
//! Time is integral: every rational quantity of the run (periods, budgets,
//! virtual deadline offsets, horizon) is scaled by a common time base so a
//! tick is `1 / time_base` time units and all arithmetic is exact.
//!
//! Releases are strictly periodic, starting together at time 0. LO jobs
//! always demand `C^LO`. HI jobs demand `C^LO` until a scenario makes one of
//! them overrun; from the switch on every HI job demands `C^HI`.
//!
//! At each instant the simulator, in order: charges the running job, handles
//! its completion or budget exhaustion (which may switch the mode), records
//! deadline misses, releases new jobs, and dispatches the job with the
//! earliest priority deadline (ties to the task declared first).

mod check;

pub use check::{check_trace, TraceViolation};

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::model::{ModelError, ModelKind, TaskId, TaskSet};
use crate::rational::{self, Rational};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("deadline scaling factor must lie in (0, 1], got {0}")]
    XOutOfRange(Rational),
    #[error("horizon must be positive, got {0}")]
    BadHorizon(Rational),
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("task {0} is not a HI task")]
    NotHiTask(TaskId),
    #[error("time base {0} is too fine for this horizon")]
    Overflow(BigInt),
}

/// How jobs behave during a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Every job stays within `C^LO`; the mode never switches.
    LoConforming,
    /// The given job (0-based) of a HI task runs to `C^HI`.
    SwitchAtJob { task: TaskId, job: u64 },
    /// A seeded choice of HI task and job overruns; afterwards every HI job
    /// uses its full `C^HI`.
    FullBudgets,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub seed: u64,
}

impl Scenario {
    pub fn lo_conforming() -> Self {
        Scenario {
            kind: ScenarioKind::LoConforming,
            seed: 0,
        }
    }

    pub fn switch_at(task: impl Into<TaskId>, job: u64) -> Self {
        Scenario {
            kind: ScenarioKind::SwitchAtJob {
                task: task.into(),
                job,
            },
            seed: 0,
        }
    }

    pub fn full_budgets(seed: u64) -> Self {
        Scenario {
            kind: ScenarioKind::FullBudgets,
            seed,
        }
    }
}

/// Parses `lo`, `full`, or `switch:<task>:<job>`.
impl FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lo" | "lo-conforming" => Ok(ScenarioKind::LoConforming),
            "full" | "full-budgets" => Ok(ScenarioKind::FullBudgets),
            _ => {
                let rest = s
                    .strip_prefix("switch:")
                    .ok_or_else(|| format!("unknown scenario {s:?} (expected lo, full or switch:<task>:<job>)"))?;
                let (task, job) = rest
                    .rsplit_once(':')
                    .ok_or_else(|| format!("scenario {s:?} needs switch:<task>:<job>"))?;
                let job = job.parse().map_err(|_| format!("bad job index in {s:?}"))?;
                Ok(ScenarioKind::SwitchAtJob {
                    task: task.into(),
                    job,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Release,
    Start,
    Preempt,
    Complete,
    Suspend,
    ModeSwitch,
    DeadlineMiss,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Release => "release",
            EventKind::Start => "start",
            EventKind::Preempt => "preempt",
            EventKind::Complete => "complete",
            EventKind::Suspend => "suspend",
            EventKind::ModeSwitch => "mode_switch",
            EventKind::DeadlineMiss => "deadline_miss",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub tick: i128,
    pub kind: EventKind,
    /// Index into the task set.
    pub task: usize,
    /// 0-based release count of the task.
    pub job: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Miss {
    pub task: usize,
    pub job: u64,
    pub tick: i128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    /// Ticks per time unit.
    pub time_base: i128,
    /// Releases happen strictly before this tick.
    pub horizon: i128,
    pub task_ids: Vec<TaskId>,
    pub events: Vec<Event>,
    pub mode_switch: Option<i128>,
    pub misses: Vec<Miss>,
}

impl Trace {
    pub fn time(&self, tick: i128) -> Rational {
        Rational::new(tick.into(), self.time_base.into())
    }

    pub fn mode_switch_time(&self) -> Option<Rational> {
        self.mode_switch.map(|t| self.time(t))
    }

    /// `{ "mode_switch": t|null, "events": [{t, kind, task, job}], "misses": [...] }`
    /// with times as integers or `"p/q"` strings.
    pub fn to_json(&self) -> serde_json::Value {
        let t = |tick: i128| rational_json(&self.time(tick));
        json!({
            "mode_switch": self.mode_switch.map(t),
            "events": self.events.iter().map(|e| json!({
                "t": t(e.tick),
                "kind": e.kind.as_str(),
                "task": self.task_ids[e.task].as_str(),
                "job": e.job,
            })).collect::<Vec<_>>(),
            "misses": self.misses.iter().map(|m| json!({
                "t": t(m.tick),
                "task": self.task_ids[m.task].as_str(),
                "job": m.job,
            })).collect::<Vec<_>>(),
        })
    }
}

fn rational_json(r: &Rational) -> serde_json::Value {
    match (r.is_integer(), r.numer().to_i64()) {
        (true, Some(n)) => json!(n),
        _ => json!(rational::display(r)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobState {
    Ready,
    Running,
    Suspended,
    Completed,
    Missed,
}

/// A released job; all times in ticks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub task: usize,
    pub index: u64,
    pub release: i128,
    pub abs_deadline: i128,
    /// `release + x·T` for HI jobs.
    pub virtual_deadline: Option<i128>,
    pub executed: i128,
    pub budget: i128,
    pub demand: i128,
    pub state: JobState,
}

impl Job {
    /// Execution still allowed before the job completes or hits its budget.
    fn remaining(&self) -> i128 {
        self.demand.min(self.budget) - self.executed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Lo,
    Hi,
}

/// Task parameters scaled to ticks.
#[derive(Debug, Clone)]
pub(crate) struct TaskTicks {
    pub hi: bool,
    pub period: i128,
    pub c_lo: i128,
    pub c_hi: i128,
    /// `x·T` for HI tasks, `T` for LO tasks.
    pub vd_offset: i128,
    /// Extended period of EMC LO tasks; the period otherwise.
    pub t_max: i128,
}

pub(crate) struct Timing {
    pub time_base: i128,
    pub horizon: i128,
    pub tasks: Vec<TaskTicks>,
}

fn to_ticks(r: &Rational, base: &BigInt) -> Result<i128, SimError> {
    let scaled = r * Rational::from_integer(base.clone());
    debug_assert!(scaled.is_integer());
    scaled
        .to_integer()
        .to_i128()
        .ok_or_else(|| SimError::Overflow(base.clone()))
}

pub(crate) fn timing(task_set: &TaskSet, x: &Rational, horizon: &Rational) -> Result<Timing, SimError> {
    let emc = task_set.model_kind == ModelKind::Emc;
    let mut values: Vec<Rational> = vec![horizon.clone()];
    for t in &task_set.tasks {
        values.extend([t.period.clone(), t.wcet_lo.clone(), t.wcet_hi.clone(), x * &t.period]);
        if let Some(t_max) = &t.extended_period {
            values.push(t_max.clone());
        }
    }
    let base = rational::common_denominator(&values);
    // Leave headroom for deadlines past the horizon and sums of ticks.
    let limit = BigInt::from(i128::MAX >> 8);
    let mut max_value = horizon.clone();
    for t in &task_set.tasks {
        max_value = max_value.max(t.extended_period.clone().unwrap_or_else(|| t.period.clone()));
    }
    if (max_value.ceil().to_integer() * 4 + 1) * &base > limit {
        return Err(SimError::Overflow(base));
    }

    let mut tasks = Vec::with_capacity(task_set.tasks.len());
    for t in &task_set.tasks {
        let period = to_ticks(&t.period, &base)?;
        let t_max = match (&t.extended_period, emc && t.is_lo()) {
            (Some(t_max), true) => to_ticks(t_max, &base)?,
            _ => period,
        };
        tasks.push(TaskTicks {
            hi: t.is_hi(),
            period,
            c_lo: to_ticks(&t.wcet_lo, &base)?,
            c_hi: to_ticks(&t.wcet_hi, &base)?,
            vd_offset: if t.is_hi() { to_ticks(&(x * &t.period), &base)? } else { period },
            t_max,
        });
    }
    Ok(Timing {
        time_base: base.to_i128().ok_or_else(|| SimError::Overflow(base.clone()))?,
        horizon: to_ticks(horizon, &base)?,
        tasks,
    })
}

/// Twice the hyperperiod when every period is an integer, capped at twenty
/// times the largest period.
pub fn default_horizon(task_set: &TaskSet) -> Rational {
    let Some(max_period) = task_set.max_period() else {
        return Rational::one();
    };
    let cap = max_period * Rational::from_integer(20.into());
    match task_set.integer_hyperperiod() {
        Some(h) => Rational::from_integer(h * 2).min(cap),
        None => cap,
    }
}

fn check_x(x: &Rational) -> Result<(), SimError> {
    if !x.is_positive() || x > &Rational::one() {
        return Err(SimError::XOutOfRange(x.clone()));
    }
    Ok(())
}

/// The (task index, job index) that overruns in `scenario`, if any.
fn overrun_job(task_set: &TaskSet, timing: &Timing, scenario: &Scenario) -> Result<Option<(usize, u64)>, SimError> {
    match &scenario.kind {
        ScenarioKind::LoConforming => Ok(None),
        ScenarioKind::SwitchAtJob { task, job } => {
            let i = task_set
                .position(task)
                .ok_or_else(|| SimError::UnknownTask(task.clone()))?;
            if !task_set.tasks[i].is_hi() {
                return Err(SimError::NotHiTask(task.clone()));
            }
            Ok(Some((i, *job)))
        }
        ScenarioKind::FullBudgets => {
            let candidates: Vec<usize> = timing
                .tasks
                .iter()
                .enumerate()
                .filter(|(_, t)| t.hi && t.c_hi > t.c_lo)
                .map(|(i, _)| i)
                .collect();
            if candidates.is_empty() {
                return Ok(None);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
            let task = candidates[rng.gen_range(0..candidates.len())];
            let last = (timing.horizon / 2 / timing.tasks[task].period).max(0) as u64;
            Ok(Some((task, rng.gen_range(0..=last))))
        }
    }
}

struct Sim<'a> {
    tasks: &'a [TaskTicks],
    emc: bool,
    horizon: i128,
    overrun: Option<(usize, u64)>,
    t: i128,
    mode: Mode,
    active: Vec<Option<Job>>,
    next_release: Vec<i128>,
    release_count: Vec<u64>,
    running: Option<usize>,
    events: Vec<Event>,
    misses: Vec<Miss>,
    mode_switch: Option<i128>,
}

impl Sim<'_> {
    fn push(&mut self, kind: EventKind, task: usize, job: u64) {
        self.events.push(Event {
            tick: self.t,
            kind,
            task,
            job,
        });
    }

    fn priority(&self, job: &Job) -> i128 {
        match (self.mode, job.virtual_deadline) {
            (Mode::Lo, Some(vd)) => vd,
            _ => job.abs_deadline,
        }
    }

    fn release_due(&mut self) {
        for i in 0..self.tasks.len() {
            if self.next_release[i] != self.t || self.t >= self.horizon {
                continue;
            }
            if let Some(old) = self.active[i].take() {
                // Only reachable if a deadline lies past the next release.
                self.miss(old);
            }
            let task = &self.tasks[i];
            let index = self.release_count[i];
            self.release_count[i] += 1;
            let stretched = self.emc && !task.hi && self.mode == Mode::Hi;
            let spacing = if stretched { task.t_max } else { task.period };
            self.next_release[i] = self.t + spacing;
            let overruns = task.hi && (self.mode == Mode::Hi || self.overrun == Some((i, index)));
            let budget = match (self.mode, task.hi, self.emc) {
                (Mode::Lo, _, _) | (Mode::Hi, false, true) => task.c_lo,
                (Mode::Hi, _, _) => task.c_hi,
            };
            let job = Job {
                task: i,
                index,
                release: self.t,
                abs_deadline: self.t + spacing,
                virtual_deadline: task.hi.then_some(self.t + task.vd_offset),
                executed: 0,
                budget,
                demand: if overruns { task.c_hi } else { task.c_lo },
                state: JobState::Ready,
            };
            self.push(EventKind::Release, i, index);
            if budget == 0 {
                self.push(EventKind::Suspend, i, index);
            } else {
                self.active[i] = Some(job);
            }
        }
    }

    fn miss(&mut self, mut job: Job) {
        job.state = JobState::Missed;
        self.push(EventKind::DeadlineMiss, job.task, job.index);
        self.misses.push(Miss {
            task: job.task,
            job: job.index,
            tick: self.t,
        });
        if self.running == Some(job.task) {
            self.running = None;
        }
    }

    fn switch_mode(&mut self, trigger: usize) {
        let index = self.active[trigger].as_ref().map_or(0, |j| j.index);
        self.mode = Mode::Hi;
        self.mode_switch = Some(self.t);
        self.push(EventKind::ModeSwitch, trigger, index);
        for i in 0..self.tasks.len() {
            let task = self.tasks[i].clone();
            if !task.hi && self.emc {
                // The pending job and all later releases use the extended period.
                let last_release = self.next_release[i] - task.period;
                self.next_release[i] = last_release + task.t_max;
                if let Some(job) = self.active[i].as_mut() {
                    job.abs_deadline = job.release + task.t_max;
                }
                continue;
            }
            let Some(job) = self.active[i].as_mut() else { continue };
            job.budget = task.c_hi;
            if task.hi {
                job.demand = task.c_hi;
            } else if job.executed >= task.c_hi {
                let job = self.active[i].take().expect("present");
                self.push(EventKind::Suspend, i, job.index);
                if self.running == Some(i) {
                    self.running = None;
                }
            }
        }
    }

    /// Handles the running job reaching its completion or budget at `t`.
    fn settle_running(&mut self) {
        let Some(i) = self.running else { return };
        let job = self.active[i].as_ref().expect("running job is active");
        if job.remaining() > 0 {
            return;
        }
        let index = job.index;
        if job.executed >= job.demand {
            self.active[i] = None;
            self.running = None;
            self.push(EventKind::Complete, i, index);
        } else if self.tasks[i].hi && self.mode == Mode::Lo {
            self.switch_mode(i);
        } else {
            self.active[i] = None;
            self.running = None;
            self.push(EventKind::Suspend, i, index);
        }
    }

    fn check_deadlines(&mut self) {
        for i in 0..self.tasks.len() {
            if self.active[i].as_ref().is_some_and(|j| j.abs_deadline <= self.t) {
                let job = self.active[i].take().expect("present");
                self.miss(job);
            }
        }
    }

    fn dispatch(&mut self) {
        let best = self
            .active
            .iter()
            .flatten()
            .min_by_key(|j| (self.priority(j), j.task))
            .map(|j| j.task);
        if best == self.running {
            return;
        }
        if let Some(prev) = self.running {
            let job = self.active[prev].as_mut().expect("running job is active");
            job.state = JobState::Ready;
            let index = job.index;
            self.push(EventKind::Preempt, prev, index);
        }
        self.running = best;
        if let Some(i) = best {
            let job = self.active[i].as_mut().expect("present");
            job.state = JobState::Running;
            let index = job.index;
            self.push(EventKind::Start, i, index);
        }
    }

    fn next_tick(&self) -> Option<i128> {
        let releases = self.next_release.iter().copied().filter(|&r| r < self.horizon);
        let deadlines = self.active.iter().flatten().map(|j| j.abs_deadline);
        let finish = self
            .running
            .and_then(|i| self.active[i].as_ref())
            .map(|j| self.t + j.remaining());
        releases.chain(deadlines).chain(finish).min()
    }

    fn run(&mut self) {
        self.release_due();
        self.dispatch();
        while let Some(next) = self.next_tick() {
            if let Some(i) = self.running {
                self.active[i].as_mut().expect("running job is active").executed += next - self.t;
            }
            self.t = next;
            self.settle_running();
            self.check_deadlines();
            self.release_due();
            self.dispatch();
        }
    }
}

/// Simulates `task_set` with deadline scaling factor `x` until `horizon`,
/// then lets pending jobs drain.
///
/// `x = 1` runs plain EDF on the real deadlines (the mode switch and its
/// budget rules still apply).
pub fn simulate(task_set: &TaskSet, x: &Rational, scenario: &Scenario, horizon: &Rational) -> Result<Trace, SimError> {
    task_set.ensure_valid()?;
    check_x(x)?;
    if !horizon.is_positive() {
        return Err(SimError::BadHorizon(horizon.clone()));
    }
    let timing = timing(task_set, x, horizon)?;
    let overrun = overrun_job(task_set, &timing, scenario)?;
    let n = task_set.tasks.len();
    let mut sim = Sim {
        tasks: &timing.tasks,
        emc: task_set.model_kind == ModelKind::Emc,
        horizon: timing.horizon,
        overrun,
        t: 0,
        mode: Mode::Lo,
        active: vec![None; n],
        next_release: vec![0; n],
        release_count: vec![0; n],
        running: None,
        events: Vec::new(),
        misses: Vec::new(),
        mode_switch: None,
    };
    sim.run();
    Ok(Trace {
        time_base: timing.time_base,
        horizon: timing.horizon,
        task_ids: task_set.tasks.iter().map(|t| t.id.clone()).collect(),
        events: sim.events,
        mode_switch: sim.mode_switch,
        misses: sim.misses,
    })
}

/// GCD of all event ticks and the time base; handy to print traces on the
/// coarsest grid.
pub fn tick_gcd(trace: &Trace) -> i128 {
    trace
        .events
        .iter()
        .fold(trace.time_base, |g, e| g.gcd(&e.tick))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{two_task_example, Task};
    use crate::rational::{int, rat};

    fn kinds_at(trace: &Trace, t: &Rational) -> Vec<(EventKind, String)> {
        trace
            .events
            .iter()
            .filter(|e| &trace.time(e.tick) == t)
            .map(|e| (e.kind, trace.task_ids[e.task].0.clone()))
            .collect()
    }

    fn completion(trace: &Trace, task: &str, job: u64) -> Rational {
        let e = trace
            .events
            .iter()
            .find(|e| e.kind == EventKind::Complete && trace.task_ids[e.task].as_str() == task && e.job == job)
            .expect("job completes");
        trace.time(e.tick)
    }

    #[test]
    fn two_task_example_switch_in_second_period() {
        let ts = two_task_example();
        let trace = simulate(&ts, &rat(7, 10), &Scenario::switch_at("tau2", 1), &int(30)).unwrap();
        assert_eq!(trace.mode_switch_time(), Some(int(14)));
        assert!(trace.misses.is_empty());
        assert_eq!(
            kinds_at(&trace, &int(14)),
            vec![
                (EventKind::ModeSwitch, "tau2".into()),
                (EventKind::Preempt, "tau2".into()),
                (EventKind::Start, "tau1".into()),
            ]
        );
        // tau1 had one unit before the switch and runs one more.
        assert_eq!(kinds_at(&trace, &int(15))[0], (EventKind::Suspend, "tau1".into()));
        assert_eq!(completion(&trace, "tau2", 1), int(18));
        assert!(check_trace(&ts, &rat(7, 10), &trace).is_empty());
    }

    #[test]
    fn lo_conforming_never_switches() {
        let ts = TaskSet::imc(vec![
            Task::lo("a", int(5), int(1), int(1)),
            Task::hi("b", int(7), int(2), int(4)),
            Task::hi("c", int(11), int(1), int(3)),
        ]);
        let trace = simulate(&ts, &rat(3, 5), &Scenario::lo_conforming(), &int(770)).unwrap();
        assert_eq!(trace.mode_switch, None);
        assert!(trace.misses.is_empty());
        assert!(check_trace(&ts, &rat(3, 5), &trace).is_empty());
    }

    #[test]
    fn single_hi_task_switches_at_lo_budget() {
        let ts = TaskSet::imc(vec![Task::hi("h", int(10), int(3), int(8))]);
        let trace = simulate(&ts, &rat(1, 2), &Scenario::switch_at("h", 0), &int(10)).unwrap();
        assert_eq!(trace.mode_switch_time(), Some(int(3)));
        assert_eq!(completion(&trace, "h", 0), int(8));
        assert!(trace.misses.is_empty());
    }

    #[test]
    fn overload_misses_are_recorded() {
        let ts = TaskSet::imc(vec![
            Task::hi("a", int(4), int(2), int(3)),
            Task::hi("b", int(4), int(2), int(3)),
        ]);
        let trace = simulate(&ts, &rat(1, 2), &Scenario::switch_at("a", 0), &int(8)).unwrap();
        assert!(!trace.misses.is_empty());
        let v = check_trace(&ts, &rat(1, 2), &trace);
        assert!(v.iter().any(|v| matches!(v, TraceViolation::DeadlineMiss { .. })));
    }

    #[test]
    fn dropped_lo_tasks_do_not_run_after_switch() {
        let ts = TaskSet::imc(vec![
            Task::lo("l", int(6), int(2), int(0)),
            Task::hi("h", int(8), int(2), int(5)),
        ]);
        let trace = simulate(&ts, &rat(1, 2), &Scenario::switch_at("h", 0), &int(48)).unwrap();
        let switch = trace.mode_switch.unwrap();
        assert!(trace
            .events
            .iter()
            .filter(|e| e.tick > switch && e.task == 0)
            .all(|e| matches!(e.kind, EventKind::Release | EventKind::Suspend)));
        assert!(check_trace(&ts, &rat(1, 2), &trace).is_empty());
    }

    #[test]
    fn emc_with_unstretched_period_matches_imc() {
        let emc = TaskSet::emc(vec![
            Task::lo("l", int(6), int(2), int(2)).with_extended_period(int(6)),
            Task::hi("h", int(8), int(2), int(4)),
        ]);
        let mut imc = emc.clone();
        imc.model_kind = ModelKind::Imc;
        imc.tasks[0].extended_period = None;
        for seed in 0..5 {
            let s = Scenario::full_budgets(seed);
            let a = simulate(&emc, &rat(1, 2), &s, &int(48)).unwrap();
            let b = simulate(&imc, &rat(1, 2), &s, &int(48)).unwrap();
            assert_eq!(a.events, b.events);
        }
    }

    #[test]
    fn emc_stretches_lo_periods_after_switch() {
        let ts = TaskSet::emc(vec![
            Task::lo("l", int(5), int(1), int(1)).with_extended_period(int(8)),
            Task::hi("h", int(10), int(2), int(6)),
        ]);
        let trace = simulate(&ts, &rat(1, 2), &Scenario::switch_at("h", 0), &int(40)).unwrap();
        let releases: Vec<Rational> = trace
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Release && e.task == 0)
            .map(|e| trace.time(e.tick))
            .collect();
        // Switch at 3 (h runs 1..3 after l); the release due at 5 moves to 8.
        assert_eq!(trace.mode_switch_time(), Some(int(3)));
        assert_eq!(releases, vec![int(0), int(8), int(16), int(24), int(32)]);
        assert!(check_trace(&ts, &rat(1, 2), &trace).is_empty());
    }

    #[test]
    fn deterministic_for_a_seed() {
        let ts = two_task_example();
        let a = simulate(&ts, &rat(7, 10), &Scenario::full_budgets(9), &int(180)).unwrap();
        let b = simulate(&ts, &rat(7, 10), &Scenario::full_budgets(9), &int(180)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ts = two_task_example();
        assert!(matches!(simulate(&ts, &int(0), &Scenario::lo_conforming(), &int(10)), Err(SimError::XOutOfRange(_))));
        assert!(matches!(simulate(&ts, &rat(1, 2), &Scenario::lo_conforming(), &int(0)), Err(SimError::BadHorizon(_))));
        assert!(matches!(
            simulate(&ts, &rat(1, 2), &Scenario::switch_at("tau1", 0), &int(10)),
            Err(SimError::NotHiTask(_))
        ));
        assert!(matches!(
            simulate(&ts, &rat(1, 2), &Scenario::switch_at("nope", 0), &int(10)),
            Err(SimError::UnknownTask(_))
        ));
    }

    #[test]
    fn fractional_times_use_a_common_base() {
        let ts = TaskSet::imc(vec![
            Task::lo("l", rat(5, 2), rat(1, 3), rat(1, 4)),
            Task::hi("h", int(3), rat(1, 2), rat(7, 5)),
        ]);
        let x = rat(2, 3);
        let trace = simulate(&ts, &x, &Scenario::switch_at("h", 2), &int(15)).unwrap();
        assert_eq!(trace.time_base % 60, 0);
        assert!(check_trace(&ts, &x, &trace).is_empty());
    }

    #[test]
    fn default_horizons() {
        assert_eq!(default_horizon(&two_task_example()), int(180));
        let ts = TaskSet::imc(vec![Task::lo("a", int(997), int(1), int(1)), Task::lo("b", int(991), int(1), int(1))]);
        assert_eq!(default_horizon(&ts), int(19940));
        let ts = TaskSet::imc(vec![Task::lo("a", rat(5, 2), int(1), int(1))]);
        assert_eq!(default_horizon(&ts), int(50));
    }

    #[test]
    fn scenario_parsing() {
        assert_eq!("lo".parse::<ScenarioKind>().unwrap(), ScenarioKind::LoConforming);
        assert_eq!("full".parse::<ScenarioKind>().unwrap(), ScenarioKind::FullBudgets);
        assert_eq!(
            "switch:tau2:1".parse::<ScenarioKind>().unwrap(),
            ScenarioKind::SwitchAtJob { task: "tau2".into(), job: 1 }
        );
        assert!("switch:tau2".parse::<ScenarioKind>().is_err());
        assert!("bogus".parse::<ScenarioKind>().is_err());
    }

    #[test]
    fn trace_json_shape() {
        let ts = two_task_example();
        let trace = simulate(&ts, &rat(7, 10), &Scenario::switch_at("tau2", 1), &int(20)).unwrap();
        let v = trace.to_json();
        assert_eq!(v["mode_switch"], json!(14));
        assert_eq!(v["events"][0], json!({"t": 0, "kind": "release", "task": "tau1", "job": 0}));
        assert_eq!(v["misses"], json!([]));
    }
}
