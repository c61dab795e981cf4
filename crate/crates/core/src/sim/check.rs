//! Independent replay of a trace against the execution rules.
//!
//! The checker rebuilds job deadlines and budgets from the task set, `x`
//! and the events alone; it shares no state with the simulator.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use super::{EventKind, Trace};
use crate::model::{ModelKind, TaskId, TaskSet};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    /// The trace itself is inconsistent (unordered times, unknown jobs,
    /// two running jobs, times off the tick grid).
    Malformed { time: Rational, message: String },
    DeadlineMiss { task: TaskId, job: u64, time: Rational },
    /// A job ran while a job with an earlier priority deadline was ready.
    EdfOrder {
        time: Rational,
        running: (TaskId, u64),
        preferred: (TaskId, u64),
    },
    /// The processor idled with a ready job.
    Idle { time: Rational, waiting: (TaskId, u64) },
    BudgetExceeded {
        task: TaskId,
        job: u64,
        executed: Rational,
        budget: Rational,
    },
    SuspensionRule {
        task: TaskId,
        job: u64,
        time: Rational,
        message: String,
    },
    SwitchRule { time: Rational, message: String },
    ReleaseSpacing {
        task: TaskId,
        job: u64,
        expected: Rational,
        actual: Rational,
    },
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = |r: &Rational| rational::display(r);
        match self {
            TraceViolation::Malformed { time, message } => write!(f, "t={}: malformed trace: {message}", d(time)),
            TraceViolation::DeadlineMiss { task, job, time } => {
                write!(f, "t={}: {task}#{job} missed its deadline", d(time))
            }
            TraceViolation::EdfOrder {
                time,
                running,
                preferred,
            } => write!(
                f,
                "t={}: {}#{} runs while {}#{} has an earlier deadline",
                d(time),
                running.0,
                running.1,
                preferred.0,
                preferred.1
            ),
            TraceViolation::Idle { time, waiting } => {
                write!(f, "t={}: idle while {}#{} is ready", d(time), waiting.0, waiting.1)
            }
            TraceViolation::BudgetExceeded {
                task,
                job,
                executed,
                budget,
            } => write!(f, "{task}#{job} executed {} beyond its budget {}", d(executed), d(budget)),
            TraceViolation::SuspensionRule {
                task,
                job,
                time,
                message,
            } => write!(f, "t={}: {task}#{job}: {message}", d(time)),
            TraceViolation::SwitchRule { time, message } => write!(f, "t={}: mode switch: {message}", d(time)),
            TraceViolation::ReleaseSpacing {
                task,
                job,
                expected,
                actual,
            } => write!(
                f,
                "{task}#{job} released at {} instead of {}",
                d(actual),
                d(expected)
            ),
        }
    }
}

struct Params {
    hi: bool,
    period: i128,
    c_lo: i128,
    c_hi: i128,
    vd_offset: i128,
    t_max: i128,
}

struct JobRec {
    release: i128,
    deadline: i128,
    vd: Option<i128>,
    executed: i128,
    done: bool,
    budget_flagged: bool,
}

struct Checker<'a> {
    trace: &'a Trace,
    params: Vec<Params>,
    emc: bool,
    hi_mode: bool,
    switch: Option<i128>,
    jobs: HashMap<(usize, u64), JobRec>,
    releases: Vec<Vec<i128>>,
    running: Option<(usize, u64)>,
    out: Vec<TraceViolation>,
}

impl Checker<'_> {
    fn time(&self, tick: i128) -> Rational {
        self.trace.time(tick)
    }

    fn name(&self, key: (usize, u64)) -> (TaskId, u64) {
        (self.trace.task_ids[key.0].clone(), key.1)
    }

    fn malformed(&mut self, tick: i128, message: String) {
        let time = self.time(tick);
        self.out.push(TraceViolation::Malformed { time, message });
    }

    fn budget(&self, task: usize) -> i128 {
        let p = &self.params[task];
        match (self.hi_mode, p.hi, self.emc) {
            (false, _, _) | (true, false, true) => p.c_lo,
            (true, _, _) => p.c_hi,
        }
    }

    fn priority(&self, key: (usize, u64)) -> (i128, usize) {
        let j = &self.jobs[&key];
        match (self.hi_mode, j.vd) {
            (false, Some(vd)) => (vd, key.0),
            _ => (j.deadline, key.0),
        }
    }

    fn active(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.jobs.iter().filter(|(_, j)| !j.done).map(|(k, _)| *k)
    }

    fn advance(&mut self, from: i128, to: i128) {
        let Some(key) = self.running else { return };
        let budget = self.budget(key.0);
        let job = self.jobs.get_mut(&key).expect("running job is known");
        job.executed += to - from;
        if job.executed > budget && !job.budget_flagged {
            job.budget_flagged = true;
            let (executed, budget) = (job.executed, budget);
            let (task, job) = self.name(key);
            self.out.push(TraceViolation::BudgetExceeded {
                task,
                job,
                executed: self.time(executed),
                budget: self.time(budget),
            });
        }
    }

    fn release(&mut self, tick: i128, task: usize, job: u64) {
        let p = &self.params[task];
        let prev = self.releases[task].last().copied();
        let stretched_at = |r: i128| self.emc && !p.hi && self.switch.is_some_and(|s| s <= r);
        let expected = match prev {
            None => 0,
            Some(prev) if stretched_at(prev + p.period) => prev + p.t_max,
            Some(prev) => prev + p.period,
        };
        if tick != expected || job != self.releases[task].len() as u64 {
            let (task_id, _) = self.name((task, job));
            self.out.push(TraceViolation::ReleaseSpacing {
                task: task_id,
                job,
                expected: self.time(expected),
                actual: self.time(tick),
            });
        }
        let relative = if self.emc && !p.hi && self.hi_mode { p.t_max } else { p.period };
        let rec = JobRec {
            release: tick,
            deadline: tick + relative,
            vd: p.hi.then_some(tick + p.vd_offset),
            executed: 0,
            done: false,
            budget_flagged: false,
        };
        self.releases[task].push(tick);
        if self.jobs.insert((task, job), rec).is_some() {
            self.malformed(tick, format!("{}#{job} released twice", self.trace.task_ids[task]));
        }
    }

    /// Marks the job done; returns false if it was unknown or already done.
    fn finish(&mut self, key: (usize, u64)) -> bool {
        if self.running == Some(key) {
            self.running = None;
        }
        match self.jobs.get_mut(&key) {
            Some(j) if !j.done => {
                j.done = true;
                true
            }
            _ => false,
        }
    }

    fn mode_switch(&mut self, tick: i128, key: (usize, u64)) -> Vec<(usize, u64)> {
        if self.switch.is_some() {
            self.malformed(tick, "second mode switch".into());
            return Vec::new();
        }
        let p = &self.params[key.0];
        let executed = self.jobs.get(&key).map(|j| j.executed);
        if !p.hi || executed != Some(p.c_lo) {
            let time = self.time(tick);
            self.out.push(TraceViolation::SwitchRule {
                time,
                message: format!(
                    "triggered by {}#{} which is not a HI job at its LO budget",
                    self.trace.task_ids[key.0], key.1
                ),
            });
        }
        self.hi_mode = true;
        self.switch = Some(tick);
        let mut must_suspend = Vec::new();
        let active: Vec<_> = self.active().collect();
        for k in active {
            let p = &self.params[k.0];
            if p.hi {
                continue;
            }
            let job = self.jobs.get_mut(&k).expect("active job is known");
            if self.emc {
                job.deadline = job.release + p.t_max;
            } else if job.executed >= p.c_hi {
                must_suspend.push(k);
            }
        }
        must_suspend
    }

    fn suspend(&mut self, tick: i128, key: (usize, u64)) {
        let p = &self.params[key.0];
        let budget = self.budget(key.0);
        let executed = self.jobs.get(&key).map_or(0, |j| j.executed);
        let message = if p.hi {
            Some("HI jobs are never suspended".to_string())
        } else if executed < budget {
            Some(format!(
                "suspended after {} with budget {} left",
                rational::display(&self.time(executed)),
                rational::display(&self.time(budget - executed))
            ))
        } else {
            None
        };
        if let Some(message) = message {
            let (task, job) = self.name(key);
            let time = self.time(tick);
            self.out.push(TraceViolation::SuspensionRule { task, job, time, message });
        }
    }

    fn check_instant(&mut self, tick: i128) {
        let mut late: Vec<_> = self
            .active()
            .filter(|k| self.jobs[k].deadline <= tick)
            .collect();
        late.sort();
        for key in late {
            self.finish(key);
            let (task, job) = self.name(key);
            let time = self.time(tick);
            self.out.push(TraceViolation::DeadlineMiss { task, job, time });
        }
        let best = self.active().min_by_key(|&k| self.priority(k));
        match (self.running, best) {
            (None, Some(waiting)) => {
                let waiting = self.name(waiting);
                let time = self.time(tick);
                self.out.push(TraceViolation::Idle { time, waiting });
            }
            (Some(run), Some(best)) if self.priority(best) < self.priority(run) => {
                let (running, preferred) = (self.name(run), self.name(best));
                let time = self.time(tick);
                self.out.push(TraceViolation::EdfOrder {
                    time,
                    running,
                    preferred,
                });
            }
            _ => {}
        }
    }

    fn run(&mut self) {
        let events = &self.trace.events;
        let mut prev = 0i128;
        let mut i = 0;
        while i < events.len() {
            let tick = events[i].tick;
            if tick < prev {
                self.malformed(tick, "events out of time order".into());
                return;
            }
            self.advance(prev, tick);
            let mut must_suspend = Vec::new();
            while i < events.len() && events[i].tick == tick {
                let e = events[i];
                i += 1;
                if e.task >= self.params.len() {
                    self.malformed(tick, format!("event for unknown task index {}", e.task));
                    continue;
                }
                let key = (e.task, e.job);
                if e.kind != EventKind::Release && !self.jobs.contains_key(&key) {
                    self.malformed(tick, format!("{} for unreleased job {}#{}", e.kind, self.trace.task_ids[e.task], e.job));
                    continue;
                }
                match e.kind {
                    EventKind::Release => self.release(tick, e.task, e.job),
                    EventKind::Start => {
                        if self.jobs[&key].done {
                            self.malformed(tick, format!("finished job {}#{} restarted", self.trace.task_ids[e.task], e.job));
                        } else if let Some(other) = self.running.filter(|&r| r != key) {
                            let other = self.name(other);
                            self.malformed(tick, format!("{}#{} starts while {}#{} runs", self.trace.task_ids[e.task], e.job, other.0, other.1));
                        }
                        self.running = Some(key);
                    }
                    EventKind::Preempt => {
                        if self.running != Some(key) {
                            self.malformed(tick, format!("preempting {}#{} which is not running", self.trace.task_ids[e.task], e.job));
                        }
                        self.running = None;
                    }
                    EventKind::Complete => {
                        if !self.finish(key) {
                            self.malformed(tick, format!("{}#{} completes twice", self.trace.task_ids[e.task], e.job));
                        }
                    }
                    EventKind::Suspend => {
                        self.suspend(tick, key);
                        must_suspend.retain(|&k| k != key);
                        self.finish(key);
                    }
                    EventKind::ModeSwitch => must_suspend = self.mode_switch(tick, key),
                    EventKind::DeadlineMiss => {
                        self.finish(key);
                        let (task, job) = self.name(key);
                        let time = self.time(tick);
                        self.out.push(TraceViolation::DeadlineMiss { task, job, time });
                    }
                }
            }
            for key in must_suspend {
                let (task, job) = self.name(key);
                let time = self.time(tick);
                self.out.push(TraceViolation::SuspensionRule {
                    task,
                    job,
                    time,
                    message: "spent its HI budget before the switch but was not suspended".into(),
                });
            }
            self.check_instant(tick);
            prev = tick;
        }
        self.check_missing_releases();
    }

    fn check_missing_releases(&mut self) {
        for task in 0..self.params.len() {
            let p = &self.params[task];
            let Some(&last) = self.releases[task].last() else {
                if self.trace.horizon > 0 {
                    let (task, job) = self.name((task, 0));
                    self.out.push(TraceViolation::ReleaseSpacing {
                        task,
                        job,
                        expected: Rational::from_integer(0.into()),
                        actual: self.time(self.trace.horizon),
                    });
                }
                continue;
            };
            let gap = if self.emc && !p.hi && self.switch.is_some_and(|s| s <= last + p.period) {
                p.t_max
            } else {
                p.period
            };
            if last + gap < self.trace.horizon {
                let job = self.releases[task].len() as u64;
                let (task, job) = self.name((task, job));
                self.out.push(TraceViolation::ReleaseSpacing {
                    task,
                    job,
                    expected: self.time(last + gap),
                    actual: self.time(self.trace.horizon),
                });
            }
        }
    }
}

fn ticks(r: &Rational, base: i128) -> Option<i128> {
    let scaled = r * Rational::from_integer(BigInt::from(base));
    if scaled.is_integer() {
        scaled.to_integer().to_i128()
    } else {
        None
    }
}

/// Lists every rule the trace breaks; an empty list means the run met all
/// deadlines under a valid EDF-VD schedule.
pub fn check_trace(task_set: &TaskSet, x: &Rational, trace: &Trace) -> Vec<TraceViolation> {
    let base = trace.time_base;
    let emc = task_set.model_kind == ModelKind::Emc;
    let mut params = Vec::with_capacity(task_set.tasks.len());
    for t in &task_set.tasks {
        let period = ticks(&t.period, base);
        let t_max = match (&t.extended_period, emc && t.is_lo()) {
            (Some(tm), true) => ticks(tm, base),
            _ => period,
        };
        let vd = if t.is_hi() { ticks(&(x * &t.period), base) } else { period };
        match (period, ticks(&t.wcet_lo, base), ticks(&t.wcet_hi, base), vd, t_max) {
            (Some(period), Some(c_lo), Some(c_hi), Some(vd_offset), Some(t_max)) => params.push(Params {
                hi: t.is_hi(),
                period,
                c_lo,
                c_hi,
                vd_offset,
                t_max,
            }),
            _ => {
                return vec![TraceViolation::Malformed {
                    time: Rational::from_integer(0.into()),
                    message: format!("parameters of {} are off the trace's time grid", t.id),
                }]
            }
        }
    }
    if trace.task_ids.len() != params.len() {
        return vec![TraceViolation::Malformed {
            time: Rational::from_integer(0.into()),
            message: "trace and task set have different task counts".into(),
        }];
    }
    let mut checker = Checker {
        trace,
        emc,
        hi_mode: false,
        switch: None,
        jobs: HashMap::new(),
        releases: vec![Vec::new(); params.len()],
        params,
        running: None,
        out: Vec::new(),
    };
    checker.run();
    checker.out
}
