//! Task model for imprecise (IMC) and elastic (EMC) mixed-criticality systems.
//!
//! All time quantities are exact rationals. A task carries two WCETs, one per
//! system mode: HI tasks grow their budget in HI mode, LO tasks shrink it
//! (IMC) or keep it and stretch their period (EMC).

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::{self, Rational};

/// Opaque task identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub String);

impl TaskId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TaskId {
    fn from(s: &str) -> Self {
        TaskId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criticality {
    #[serde(rename = "LO")]
    Lo,
    #[serde(rename = "HI")]
    Hi,
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criticality::Lo => f.write_str("LO"),
            Criticality::Hi => f.write_str("HI"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "IMC")]
    Imc,
    #[serde(rename = "EMC")]
    Emc,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Imc => f.write_str("IMC"),
            ModelKind::Emc => f.write_str("EMC"),
        }
    }
}

/// A sporadic, implicit-deadline mixed-criticality task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    #[serde(with = "rational::serde_rational")]
    pub period: Rational,
    /// Relative deadline; always equal to the period. Absent from task-set
    /// files, where it defaults to the period.
    #[serde(
        default,
        with = "rational::serde_rational_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub deadline: Option<Rational>,
    pub criticality: Criticality,
    #[serde(with = "rational::serde_rational")]
    pub wcet_lo: Rational,
    #[serde(with = "rational::serde_rational")]
    pub wcet_hi: Rational,
    #[serde(default = "Rational::one", with = "rational::serde_rational")]
    pub importance: Rational,
    #[serde(default = "Rational::zero", with = "rational::serde_rational")]
    pub mandatory_wcet: Rational,
    #[serde(
        default,
        with = "rational::serde_rational_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub extended_period: Option<Rational>,
}

impl Task {
    /// A HI task with default importance and no mandatory budget.
    pub fn hi(id: &str, period: Rational, wcet_lo: Rational, wcet_hi: Rational) -> Self {
        Task {
            id: id.into(),
            period,
            deadline: None,
            criticality: Criticality::Hi,
            wcet_lo,
            wcet_hi,
            importance: Rational::one(),
            mandatory_wcet: Rational::zero(),
            extended_period: None,
        }
    }

    /// A LO task with default importance and no mandatory budget.
    pub fn lo(id: &str, period: Rational, wcet_lo: Rational, wcet_hi: Rational) -> Self {
        Task {
            criticality: Criticality::Lo,
            ..Task::hi(id, period, wcet_lo, wcet_hi)
        }
    }

    pub fn with_importance(mut self, w: Rational) -> Self {
        self.importance = w;
        self
    }

    pub fn with_mandatory(mut self, c_m: Rational) -> Self {
        self.mandatory_wcet = c_m;
        self
    }

    pub fn with_extended_period(mut self, t_max: Rational) -> Self {
        self.extended_period = Some(t_max);
        self
    }

    pub fn is_hi(&self) -> bool {
        self.criticality == Criticality::Hi
    }

    pub fn is_lo(&self) -> bool {
        self.criticality == Criticality::Lo
    }

    pub fn relative_deadline(&self) -> &Rational {
        self.deadline.as_ref().unwrap_or(&self.period)
    }

    /// `C^LO / T`.
    pub fn u_lo(&self) -> Rational {
        &self.wcet_lo / &self.period
    }

    /// HI-mode utilization; EMC LO tasks divide by their extended period.
    pub fn u_hi(&self, model: ModelKind) -> Rational {
        match (model, self.criticality, &self.extended_period) {
            (ModelKind::Emc, Criticality::Lo, Some(t_max)) => &self.wcet_lo / t_max,
            _ => &self.wcet_hi / &self.period,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    #[serde(rename = "model")]
    pub model_kind: ModelKind,
    pub tasks: Vec<Task>,
}

impl TaskSet {
    pub fn new(model_kind: ModelKind, tasks: Vec<Task>) -> Self {
        TaskSet { model_kind, tasks }
    }

    pub fn imc(tasks: Vec<Task>) -> Self {
        TaskSet::new(ModelKind::Imc, tasks)
    }

    pub fn emc(tasks: Vec<Task>) -> Self {
        TaskSet::new(ModelKind::Emc, tasks)
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        serde_json::from_str(s).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("task sets always serialize")
    }

    pub fn get(&self, id: &TaskId) -> Option<&Task> {
        self.tasks.iter().find(|t| &t.id == id)
    }

    pub fn position(&self, id: &TaskId) -> Option<usize> {
        self.tasks.iter().position(|t| &t.id == id)
    }

    pub fn lo_tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.iter().filter(|t| t.is_lo())
    }

    pub fn hi_tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.iter().filter(|t| t.is_hi())
    }

    /// Fails with the full validation report if any invariant is broken.
    pub fn ensure_valid(&self) -> Result<(), ModelError> {
        let violations = validate(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    /// Least common multiple of all periods, if every period is an integer.
    pub fn integer_hyperperiod(&self) -> Option<BigInt> {
        let mut h = BigInt::one();
        for t in &self.tasks {
            if !t.period.is_integer() {
                return None;
            }
            h = num_integer::Integer::lcm(&h, t.period.numer());
        }
        Some(h)
    }

    pub fn max_period(&self) -> Option<&Rational> {
        self.tasks.iter().map(|t| &t.period).max()
    }
}

/// A single broken invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub task: Option<TaskId>,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.task {
            Some(id) => write!(f, "task {id}: {}: {}", self.field, self.message),
            None => write!(f, "task set: {}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid task set: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("cannot parse task set: {0}")]
    Parse(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Returns every invariant violation; an empty list means the set is valid.
pub fn validate(task_set: &TaskSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();

    for t in &task_set.tasks {
        let mut push = |field: &'static str, message: String| {
            out.push(Violation {
                task: Some(t.id.clone()),
                field,
                message,
            })
        };
        if !seen.insert(&t.id) {
            push("id", "duplicate task id".into());
        }
        if !t.period.is_positive() {
            push("period", format!("must be positive, got {}", t.period));
        }
        if let Some(d) = &t.deadline {
            if d != &t.period {
                push("deadline", format!("must equal the period {}, got {d}", t.period));
            }
        }
        if !t.wcet_lo.is_positive() {
            push("wcet_lo", format!("must be positive, got {}", t.wcet_lo));
        }
        if t.importance.is_negative() {
            push("importance", format!("must be nonnegative, got {}", t.importance));
        }
        if t.mandatory_wcet.is_negative() {
            push(
                "mandatory_wcet",
                format!("must be nonnegative, got {}", t.mandatory_wcet),
            );
        }
        match t.criticality {
            Criticality::Hi => {
                if t.wcet_lo > t.wcet_hi {
                    push(
                        "wcet_hi",
                        format!("HI task needs wcet_lo <= wcet_hi, got {} > {}", t.wcet_lo, t.wcet_hi),
                    );
                }
                if t.wcet_hi > t.period {
                    push(
                        "wcet_hi",
                        format!("must not exceed the period {}, got {}", t.period, t.wcet_hi),
                    );
                }
                if t.extended_period.is_some() {
                    push("extended_period", "only LO tasks may have an extended period".into());
                }
            }
            Criticality::Lo => {
                if t.wcet_hi.is_negative() {
                    push("wcet_hi", format!("must be nonnegative, got {}", t.wcet_hi));
                }
                if t.wcet_hi > t.wcet_lo {
                    push(
                        "wcet_hi",
                        format!("LO task needs wcet_hi <= wcet_lo, got {} > {}", t.wcet_hi, t.wcet_lo),
                    );
                }
                if t.wcet_lo > t.period {
                    push(
                        "wcet_lo",
                        format!("must not exceed the period {}, got {}", t.period, t.wcet_lo),
                    );
                }
                if t.mandatory_wcet > t.wcet_lo {
                    push(
                        "mandatory_wcet",
                        format!(
                            "must not exceed wcet_lo, got {} > {}",
                            t.mandatory_wcet, t.wcet_lo
                        ),
                    );
                }
                if let Some(t_max) = &t.extended_period {
                    if t_max < &t.period {
                        push(
                            "extended_period",
                            format!("must be at least the period {}, got {t_max}", t.period),
                        );
                    }
                }
            }
        }
        if task_set.model_kind == ModelKind::Emc && t.is_lo() {
            if t.extended_period.is_none() {
                push("extended_period", "EMC LO tasks need an extended period".into());
            }
            if t.wcet_hi != t.wcet_lo {
                push(
                    "wcet_hi",
                    format!(
                        "EMC LO tasks keep their budget (wcet_hi == wcet_lo), got {} != {}",
                        t.wcet_hi, t.wcet_lo
                    ),
                );
            }
        }
    }
    out
}

/// Utilization of one task in each mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskUtilization {
    #[serde(with = "rational::serde_rational")]
    pub u_lo: Rational,
    #[serde(with = "rational::serde_rational")]
    pub u_hi: Rational,
}

/// Aggregate utilizations, split by task criticality and system mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UtilizationSummary {
    /// LO tasks, LO mode.
    #[serde(with = "rational::serde_rational")]
    pub u_lo_lo: Rational,
    /// LO tasks, HI mode.
    #[serde(with = "rational::serde_rational")]
    pub u_lo_hi: Rational,
    /// HI tasks, LO mode.
    #[serde(with = "rational::serde_rational")]
    pub u_hi_lo: Rational,
    /// HI tasks, HI mode.
    #[serde(with = "rational::serde_rational")]
    pub u_hi_hi: Rational,
    #[serde(with = "rational::serde_rational")]
    pub u_total_lo: Rational,
    #[serde(with = "rational::serde_rational")]
    pub u_total_hi: Rational,
    pub per_task: BTreeMap<TaskId, TaskUtilization>,
}

impl UtilizationSummary {
    /// Summary from the four aggregates alone, with no per-task breakdown.
    pub fn from_totals(u_lo_lo: Rational, u_lo_hi: Rational, u_hi_lo: Rational, u_hi_hi: Rational) -> Self {
        UtilizationSummary {
            u_total_lo: &u_lo_lo + &u_hi_lo,
            u_total_hi: &u_lo_hi + &u_hi_hi,
            u_lo_lo,
            u_lo_hi,
            u_hi_lo,
            u_hi_hi,
            per_task: BTreeMap::new(),
        }
    }

    /// `(U^LO + U^HI) / 2`, the load measure used by the task-set generator.
    pub fn u_avg(&self) -> Rational {
        (&self.u_total_lo + &self.u_total_hi) / Rational::from_integer(2.into())
    }
}

/// Exact per-mode utilizations of a valid task set.
pub fn utilizations(task_set: &TaskSet) -> Result<UtilizationSummary, ModelError> {
    task_set.ensure_valid()?;
    Ok(utilizations_unchecked(task_set))
}

/// Same as [`utilizations`] without re-validating; callers must already know
/// the set is valid.
pub(crate) fn utilizations_unchecked(task_set: &TaskSet) -> UtilizationSummary {
    let mut ll = Rational::zero();
    let mut lh = Rational::zero();
    let mut hl = Rational::zero();
    let mut hh = Rational::zero();
    let mut per_task = BTreeMap::new();
    for t in &task_set.tasks {
        let u_lo = t.u_lo();
        let u_hi = t.u_hi(task_set.model_kind);
        match t.criticality {
            Criticality::Lo => {
                ll += &u_lo;
                lh += &u_hi;
            }
            Criticality::Hi => {
                hl += &u_lo;
                hh += &u_hi;
            }
        }
        per_task.insert(t.id.clone(), TaskUtilization { u_lo, u_hi });
    }
    UtilizationSummary {
        u_total_lo: &ll + &hl,
        u_total_hi: &lh + &hh,
        u_lo_lo: ll,
        u_lo_hi: lh,
        u_hi_lo: hl,
        u_hi_hi: hh,
        per_task,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    pub(crate) fn two_task_example() -> TaskSet {
        TaskSet::imc(vec![
            Task::lo("tau1", int(9), int(4), int(2)),
            Task::hi("tau2", int(10), int(4), int(7)),
        ])
    }

    #[test]
    fn two_task_example_is_valid() {
        assert!(validate(&two_task_example()).is_empty());
    }

    #[test]
    fn empty_set_is_valid() {
        assert!(validate(&TaskSet::imc(vec![])).is_empty());
    }

    #[test]
    fn lo_task_with_growing_budget_is_flagged() {
        let ts = TaskSet::imc(vec![Task::lo("a", int(10), int(4), int(5))]);
        let v = validate(&ts);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].task, Some("a".into()));
        assert_eq!(v[0].field, "wcet_hi");
    }

    #[test]
    fn structural_violations() {
        let ts = TaskSet::imc(vec![
            Task::hi("h", int(10), int(5), int(4)),
            Task::hi("h", int(10), int(2), int(11)),
            Task::lo("m", int(10), int(2), int(1)).with_mandatory(int(3)),
            Task::hi("x", int(10), int(2), int(3)).with_extended_period(int(20)),
            Task::lo("z", int(10), int(0), int(0)),
        ]);
        let fields: Vec<_> = validate(&ts)
            .into_iter()
            .map(|v| (v.task.unwrap().0, v.field))
            .collect();
        assert!(fields.contains(&("h".into(), "wcet_hi")));
        assert!(fields.contains(&("h".into(), "id")));
        assert!(fields.contains(&("m".into(), "mandatory_wcet")));
        assert!(fields.contains(&("x".into(), "extended_period")));
        assert!(fields.contains(&("z".into(), "wcet_lo")));
    }

    #[test]
    fn deadline_must_match_period() {
        let mut t = Task::lo("a", int(10), int(2), int(1));
        t.deadline = Some(int(8));
        let v = validate(&TaskSet::imc(vec![t]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "deadline");
    }

    #[test]
    fn emc_requirements() {
        let ts = TaskSet::emc(vec![
            Task::lo("a", int(10), int(2), int(1)).with_extended_period(int(20)),
            Task::lo("b", int(10), int(2), int(2)),
            Task::lo("c", int(10), int(2), int(2)).with_extended_period(int(5)),
        ]);
        let v = validate(&ts);
        let fields: Vec<_> = v.iter().map(|v| (v.task.clone().unwrap().0, v.field)).collect();
        assert_eq!(
            fields,
            vec![
                ("a".to_string(), "wcet_hi"),
                ("b".to_string(), "extended_period"),
                ("c".to_string(), "extended_period"),
            ]
        );
    }

    #[test]
    fn two_task_example_utilizations() {
        let u = utilizations(&two_task_example()).unwrap();
        assert_eq!(u.u_lo_lo, rat(4, 9));
        assert_eq!(u.u_lo_hi, rat(2, 9));
        assert_eq!(u.u_hi_lo, rat(4, 10));
        assert_eq!(u.u_hi_hi, rat(7, 10));
        assert_eq!(u.u_total_lo, rat(4, 9) + rat(2, 5));
        assert_eq!(u.u_total_hi, rat(2, 9) + rat(7, 10));
        assert_eq!(u.per_task[&"tau1".into()].u_hi, rat(2, 9));
    }

    #[test]
    fn dropped_lo_task_has_zero_hi_utilization() {
        let ts = TaskSet::imc(vec![Task::lo("a", int(10), int(3), int(0))]);
        assert_eq!(utilizations(&ts).unwrap().u_lo_hi, int(0));
    }

    #[test]
    fn emc_hi_utilization_uses_extended_period() {
        let ts = TaskSet::emc(vec![
            Task::lo("a", int(10), int(2), int(2)).with_extended_period(int(20))
        ]);
        let u = utilizations(&ts).unwrap();
        assert_eq!(u.u_lo_lo, rat(1, 5));
        assert_eq!(u.u_lo_hi, rat(1, 10));
    }

    #[test]
    fn utilizations_reject_invalid_sets() {
        let ts = TaskSet::imc(vec![Task::lo("a", int(10), int(4), int(5))]);
        assert!(matches!(utilizations(&ts), Err(ModelError::Invalid(v)) if v.len() == 1));
    }

    #[test]
    fn json_defaults_and_rational_forms() {
        let json = r#"{ "model": "EMC", "tasks": [
            { "id": "a", "period": 10, "criticality": "LO", "wcet_lo": "5/2",
              "wcet_hi": 2.5, "extended_period": "20" },
            { "id": "b", "period": 10, "criticality": "HI", "wcet_lo": 1, "wcet_hi": 0.25,
              "importance": 3 }
        ] }"#;
        let ts = TaskSet::from_json(json).unwrap();
        assert_eq!(ts.model_kind, ModelKind::Emc);
        let a = &ts.tasks[0];
        assert_eq!(a.wcet_lo, rat(5, 2));
        assert_eq!(a.wcet_hi, rat(5, 2));
        assert_eq!(a.importance, int(1));
        assert_eq!(a.mandatory_wcet, int(0));
        assert_eq!(a.extended_period, Some(int(20)));
        assert_eq!(ts.tasks[1].wcet_hi, rat(1, 4));
        assert_eq!(ts.tasks[1].importance, int(3));

        let back = TaskSet::from_json(&ts.to_json_pretty()).unwrap();
        assert_eq!(back, ts);
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(
            TaskSet::from_json(r#"{"model":"IMC","tasks":[{"id":"a"}]}"#),
            Err(ModelError::Parse(_))
        ));
        assert!(matches!(
            TaskSet::from_json(
                r#"{"model":"IMC","tasks":[{"id":"a","period":"1/0","criticality":"LO","wcet_lo":1,"wcet_hi":0}]}"#
            ),
            Err(ModelError::Parse(_))
        ));
    }

    #[test]
    fn hyperperiod() {
        assert_eq!(two_task_example().integer_hyperperiod(), Some(BigInt::from(90)));
        let ts = TaskSet::imc(vec![Task::lo("a", rat(5, 2), int(1), int(1))]);
        assert_eq!(ts.integer_hyperperiod(), None);
    }
}

#[cfg(test)]
pub(crate) use tests::two_task_example;
