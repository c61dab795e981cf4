//! Utilization-based sufficient schedulability tests for IMC and EMC task
//! sets under EDF with virtual deadlines (EDF-VD).
//!
//! A set passes if either
//! - plain EDF with full reservations fits (`U_LO^LO + U_HI^HI <= 1`), or
//! - some deadline scaling factor `x` satisfies both the LO-mode bound
//!   `x >= U_HI^LO / (1 - U_LO^LO)` and the HI-mode bound
//!   `x·U_LO^LO + (1 - x)·U_LO^HI + U_HI^HI <= 1`.
//!
//! EMC sets go through the same test: their LO-task HI-mode utilization is
//! computed against the extended period.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};

use crate::model::{self, ModelError, TaskId, TaskSet, UtilizationSummary};
use crate::rational::{self, Rational};

/// Smallest `x` that keeps LO mode schedulable: `U_HI^LO / (1 - U_LO^LO)`.
/// `None` when LO tasks alone saturate the processor.
pub fn low_mode_x_min(u: &UtilizationSummary) -> Option<Rational> {
    let slack = Rational::one() - &u.u_lo_lo;
    if slack.is_positive() {
        Some(&u.u_hi_lo / slack)
    } else {
        None
    }
}

/// Upper limit on `x` from the HI-mode condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HighModeBound {
    /// `x <= value`.
    AtMost(Rational),
    /// The condition does not depend on `x` and holds.
    Unconstrained,
    /// HI-mode demand exceeds the processor for every `x`.
    Infeasible,
}

/// Largest `x` satisfying `x·U_LO^LO + (1 - x)·U_LO^HI + U_HI^HI <= 1`.
pub fn high_mode_x_max(u: &UtilizationSummary) -> HighModeBound {
    let numer = Rational::one() - (&u.u_hi_hi + &u.u_lo_hi);
    if u.u_lo_lo == u.u_lo_hi {
        // x drops out; the condition reads U_LO^HI + U_HI^HI <= 1.
        return if numer.is_negative() {
            HighModeBound::Infeasible
        } else {
            HighModeBound::Unconstrained
        };
    }
    if numer.is_negative() {
        return HighModeBound::Infeasible;
    }
    HighModeBound::AtMost(numer / (&u.u_lo_lo - &u.u_lo_hi))
}

/// Plain EDF fits with HI tasks at `C^HI` and LO tasks at `C^LO`.
pub fn worst_case_reservation_test(u: &UtilizationSummary) -> bool {
    &u.u_hi_hi + &u.u_lo_lo <= Rational::one()
}

/// Interval of admissible deadline scaling factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XRange {
    pub lower: Rational,
    pub upper: Rational,
    pub nonempty: bool,
}

impl XRange {
    /// `[x_min, min(x_max, 1 - eps)]` where `eps` is a thousandth of the
    /// width below 1, so the chosen `x` never reaches 1.
    pub fn new(x_min: Rational, x_max: &HighModeBound) -> Self {
        let one = Rational::one();
        let ceiling = match x_max {
            HighModeBound::AtMost(v) if v < &one => v.clone(),
            _ => one.clone(),
        };
        let eps = (&ceiling - &x_min) / Rational::from_integer(1000.into());
        let capped = &one - eps;
        let upper = match x_max {
            HighModeBound::AtMost(v) => v.min(&capped).clone(),
            _ => capped,
        };
        let nonempty = x_min <= upper && x_min < one && !matches!(x_max, HighModeBound::Infeasible);
        XRange {
            lower: x_min,
            upper,
            nonempty,
        }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.nonempty && &self.lower <= x && x <= &self.upper && x.is_positive() && x < &Rational::one()
    }

    /// Exact choice of `x` inside the range.
    pub fn pick(&self, policy: XPolicy) -> Rational {
        let x = match policy {
            XPolicy::Min => self.lower.clone(),
            XPolicy::Mid => (&self.lower + &self.upper) / Rational::from_integer(2.into()),
            XPolicy::Max => self.upper.clone(),
        };
        // lower == 0 only happens without HI tasks; keep x inside (0, 1).
        if x.is_zero() {
            return self.upper.clone().min(rational::rat(1, 2));
        }
        x
    }

    /// A point of the range with denominator at most `max_den`, as close to
    /// the policy target as that grid allows. Falls back to the simplest
    /// rational in the range when the grid misses it.
    ///
    /// Exact bounds can carry very large denominators; the simulator wants
    /// a coarse time grid.
    pub fn pick_with_denominator(&self, policy: XPolicy, max_den: u64) -> Rational {
        let target = self.pick(policy);
        let n = Rational::from_integer(max_den.into());
        let down = (&target * &n).floor() / &n;
        let up = (&target * &n).ceil() / &n;
        let candidates = match policy {
            XPolicy::Min => [up, down],
            XPolicy::Max => [down, up],
            XPolicy::Mid => {
                if &target - &down <= &up - &target {
                    [down, up]
                } else {
                    [up, down]
                }
            }
        };
        for c in candidates {
            if self.contains(&c) {
                return c;
            }
        }
        let lo = if self.lower.is_positive() { self.lower.clone() } else { self.upper.clone() / Rational::from_integer(2.into()) };
        rational::simplest_between(&lo, &self.upper)
    }
}

impl fmt::Display for XRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.nonempty {
            write!(
                f,
                "[{}, {}]",
                rational::Display(&self.lower),
                rational::Display(&self.upper)
            )
        } else {
            f.write_str("empty")
        }
    }
}

/// How to choose `x` inside a nonempty range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XPolicy {
    #[default]
    Min,
    Mid,
    Max,
}

impl FromStr for XPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "min" => Ok(XPolicy::Min),
            "mid" => Ok(XPolicy::Mid),
            "max" => Ok(XPolicy::Max),
            other => Err(format!("unknown x policy {other:?} (expected min, mid or max)")),
        }
    }
}

/// A condition of the test that does not hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailedCondition {
    /// No `x < 1` satisfies the LO-mode bound.
    LowMode,
    /// HI-mode preconditions fail: `U_HI^HI + U_LO^HI < 1`, `U_LO^LO < 1`
    /// and `U_LO^LO > U_LO^HI` must all hold.
    HighModeOverload,
    /// Both bounds exist but the LO-mode lower bound exceeds the HI-mode
    /// upper bound.
    EmptyRange,
}

impl fmt::Display for FailedCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailedCondition::LowMode => "LO-mode bound: U_HI^LO / (1 - U_LO^LO) must be below 1",
            FailedCondition::HighModeOverload => {
                "HI-mode preconditions: need U_HI^HI + U_LO^HI < 1, U_LO^LO < 1 and U_LO^LO > U_LO^HI"
            }
            FailedCondition::EmptyRange => {
                "HI-mode bound: U_HI^LO / (1 - U_LO^LO) exceeds (1 - (U_HI^HI + U_LO^HI)) / (U_LO^LO - U_LO^HI)"
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Plain EDF schedules the set without deadline scaling.
    WorstCaseReservationEdf,
    SchedulableEdfVd { range: XRange, x: Rational },
    Unschedulable(Vec<FailedCondition>),
}

impl Verdict {
    pub fn is_schedulable(&self) -> bool {
        !matches!(self, Verdict::Unschedulable(_))
    }

    pub fn x(&self) -> Option<&Rational> {
        match self {
            Verdict::SchedulableEdfVd { x, .. } => Some(x),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::WorstCaseReservationEdf => f.write_str("schedulable by plain EDF (worst-case reservation)"),
            Verdict::SchedulableEdfVd { range, x } => write!(
                f,
                "schedulable by EDF-VD, x in {range}, chosen x = {}",
                rational::Display(x)
            ),
            Verdict::Unschedulable(reasons) => {
                f.write_str("unschedulable")?;
                for r in reasons {
                    write!(f, "; {r}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("deadline scaling factor must lie in (0, 1), got {0}")]
    XOutOfRange(Rational),
}

/// Runs the test on an aggregate utilization summary.
pub fn analyze(u: &UtilizationSummary, policy: XPolicy) -> Verdict {
    if worst_case_reservation_test(u) {
        return Verdict::WorstCaseReservationEdf;
    }
    let mut failed = Vec::new();
    let one = Rational::one();

    let x_min = low_mode_x_min(u);
    if x_min.as_ref().map_or(true, |x| x >= &one) {
        failed.push(FailedCondition::LowMode);
    }
    let preconditions = &u.u_hi_hi + &u.u_lo_hi < one && u.u_lo_lo < one && u.u_lo_lo > u.u_lo_hi;
    let x_max = high_mode_x_max(u);
    if !preconditions || x_max == HighModeBound::Infeasible {
        failed.push(FailedCondition::HighModeOverload);
    }
    if !failed.is_empty() {
        return Verdict::Unschedulable(failed);
    }

    let range = XRange::new(x_min.expect("checked above"), &x_max);
    if !range.nonempty {
        return Verdict::Unschedulable(vec![FailedCondition::EmptyRange]);
    }
    let x = range.pick(policy);
    Verdict::SchedulableEdfVd { range, x }
}

/// Runs the test on a task set (IMC or EMC).
pub fn imc_test(task_set: &TaskSet, policy: XPolicy) -> Result<Verdict, AnalysisError> {
    let u = model::utilizations(task_set)?;
    Ok(analyze(&u, policy))
}

/// `x · T_i` for every HI task.
pub fn virtual_deadlines(task_set: &TaskSet, x: &Rational) -> Result<BTreeMap<TaskId, Rational>, AnalysisError> {
    if !x.is_positive() || x >= &Rational::one() {
        return Err(AnalysisError::XOutOfRange(x.clone()));
    }
    Ok(task_set
        .hi_tasks()
        .map(|t| (t.id.clone(), x * &t.period))
        .collect())
}
