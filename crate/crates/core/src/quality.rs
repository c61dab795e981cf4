//! Output quality of LO tasks in HI mode, and two ways to improve it.
//!
//! A LO task's quality ratio is `Q_i = C_i^HI / C_i^LO`: the share of its
//! full execution it still gets after the switch. The weighted total
//! quality (WTQ) sums `Q_i · w_i` over LO tasks.
//!
//! - [`optimize_quality`] spends the HI-mode slack left by the test at a
//!   given `x` on LO-task budget increments, maximizing WTQ.
//! - [`drop_low_tasks`] repairs a failing set by zeroing LO-task HI budgets
//!   one at a time, least valuable first.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::analysis::{self, XPolicy};
use crate::model::{self, ModelError, ModelKind, Task, TaskId, TaskSet, UtilizationSummary};
use crate::rational::{self, Rational};

#[derive(Debug, thiserror::Error)]
pub enum QualityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("deadline scaling factor must lie in (0, 1), got {0}")]
    XOutOfRange(Rational),
    #[error("budget tuning applies to IMC task sets, got an {0} set")]
    NotImc(ModelKind),
    #[error("x = {x} is below the LO-mode bound {x_min}")]
    LowModeUnschedulable { x: Rational, x_min: String },
    #[error("LO-task budgets need {needed} of HI-mode utilization but only {cap} is available (short by {shortfall})")]
    Infeasible {
        needed: Rational,
        cap: Rational,
        shortfall: Rational,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    #[serde(serialize_with = "rational::serde_rational_map::serialize")]
    pub per_task: BTreeMap<TaskId, Rational>,
    #[serde(with = "rational::serde_rational")]
    pub wtq: Rational,
}

/// Quality ratios of all LO tasks and their weighted total.
pub fn quality_report(task_set: &TaskSet) -> Result<QualityReport, QualityError> {
    task_set.ensure_valid()?;
    let mut per_task = BTreeMap::new();
    let mut wtq = Rational::zero();
    for t in task_set.lo_tasks() {
        let q = &t.wcet_hi / &t.wcet_lo;
        wtq += &q * &t.importance;
        per_task.insert(t.id.clone(), q);
    }
    Ok(QualityReport { per_task, wtq })
}

/// `Q_i · w_i`.
pub fn weighted_quality(t: &Task) -> Rational {
    &t.wcet_hi / &t.wcet_lo * &t.importance
}

fn check_x(x: &Rational) -> Result<(), QualityError> {
    if !x.is_positive() || x >= &Rational::one() {
        return Err(QualityError::XOutOfRange(x.clone()));
    }
    Ok(())
}

/// HI-mode utilization LO tasks may gain at `x` while keeping
/// `x·U_LO^LO + (1-x)·U_LO^HI + U_HI^HI <= 1`. Negative when the condition
/// already fails with the current budgets.
pub fn quality_budget_cap(u: &UtilizationSummary, x: &Rational) -> Result<Rational, QualityError> {
    check_x(x)?;
    let one = Rational::one();
    let rest = &one - x;
    let cap = &one / &rest - x / &rest * &u.u_lo_lo - &u.u_lo_hi - &u.u_hi_hi / &rest;
    Ok(cap)
}

/// Budget increments for LO tasks and their effect.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetPlan {
    #[serde(with = "rational::serde_rational")]
    pub x: Rational,
    #[serde(serialize_with = "rational::serde_rational_map::serialize")]
    pub increments: BTreeMap<TaskId, Rational>,
    #[serde(serialize_with = "rational::serde_rational_map::serialize")]
    pub resulting_wcet_hi: BTreeMap<TaskId, Rational>,
    #[serde(with = "rational::serde_rational")]
    pub achieved_wtq: Rational,
    /// `sum I_i / T_i`.
    #[serde(with = "rational::serde_rational")]
    pub budget_used: Rational,
    #[serde(with = "rational::serde_rational")]
    pub budget_cap: Rational,
}

impl BudgetPlan {
    /// The task set with every LO task's `wcet_hi` raised by its increment.
    pub fn apply(&self, task_set: &TaskSet) -> TaskSet {
        let mut out = task_set.clone();
        for t in out.tasks.iter_mut().filter(|t| t.is_lo()) {
            if let Some(c) = self.resulting_wcet_hi.get(&t.id) {
                t.wcet_hi = c.clone();
            }
        }
        out
    }
}

/// Box of admissible increments for one LO task.
#[derive(Debug, Clone)]
pub struct IncrementBox {
    pub index: usize,
    pub lower: Rational,
    pub upper: Rational,
}

/// Lower and upper bounds on each LO task's increment: a task planned to be
/// dropped (`wcet_hi == 0`) must get at least its mandatory budget; a task
/// already running in HI mode may grow up to its LO budget.
pub fn increment_boxes(task_set: &TaskSet) -> Vec<IncrementBox> {
    task_set
        .tasks
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_lo())
        .map(|(index, t)| {
            if t.wcet_hi.is_zero() {
                IncrementBox {
                    index,
                    lower: t.mandatory_wcet.clone(),
                    upper: t.wcet_lo.clone(),
                }
            } else {
                IncrementBox {
                    index,
                    lower: Rational::zero(),
                    upper: &t.wcet_lo - &t.wcet_hi,
                }
            }
        })
        .collect()
}

/// Maximizes `sum (w_i / C_i^LO) I_i` subject to the increment boxes and
/// `sum I_i / T_i <= cap`.
///
/// The problem is a fractional knapsack once the mandatory lower bounds are
/// paid for: each unit of utilization spent on task `i` buys
/// `w_i T_i / C_i^LO` of objective, so the remaining cap is poured into
/// tasks in decreasing order of that density.
pub fn optimize_quality(task_set: &TaskSet, x: &Rational) -> Result<BudgetPlan, QualityError> {
    check_x(x)?;
    if task_set.model_kind != ModelKind::Imc {
        return Err(QualityError::NotImc(task_set.model_kind));
    }
    let u = model::utilizations(task_set)?;
    match analysis::low_mode_x_min(&u) {
        Some(x_min) if &x_min <= x => {}
        other => {
            return Err(QualityError::LowModeUnschedulable {
                x: x.clone(),
                x_min: other.map_or_else(|| "undefined".into(), |v| rational::display(&v)),
            })
        }
    }
    let cap = quality_budget_cap(&u, x)?;

    let boxes = increment_boxes(task_set);
    let mut inc: Vec<Rational> = boxes.iter().map(|b| b.lower.clone()).collect();
    let needed: Rational = boxes
        .iter()
        .map(|b| &b.lower / &task_set.tasks[b.index].period)
        .sum();
    if needed > cap {
        return Err(QualityError::Infeasible {
            shortfall: &needed - &cap,
            needed,
            cap,
        });
    }

    let mut order: Vec<usize> = (0..boxes.len()).collect();
    let density = |k: usize| {
        let t = &task_set.tasks[boxes[k].index];
        &t.importance * &t.period / &t.wcet_lo
    };
    // Stable sort keeps declaration order among equal densities.
    order.sort_by(|&a, &b| density(b).cmp(&density(a)));

    let mut remaining = &cap - &needed;
    for k in order {
        if !remaining.is_positive() {
            break;
        }
        if !density(k).is_positive() {
            continue;
        }
        let t = &task_set.tasks[boxes[k].index];
        let room = &boxes[k].upper - &inc[k];
        if !room.is_positive() {
            continue;
        }
        let affordable = &remaining * &t.period;
        let step = room.min(affordable);
        remaining -= &step / &t.period;
        inc[k] += step;
    }

    let mut increments = BTreeMap::new();
    let mut resulting_wcet_hi = BTreeMap::new();
    let mut budget_used = Rational::zero();
    let mut achieved_wtq = Rational::zero();
    for (b, i) in boxes.iter().zip(inc) {
        let t = &task_set.tasks[b.index];
        let c_hi = &t.wcet_hi + &i;
        budget_used += &i / &t.period;
        achieved_wtq += &c_hi / &t.wcet_lo * &t.importance;
        resulting_wcet_hi.insert(t.id.clone(), c_hi);
        increments.insert(t.id.clone(), i);
    }
    Ok(BudgetPlan {
        x: x.clone(),
        increments,
        resulting_wcet_hi,
        achieved_wtq,
        budget_used,
        budget_cap: cap,
    })
}

/// Default `x` for budget tuning: the LO-mode lower bound, which maximizes
/// the cap whenever plain EDF does not already fit.
pub fn default_x(task_set: &TaskSet) -> Result<Option<Rational>, QualityError> {
    let u = model::utilizations(task_set)?;
    Ok(analysis::low_mode_x_min(&u).filter(|x| x.is_positive() && x < &Rational::one()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropOutcome {
    pub schedulable: bool,
    pub task_set: TaskSet,
    /// Dropped task ids, in drop order.
    pub dropped: Vec<TaskId>,
}

/// Zeroes the HI budget of the LO task with the smallest `Q_i · w_i` until
/// the test passes or no LO task has HI budget left. Ties go to the task
/// declared first.
pub fn drop_low_tasks(task_set: &TaskSet) -> Result<DropOutcome, QualityError> {
    drop_low_tasks_by(task_set, weighted_quality)
}

/// [`drop_low_tasks`] with a custom drop metric (smallest dropped first).
pub fn drop_low_tasks_by(
    task_set: &TaskSet,
    metric: impl Fn(&Task) -> Rational,
) -> Result<DropOutcome, QualityError> {
    if task_set.model_kind != ModelKind::Imc {
        return Err(QualityError::NotImc(task_set.model_kind));
    }
    task_set.ensure_valid()?;
    let mut current = task_set.clone();
    let mut dropped = Vec::new();
    loop {
        let u = model::utilizations_unchecked(&current);
        if analysis::analyze(&u, XPolicy::Min).is_schedulable() {
            return Ok(DropOutcome {
                schedulable: true,
                task_set: current,
                dropped,
            });
        }
        let victim = current
            .tasks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_lo() && !t.wcet_hi.is_zero())
            .map(|(i, t)| (i, metric(t)))
            .reduce(|best, cand| if cand.1 < best.1 { cand } else { best });
        match victim {
            Some((i, _)) => {
                current.tasks[i].wcet_hi = Rational::zero();
                dropped.push(current.tasks[i].id.clone());
            }
            None => {
                return Ok(DropOutcome {
                    schedulable: false,
                    task_set: current,
                    dropped,
                })
            }
        }
    }
}
