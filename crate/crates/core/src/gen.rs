//! Seeded random IMC and EMC task-set generation.
//!
//! Each task is HI with probability `p_criticality`, has an integer period
//! drawn uniformly from `period_range` and a utilization drawn uniformly
//! from `util_range`. `C^LO = u·T` rounded up to a multiple of `1/1000`.
//! HI tasks get `C^HI = R·C^LO`; IMC LO tasks get `C^HI = λ·C^LO`; EMC LO
//! tasks keep `C^HI = C^LO` and stretch to `T^max = T/λ`.
//!
//! Sets grow one task at a time until the average of the LO- and HI-mode
//! total utilizations lands within `tolerance` of `u_target`; a task that
//! overshoots the window is discarded and redrawn.

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{self, ModelKind, Task, TaskSet};
use crate::rational::{self, rat, Rational};

/// Generator algorithm recorded in manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.3) seeded with seed_from_u64";

/// Discarded draws allowed per task set before giving up.
pub const RETRY_CAP: u32 = 10_000;

/// WCETs are multiples of `1 / WCET_GRID`.
pub const WCET_GRID: i64 = 1000;

/// Ratio `C^HI / C^LO` of HI tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RRatio {
    Fixed(#[serde(with = "rational::serde_rational")] Rational),
    /// Redrawn per task on a `1/1000` grid.
    Uniform {
        #[serde(with = "rational::serde_rational")]
        lo: Rational,
        #[serde(with = "rational::serde_rational")]
        hi: Rational,
    },
}

impl Default for RRatio {
    fn default() -> Self {
        RRatio::Uniform {
            lo: rat(3, 2),
            hi: rat(5, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParams {
    pub p_criticality: f64,
    pub period_range: (u32, u32),
    pub util_range: (f64, f64),
    pub r_ratio: RRatio,
    #[serde(with = "rational::serde_rational")]
    pub lambda: Rational,
    #[serde(with = "rational::serde_rational")]
    pub u_target: Rational,
    #[serde(with = "rational::serde_rational")]
    pub tolerance: Rational,
    pub seed: u64,
    #[serde(rename = "model")]
    pub model_kind: ModelKind,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            p_criticality: 0.5,
            period_range: (100, 1000),
            util_range: (0.05, 0.2),
            r_ratio: RRatio::default(),
            lambda: rat(1, 2),
            u_target: rat(3, 4),
            tolerance: rat(1, 20),
            seed: 0,
            model_kind: ModelKind::Imc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("no task set within {tolerance} of U_avg = {target} after {attempts} redraws")]
    RetryCapExceeded {
        target: String,
        tolerance: String,
        attempts: u32,
    },
}

impl GenParams {
    pub fn with_seed(&self, seed: u64) -> Self {
        GenParams { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidParams(m));
        if !(0.0..=1.0).contains(&self.p_criticality) {
            return bad(format!("p_criticality must lie in [0, 1], got {}", self.p_criticality));
        }
        let (plo, phi) = self.period_range;
        if plo == 0 || plo > phi {
            return bad(format!("period range [{plo}, {phi}] must be ordered and positive"));
        }
        let (ulo, uhi) = self.util_range;
        if !(ulo > 0.0 && ulo <= uhi && uhi <= 1.0) {
            return bad(format!("utilization range [{ulo}, {uhi}] must be ordered within (0, 1]"));
        }
        if !self.lambda.is_positive() || self.lambda > Rational::one() {
            return bad(format!("lambda must lie in (0, 1], got {}", self.lambda));
        }
        match &self.r_ratio {
            RRatio::Fixed(r) if r < &Rational::one() => return bad(format!("R must be at least 1, got {r}")),
            RRatio::Uniform { lo, hi } if lo < &Rational::one() || lo > hi => {
                return bad(format!("R range [{lo}, {hi}] must be ordered and at least 1"))
            }
            _ => {}
        }
        if self.tolerance.is_negative() {
            return bad(format!("tolerance must be nonnegative, got {}", self.tolerance));
        }
        let u_lo = rational::from_f64_decimal(ulo).expect("finite");
        if self.u_target < u_lo {
            return bad(format!(
                "u_target {} is below the smallest task utilization {ulo}",
                self.u_target
            ));
        }
        Ok(())
    }

    /// `1/R` when R is fixed.
    pub fn alpha(&self) -> Option<Rational> {
        match &self.r_ratio {
            RRatio::Fixed(r) => Some(r.recip()),
            RRatio::Uniform { .. } => None,
        }
    }
}

fn draw_r(r: &RRatio, rng: &mut impl Rng) -> Rational {
    match r {
        RRatio::Fixed(r) => r.clone(),
        RRatio::Uniform { lo, hi } => {
            let grid = Rational::from_integer(WCET_GRID.into());
            let steps = ((hi - lo) * &grid).floor().to_integer().to_u64().unwrap_or(0);
            lo + Rational::from_integer(rng.gen_range(0..=steps).into()) / grid
        }
    }
}

/// One task. HI draws whose `C^HI` would exceed the period are redrawn.
pub fn generate_task(params: &GenParams, rng: &mut impl Rng, id: &str) -> Result<Task, GenError> {
    let (ulo, uhi) = params.util_range;
    let grid = Rational::from_integer(WCET_GRID.into());
    for _ in 0..RETRY_CAP {
        let hi = rng.gen_bool(params.p_criticality);
        let period_int = rng.gen_range(params.period_range.0..=params.period_range.1);
        let period = Rational::from_integer(period_int.into());
        let u = rng.gen_range(ulo..=uhi);
        let ceil = (u * f64::from(period_int) * WCET_GRID as f64).ceil() as i64;
        let cap = (rational::from_f64_decimal(uhi).expect("finite") * &period * &grid).floor();
        let wcet_lo = Rational::from_integer(ceil.into()).min(cap) / &grid;
        let task = if hi {
            let wcet_hi = draw_r(&params.r_ratio, rng) * &wcet_lo;
            if wcet_hi > period {
                continue;
            }
            Task::hi(id, period, wcet_lo, wcet_hi)
        } else {
            match params.model_kind {
                ModelKind::Imc => {
                    let wcet_hi = &params.lambda * &wcet_lo;
                    Task::lo(id, period, wcet_lo, wcet_hi)
                }
                ModelKind::Emc => {
                    let t_max = &period / &params.lambda;
                    Task::lo(id, period, wcet_lo.clone(), wcet_lo).with_extended_period(t_max)
                }
            }
        };
        return Ok(task);
    }
    Err(GenError::RetryCapExceeded {
        target: rational::display(&params.u_target),
        tolerance: rational::display(&params.tolerance),
        attempts: RETRY_CAP,
    })
}

/// A task set whose `U_avg` lies within the tolerance window.
pub fn generate_task_set(params: &GenParams) -> Result<TaskSet, GenError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let lo = &params.u_target - &params.tolerance;
    let hi = &params.u_target + &params.tolerance;
    let mut set = TaskSet::new(params.model_kind, Vec::new());
    let mut total = Rational::zero();
    let mut attempts = 0u32;
    loop {
        let id = format!("tau{}", set.tasks.len() + 1);
        let task = generate_task(params, &mut rng, &id)?;
        let contribution = (task.u_lo() + task.u_hi(params.model_kind)) / Rational::from_integer(2.into());
        if &total + &contribution > hi {
            attempts += 1;
            if attempts >= RETRY_CAP {
                return Err(GenError::RetryCapExceeded {
                    target: rational::display(&params.u_target),
                    tolerance: rational::display(&params.tolerance),
                    attempts,
                });
            }
            continue;
        }
        total += contribution;
        set.tasks.push(task);
        if total >= lo {
            debug_assert_eq!(model::utilizations(&set).map(|u| u.u_avg()).ok(), Some(total));
            return Ok(set);
        }
    }
}
