//! Schedulability analysis, speedup bounds, output-quality tuning and
//! simulation for imprecise (IMC) and elastic (EMC) mixed-criticality task
//! sets under EDF with virtual deadlines.
//!
//! - [`model`]: tasks, task sets, validation and utilizations.
//! - [`analysis`]: the utilization-based EDF-VD test and the range of
//!   admissible deadline scaling factors.
//! - [`speedup`]: closed-form speedup factor and its grid maximum.
//! - [`quality`]: LO-task quality metrics, budget tuning and task dropping.
//! - [`sim`]: discrete-event simulator and trace checker.
//! - [`gen`]: seeded random task-set generator.
//! - [`experiment`]: acceptance-ratio sweeps and their CSV form.

pub mod analysis;
pub mod experiment;
pub mod gen;
pub mod model;
pub mod quality;
pub mod rational;
pub mod sim;
pub mod speedup;

pub use analysis::{imc_test, FailedCondition, HighModeBound, Verdict, XPolicy, XRange};
pub use model::{Criticality, ModelError, ModelKind, Task, TaskId, TaskSet, UtilizationSummary};
pub use rational::Rational;
