//! Fixtures shared by the benchmarks.

use imc_edfvd::analysis::{self, Verdict, XPolicy};
use imc_edfvd::gen::{self, GenParams};
use imc_edfvd::rational::rat;
use imc_edfvd::{ModelKind, Rational, TaskSet};

/// Generated sets at `u_target`, seeds `0..n`.
pub fn generated_sets(n: u64, u_target: Rational, model_kind: ModelKind) -> Vec<TaskSet> {
    (0..n)
        .map(|seed| {
            let p = GenParams {
                u_target: u_target.clone(),
                model_kind,
                seed,
                ..GenParams::default()
            };
            gen::generate_task_set(&p).expect("default parameters generate")
        })
        .collect()
}

/// First generated set that needs deadline scaling, with a coarse `x`.
pub fn edfvd_set(model_kind: ModelKind) -> (TaskSet, Rational) {
    generated_sets(1000, rat(17, 20), model_kind)
        .into_iter()
        .find_map(|ts| match analysis::imc_test(&ts, XPolicy::Min).ok()? {
            Verdict::SchedulableEdfVd { range, .. } => {
                let x = range.pick_with_denominator(XPolicy::Min, 1000);
                Some((ts, x))
            }
            _ => None,
        })
        .expect("some set needs x < 1")
}
