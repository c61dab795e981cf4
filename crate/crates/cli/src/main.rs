//! `imc-edfvd` command-line front end.
//!
//! Exit codes: 0 on success or a schedulable verdict, 1 on an
//! unschedulable verdict (or a simulated deadline miss), 2 on input errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use imc_edfvd::analysis::{self, HighModeBound, Verdict, XPolicy};
use imc_edfvd::experiment::{self, SweepConfig};
use imc_edfvd::gen::{self, GenParams, RRatio};
use imc_edfvd::model::{self, ModelKind, TaskSet};
use imc_edfvd::quality::{self, QualityError};
use imc_edfvd::rational::{self, Rational};
use imc_edfvd::sim::{self, Scenario, ScenarioKind};
use imc_edfvd::speedup::{self, RatioPair};
use serde_json::json;

#[derive(Parser)]
#[command(name = "imc-edfvd", version, about = "EDF-VD analysis, optimization and simulation for IMC and EMC task sets")]
struct Cli {
    /// Base seed for generation, sweeps and randomized scenarios.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (output directory for `generate`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the schedulability test on a task set.
    Analyze {
        taskset: PathBuf,
        #[arg(long, default_value = "min")]
        x_policy: XPolicy,
    },
    /// Distribute spare HI-mode utilization to LO tasks.
    Optimize {
        taskset: PathBuf,
        /// Deadline scaling factor (defaults to the smallest admissible one).
        #[arg(long, value_parser = parse_rational)]
        x: Option<Rational>,
    },
    /// Drop LO-task HI budgets in quality order until the set passes.
    Drop { taskset: PathBuf },
    /// Simulate EDF-VD on a task set.
    Simulate {
        taskset: PathBuf,
        #[arg(long, value_parser = parse_rational)]
        x: Rational,
        /// `lo`, `full` or `switch:<task>:<job>`.
        #[arg(long, default_value = "lo")]
        scenario: ScenarioKind,
        #[arg(long, value_parser = parse_rational)]
        horizon: Option<Rational>,
        /// Write the trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Speedup factor at one point, or a table as CSV.
    Speedup(SpeedupArgs),
    /// Generate random task sets.
    Generate(GenerateArgs),
    /// Run an acceptance-ratio sweep and write CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sets_per_point: Option<usize>,
    },
}

#[derive(Args)]
struct SpeedupArgs {
    #[arg(long, requires = "lambda", conflicts_with = "table")]
    alpha: Option<f64>,
    #[arg(long, requires = "alpha")]
    lambda: Option<f64>,
    /// Reference table, or a full grid when `--step` is given.
    #[arg(long)]
    table: bool,
    #[arg(long, requires = "table")]
    step: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Imc,
    Emc,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0.5)]
    p_crit: f64,
    #[arg(long, value_parser = parse_rational, default_value = "1/2")]
    lambda: Rational,
    #[arg(long, value_parser = parse_rational, default_value = "1.5")]
    r_lo: Rational,
    #[arg(long, value_parser = parse_rational, default_value = "2.5")]
    r_hi: Rational,
    #[arg(long, value_parser = parse_rational, default_value = "0.75")]
    u_target: Rational,
    #[arg(long, value_enum, default_value = "imc")]
    model: ModelArg,
    /// Number of task sets.
    #[arg(short = 'n', long = "count", default_value_t = 1)]
    count: usize,
}

#[derive(Debug)]
struct CliError(String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

type Outcome = Result<bool, CliError>;

fn parse_rational(s: &str) -> Result<Rational, String> {
    rational::parse_rational(s).map_err(|e| format!("not a rational number: {:?}", e.0))
}

fn load(path: &Path) -> Result<TaskSet, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    let ts = TaskSet::from_json(&text).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    ts.ensure_valid()?;
    Ok(ts)
}

/// Writes to `--out` when given, stdout otherwise.
fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError(format!("{}: {e}", p.display()))),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn analyze(path: &Path, policy: XPolicy, out: Option<&Path>) -> Outcome {
    let ts = load(path)?;
    let u = model::utilizations(&ts)?;
    let verdict = analysis::analyze(&u, policy);
    let mut s = format!("model: {}\n", ts.model_kind);
    s += &format!(
        "utilization: U_LO^LO={} U_LO^HI={} U_HI^LO={} U_HI^HI={}\n",
        rational::display(&u.u_lo_lo),
        rational::display(&u.u_lo_hi),
        rational::display(&u.u_hi_lo),
        rational::display(&u.u_hi_hi)
    );
    s += &format!("verdict: {verdict}\n");
    match analysis::low_mode_x_min(&u) {
        Some(x) => s += &format!("x_min: {}\n", rational::display(&x)),
        None => s += "x_min: undefined\n",
    }
    s += &match analysis::high_mode_x_max(&u) {
        HighModeBound::AtMost(x) => format!("x_max: {}\n", rational::display(&x)),
        HighModeBound::Unconstrained => "x_max: unconstrained\n".into(),
        HighModeBound::Infeasible => "x_max: infeasible\n".into(),
    };
    match &verdict {
        Verdict::SchedulableEdfVd { range, x } => {
            s += &format!("x range: {range}\nx: {}\nvirtual deadlines:\n", rational::display(x));
            for (id, d) in analysis::virtual_deadlines(&ts, x)? {
                s += &format!("  {}: {}\n", id.as_str(), rational::display(&d));
            }
        }
        Verdict::WorstCaseReservationEdf => s += "x: 1 (real deadlines)\n",
        Verdict::Unschedulable(_) => {}
    }
    emit(out, &s)?;
    Ok(verdict.is_schedulable())
}

fn optimize(path: &Path, x: Option<Rational>, out: Option<&Path>) -> Outcome {
    let ts = load(path)?;
    let x = match x {
        Some(x) => x,
        None => quality::default_x(&ts)?
            .ok_or_else(|| CliError("no admissible x in (0, 1); pass --x explicitly".into()))?,
    };
    match quality::optimize_quality(&ts, &x) {
        Ok(plan) => {
            emit(out, &(serde_json::to_string_pretty(&plan)? + "\n"))?;
            Ok(true)
        }
        Err(e @ QualityError::Infeasible { .. }) => {
            eprintln!("{e}");
            Ok(false)
        }
        Err(e) => Err(e.into()),
    }
}

fn drop_tasks(path: &Path, out: Option<&Path>) -> Outcome {
    let ts = load(path)?;
    let outcome = quality::drop_low_tasks(&ts)?;
    let verdict = analysis::imc_test(&outcome.task_set, XPolicy::Min)?;
    let doc = json!({
        "schedulable": outcome.schedulable,
        "verdict": verdict.to_string(),
        "dropped": outcome.dropped.iter().map(|id| id.as_str()).collect::<Vec<_>>(),
        "task_set": serde_json::to_value(&outcome.task_set)?,
    });
    emit(out, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    Ok(outcome.schedulable)
}

fn simulate(
    path: &Path,
    x: &Rational,
    kind: ScenarioKind,
    horizon: Option<Rational>,
    trace_path: Option<&Path>,
    seed: u64,
    out: Option<&Path>,
) -> Outcome {
    let ts = load(path)?;
    let horizon = horizon.unwrap_or_else(|| sim::default_horizon(&ts));
    let trace = sim::simulate(&ts, x, &Scenario { kind, seed }, &horizon)?;
    if let Some(p) = trace_path {
        fs::write(p, serde_json::to_string_pretty(&trace.to_json())? + "\n")
            .map_err(|e| CliError(format!("{}: {e}", p.display())))?;
    }
    let violations = sim::check_trace(&ts, x, &trace);
    let mut s = format!("horizon: {}\n", rational::display(&horizon));
    s += &match trace.mode_switch_time() {
        Some(t) => format!("mode switch: {}\n", rational::display(&t)),
        None => "mode switch: none\n".into(),
    };
    s += &format!("events: {}\ndeadline misses: {}\n", trace.events.len(), trace.misses.len());
    for m in &trace.misses {
        s += &format!(
            "  {} job {} at {}\n",
            trace.task_ids[m.task].as_str(),
            m.job,
            rational::display(&trace.time(m.tick))
        );
    }
    s += &format!("trace violations: {}\n", violations.len());
    for v in &violations {
        s += &format!("  {v}\n");
    }
    emit(out, &s)?;
    Ok(trace.misses.is_empty() && violations.is_empty())
}

fn speedup_cmd(args: &SpeedupArgs, out: Option<&Path>) -> Outcome {
    if let (Some(a), Some(l)) = (args.alpha, args.lambda) {
        let f = speedup::speedup_factor(RatioPair::new(a, l)?);
        emit(out, &format!("{f:.6}\n"))?;
        return Ok(true);
    }
    if !args.table {
        return Err(CliError("pass --alpha and --lambda, or --table".into()));
    }
    let rows = match args.step {
        Some(step) => speedup::speedup_grid(step)?,
        None => speedup::speedup_table(&speedup::REFERENCE_ALPHAS, &speedup::REFERENCE_LAMBDAS),
    };
    let mut s = String::from("lambda,alpha,f\n");
    for (l, a, f) in rows {
        s += &format!("{l},{a},{f:.6}\n");
    }
    emit(out, &s)?;
    Ok(true)
}

fn generate(args: &GenerateArgs, seed: u64, out: Option<&Path>) -> Outcome {
    let dir = out.ok_or_else(|| CliError("generate needs --out <dir>".into()))?;
    let params = GenParams {
        p_criticality: args.p_crit,
        r_ratio: if args.r_lo == args.r_hi {
            RRatio::Fixed(args.r_lo.clone())
        } else {
            RRatio::Uniform {
                lo: args.r_lo.clone(),
                hi: args.r_hi.clone(),
            }
        },
        lambda: args.lambda.clone(),
        u_target: args.u_target.clone(),
        seed,
        model_kind: match args.model {
            ModelArg::Imc => ModelKind::Imc,
            ModelArg::Emc => ModelKind::Emc,
        },
        ..GenParams::default()
    };
    params.validate()?;
    fs::create_dir_all(dir).map_err(|e| CliError(format!("{}: {e}", dir.display())))?;
    let width = args.count.saturating_sub(1).max(1).to_string().len().max(4);
    let mut sets = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let set_seed = seed.wrapping_add(i as u64);
        let ts = gen::generate_task_set(&params.with_seed(set_seed))?;
        let u = model::utilizations(&ts)?;
        let name = format!("taskset-{i:0width$}.json");
        fs::write(dir.join(&name), ts.to_json_pretty() + "\n")?;
        sets.push(json!({
            "file": name,
            "seed": set_seed,
            "tasks": ts.tasks.len(),
            "u_avg": rational::display(&u.u_avg()),
            "u_lo_lo": rational::display(&u.u_lo_lo),
            "u_lo_hi": rational::display(&u.u_lo_hi),
            "u_hi_lo": rational::display(&u.u_hi_lo),
            "u_hi_hi": rational::display(&u.u_hi_hi),
        }));
    }
    let manifest = json!({
        "rng": gen::RNG_ALGORITHM,
        "seed_convention": "set i uses seed + i",
        "r_redraw": "per task",
        "params": serde_json::to_value(&params)?,
        "sets": sets,
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(true)
}

fn sweep(config: &Path, sets_per_point: Option<usize>, seed: Option<u64>, out: Option<&Path>) -> Outcome {
    let text = fs::read_to_string(config).map_err(|e| CliError(format!("{}: {e}", config.display())))?;
    let mut cfg: SweepConfig =
        serde_json::from_str(&text).map_err(|e| CliError(format!("{}: {e}", config.display())))?;
    if let Some(n) = sets_per_point {
        cfg.sets_per_point = n;
    }
    if let Some(s) = seed {
        cfg.fixed.seed = s;
    }
    let result = experiment::run_sweep(&cfg)?;
    match out {
        Some(p) => experiment::write_csv(&result, p)?,
        None => experiment::emit_csv(&result, io::stdout().lock())?,
    }
    let misses = result.total_sim_misses();
    if misses > 0 {
        eprintln!("{misses} accepted sets missed a deadline in simulation");
    }
    Ok(misses == 0)
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Analyze { taskset, x_policy } => analyze(&taskset, x_policy, out),
        Command::Optimize { taskset, x } => optimize(&taskset, x, out),
        Command::Drop { taskset } => drop_tasks(&taskset, out),
        Command::Simulate {
            taskset,
            x,
            scenario,
            horizon,
            trace,
        } => simulate(&taskset, &x, scenario, horizon, trace.as_deref(), cli.seed.unwrap_or(0), out),
        Command::Speedup(args) => speedup_cmd(&args, out),
        Command::Generate(args) => generate(&args, cli.seed.unwrap_or(0), out),
        Command::Sweep { config, sets_per_point } => sweep(&config, sets_per_point, cli.seed, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
