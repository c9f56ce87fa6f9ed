use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pdbo_core::checks::{run_checks, CheckOutcome};
use pdbo_core::experiments::{Method, MethodConfig};
use pdbo_core::{Execution, ProblemSpec};

use crate::error::{CliError, CliResult};
use crate::output::{
    metrics_at, summary_table, trajectory_rows, write_json, write_merged, write_trajectory, RunSummary, TrajectoryRow,
};
use crate::resolve::{load_problem, method_config, parse_method, LoadedProblem};
use crate::settings::Settings;

/// One resolved solver run and the directory it owns.
pub struct Task {
    pub method: Method,
    pub seed: u64,
    pub config: MethodConfig,
    pub dir: PathBuf,
}

pub struct Finished {
    pub summary: RunSummary,
    pub rows: Vec<TrajectoryRow>,
}

fn execute(problem: &LoadedProblem, task: &Task, inner_gap: bool) -> CliResult<Finished> {
    let solver_err = |source| CliError::Solver { method: task.method.to_string(), seed: task.seed, source };
    let out = task.config.run(&problem.spec).map_err(solver_err)?;
    let rows = trajectory_rows(&problem.spec, &out, inner_gap)?;
    let metrics = metrics_at(&problem.spec, &out.z_final, inner_gap)?;
    let summary = RunSummary {
        problem: problem.name.clone(),
        method: task.method.to_string(),
        seed: task.seed,
        rows: rows.len(),
        f_final: problem.spec.f_at(&out.z_final),
        f_last_iterate: out.trajectory.last().map(|r| r.f_value).unwrap_or(f64::NAN),
        z_final: out.z_final.clone(),
        lambda_final: out.lambda_final,
        lambda_max: out.lambda_max,
        metrics,
        val_accuracy: problem.hyperopt.as_ref().map(|h| h.val_accuracy(&out.z_final.y)),
        gradient_calls: out.grad_calls.gradient_calls(),
        calls: out.grad_calls,
        wall_time_s: out.trajectory.last().map(|r| r.wall_time_s).unwrap_or(0.0),
        config: task.config.clone(),
    };
    Ok(Finished { summary, rows })
}

fn write_task(task: &Task, done: &Finished) -> CliResult<()> {
    fs::create_dir_all(&task.dir).map_err(CliError::io(&task.dir))?;
    write_trajectory(&task.dir.join("trajectory.csv"), &done.rows)?;
    write_json(&task.dir.join("summary.json"), &done.summary)
}

/// Runs tasks on at most `jobs` workers; results come back in task order.
fn run_tasks(problem: &LoadedProblem, tasks: &[Task], jobs: usize, inner_gap: bool) -> CliResult<Vec<Finished>> {
    let work = |t: &Task| -> CliResult<Finished> {
        let done = execute(problem, t, inner_gap)?;
        write_task(t, &done)?;
        Ok(done)
    };
    let results = if jobs > 1 && tasks.len() > 1 {
        run_pooled(jobs, || Execution::Parallel.map(tasks, work))?
    } else {
        tasks.iter().map(work).collect()
    };
    results.into_iter().collect()
}

#[cfg(feature = "parallel")]
fn run_pooled<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn run_pooled<T: Send>(_jobs: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    Ok(f())
}

fn jobs_of(s: &Settings) -> CliResult<usize> {
    match s.jobs.unwrap_or(1) {
        0 => Err(CliError::Config("--jobs must be >= 1".into())),
        j => Ok(j),
    }
}

/// Everything that can be checked before any file is written.
struct Plan {
    problem: LoadedProblem,
    tasks: Vec<Task>,
    jobs: usize,
    inner_gap: bool,
    out: PathBuf,
}

fn plan_run(s: &Settings) -> CliResult<Plan> {
    let problem = load_problem(s.require_problem()?, s)?;
    let method = parse_method(s.method.as_deref().ok_or_else(|| CliError::Config("missing required --method".into()))?)?;
    let out = s.require_out()?.to_path_buf();
    let seeds = s.seed_list();
    let per_seed_dirs = seeds.len() > 1;
    let tasks = seeds
        .iter()
        .map(|&seed| {
            let dir = if per_seed_dirs { out.join(format!("seed-{seed}")) } else { out.clone() };
            Ok(Task { method, seed, config: method_config(s, &problem, method, seed)?, dir })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let inner_gap = problem.default_inner_gap() && s.no_inner_gap != Some(true);
    Ok(Plan { problem, tasks, jobs: jobs_of(s)?, inner_gap, out })
}

pub fn cmd_run(s: &Settings) -> CliResult<Vec<RunSummary>> {
    let plan = plan_run(s)?;
    fs::create_dir_all(&plan.out).map_err(CliError::io(&plan.out))?;
    let done = run_tasks(&plan.problem, &plan.tasks, plan.jobs, plan.inner_gap)?;
    Ok(done.into_iter().map(|d| d.summary).collect())
}

fn plan_compare(s: &Settings) -> CliResult<Plan> {
    let problem = load_problem(s.require_problem()?, s)?;
    let names: Vec<String> = match (&s.methods, &s.method) {
        (Some(m), _) if !m.is_empty() => m.clone(),
        (_, Some(m)) => vec![m.clone()],
        _ => return Err(CliError::Config("missing required --methods".into())),
    };
    let methods = names.iter().map(|n| parse_method(n)).collect::<CliResult<Vec<_>>>()?;
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].contains(m) {
            return Err(CliError::Config(format!("method `{m}` listed twice")));
        }
    }
    let out = s.require_out()?.to_path_buf();
    let seed = s.seed_list()[0];
    let tasks = methods
        .iter()
        .map(|&method| {
            let config = method_config(s, &problem, method, seed)?;
            Ok(Task { method, seed, config, dir: out.join(method.name()) })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let inner_gap = problem.default_inner_gap() && s.no_inner_gap != Some(true);
    Ok(Plan { problem, tasks, jobs: jobs_of(s)?, inner_gap, out })
}

/// Runs every method under the shared budget and writes `compare.csv` and `summary.md`
/// next to the per-method directories.
pub fn cmd_compare(s: &Settings) -> CliResult<Vec<RunSummary>> {
    let plan = plan_compare(s)?;
    fs::create_dir_all(&plan.out).map_err(CliError::io(&plan.out))?;
    let done = run_tasks(&plan.problem, &plan.tasks, plan.jobs, plan.inner_gap)?;
    let merged: Vec<(String, Vec<TrajectoryRow>)> = done.iter().map(|d| (d.summary.method.clone(), d.rows.clone())).collect();
    write_merged(&plan.out.join("compare.csv"), &merged)?;
    let summaries: Vec<RunSummary> = done.into_iter().map(|d| d.summary).collect();
    let table = summary_table(&summaries);
    let md = plan.out.join("summary.md");
    fs::write(&md, &table).map_err(CliError::io(&md))?;
    Ok(summaries)
}

pub const CHECK_SAMPLES: usize = 20;

/// Prints the check table; fails with [`CliError::ChecksFailed`] if any check fails.
pub fn check_problem(spec: &ProblemSpec, seed: u64, out: &mut dyn Write) -> CliResult<Vec<CheckOutcome>> {
    let checks = run_checks(spec, CHECK_SAMPLES, seed)?;
    let io = |e| CliError::Io { path: Path::new("<stdout>").into(), source: e };
    writeln!(out, "{:<20} {:<24} {:>12} {:>12}", "check", "status", "worst", "tolerance").map_err(io)?;
    for c in &checks {
        writeln!(out, "{:<20} {:<24} {:>12.3e} {:>12.1e}", c.name, c.status.to_string(), c.worst, c.tolerance).map_err(io)?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| c.failed()).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(checks)
    } else {
        writeln!(out, "failed: {}", failed.join(", ")).map_err(io)?;
        Err(CliError::ChecksFailed(failed.len()))
    }
}

pub fn cmd_check(name: &str, s: &Settings, out: &mut dyn Write) -> CliResult<Vec<CheckOutcome>> {
    let problem = load_problem(name, s)?;
    check_problem(&problem.spec, s.seed.unwrap_or(0), out)
}
