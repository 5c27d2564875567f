//! Scenario runs, seeded batches and reports for the three executors.

mod reactivity;
mod tradibt;

pub use reactivity::{reactivity_csv, reactivity_scenario, run_reactivity, ReactivityRow, REACTIVITY_EXECUTORS};
pub use tradibt::{tradibt_tree, TradiBt};

use crate::bt::{NodeStatus, Value};
use crate::constraint::{Binding, FactorableAction, Plan, RecipeBook};
use crate::csubbt::{
    assemble_csubbt, format_tags, move_and_pick_samplers, run_csubbt, run_csubbt_observed, CSubBT, CsubbtConfig,
    CsubbtError, RunOutcome, StrategyTag,
};
use crate::domain::param;
use crate::samplers::enumerate_joint;
use crate::sim::{with_state, Scenario, ScenarioError, World};
use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

/// Root-tick budget of a whole run when none is given.
pub const DEFAULT_MAX_TICKS: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExecutorKind {
    Csubbt,
    Tradibt,
    Replan,
}

impl fmt::Display for ExecutorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecutorKind::Csubbt => "csubbt",
            ExecutorKind::Tradibt => "tradibt",
            ExecutorKind::Replan => "replan",
        })
    }
}

impl FromStr for ExecutorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csubbt" => Ok(ExecutorKind::Csubbt),
            "tradibt" => Ok(ExecutorKind::Tradibt),
            "replan" => Ok(ExecutorKind::Replan),
            other => Err(format!("unknown executor `{other}` (csubbt, tradibt, replan)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Csubbt(#[from] CsubbtError),
    #[error("plan step `{0}` has no executor; only Move-and-Pick steps run")]
    UnsupportedStep(String),
    #[error("plan step `{0}` names no target and the scenario has no default object")]
    NoTarget(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub executor: ExecutorKind,
    pub status: NodeStatus,
    pub root_ticks: u64,
    pub sampler_calls: u64,
    /// Resample events for csubbt and tradibt; rebound plan steps for replan.
    pub planning_calls: u64,
    pub wall_time_s: f64,
    pub strategy_tags: BTreeSet<StrategyTag>,
    pub trace_path: Option<PathBuf>,
}

impl RunReport {
    pub fn succeeded(&self) -> bool {
        self.status == NodeStatus::Success
    }

    /// The report of a run that errored before finishing.
    fn failed(scenario: &str, seed: u64, executor: ExecutorKind) -> Self {
        RunReport {
            scenario: scenario.to_string(),
            seed,
            executor,
            status: NodeStatus::Failure,
            root_ticks: 0,
            sampler_calls: 0,
            planning_calls: 0,
            wall_time_s: 0.0,
            strategy_tags: BTreeSet::new(),
            trace_path: None,
        }
    }
}

/// A finished run with its trace and the world's event log.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub trace: String,
    pub event_log: String,
}

/// Move-and-Pick steps of the scenario plan with their targets. A step
/// without a target uses the placement object, or the only object.
pub fn plan_steps(scenario: &Scenario) -> Result<Vec<(FactorableAction, String)>, HarnessError> {
    let plan = Plan::factor(&scenario.plan, &RecipeBook::standard());
    let fallback = scenario
        .placement
        .as_ref()
        .map(|p| p.object.clone())
        .or_else(|| match scenario.objects.as_slice() {
            [only] => Some(only.id.clone()),
            _ => None,
        });
    plan.actions
        .into_iter()
        .map(|step| {
            if step.action.atomic_actions.len() != 4 {
                return Err(HarnessError::UnsupportedStep(step.action.name));
            }
            let target = step
                .target
                .or_else(|| fallback.clone())
                .ok_or_else(|| HarnessError::NoTarget(step.action.name.clone()))?;
            Ok((step.action, target))
        })
        .collect()
}

fn initial(world: &World, target: &str) -> Binding {
    let mut b = Binding::new();
    b.insert(param::X0_B.into(), Value::Pose(world.base));
    b.insert(param::X0_A.into(), Value::Config(world.arm));
    b.insert(param::TARGET.into(), Value::Str(target.to_string()));
    b
}

#[derive(Default)]
struct Totals {
    root_ticks: u64,
    sampler_calls: u64,
    planning_calls: u64,
    trace: String,
    tags: BTreeSet<StrategyTag>,
}

/// Binds every step in `targets` from scratch with fresh samplers, as a
/// planner without a repair strategy would. Returns the sampler calls spent.
fn rebind(scenario: &Scenario, world: &World, targets: &[String]) -> Result<u64, HarnessError> {
    let mut calls = 0;
    for t in targets {
        let mut samplers = move_and_pick_samplers(&scenario.samplers);
        let start = with_state(&initial(world, t), world);
        enumerate_joint(&mut samplers[..2], &start, world, 1).map_err(CsubbtError::from)?;
        calls += samplers.iter().map(|s| s.calls()).sum::<u64>();
    }
    Ok(calls)
}

fn run_step(
    scenario: &Scenario,
    world: &mut World,
    kind: ExecutorKind,
    action: FactorableAction,
    target: &str,
    later: &[String],
    budget: u64,
    totals: &mut Totals,
) -> Result<RunOutcome, HarnessError> {
    let samplers = move_and_pick_samplers(&scenario.samplers);
    let config = CsubbtConfig::move_and_pick();
    let start = initial(world, target);
    totals.trace.push_str(&format!("0\tTARGET\t{target}\n"));
    if kind == ExecutorKind::Tradibt {
        let mut tree = TradiBt::new(action, samplers, config, start, world)?;
        let out = tree.run(world, budget)?;
        totals.sampler_calls += tree.sampler_calls();
        totals.planning_calls += tree.resamples();
        totals.trace.push_str(&tree.trace_text());
        totals.tags.extend(tree.strategy_tags());
        return Ok(out);
    }
    let mut tree: CSubBT = assemble_csubbt(action, samplers, config, start, world)?;
    let out = if kind == ExecutorKind::Replan {
        // every repair triggers a full rebind of this and all later steps
        let mut seen = 0;
        let mut extra_calls = 0;
        let mut extra_planning = 0;
        let mut failure: Option<HarnessError> = None;
        let out = run_csubbt_observed(&mut tree, world, budget, &mut |t, w| {
            let r = t.stats().resamples;
            while seen < r {
                seen += 1;
                extra_planning += 1 + later.len() as u64;
                match rebind(scenario, w, later) {
                    Ok(c) => extra_calls += c,
                    Err(e) => failure = Some(e),
                }
            }
            Ok(())
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        totals.sampler_calls += extra_calls;
        totals.planning_calls += extra_planning;
        out
    } else {
        let out = run_csubbt(&mut tree, world, budget)?;
        totals.planning_calls += tree.stats().resamples;
        out
    };
    totals.sampler_calls += tree.sampler_calls();
    totals.trace.push_str(&tree.trace_text());
    totals.tags.extend(tree.strategy_tags());
    Ok(out)
}

/// One deterministic run of `scenario` with object placement drawn from
/// `seed`. Steps run in plan order; the held object is stowed after each.
pub fn run_scenario(
    scenario: &Scenario,
    seed: u64,
    executor: ExecutorKind,
    max_ticks: u64,
) -> Result<RunOutput, HarnessError> {
    let started = Instant::now();
    let steps = plan_steps(scenario)?;
    let mut world = scenario.build_world(seed);
    let mut totals = Totals::default();
    let mut status = NodeStatus::Success;
    let targets: Vec<String> = steps.iter().map(|(_, t)| t.clone()).collect();
    for (i, (action, target)) in steps.into_iter().enumerate() {
        let budget = max_ticks.saturating_sub(totals.root_ticks);
        let out = run_step(
            scenario,
            &mut world,
            executor,
            action,
            &target,
            &targets[i + 1..],
            budget,
            &mut totals,
        )?;
        totals.root_ticks += out.root_ticks;
        if out.status != NodeStatus::Success {
            status = NodeStatus::Failure;
            break;
        }
        world.stow_held();
    }
    Ok(RunOutput {
        report: RunReport {
            scenario: scenario.name.clone(),
            seed,
            executor,
            status,
            root_ticks: totals.root_ticks,
            sampler_calls: totals.sampler_calls,
            planning_calls: totals.planning_calls,
            wall_time_s: started.elapsed().as_secs_f64(),
            strategy_tags: totals.tags,
            trace_path: None,
        },
        trace: totals.trace,
        event_log: world.event_log_text(),
    })
}

/// Loads and runs a scenario file. With `trace`, the trace is written there
/// and the event log next to it with an `.events` suffix.
pub fn run_scenario_file(
    path: &Path,
    seed: u64,
    executor: ExecutorKind,
    max_ticks: u64,
    trace: Option<&Path>,
) -> Result<RunOutput, HarnessError> {
    let scenario = Scenario::load(path)?;
    let mut out = run_scenario(&scenario, seed, executor, max_ticks)?;
    if let Some(p) = trace {
        write(p, &out.trace)?;
        write(&events_path(p), &out.event_log)?;
        out.report.trace_path = Some(p.to_path_buf());
    }
    Ok(out)
}

pub fn events_path(trace: &Path) -> PathBuf {
    let mut s = trace.as_os_str().to_owned();
    s.push(".events");
    PathBuf::from(s)
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs seeds `seed_base..seed_base + trials` of every scenario. A run that
/// errors counts as a failure.
pub fn run_batch(
    scenarios: &[Scenario],
    trials: u64,
    seed_base: u64,
    executor: ExecutorKind,
    max_ticks: u64,
) -> Vec<RunReport> {
    // scenarios are independent: one thread each, joined in input order
    std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| {
                scope.spawn(move || {
                    (seed_base..seed_base + trials)
                        .map(|seed| match run_scenario(s, seed, executor, max_ticks) {
                            Ok(out) => out.report,
                            Err(_) => RunReport::failed(&s.name, seed, executor),
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("batch worker panicked"))
            .collect()
    })
}

/// Every `*.json` file of `dir`, sorted by file name.
pub fn load_scenarios(dir: &Path) -> Result<Vec<Scenario>, HarnessError> {
    let io = |source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()).map_err(io))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    Ok(paths
        .iter()
        .map(|p| Scenario::load(p))
        .collect::<Result<_, _>>()?)
}

pub const CSV_HEADER: [&str; 9] = [
    "scenario",
    "seed",
    "executor",
    "status",
    "root_ticks",
    "sampler_calls",
    "planning_calls",
    "wall_time_s",
    "strategy_tags",
];

pub fn report_csv(reports: &[RunReport]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.scenario.clone(),
            r.seed.to_string(),
            r.executor.to_string(),
            r.status.to_string(),
            r.root_ticks.to_string(),
            r.sampler_calls.to_string(),
            r.planning_calls.to_string(),
            format!("{:.6}", r.wall_time_s),
            format_tags(&r.strategy_tags),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Successes per scenario, in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchRow {
    pub scenario: String,
    pub successes: u64,
    pub trials: u64,
}

pub fn summarize(reports: &[RunReport]) -> Vec<BatchRow> {
    let mut rows: Vec<BatchRow> = Vec::new();
    for r in reports {
        let i = match rows.iter().position(|row| row.scenario == r.scenario) {
            Some(i) => i,
            None => {
                rows.push(BatchRow {
                    scenario: r.scenario.clone(),
                    successes: 0,
                    trials: 0,
                });
                rows.len() - 1
            }
        };
        rows[i].trials += 1;
        rows[i].successes += r.succeeded() as u64;
    }
    rows
}

/// Per-scenario success table with a total row.
pub fn report_table(reports: &[RunReport]) -> String {
    let rows = summarize(reports);
    let width = rows.iter().map(|r| r.scenario.len()).max().unwrap_or(0).max(8);
    let mut out = format!("{:<width$}  {:>9}  {:>6}  {:>7}\n", "scenario", "successes", "trials", "rate");
    let line = |name: &str, s: u64, n: u64| {
        let rate = if n == 0 { 0.0 } else { 100.0 * s as f64 / n as f64 };
        format!("{name:<width$}  {s:>9}  {n:>6}  {rate:>6.1}%\n")
    };
    for r in &rows {
        out.push_str(&line(&r.scenario, r.successes, r.trials));
    }
    let s = rows.iter().map(|r| r.successes).sum();
    let n = rows.iter().map(|r| r.trials).sum();
    out.push_str(&line("total", s, n));
    out
}

/// The human-readable table and the CSV of `reports`.
pub fn emit_report(reports: &[RunReport]) -> Result<(String, String), HarnessError> {
    Ok((report_table(reports), report_csv(reports)?))
}
