//! Stationary-base reactivity problems: n cubes in reach of the start pose,
//! each believed 12 cm to the side of where it is, so the pre-grasp camera
//! misses it and one arm wave finds it.

use super::{run_scenario, ExecutorKind, HarnessError, RunReport, DEFAULT_MAX_TICKS};
use crate::geom::Vec2;
use crate::sim::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub const REACTIVITY_EXECUTORS: [ExecutorKind; 3] =
    [ExecutorKind::Csubbt, ExecutorKind::Tradibt, ExecutorKind::Replan];

const BASE: Vec2 = Vec2::new(1.125, 1.375);
const BELIEF_ERROR: f64 = 0.12;

/// The `n`-target problem of `trial`; the trial seeds a ±2 cm jitter of
/// the believed cube positions along the desk.
pub fn reactivity_scenario(n: usize, trial: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(trial);
    let objects: Vec<_> = (0..n)
        .map(|i| {
            let y = BASE.y + 0.15 * (i as f64 - (n as f64 - 1.0) / 2.0) + rng.gen_range(-0.02..0.02);
            let belief = Vec2::new(1.6, y);
            let side = (belief - BASE).normalized().expect("cube away from base").perp();
            // alternate sides so neighbours never share a line of sight
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let offset = side * (sign * BELIEF_ERROR);
            let truth = belief - offset;
            json!({
                "id": format!("cube{i}"),
                "pose": [truth.x, truth.y, 0.0],
                "on": "desk",
                "belief_offset": [offset.x, offset.y],
            })
        })
        .collect();
    let plan: Vec<String> = (0..n)
        .flat_map(|i| [format!("Move:cube{i}"), format!("Pick:cube{i}")])
        .collect();
    let doc = json!({
        "name": format!("reactivity-n{n}"),
        "map": {
            "extents": [0.0, 0.0, 3.0, 3.0],
            "desks": [{"id": "desk", "rect": [1.5, 0.5, 1.9, 2.25]}],
        },
        "robot": {"base": [BASE.x, BASE.y, 0.0]},
        "objects": objects,
        "plan": plan,
        "seed_default": trial,
    });
    Scenario::parse(&doc.to_string()).expect("generated reactivity scenario is valid")
}

/// Means over the trials of one (n, executor) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactivityRow {
    pub n: usize,
    pub executor: ExecutorKind,
    pub trials: u64,
    pub successes: u64,
    pub mean_planning_calls: f64,
    pub mean_sampler_calls: f64,
    pub mean_wall_time_s: f64,
}

/// Runs n = 1..=max_n targets, `trials` each, for every executor.
pub fn run_reactivity(
    max_n: usize,
    trials: u64,
    executors: &[ExecutorKind],
) -> Result<(Vec<ReactivityRow>, Vec<RunReport>), HarnessError> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for n in 1..=max_n {
        for &executor in executors {
            let mut cell = Vec::new();
            for trial in 0..trials {
                let s = reactivity_scenario(n, trial);
                cell.push(run_scenario(&s, trial, executor, DEFAULT_MAX_TICKS)?.report);
            }
            let k = cell.len().max(1) as f64;
            rows.push(ReactivityRow {
                n,
                executor,
                trials,
                successes: cell.iter().filter(|r| r.succeeded()).count() as u64,
                mean_planning_calls: cell.iter().map(|r| r.planning_calls as f64).sum::<f64>() / k,
                mean_sampler_calls: cell.iter().map(|r| r.sampler_calls as f64).sum::<f64>() / k,
                mean_wall_time_s: cell.iter().map(|r| r.wall_time_s).sum::<f64>() / k,
            });
            reports.extend(cell);
        }
    }
    Ok((rows, reports))
}

pub(super) const REACTIVITY_HEADER: [&str; 7] = [
    "n",
    "executor",
    "trials",
    "successes",
    "mean_planning_calls",
    "mean_sampler_calls",
    "mean_wall_time_s",
];

pub fn reactivity_csv(rows: &[ReactivityRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REACTIVITY_HEADER)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.executor.to_string(),
            r.trials.to_string(),
            r.successes.to_string(),
            format!("{:.3}", r.mean_planning_calls),
            format!("{:.3}", r.mean_sampler_calls),
            format!("{:.6}", r.mean_wall_time_s),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
