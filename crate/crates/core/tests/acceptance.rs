//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use csubbt::bt::{tick_root, BtError, BtNode, DecoratorPolicy, NodeKind, NodeStatus, TickContext, Value};
use csubbt::constraint::{move_and_pick, Binding};
use csubbt::csubbt::{
    assemble_csubbt, move_and_pick_samplers, run_csubbt, CSubBT, CsubbtConfig, StrategyTag, Terminal,
    UpdateOutcome,
};
use csubbt::domain::{param, ConstraintName, FailureRecord};
use csubbt::geom::{Pose2, Rect, Vec2};
use csubbt::harness::{
    load_scenarios, run_batch, run_reactivity, run_scenario, ExecutorKind, DEFAULT_MAX_TICKS,
    REACTIVITY_EXECUTORS,
};
use csubbt::samplers::{enumerate_joint, move_sampler, scalar, ConditionalSampler, GridSpec};
use csubbt::sim::{with_state, Desk, ObjectState, RobotConfig, SamplerConfig, World};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- 1: tick semantics against a reference evaluator ----

const TICK_CASES: usize = 10_000;
const TICK_LIMIT: Duration = Duration::from_secs(5);

fn leaf_status(name: &str) -> NodeStatus {
    match name.as_bytes()[0] {
        b'S' => NodeStatus::Success,
        b'R' => NodeStatus::Running,
        _ => NodeStatus::Failure,
    }
}

fn random_tree(rng: &mut ChaCha8Rng, depth: u32, id: &mut u32) -> BtNode {
    *id += 1;
    let n = *id;
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        if rng.gen_bool(0.5) {
            let c = ['S', 'F', 'R'][rng.gen_range(0..3)];
            BtNode::action(format!("{c}{n}"))
        } else {
            let c = ['S', 'F'][rng.gen_range(0..2)];
            BtNode::condition(format!("{c}{n}"))
        }
    } else {
        match rng.gen_range(0..5) {
            0 | 1 => {
                let k = rng.gen_range(1..=4);
                let kids = (0..k).map(|_| random_tree(rng, depth - 1, id)).collect();
                if rng.gen_bool(0.5) {
                    BtNode::sequence(format!("seq{n}"), kids)
                } else {
                    BtNode::fallback(format!("fb{n}"), kids)
                }
            }
            2 => {
                let k = rng.gen_range(1..=4);
                let m = rng.gen_range(1..=k);
                let kids = (0..k).map(|_| random_tree(rng, depth - 1, id)).collect();
                BtNode::parallel(format!("par{n}"), m, kids)
            }
            3 => BtNode::decorator(format!("inv{n}"), DecoratorPolicy::Inverter, random_tree(rng, depth - 1, id)),
            _ => BtNode::decorator(
                format!("retry{n}"),
                DecoratorPolicy::RetryUntilSuccessful {
                    max_attempts: rng.gen_range(0..3),
                },
                random_tree(rng, depth - 1, id),
            ),
        }
    }
}

/// Single first tick, written straight from the node definitions.
fn reference(node: &BtNode, path: &str, out: &mut Vec<(String, NodeStatus)>) -> NodeStatus {
    use NodeStatus::*;
    let child = |c: &BtNode, out: &mut Vec<(String, NodeStatus)>| reference(c, &format!("{path}/{}", c.name), out);
    let s = match &node.kind {
        NodeKind::Sequence => {
            let mut s = Success;
            for c in &node.children {
                s = child(c, out);
                if s != Success {
                    break;
                }
            }
            s
        }
        NodeKind::Fallback => {
            let mut s = Failure;
            for c in &node.children {
                s = child(c, out);
                if s != Failure {
                    break;
                }
            }
            s
        }
        NodeKind::Parallel { success_threshold: m } => {
            let all: Vec<NodeStatus> = node.children.iter().map(|c| child(c, out)).collect();
            let n = all.len();
            let ok = all.iter().filter(|s| **s == Success).count();
            let bad = all.iter().filter(|s| **s == Failure).count();
            if ok >= *m {
                Success
            } else if bad > n - m {
                Failure
            } else {
                Running
            }
        }
        NodeKind::Decorator(DecoratorPolicy::Inverter) => match child(&node.children[0], out) {
            Success => Failure,
            Failure => Success,
            Running => Running,
        },
        NodeKind::Decorator(DecoratorPolicy::RetryUntilSuccessful { max_attempts }) => {
            match child(&node.children[0], out) {
                Failure if *max_attempts == 1 => Failure,
                Failure => Running,
                s => s,
            }
        }
        _ => leaf_status(&node.name),
    };
    out.push((path.to_string(), s));
    s
}

fn tick_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..TICK_CASES {
        let mut id = 0;
        let mut tree = random_tree(&mut rng, 4, &mut id);
        let mut expected = Vec::new();
        let want = reference(&tree, &tree.name.clone(), &mut expected);
        let mut ctx = TickContext::new();
        let mut leaves = |n: &BtNode, _: &str, _: &mut TickContext| -> Result<NodeStatus, BtError> { Ok(leaf_status(&n.name)) };
        let got = tick_root(&mut tree, &mut ctx, &mut leaves).map_err(|e| format!("case {case}: {e}"))?;
        let trace: Vec<(String, NodeStatus)> = ctx.trace.iter().map(|e| (e.path.clone(), e.status)).collect();
        if got != want || trace != expected {
            return Err(format!("case {case}: root {got} vs reference {want}"));
        }
    }
    let t = start.elapsed();
    check(t < TICK_LIMIT, format!("{TICK_CASES} trees in {:.2}s (limit 5s)", t.as_secs_f64()))
}

// ---- 2: parameter-update cases ----

fn desk_world() -> World {
    let mut w = World::new(RobotConfig::default(), Rect::new(-1.0, -2.0, 5.0, 2.0), Pose2::new(0.0, 0.0, 0.0));
    w.desks.push(Desk {
        id: "d".into(),
        rect: Rect::new(2.75, -0.25, 3.25, 0.25),
    });
    w.objects.insert(
        "cube".into(),
        ObjectState::new(Pose2::new(2.85, 0.0, 0.0), 0.05, Some("d".into())),
    );
    w
}

fn initial(w: &World, target: &str) -> Binding {
    let mut b = Binding::new();
    b.insert(param::X0_B.into(), Value::Pose(w.base));
    b.insert(param::X0_A.into(), Value::Config(w.arm));
    b.insert(param::TARGET.into(), Value::Str(target.into()));
    b
}

fn assemble(w: &World, config: &SamplerConfig) -> CSubBT {
    assemble_csubbt(
        move_and_pick(),
        move_and_pick_samplers(config),
        CsubbtConfig::move_and_pick(),
        initial(w, "cube"),
        w,
    )
    .expect("assembles")
}

fn exhaust(t: &mut CSubBT, name: &str, w: &World) {
    let current = with_state(&t.parameters(), w);
    let s = t.sampler_mut(name).expect("registered");
    while s.next(&current, w).expect("sampler runs").is_some() {}
}

fn record(c: ConstraintName, i: usize) -> FailureRecord {
    FailureRecord {
        constraint: c,
        action_index: i,
    }
}

fn update_cases() -> Verdict {
    let mut notes = Vec::new();

    let mut w = desk_world();
    let mut t = assemble(&w, &SamplerConfig::default());
    t.set_status_table(vec![true, true, false, false]);
    let calls = t.sampler_calls();
    let out = t.update_parameters(&record(ConstraintName::NearGrasp, 2), &mut w).map_err(|e| e.to_string())?;
    let ok = out == UpdateOutcome::Continue
        && t.status_table() == [true, false, false, false]
        && t.sampler_calls() == calls;
    notes.push(format!("NearGrasp@2 {}", if ok { "ok" } else { "WRONG" }));
    let mut all = ok;

    let mut w = desk_world();
    let mut t = assemble(&w, &SamplerConfig::default());
    t.set_status_table(vec![true, true, false, false]);
    exhaust(&mut t, "psi_wave", &w);
    let moves = t.sampler("psi_move").map(|s| s.emitted()).unwrap_or(0);
    let out = t.update_parameters(&record(ConstraintName::CubeInSight, 2), &mut w).map_err(|e| e.to_string())?;
    let ok = out == UpdateOutcome::Continue
        && t.status_table() == [false, true, false, false]
        && t.sampler("psi_move").map(|s| s.emitted()).unwrap_or(0) == moves + 1;
    notes.push(format!("CubeInSight@2 {}", if ok { "ok" } else { "WRONG" }));
    all &= ok;

    let mut w = desk_world();
    let mut t = assemble(&w, &SamplerConfig::default());
    exhaust(&mut t, "psi_move", &w);
    let out = t.update_parameters(&record(ConstraintName::PathValid, 0), &mut w).map_err(|e| e.to_string())?;
    let ok = out == UpdateOutcome::Failure;
    notes.push(format!("PathValid@0 {}", if ok { "ok" } else { "WRONG" }));
    all &= ok;

    check(all, notes.join(", "))
}

// ---- 3: robustness batch ----

const BATCH_LIMIT: Duration = Duration::from_secs(120);

fn scenarios_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn robustness() -> Verdict {
    use StrategyTag::*;
    let required: [&[StrategyTag]; 4] = [
        &[Relocate],
        &[Relocate, WaveArm],
        &[Relocate, WaveArm, MoveBase],
        &[RedirectGrasp, Relocate],
    ];
    let start = Instant::now();
    let scenarios = load_scenarios(&scenarios_dir()).map_err(|e| e.to_string())?;
    if scenarios.len() != 4 {
        return Err(format!("expected 4 scenarios, found {}", scenarios.len()));
    }
    let reports = run_batch(&scenarios, 10, 0, ExecutorKind::Csubbt, DEFAULT_MAX_TICKS);
    let t = start.elapsed();
    let mut ok = t < BATCH_LIMIT;
    let mut total = 0;
    let mut parts = Vec::new();
    for (i, s) in scenarios.iter().enumerate() {
        let runs: Vec<_> = reports.iter().filter(|r| r.scenario == s.name).collect();
        let wins = runs.iter().filter(|r| r.succeeded()).count();
        let tags: BTreeSet<StrategyTag> = runs
            .iter()
            .filter(|r| r.succeeded())
            .flat_map(|r| r.strategy_tags.iter().copied())
            .collect();
        let want: BTreeSet<StrategyTag> = required[i].iter().copied().collect();
        ok &= want.is_subset(&tags);
        if i == 0 || i == 3 {
            ok &= wins == 10;
        }
        total += wins;
        parts.push(format!("{} {wins}/10 {}", s.name, csubbt::csubbt::format_tags(&tags)));
    }
    ok &= total >= 36;
    check(ok, format!("{}; total {total}/40 in {:.1}s", parts.join(", "), t.as_secs_f64()))
}

// ---- 4: reactivity ----

fn reactivity() -> Verdict {
    let (rows, _) = run_reactivity(5, 10, &REACTIVITY_EXECUTORS).map_err(|e| e.to_string())?;
    let mean = |n: usize, k: ExecutorKind| {
        rows.iter()
            .find(|r| r.n == n && r.executor == k)
            .map(|r| r.mean_planning_calls)
            .unwrap_or(f64::NAN)
    };
    let mut ok = true;
    let mut prev_gap = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for n in 1..=5 {
        let (c, r) = (mean(n, ExecutorKind::Csubbt), mean(n, ExecutorKind::Replan));
        let gap = r - c;
        ok &= if n == 1 { (c - r).abs() <= 1.0 } else { c < r };
        ok &= gap >= prev_gap;
        prev_gap = gap;
        parts.push(format!("n={n} {c:.1}/{r:.1}"));
    }
    ok &= rows.iter().all(|r| r.successes == r.trials);
    check(ok, format!("csubbt/replan planning calls: {}", parts.join(", ")))
}

// ---- 5: sampler properties ----

const PROP_CASES: u32 = 1000;

fn toy_world() -> World {
    let mut w = World::new(RobotConfig::default(), Rect::new(0.0, 0.0, 2.5, 2.5), Pose2::new(0.0, 0.0, 0.0));
    w.desks.push(Desk {
        id: "desk".into(),
        rect: Rect::new(0.25, 0.25, 2.25, 1.625),
    });
    w.objects.insert(
        "cube".into(),
        ObjectState::new(Pose2::new(1.25, 0.9, 0.0), 0.05, Some("desk".into())),
    );
    w
}

fn list(name: &str, n: usize) -> ConditionalSampler {
    ConditionalSampler::from_list(name, &[name], (0..n).map(|i| scalar(name, i as f64)).collect())
}

fn sampler_properties() -> Verdict {
    let mut runner = TestRunner::new(Config {
        cases: PROP_CASES,
        failure_persistence: None,
        ..Config::default()
    });
    let world = World::new(RobotConfig::default(), Rect::new(0.0, 0.0, 1.0, 1.0), Pose2::new(0.0, 0.0, 0.0));
    let toy = toy_world();
    let result = runner.run(
        &(
            prop::collection::vec(0usize..4, 0..4),
            0usize..12,
            (0.0f64..2.5, 0.0f64..2.5),
            (0.0f64..2.5, 1.75f64..2.5),
        ),
        |(sizes, n, (qx, qy), (bx, by))| {
            // no repeats, then absorbing exhaustion
            let mut s = list("a", n);
            let mut seen = Vec::new();
            while let Some(b) = s.next(&Binding::new(), &world).unwrap() {
                prop_assert!(!seen.contains(&b));
                seen.push(b);
            }
            prop_assert_eq!(seen.len(), n);
            for _ in 0..3 {
                prop_assert!(s.next(&Binding::new(), &world).unwrap().is_none());
            }

            // nearest-first order of the grid and of psi_move
            let q = Vec2::new(qx, qy);
            let pts = GridSpec::over(toy.extents, 0.25).nearest_first(q);
            prop_assert!(pts.windows(2).all(|p| q.dist(p[0]) <= q.dist(p[1]) + 1e-12));
            let mut w = toy.clone();
            w.base = Pose2::new(bx, by, 0.0);
            let inputs = initial(&w, "cube");
            let mut m = move_sampler(&SamplerConfig::default());
            let mut last = 0.0;
            let mut goals = BTreeSet::new();
            while let Some(b) = m.next(&inputs, &w).unwrap() {
                let Some(Value::Pose(g)) = b.get(param::X_Q_B) else {
                    return Err(TestCaseError::fail("psi_move emitted no base goal"));
                };
                let d = g.position().dist(w.base.position());
                prop_assert!(d + 1e-12 >= last);
                let key = format!("{:.6},{:.6}", g.x, g.y);
                prop_assert!(goals.insert(key));
                last = d;
            }
            prop_assert!(m.next(&inputs, &w).unwrap().is_none());

            // joint enumeration covers the cross product
            let names = ["p", "q", "r"];
            let mut seq: Vec<_> = sizes.iter().enumerate().map(|(i, k)| list(names[i], *k)).collect();
            let joint = enumerate_joint(&mut seq, &Binding::new(), &world, usize::MAX).unwrap();
            let product: usize = sizes.iter().product();
            prop_assert_eq!(joint.len(), product);
            let distinct: BTreeSet<String> = joint.iter().map(|b| serde_json::to_string(b).unwrap()).collect();
            prop_assert_eq!(distinct.len(), product);
            Ok(())
        },
    );
    match result {
        Ok(()) => Ok(format!("{PROP_CASES} cases")),
        Err(e) => Err(e.to_string()),
    }
}

// ---- 6: completeness on a 10x10 grid ----

/// Cell centers of the 10x10 grid whose distance to the desk lies in the
/// near-grasp band, counted by brute force.
fn annulus_cells(w: &World) -> usize {
    let desk = Rect::new(0.25, 0.25, 2.25, 1.625);
    let (lo, hi) = (w.config.base_radius, w.config.base_radius + w.config.reach);
    let mut n = 0;
    for i in 0..10 {
        for j in 0..10 {
            let (x, y) = (0.125 + 0.25 * i as f64, 0.125 + 0.25 * j as f64);
            let dx = (desk.x0 - x).max(0.0).max(x - desk.x1);
            let dy = (desk.y0 - y).max(0.0).max(y - desk.y1);
            let d = (dx * dx + dy * dy).sqrt();
            if d >= lo - 1e-9 && d <= hi + 1e-9 {
                n += 1;
            }
        }
    }
    n
}

fn completeness() -> Verdict {
    let config = SamplerConfig::default();
    let start = Pose2::new(1.125, 2.25, 0.0);

    let mut w = toy_world();
    w.base = start;
    w.objects.insert(
        "cube".into(),
        ObjectState::new(Pose2::new(1.25, 1.5, 0.0), 0.05, Some("desk".into())),
    );
    let mut t = assemble(&w, &config);
    let reach = run_csubbt(&mut t, &mut w, DEFAULT_MAX_TICKS).map_err(|e| e.to_string())?;

    let mut w = toy_world();
    w.base = start;
    let cells = annulus_cells(&w);
    let mut t = assemble(&w, &config);
    let far = run_csubbt(&mut t, &mut w, DEFAULT_MAX_TICKS).map_err(|e| e.to_string())?;
    let emitted = t.sampler("psi_move").map(|s| s.emitted()).unwrap_or(0);
    // the joint seeding search already walks the whole annulus
    let trace = t.trace_text();
    let logged = trace.contains("\tEXHAUSTED\tPathValid\t0") && trace.contains("\tRESULT\tFAILURE\tsampler-exhausted");

    let ok = reach.status == NodeStatus::Success
        && far.status == NodeStatus::Failure
        && far.terminal == Some(Terminal::SamplerExhausted)
        && emitted as usize == cells
        && logged;
    check(
        ok,
        format!(
            "reachable {}; unreachable {} ({:?}) after {emitted} psi_move emissions ({cells} annulus cells)",
            reach.status, far.status, far.terminal
        ),
    )
}

// ---- 7: determinism ----

fn determinism() -> Verdict {
    let scenarios = load_scenarios(&scenarios_dir()).map_err(|e| e.to_string())?;
    let mut runs = 0;
    for s in &scenarios {
        for seed in 0..3 {
            for k in REACTIVITY_EXECUTORS {
                let a = run_scenario(s, seed, k, DEFAULT_MAX_TICKS).map_err(|e| e.to_string())?;
                let b = run_scenario(s, seed, k, DEFAULT_MAX_TICKS).map_err(|e| e.to_string())?;
                if a.trace.as_bytes() != b.trace.as_bytes() || a.event_log.as_bytes() != b.event_log.as_bytes() {
                    return Err(format!("{} seed {seed} {k} differs", s.name));
                }
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} repeated runs byte-identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 7] = [
        ("tick semantics oracle", tick_oracle),
        ("parameter update cases", update_cases),
        ("robustness 4x10", robustness),
        ("reactivity n=1..5", reactivity),
        ("sampler properties", sampler_properties),
        ("completeness witness", completeness),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("criterion {} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({d})", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
