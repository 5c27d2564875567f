use super::*;
use crate::bt::NodeStatus;
use crate::constraint::move_and_pick;
use crate::domain::FailureRecord;
use crate::geom::{Pose2, Rect, Vec2};
use crate::sim::{evaluate_constraint, ActionResult, Desk, ObjectState, Obstacle, ObstacleLevel, RobotConfig};

fn world() -> World {
    let mut w = World::new(
        RobotConfig::default(),
        Rect::new(-1.0, -2.0, 5.0, 2.0),
        Pose2::new(0.0, 0.0, 0.0),
    );
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

fn initial(w: &World) -> Binding {
    let mut b = Binding::new();
    b.insert(param::X0_B.into(), Value::Pose(w.base));
    b.insert(param::X0_A.into(), Value::Config(w.arm));
    b.insert(param::TARGET.into(), Value::Str("cube".into()));
    b
}

fn assemble(w: &World) -> CSubBT {
    assemble_csubbt(
        move_and_pick(),
        move_and_pick_samplers(&SamplerConfig::default()),
        CsubbtConfig::move_and_pick(),
        initial(w),
        w,
    )
    .unwrap()
}

fn cursors(t: &CSubBT) -> Vec<(String, u64, BTreeMap<String, crate::samplers::Cursor>)> {
    t.samplers()
        .iter()
        .map(|s| (s.name.clone(), s.calls(), s.cursor_state()))
        .collect()
}

fn exhaust(t: &mut CSubBT, name: &str, w: &World) {
    let current = with_state(&t.parameters(), w);
    let s = t.core.samplers.iter_mut().find(|s| s.name == name).unwrap();
    while s.next(&current, w).unwrap().is_some() {}
}

#[test]
fn assembles_four_canodes() {
    let w = world();
    let t = assemble(&w);
    assert_eq!(t.status_table(), vec![false; 4]);
    let seq = &t.root.children[0];
    assert_eq!(seq.children.len(), 5);
    assert!(matches!(seq.children[0].kind, NodeKind::CsNode { .. }));
    let names: Vec<&str> = seq.children[1..].iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["Move", "Pre-approach", "Approach", "Grasp"]);
    // seeded before the first tick
    for p in [param::X_Q_B, param::U_T_B, param::X_Q_A, param::X_Q_G, param::U_T_A] {
        assert!(t.ctx.blackboard.contains(p), "{p}");
    }
}

#[test]
fn logistic_clears_predecessor_without_sampling() {
    let mut w = world();
    let mut t = assemble(&w);
    t.set_status_table(vec![true, true, false, false]);
    let before = cursors(&t);
    let r = FailureRecord {
        constraint: ConstraintName::NearGrasp,
        action_index: 2,
    };
    assert_eq!(t.update_parameters(&r, &mut w).unwrap(), UpdateOutcome::Continue);
    assert_eq!(t.status_table(), vec![true, false, false, false]);
    assert_eq!(cursors(&t), before);
    assert_eq!(t.stats().resamples, 0);
}

#[test]
fn logistic_at_first_action_fails() {
    let mut w = world();
    let mut t = assemble(&w);
    let r = FailureRecord {
        constraint: ConstraintName::CloseCube,
        action_index: 0,
    };
    assert_eq!(t.update_parameters(&r, &mut w).unwrap(), UpdateOutcome::Failure);
}

#[test]
fn logistic_budget_escalates_to_sampler() {
    let mut w = world();
    let mut t = assemble(&w);
    let r = FailureRecord {
        constraint: ConstraintName::CloseCube,
        action_index: 3,
    };
    let calls = t.sampler_calls();
    for _ in 0..3 {
        t.update_parameters(&r, &mut w).unwrap();
    }
    assert_eq!(t.sampler_calls(), calls);
    assert_eq!(t.stats().logistic_retries, 3);
    t.update_parameters(&r, &mut w).unwrap();
    assert_eq!(t.stats().resamples, 1);
    assert!(t.sampler_calls() > calls);
}

#[test]
fn lost_sight_after_wave_moves_base_only() {
    let mut w = world();
    let mut t = assemble(&w);
    t.set_status_table(vec![true, true, false, false]);
    exhaust(&mut t, "psi_wave", &w);
    let old: Pose2 = t.ctx.blackboard.get(param::X_Q_B).unwrap().unwrap();
    let q_a = t.ctx.blackboard.read(param::X_Q_A).cloned();
    let pick_calls = t.sampler("psi_pick").unwrap().calls();
    let r = FailureRecord {
        constraint: ConstraintName::CubeInSight,
        action_index: 2,
    };
    assert_eq!(t.update_parameters(&r, &mut w).unwrap(), UpdateOutcome::Continue);
    assert_eq!(t.status_table(), vec![false, true, false, false]);
    let new: Pose2 = t.ctx.blackboard.get(param::X_Q_B).unwrap().unwrap();
    assert_ne!(old, new);
    assert_eq!(t.ctx.blackboard.read(param::X_Q_A).cloned(), q_a);
    assert_eq!(t.sampler("psi_pick").unwrap().calls(), pick_calls);
}

#[test]
fn exhausted_path_sampler_fails() {
    let mut w = world();
    let mut t = assemble(&w);
    exhaust(&mut t, "psi_move", &w);
    let r = FailureRecord {
        constraint: ConstraintName::PathValid,
        action_index: 0,
    };
    assert_eq!(t.update_parameters(&r, &mut w).unwrap(), UpdateOutcome::Failure);
    assert!(t.trace_text().contains("EXHAUSTED\tPathValid\t0"));
}

#[test]
fn set_bit_skips_executor() {
    let mut w = world();
    let mut t = assemble(&w);
    t.set_status_table(vec![true, false, false, false]);
    let before = w.clone().base;
    assert_eq!(t.tick_canode(0, &mut w).unwrap(), NodeStatus::Success);
    assert_eq!(t.stats().executions[0], 0);
    assert_eq!(w.base, before);
}

#[test]
fn successful_action_sets_bit() {
    let mut w = world();
    let mut t = assemble(&w);
    assert_eq!(t.tick_canode(0, &mut w).unwrap(), NodeStatus::Success);
    assert_eq!(t.status_table(), vec![true, false, false, false]);
    assert_eq!(t.stats().executions[0], 1);
}

#[test]
fn blocked_trajectory_records_failure() {
    let mut w = world();
    let mut t = assemble(&w);
    assert_eq!(t.tick_canode(0, &mut w).unwrap(), NodeStatus::Success);
    // a wall between the base and the desk
    let x = w.base.x + 0.2;
    w.obstacles.push(Obstacle {
        rect: Rect::new(x, -1.0, x + 0.05, 1.0),
        level: ObstacleLevel::All,
    });
    let b = with_state(&t.parameters(), &w);
    assert!(!evaluate_constraint(&ConstraintName::TrajectoryValid, &b, &w).unwrap());
    assert_eq!(t.tick_canode(1, &mut w).unwrap(), NodeStatus::Failure);
    let rec: FailureRecord = t.ctx.blackboard.get(FAILURE_KEY).unwrap().unwrap();
    assert_eq!(
        rec,
        FailureRecord {
            constraint: ConstraintName::TrajectoryValid,
            action_index: 1
        }
    );
    assert_eq!(t.stats().executions[1], 0);
}

#[test]
fn missing_transient_parameter_is_an_error() {
    let mut w = world();
    let mut t = assemble(&w);
    t.ctx.blackboard.remove(param::TARGET);
    assert!(matches!(
        t.tick_canode(1, &mut w),
        Err(CsubbtError::Sim(SimError::IncompleteBinding(p))) if p == param::TARGET
    ));
}

#[test]
fn missing_move_sampler_names_base_goal() {
    let w = world();
    let mut cfg = CsubbtConfig::move_and_pick();
    cfg.primary.retain(|s| s != "psi_move");
    for (_, v) in &mut cfg.registrations {
        v.retain(|s| s != "psi_move");
    }
    let samplers = move_and_pick_samplers(&SamplerConfig::default())
        .into_iter()
        .filter(|s| s.name != "psi_move")
        .collect();
    let err = assemble_csubbt(move_and_pick(), samplers, cfg, initial(&w), &w)
        .err()
        .unwrap();
    assert!(matches!(err, CsubbtError::NoSampler(_)));
    assert!(err.to_string().contains(param::X_Q_B), "{err}");
}

#[test]
fn single_gated_action() {
    let mut w = world();
    let cfg = CsubbtConfig {
        logistic: BTreeSet::new(),
        registrations: Vec::new(),
        primary: Vec::new(),
        logistic_budget: 3,
    };
    let mut t = assemble_csubbt(
        crate::constraint::FactorableAction::single("Wait"),
        Vec::new(),
        cfg,
        Binding::new(),
        &w,
    )
    .unwrap();
    assert_eq!(t.status_table(), vec![false]);
    t.set_executor("Wait", Box::new(|_, _| Ok(ActionResult::Ok { travel: 0.0 })));
    let out = run_csubbt(&mut t, &mut w, 10).unwrap();
    assert_eq!(out.status, NodeStatus::Success);
    assert_eq!(out.root_ticks, 1);
    assert_eq!(t.status_table(), vec![true]);
}

#[test]
fn nominal_run_executes_each_action_once() {
    let mut w = world();
    let mut t = assemble(&w);
    let out = run_csubbt(&mut t, &mut w, 50).unwrap();
    assert_eq!(out.status, NodeStatus::Success, "{}", t.trace_text());
    assert_eq!(t.stats().executions, vec![1, 1, 1, 1]);
    assert_eq!(t.stats().resamples, 0);
    assert_eq!(t.status_table(), vec![true; 4]);
    assert!(t.trace_text().ends_with("RESULT\tSUCCESS\tdone\n"));
}

#[test]
fn unreachable_target_exhausts() {
    let mut w = world();
    // nothing but a top grasp from far away
    w.allowed_grasp_modes.clear();
    let mut t = assemble(&w);
    let out = run_csubbt(&mut t, &mut w, 100).unwrap();
    assert_eq!(out.terminal, Some(Terminal::SamplerExhausted));
    assert_eq!(out.status, NodeStatus::Failure);
    assert!(t.trace_text().contains("sampler-exhausted"));
}

#[test]
fn budget_is_distinct_from_exhaustion() {
    let mut w = world();
    w.objects.get_mut("cube").unwrap().bias = Vec2::new(0.0, 0.12);
    let mut t = assemble(&w);
    let out = run_csubbt(&mut t, &mut w, 1).unwrap();
    assert_eq!(out.terminal, Some(Terminal::BudgetExhausted));
    assert!(t.trace_text().contains("budget-exhausted"));
}

#[test]
fn gating_bounds_executions() {
    let mut w = world();
    w.objects.get_mut("cube").unwrap().bias = Vec2::new(0.0, 0.12);
    let mut t = assemble(&w);
    run_csubbt(&mut t, &mut w, 200).unwrap();
    for i in 0..4 {
        assert!(t.stats().executions[i] <= 1 + t.stats().cleared[i], "{:?}", t.stats());
    }
}
