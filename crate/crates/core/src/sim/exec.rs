//! Atomic-action executors. Each advances the world in fixed steps, firing
//! due anomalies after every step.

use super::anomaly::{apply_anomalies, Phase};
use super::eval::arm_trajectory_clear;
use super::perception::perceive;
use super::world::{Gripper, SimError, World};
use crate::domain::{ArmPose, ConstraintName};
use crate::geom::{interpolate, Vec2, EPS};

#[derive(Debug, Clone, PartialEq)]
pub enum ActionResult {
    /// `travel` is the distance the base or TCP covered.
    Ok { travel: f64 },
    Failed(ConstraintName),
}

impl ActionResult {
    pub fn is_ok(&self) -> bool {
        matches!(self, ActionResult::Ok { .. })
    }
}

fn step(world: &mut World) {
    world.time += 1;
    apply_anomalies(world, &Phase::Tick);
}

fn start(world: &mut World, name: &str) {
    apply_anomalies(world, &Phase::ActionStart(name.to_string()));
}

/// Drives the base along `path`; the final heading is `heading_deg`.
pub fn exec_move(world: &mut World, path: &[Vec2], heading_deg: f64) -> Result<ActionResult, SimError> {
    let here = world.base.position();
    let first = path.first().copied().unwrap_or(here);
    if first.dist(here) > 1e-6 {
        return Err(SimError::PathStart {
            expected: here,
            got: first,
        });
    }
    start(world, "Move");
    world.base_in_motion = true;
    let mut travel = 0.0;
    let mut waypoints = vec![here];
    for w in path.windows(2) {
        waypoints.extend(interpolate(w[0], w[1], world.config.move_step).into_iter().skip(1));
    }
    if waypoints.len() == 1 {
        waypoints.push(here);
    }
    for w in waypoints.windows(2) {
        step(world);
        if !world.base_segment_free(w[0], w[1]) {
            world.base_in_motion = false;
            return Ok(ActionResult::Failed(ConstraintName::PathValid));
        }
        travel += w[0].dist(w[1]);
        world.base.x = w[1].x;
        world.base.y = w[1].y;
    }
    world.base.heading_deg = heading_deg;
    world.base_in_motion = false;
    Ok(ActionResult::Ok { travel })
}

fn exempt_desk(world: &World, target: &str) -> Result<Option<String>, SimError> {
    Ok(world.object(target)?.on.clone())
}

/// Moves the TCP through the offsets of `traj` (the current offset is
/// prepended) and ends at `goal`.
pub fn exec_pre_approach(
    world: &mut World,
    goal: ArmPose,
    traj: &[Vec2],
    target: &str,
) -> Result<ActionResult, SimError> {
    if world.base_in_motion {
        return Err(SimError::BaseMoving);
    }
    start(world, "Pre-approach");
    let exempt = exempt_desk(world, target)?;
    let mut pts = vec![world.arm.offset];
    pts.extend_from_slice(traj);
    pts.push(goal.offset);
    let base = world.base.position();
    let mut travel = 0.0;
    for w in pts.windows(2) {
        for s in interpolate(w[0], w[1], world.config.move_step).windows(2) {
            step(world);
            if !arm_trajectory_clear(world, base, s, goal.height, exempt.as_deref()) {
                return Ok(ActionResult::Failed(ConstraintName::TrajectoryValid));
            }
            travel += s[0].dist(s[1]);
            world.arm = ArmPose {
                offset: s[1],
                height: goal.height,
            };
        }
    }
    world.arm = goal;
    Ok(ActionResult::Ok { travel })
}

/// Servos the TCP onto the perceived target, re-perceiving every step.
pub fn exec_approach(world: &mut World, target: &str) -> Result<ActionResult, SimError> {
    if world.base_in_motion {
        return Err(SimError::BaseMoving);
    }
    start(world, "Approach");
    let mut travel = 0.0;
    // bounded: each step closes at least min(move_step, remaining) of the gap
    let max_steps = 10_000;
    for _ in 0..max_steps {
        let Some(seen) = perceive(world, target)? else {
            return Ok(ActionResult::Failed(ConstraintName::CubeInSight));
        };
        let goal = (seen.position() - world.base.position()).clamp_norm(world.config.reach);
        let gap = goal - world.arm.offset;
        if gap.norm() <= EPS {
            return Ok(ActionResult::Ok { travel });
        }
        let d = gap.clamp_norm(world.config.move_step);
        world.arm.offset = world.arm.offset + d;
        travel += d.norm();
        step(world);
    }
    Ok(ActionResult::Failed(ConstraintName::CubeInSight))
}

/// Closes the gripper; succeeds iff the TCP is within the grasp radius of
/// the object's true position.
pub fn exec_grasp(world: &mut World, target: &str) -> Result<ActionResult, SimError> {
    if world.base_in_motion {
        return Err(SimError::BaseMoving);
    }
    start(world, "Grasp");
    step(world);
    let truth = world.object(target)?.true_pose.position();
    if world.tcp().dist(truth) <= world.config.grasp_radius + EPS {
        world.gripper = Gripper::Holding(target.to_string());
        Ok(ActionResult::Ok { travel: 0.0 })
    } else {
        world.gripper = Gripper::Open;
        Ok(ActionResult::Failed(ConstraintName::CloseCube))
    }
}
