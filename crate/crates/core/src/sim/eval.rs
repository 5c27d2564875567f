//! Constraint evaluators over a parameter binding and the perceived world.

use super::perception::visible;
use super::world::{SimError, World};
use crate::bt::{FromValue, Value};
use crate::constraint::Binding;
use crate::domain::{param, ArmPose, ConstraintName, GraspMode, TcpHeight};
use crate::geom::{Pose2, Vec2, EPS};

pub(crate) fn get<T: FromValue>(binding: &Binding, key: &str) -> Result<T, SimError> {
    let v = binding
        .get(key)
        .ok_or_else(|| SimError::IncompleteBinding(key.to_string()))?;
    T::from_value(v).ok_or_else(|| SimError::BadBinding {
        param: key.to_string(),
        message: format!("expected {}, found {}", T::TYPE_NAME, v.type_name()),
    })
}

/// Evaluates one named constraint.
///
/// * `PathValid`: the base path `u_t_b`, inflated by the base radius, stays
///   clear of obstacles and desks.
/// * `TrajectoryValid`: every TCP waypoint of `u_t_a` is within reach of
///   `x_q_b` and no segment crosses an obstacle of the mode's height class.
/// * `NearGrasp`: `x_q_b` lies in the target desk's annulus.
/// * `CubeInSight`: the camera at `(x_b, x_a)` sees the target.
/// * `CloseCube`: the TCP at `(x_b, x_a_grasp)` is within the grasp radius of
///   the perceived target (closed boundary).
pub fn evaluate_constraint(
    name: &ConstraintName,
    binding: &Binding,
    world: &World,
) -> Result<bool, SimError> {
    match name {
        ConstraintName::PathValid => {
            let path: Vec<Vec2> = get(binding, param::U_T_B)?;
            Ok(base_path_clear(world, &path))
        }
        ConstraintName::TrajectoryValid => {
            let base: Pose2 = get(binding, param::X_Q_B)?;
            let mode: GraspMode = get(binding, param::X_Q_G)?;
            let traj: Vec<Vec2> = get(binding, param::U_T_A)?;
            let target: String = get(binding, param::TARGET)?;
            let exempt = world.object(&target)?.on.clone();
            Ok(arm_trajectory_clear(
                world,
                base.position(),
                &traj,
                mode.height(),
                exempt.as_deref(),
            ))
        }
        ConstraintName::NearGrasp => {
            let base: Pose2 = get(binding, param::X_Q_B)?;
            let target: String = get(binding, param::TARGET)?;
            world.in_annulus(base.position(), &target)
        }
        ConstraintName::CubeInSight => {
            let base: Pose2 = get(binding, param::X_B)?;
            let arm: ArmPose = get(binding, param::X_A)?;
            let target: String = get(binding, param::TARGET)?;
            visible(world, base, &arm, &target)
        }
        ConstraintName::CloseCube => {
            let base: Pose2 = get(binding, param::X_B)?;
            let arm: ArmPose = get(binding, param::X_A_GRASP)?;
            let target: String = get(binding, param::TARGET)?;
            let obj = world.object(&target)?;
            let tcp = base.position() + arm.offset;
            Ok(tcp.dist(obj.estimate().position()) <= world.config.grasp_radius + EPS)
        }
        ConstraintName::Var(id) if id == "q_g" => {
            let mode: GraspMode = get(binding, param::X_Q_G)?;
            Ok(world.allowed_grasp_modes.contains(&mode))
        }
        ConstraintName::Var(_) => Err(SimError::UnknownEvaluator(name.to_string())),
    }
}

/// Base polyline check with the footprint inflated by the base radius.
pub fn base_path_clear(world: &World, path: &[Vec2]) -> bool {
    match path {
        [] => false,
        [p] => world.base_pose_free(*p),
        _ => path.windows(2).all(|w| world.base_segment_free(w[0], w[1])),
    }
}

/// TCP polyline check for a trajectory of offsets from `base`.
pub fn arm_trajectory_clear(
    world: &World,
    base: Vec2,
    offsets: &[Vec2],
    height: TcpHeight,
    exempt_desk: Option<&str>,
) -> bool {
    if offsets.is_empty() {
        return false;
    }
    if offsets.iter().any(|o| o.norm() > world.config.reach + EPS) {
        return false;
    }
    let pts: Vec<Vec2> = offsets.iter().map(|o| base + *o).collect();
    let blockers: Vec<_> = world.arm_blockers(height, exempt_desk).copied().collect();
    if pts.len() == 1 {
        return blockers.iter().all(|r| !r.contains(pts[0]));
    }
    pts.windows(2)
        .all(|w| blockers.iter().all(|r| !r.intersects_segment(w[0], w[1])))
}

/// Adds the state parameters `x_b`, `x_a` and `x_a_grasp` from the world.
pub fn with_state(binding: &Binding, world: &World) -> Binding {
    let mut b = binding.clone();
    b.insert(param::X_B.into(), Value::Pose(world.base));
    b.insert(param::X_A.into(), Value::Config(world.arm));
    b.insert(param::X_A_GRASP.into(), Value::Config(world.arm));
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::sim::world::{Desk, ObjectState, Obstacle, ObstacleLevel, RobotConfig};

    fn world() -> World {
        let mut w = World::new(
            RobotConfig::default(),
            Rect::new(0.0, 0.0, 6.0, 4.0),
            Pose2::new(1.0, 2.0, 0.0),
        );
        w.desks.push(Desk {
            id: "desk0".into(),
            rect: Rect::new(3.5, 1.5, 4.5, 2.5),
        });
        w.objects.insert(
            "cube".into(),
            ObjectState::new(Pose2::new(3.6, 2.0, 0.0), 0.05, Some("desk0".into())),
        );
        w
    }

    fn binding(pairs: Vec<(&str, Value)>) -> Binding {
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn near_grasp_inside_annulus() {
        let w = world();
        let b = binding(vec![
            (param::X_Q_B, Value::Pose(Pose2::new(3.0, 2.0, 0.0))),
            (param::TARGET, Value::Str("cube".into())),
        ]);
        assert!(evaluate_constraint(&ConstraintName::NearGrasp, &b, &w).unwrap());
        let far = binding(vec![
            (param::X_Q_B, Value::Pose(Pose2::new(1.0, 2.0, 0.0))),
            (param::TARGET, Value::Str("cube".into())),
        ]);
        assert!(!evaluate_constraint(&ConstraintName::NearGrasp, &far, &w).unwrap());
    }

    #[test]
    fn cube_in_sight_blocked_by_occluder() {
        let mut w = world();
        let arm = ArmPose {
            offset: Vec2::new(0.5, 0.0),
            height: TcpHeight::High,
        };
        let b = binding(vec![
            (param::X_B, Value::Pose(Pose2::new(2.8, 2.0, 0.0))),
            (param::X_A, Value::Config(arm)),
            (param::TARGET, Value::Str("cube".into())),
        ]);
        assert!(evaluate_constraint(&ConstraintName::CubeInSight, &b, &w).unwrap());
        // occluder straddling the apex→cube segment
        let apex = Vec2::new(3.15, 2.0);
        let cube = Vec2::new(3.6, 2.0);
        let occ = Rect::new(3.4, 1.95, 3.45, 2.05);
        assert!(occ.intersects_segment(apex, cube));
        w.occluders.push(occ);
        assert!(!evaluate_constraint(&ConstraintName::CubeInSight, &b, &w).unwrap());
    }

    #[test]
    fn close_cube_closed_boundary() {
        let w = world();
        let arm = ArmPose {
            offset: Vec2::new(0.55, 0.0),
            height: TcpHeight::High,
        };
        // TCP at 3.55, cube at 3.6: exactly the grasp radius
        let b = binding(vec![
            (param::X_B, Value::Pose(Pose2::new(3.0, 2.0, 0.0))),
            (param::X_A_GRASP, Value::Config(arm)),
            (param::TARGET, Value::Str("cube".into())),
        ]);
        assert!(evaluate_constraint(&ConstraintName::CloseCube, &b, &w).unwrap());
    }

    #[test]
    fn path_valid_and_crossing() {
        let mut w = world();
        let ok = binding(vec![(
            param::U_T_B,
            Value::Path(vec![Vec2::new(1.0, 2.0), Vec2::new(2.9, 2.0)]),
        )]);
        assert!(evaluate_constraint(&ConstraintName::PathValid, &ok, &w).unwrap());
        w.obstacles.push(Obstacle {
            rect: Rect::new(2.0, 1.9, 2.2, 2.1),
            level: ObstacleLevel::All,
        });
        assert!(!evaluate_constraint(&ConstraintName::PathValid, &ok, &w).unwrap());
        // an overhead shelf does not block the base
        w.obstacles[0].level = ObstacleLevel::High;
        assert!(evaluate_constraint(&ConstraintName::PathValid, &ok, &w).unwrap());
    }

    #[test]
    fn trajectory_respects_height_class() {
        let mut w = world();
        w.obstacles.push(Obstacle {
            rect: Rect::new(3.4, 1.7, 4.0, 2.3),
            level: ObstacleLevel::High,
        });
        let mut b = binding(vec![
            (param::X_Q_B, Value::Pose(Pose2::new(3.0, 2.0, 0.0))),
            (param::X_Q_G, Value::Grasp(GraspMode::Top)),
            (param::U_T_A, Value::Path(vec![Vec2::ZERO, Vec2::new(0.6, 0.0)])),
            (param::TARGET, Value::Str("cube".into())),
        ]);
        assert!(!evaluate_constraint(&ConstraintName::TrajectoryValid, &b, &w).unwrap());
        b.insert(param::X_Q_G.into(), Value::Grasp(GraspMode::Forward));
        assert!(evaluate_constraint(&ConstraintName::TrajectoryValid, &b, &w).unwrap());
        // beyond reach
        b.insert(param::U_T_A.into(), Value::Path(vec![Vec2::ZERO, Vec2::new(0.9, 0.0)]));
        assert!(!evaluate_constraint(&ConstraintName::TrajectoryValid, &b, &w).unwrap());
    }

    #[test]
    fn errors() {
        let w = world();
        assert_eq!(
            evaluate_constraint(&ConstraintName::PathValid, &Binding::new(), &w),
            Err(SimError::IncompleteBinding("u_t_b".into()))
        );
        assert!(matches!(
            evaluate_constraint(&ConstraintName::Var("zz".into()), &Binding::new(), &w),
            Err(SimError::UnknownEvaluator(_))
        ));
    }
}
