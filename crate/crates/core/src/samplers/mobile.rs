//! Samplers for the Move-and-Pick action: base goal (ψ_Move), pre-approach
//! pose and grasp mode (ψ_Pick) and the arm-wave search sweep (ψ_Wave).

use super::grid::GridSpec;
use super::{ConditionalSampler, Generator};
use crate::bt::Value;
use crate::constraint::Binding;
use crate::domain::{param, ArmPose, ConstraintName, GraspMode};
use crate::geom::{Pose2, Vec2};
use crate::sim::{arm_trajectory_clear, get, SamplerConfig, SimError, World};

const LATERAL: &str = "lateral";
const PICK_LATERALS: [f64; 3] = [0.0, -0.05, 0.05];

/// Arm-wave sweep as (lateral, back) offsets from the believed object
/// position along the base→object axis.
pub const WAVE_POSES: [(f64, f64); 5] = [
    (0.0, 0.25),
    (0.15, 0.1),
    (-0.15, 0.1),
    (0.3, 0.15),
    (-0.3, 0.15),
];

struct MoveGen {
    spacing: f64,
}

impl Generator for MoveGen {
    fn candidates(&self, inputs: &Binding, world: &World) -> Result<Vec<Binding>, SimError> {
        let start: Pose2 = get(inputs, param::X0_B)?;
        let target: String = get(inputs, param::TARGET)?;
        let grid = GridSpec::over(world.extents, self.spacing);
        let mut out = Vec::new();
        for p in grid.nearest_first(start.position()) {
            if world.in_annulus(p, &target)? {
                let mut b = Binding::new();
                b.insert(param::X_Q_B.into(), Value::Pose(Pose2::at(p, 0.0)));
                out.push(b);
            }
        }
        Ok(out)
    }

    fn accept(&self, c: &Binding, inputs: &Binding, world: &World) -> Result<Option<Binding>, SimError> {
        let goal: Pose2 = get(c, param::X_Q_B)?;
        let target: String = get(inputs, param::TARGET)?;
        let p = goal.position();
        let here = world.base.position();
        let path = if p.dist(here) < 1e-9 { vec![p] } else { vec![here, p] };
        if !world.base_pose_free(p) || !crate::sim::base_path_clear(world, &path) {
            return Ok(None);
        }
        let heading = (world.object(&target)?.estimate().position() - p).heading_deg();
        let mut out = Binding::new();
        out.insert(param::X_Q_B.into(), Value::Pose(Pose2::at(p, heading)));
        out.insert(param::U_T_B.into(), Value::Path(path));
        Ok(Some(out))
    }
}

/// ψ_Move: base goals in the target desk's annulus, nearest to `x0_b`
/// first, each with a collision-free straight path from the current base.
pub fn move_sampler(config: &SamplerConfig) -> ConditionalSampler {
    ConditionalSampler::new(
        "psi_move",
        &[param::X0_B, param::TARGET],
        &[param::X_Q_B, param::U_T_B],
        vec![ConstraintName::PathValid, ConstraintName::NearGrasp],
        MoveGen {
            spacing: config.grid_spacing_m,
        },
    )
}

/// Unit axis from `base` to the target estimate and its left normal.
fn axis(base: Vec2, object: Vec2) -> (Vec2, Vec2) {
    let u = (object - base).normalized().unwrap_or(Vec2::new(1.0, 0.0));
    (u, u.perp())
}

struct PickGen {
    modes: Vec<GraspMode>,
    standoff: f64,
}

impl Generator for PickGen {
    fn candidates(&self, _: &Binding, _: &World) -> Result<Vec<Binding>, SimError> {
        let mut out = Vec::new();
        for m in &self.modes {
            for lat in PICK_LATERALS {
                let mut b = Binding::new();
                b.insert(param::X_Q_G.into(), Value::Grasp(*m));
                b.insert(LATERAL.into(), Value::Scalar(lat));
                out.push(b);
            }
        }
        Ok(out)
    }

    fn accept(&self, c: &Binding, inputs: &Binding, world: &World) -> Result<Option<Binding>, SimError> {
        let mode: GraspMode = get(c, param::X_Q_G)?;
        let lat: f64 = get(c, LATERAL)?;
        if !world.allowed_grasp_modes.contains(&mode) {
            return Ok(None);
        }
        let base: Pose2 = get(inputs, param::X_Q_B)?;
        let start: ArmPose = get(inputs, param::X0_A)?;
        let target: String = get(inputs, param::TARGET)?;
        let obj = world.object(&target)?;
        let object = obj.estimate().position();
        let (u, n) = axis(base.position(), object);
        let back = match mode {
            GraspMode::Top => 0.0,
            GraspMode::Forward => self.standoff,
        };
        let tcp = object + n * lat - u * back;
        let offset = tcp - base.position();
        if offset.norm() > world.config.reach - self.standoff {
            return Ok(None);
        }
        let traj = vec![start.offset, offset];
        if !arm_trajectory_clear(world, base.position(), &traj, mode.height(), obj.on.as_deref()) {
            return Ok(None);
        }
        let mut out = Binding::new();
        out.insert(
            param::X_Q_A.into(),
            Value::Config(ArmPose {
                offset,
                height: mode.height(),
            }),
        );
        out.insert(param::X_Q_G.into(), Value::Grasp(mode));
        out.insert(param::U_T_A.into(), Value::Path(traj));
        Ok(Some(out))
    }
}

/// ψ_Pick: grasp modes in configured order, each with three lateral
/// perturbations of its canonical pre-approach pose.
pub fn pick_sampler(config: &SamplerConfig) -> ConditionalSampler {
    ConditionalSampler::new(
        "psi_pick",
        &[param::X_Q_B, param::X0_A, param::TARGET],
        &[param::X_Q_A, param::X_Q_G, param::U_T_A],
        vec![ConstraintName::TrajectoryValid],
        PickGen {
            modes: config.grasp_modes.clone(),
            standoff: config.standoff_m,
        },
    )
}

struct WaveGen {
    poses: Vec<(f64, f64)>,
}

impl Generator for WaveGen {
    fn candidates(&self, _: &Binding, _: &World) -> Result<Vec<Binding>, SimError> {
        Ok((0..self.poses.len())
            .map(|i| {
                let mut b = Binding::new();
                b.insert("wave".into(), Value::Scalar(i as f64));
                b
            })
            .collect())
    }

    fn accept(&self, c: &Binding, inputs: &Binding, world: &World) -> Result<Option<Binding>, SimError> {
        let i: f64 = get(c, "wave")?;
        let (lat, back) = self.poses[i as usize];
        let base: Pose2 = get(inputs, param::X_Q_B)?;
        let mode: GraspMode = get(inputs, param::X_Q_G)?;
        let target: String = get(inputs, param::TARGET)?;
        let obj = world.object(&target)?;
        let anchor = obj.estimate().position();
        let (u, n) = axis(base.position(), anchor);
        let offset = anchor + n * lat - u * back - base.position();
        if offset.norm() > world.config.reach {
            return Ok(None);
        }
        let traj = vec![world.arm.offset, offset];
        if !arm_trajectory_clear(world, base.position(), &traj, mode.height(), obj.on.as_deref()) {
            return Ok(None);
        }
        let mut out = Binding::new();
        out.insert(
            param::X_Q_A.into(),
            Value::Config(ArmPose {
                offset,
                height: mode.height(),
            }),
        );
        out.insert(param::U_T_A.into(), Value::Path(traj));
        Ok(Some(out))
    }
}

/// ψ_Wave: a fixed sweep of arm poses around the believed target position.
pub fn wave_sampler(config: &SamplerConfig) -> ConditionalSampler {
    let n = config.wave_poses.min(WAVE_POSES.len());
    ConditionalSampler::new(
        "psi_wave",
        &[param::X_Q_B, param::X_Q_G, param::TARGET],
        &[param::X_Q_A, param::U_T_A],
        vec![ConstraintName::CubeInSight],
        WaveGen {
            poses: WAVE_POSES[..n].to_vec(),
        },
    )
}
