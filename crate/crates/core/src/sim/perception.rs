use super::anomaly::{apply_anomalies, Phase};
use super::world::{SimError, World};
use crate::domain::ArmPose;
use crate::geom::{angle_between_deg, Pose2, Vec2, EPS};

/// Viewing cone of the hand camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovModel {
    /// Camera position.
    pub apex: Vec2,
    /// Unit viewing direction.
    pub direction: Vec2,
    pub half_angle_deg: f64,
    pub range: f64,
}

impl FovModel {
    /// Camera cone for an arm pose: the camera looks along the base→TCP axis
    /// (the base heading when the arm is tucked) from `camera_setback` behind
    /// the TCP.
    pub fn for_arm(world: &World, base: Pose2, arm: &ArmPose) -> Self {
        let heading = base.heading_deg.to_radians();
        let direction = arm
            .offset
            .normalized()
            .unwrap_or_else(|| Vec2::new(heading.cos(), heading.sin()));
        let tcp = base.position() + arm.offset;
        FovModel {
            apex: tcp - direction * world.config.camera_setback,
            direction,
            half_angle_deg: world.config.fov_half_angle_deg,
            range: world.config.fov_range,
        }
    }

    pub fn in_cone(&self, p: Vec2) -> bool {
        let v = p - self.apex;
        let d = v.norm();
        if d > self.range + EPS {
            return false;
        }
        d < EPS || angle_between_deg(self.direction, v) <= self.half_angle_deg + 1e-9
    }

    /// Cone test plus an unobstructed line of sight.
    pub fn detects(&self, world: &World, p: Vec2) -> bool {
        self.in_cone(p)
            && world
                .vision_blockers()
                .all(|r| !r.intersects_segment(self.apex, p))
    }
}

/// Whether the camera at `(base, arm)` would see the true position of `target`.
pub fn visible(world: &World, base: Pose2, arm: &ArmPose, target: &str) -> Result<bool, SimError> {
    let p = world.object(target)?.true_pose.position();
    Ok(FovModel::for_arm(world, base, arm).detects(world, p))
}

/// Hand-camera measurement of `target` from the current robot state.
///
/// Returns the true pose plus the object's active bias when detected and
/// `None` otherwise; the result is stored as the object's perceived pose.
pub fn perceive(world: &mut World, target: &str) -> Result<Option<Pose2>, SimError> {
    let (base, arm) = (world.base, world.arm);
    let seen = visible(world, base, &arm, target)?;
    let obj = world.object_mut(target)?;
    let result = seen.then(|| obj.true_pose.translated(obj.bias));
    obj.perceived_pose = result;
    if let Some(p) = result {
        obj.last_seen = Some(p);
        world.detections += 1;
        apply_anomalies(world, &Phase::Detection);
    }
    Ok(result)
}
