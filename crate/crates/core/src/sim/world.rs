use super::anomaly::ScheduledAnomaly;
use crate::domain::{ArmPose, GraspMode, TcpHeight};
use crate::geom::{Pose2, Rect, Vec2, EPS};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown evaluator for constraint `{0}`")]
    UnknownEvaluator(String),
    #[error("binding is missing parameter `{0}`")]
    IncompleteBinding(String),
    #[error("parameter `{param}` has the wrong type: {message}")]
    BadBinding { param: String, message: String },
    #[error("manipulation requested while the base is moving")]
    BaseMoving,
    #[error("path must start at the current base pose {expected}, got {got}")]
    PathStart { expected: Vec2, got: Vec2 },
    #[error("unknown atomic action executor `{0}`")]
    UnknownExecutor(String),
}

/// Geometry and sensing parameters of the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotConfig {
    pub base_radius: f64,
    pub reach: f64,
    pub grasp_radius: f64,
    pub fov_half_angle_deg: f64,
    pub fov_range: f64,
    /// The hand camera sits this far behind the TCP along the arm axis.
    pub camera_setback: f64,
    pub move_step: f64,
    /// TCP offset of the tucked arm.
    pub arm_rest: Vec2,
}

impl Default for RobotConfig {
    fn default() -> Self {
        RobotConfig {
            base_radius: 0.3,
            reach: 0.8,
            grasp_radius: 0.05,
            fov_half_angle_deg: 30.0,
            fov_range: 1.5,
            camera_setback: 0.15,
            move_step: 0.05,
            arm_rest: Vec2::ZERO,
        }
    }
}

/// Which trajectories an obstacle blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleLevel {
    /// Floor to ceiling: blocks the base, both arm height classes and vision.
    #[default]
    All,
    /// Overhead, e.g. a shelf above a desk: blocks high arm motion only.
    High,
    /// At desk-surface level: blocks low arm motion only.
    Low,
}

impl ObstacleLevel {
    pub fn blocks_arm(self, h: TcpHeight) -> bool {
        match self {
            ObstacleLevel::All => true,
            ObstacleLevel::High => h == TcpHeight::High,
            ObstacleLevel::Low => h == TcpHeight::Low,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub rect: Rect,
    #[serde(default)]
    pub level: ObstacleLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Desk {
    pub id: String,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gripper {
    Open,
    Closed,
    Holding(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectState {
    pub true_pose: Pose2,
    /// Result of the most recent perception call.
    pub perceived_pose: Option<Pose2>,
    /// Most recent successful detection.
    pub last_seen: Option<Pose2>,
    /// Where the plan believes the object is before it has been seen.
    pub belief: Pose2,
    /// Additive bias of the hand camera for this object.
    pub bias: Vec2,
    pub size: f64,
    pub on: Option<String>,
}

impl ObjectState {
    pub fn new(true_pose: Pose2, size: f64, on: Option<String>) -> Self {
        ObjectState {
            true_pose,
            perceived_pose: None,
            last_seen: None,
            belief: true_pose,
            bias: Vec2::ZERO,
            size,
            on,
        }
    }

    /// Best available estimate of the object position.
    pub fn estimate(&self) -> Pose2 {
        self.last_seen.unwrap_or(self.belief)
    }
}

/// Ground-truth scene plus the robot's perceived view of it.
#[derive(Debug, Clone)]
pub struct World {
    pub config: RobotConfig,
    pub extents: Rect,
    pub base: Pose2,
    pub base_in_motion: bool,
    pub arm: ArmPose,
    pub gripper: Gripper,
    pub objects: BTreeMap<String, ObjectState>,
    pub obstacles: Vec<Obstacle>,
    pub desks: Vec<Desk>,
    /// Rectangles that block vision only.
    pub occluders: Vec<Rect>,
    /// Grasp modes admitted by the `Var:q_g` constraint.
    pub allowed_grasp_modes: Vec<GraspMode>,
    pub time: u64,
    pub detections: u64,
    pub anomalies: Vec<ScheduledAnomaly>,
    pub event_log: Vec<String>,
}

impl World {
    pub fn new(config: RobotConfig, extents: Rect, base: Pose2) -> Self {
        let arm = ArmPose {
            offset: config.arm_rest,
            height: TcpHeight::High,
        };
        World {
            config,
            extents,
            base,
            base_in_motion: false,
            arm,
            gripper: Gripper::Open,
            objects: BTreeMap::new(),
            obstacles: Vec::new(),
            desks: Vec::new(),
            occluders: Vec::new(),
            allowed_grasp_modes: vec![GraspMode::Top, GraspMode::Forward],
            time: 0,
            detections: 0,
            anomalies: Vec::new(),
            event_log: Vec::new(),
        }
    }

    pub fn object(&self, id: &str) -> Result<&ObjectState, SimError> {
        self.objects
            .get(id)
            .ok_or_else(|| SimError::UnknownObject(id.to_string()))
    }

    pub fn object_mut(&mut self, id: &str) -> Result<&mut ObjectState, SimError> {
        self.objects
            .get_mut(id)
            .ok_or_else(|| SimError::UnknownObject(id.to_string()))
    }

    pub fn desk(&self, id: &str) -> Option<&Desk> {
        self.desks.iter().find(|d| d.id == id)
    }

    pub fn tcp(&self) -> Vec2 {
        self.base.position() + self.arm.offset
    }

    /// Rectangles the base footprint must stay clear of.
    pub fn base_blockers(&self) -> impl Iterator<Item = &Rect> {
        self.obstacles
            .iter()
            .filter(|o| o.level == ObstacleLevel::All)
            .map(|o| &o.rect)
            .chain(self.desks.iter().map(|d| &d.rect))
    }

    /// Rectangles blocking arm motion at height `h`. Low motion is blocked by
    /// desks other than `exempt_desk` (the one holding the target).
    pub fn arm_blockers<'a>(
        &'a self,
        h: TcpHeight,
        exempt_desk: Option<&'a str>,
    ) -> impl Iterator<Item = &'a Rect> + 'a {
        let desks = self
            .desks
            .iter()
            .filter(move |d| h == TcpHeight::Low && Some(d.id.as_str()) != exempt_desk)
            .map(|d| &d.rect);
        self.obstacles
            .iter()
            .filter(move |o| o.level.blocks_arm(h))
            .map(|o| &o.rect)
            .chain(desks)
    }

    pub fn vision_blockers(&self) -> impl Iterator<Item = &Rect> {
        self.obstacles
            .iter()
            .filter(|o| o.level == ObstacleLevel::All)
            .map(|o| &o.rect)
            .chain(self.occluders.iter())
    }

    /// Whether a base centered at `p` is inside the map and clear of blockers.
    pub fn base_pose_free(&self, p: Vec2) -> bool {
        self.extents.contains(p)
            && self
                .base_blockers()
                .all(|r| r.distance_to(p) >= self.config.base_radius - EPS)
    }

    /// Whether the base can sweep the straight segment `a`–`b`.
    pub fn base_segment_free(&self, a: Vec2, b: Vec2) -> bool {
        self.extents.contains(a)
            && self.extents.contains(b)
            && self
                .base_blockers()
                .all(|r| r.distance_to_segment(a, b) >= self.config.base_radius - EPS)
    }

    /// Distance band of the near-grasp annulus, measured from the desk
    /// rectangle: `[base_radius, base_radius + reach]`.
    pub fn annulus_band(&self) -> (f64, f64) {
        let inner = self.config.base_radius;
        (inner, inner + self.config.reach)
    }

    /// Region the target's support surface occupies; a point for floor objects.
    pub fn support_rect(&self, target: &str) -> Result<Rect, SimError> {
        let obj = self.object(target)?;
        if let Some(desk) = obj.on.as_deref().and_then(|id| self.desk(id)) {
            return Ok(desk.rect);
        }
        let p = obj.estimate().position();
        Ok(Rect::new(p.x, p.y, p.x, p.y))
    }

    pub fn in_annulus(&self, p: Vec2, target: &str) -> Result<bool, SimError> {
        let rect = self.support_rect(target)?;
        let d = rect.distance_to(p);
        let (inner, outer) = self.annulus_band();
        Ok(d >= inner - EPS && d <= outer + EPS)
    }

    pub fn log_event(&mut self, json: &str) {
        self.event_log.push(format!("{}\tEVENT\t{}", self.time, json));
    }

    pub fn event_log_text(&self) -> String {
        let mut s = String::new();
        for l in &self.event_log {
            s.push_str(l);
            s.push('\n');
        }
        s
    }

    /// Removes a held object from the scene and tucks the arm.
    pub fn stow_held(&mut self) -> Option<String> {
        let held = match &self.gripper {
            Gripper::Holding(id) => id.clone(),
            _ => return None,
        };
        self.objects.remove(&held);
        self.gripper = Gripper::Open;
        self.arm = ArmPose {
            offset: self.config.arm_rest,
            height: TcpHeight::High,
        };
        Some(held)
    }
}
