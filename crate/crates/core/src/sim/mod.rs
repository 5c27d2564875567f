//! Deterministic 2D stand-in for the robot and its surroundings: scene state,
//! constraint evaluators, atomic-action executors, the hand-camera model and
//! scripted anomalies.

mod anomaly;
mod eval;
mod exec;
mod perception;
mod scenario;
mod world;

pub use anomaly::{apply_anomalies, AnomalyEvent, Effect, Phase, ScheduledAnomaly, Trigger};
pub use eval::{arm_trajectory_clear, base_path_clear, evaluate_constraint, with_state};
pub(crate) use eval::get;
pub use exec::{exec_approach, exec_grasp, exec_move, exec_pre_approach, ActionResult};
pub use perception::{perceive, visible, FovModel};
pub use scenario::{
    DeskSpec, MapSpec, ObjectSpec, ObstacleSpec, Placement, RobotSpec, SamplerConfig, Scenario,
    ScenarioError,
};
pub use world::{
    Desk, Gripper, ObjectState, Obstacle, ObstacleLevel, RobotConfig, SimError, World,
};
