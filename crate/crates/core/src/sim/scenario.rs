//! Scenario files: map, robot, objects, scripted anomalies, sampler settings
//! and the symbolic plan.

use super::anomaly::AnomalyEvent;
use super::world::{Desk, ObjectState, Obstacle, ObstacleLevel, RobotConfig, World};
use crate::domain::GraspMode;
use crate::geom::{Pose2, Rect, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
}

impl ScenarioError {
    fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObstacleSpec {
    Plain(Rect),
    Leveled(Obstacle),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeskSpec {
    Plain(Rect),
    Named(Desk),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub extents: Rect,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub desks: Vec<DeskSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub base: Pose2,
    #[serde(flatten)]
    pub config: RobotConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub pose: Pose2,
    #[serde(default = "default_size")]
    pub size: f64,
    #[serde(default)]
    pub on: Option<String>,
    /// Offset of the plan's prior belief from the true pose.
    #[serde(default)]
    pub belief_offset: Vec2,
}

fn default_size() -> f64 {
    0.05
}

/// Sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub grid_spacing_m: f64,
    pub standoff_m: f64,
    pub grasp_modes: Vec<GraspMode>,
    pub wave_poses: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            grid_spacing_m: 0.25,
            standoff_m: 0.15,
            grasp_modes: vec![GraspMode::Top, GraspMode::Forward],
            wave_poses: 5,
        }
    }
}

/// Region an object is placed in uniformly at random per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub object: String,
    pub region: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub map: MapSpec,
    pub robot: RobotSpec,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub anomalies: Vec<AnomalyEvent>,
    #[serde(default)]
    pub samplers: SamplerConfig,
    pub plan: Vec<String>,
    #[serde(default)]
    pub seed_default: u64,
    #[serde(default)]
    pub placement: Option<Placement>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut s = Scenario::parse(&text)?;
        if s.name.is_empty() {
            s.name = path
                .file_stem()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.inner().to_string();
            // serde reports a missing field at its parent; name the field
            match missing_field(&message).map(str::to_string) {
                Some(field) if path == "." => ScenarioError::config(field, message),
                Some(field) => ScenarioError::config(format!("{path}.{field}"), message),
                None => ScenarioError::config(path, message),
            }
        })?;
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let c = &self.robot.config;
        for (name, v) in [
            ("robot.base_radius", c.base_radius),
            ("robot.reach", c.reach),
            ("robot.grasp_radius", c.grasp_radius),
            ("robot.fov_range", c.fov_range),
            ("robot.move_step", c.move_step),
            ("samplers.grid_spacing_m", self.samplers.grid_spacing_m),
        ] {
            if !(v > 0.0) {
                return Err(ScenarioError::config(name, "must be positive"));
            }
        }
        if self.samplers.standoff_m < 0.0 || self.samplers.standoff_m >= c.reach {
            return Err(ScenarioError::config(
                "samplers.standoff_m",
                "must lie in [0, reach)",
            ));
        }
        let e = self.map.extents;
        if e.width() <= 0.0 || e.height() <= 0.0 {
            return Err(ScenarioError::config("map.extents", "empty extents"));
        }
        let desks = self.desks();
        for (i, o) in self.objects.iter().enumerate() {
            if self.objects[..i].iter().any(|p| p.id == o.id) {
                return Err(ScenarioError::config(
                    format!("objects[{i}].id"),
                    format!("duplicate object id `{}`", o.id),
                ));
            }
            if let Some(d) = &o.on {
                if !desks.iter().any(|k| &k.id == d) {
                    return Err(ScenarioError::config(
                        format!("objects[{i}].on"),
                        format!("unknown desk `{d}`"),
                    ));
                }
            }
            if !e.contains(o.pose.position()) {
                return Err(ScenarioError::config(
                    format!("objects[{i}].pose"),
                    "outside the map extents",
                ));
            }
        }
        if !e.contains(self.robot.base.position()) {
            return Err(ScenarioError::config("robot.base", "outside the map extents"));
        }
        if let Some(p) = &self.placement {
            if !self.objects.iter().any(|o| o.id == p.object) {
                return Err(ScenarioError::config(
                    "placement.object",
                    format!("unknown object `{}`", p.object),
                ));
            }
        }
        if self.plan.is_empty() {
            return Err(ScenarioError::config("plan", "plan is empty"));
        }
        Ok(())
    }

    pub fn desks(&self) -> Vec<Desk> {
        self.map
            .desks
            .iter()
            .enumerate()
            .map(|(i, d)| match d {
                DeskSpec::Plain(r) => Desk {
                    id: format!("desk{i}"),
                    rect: *r,
                },
                DeskSpec::Named(d) => d.clone(),
            })
            .collect()
    }

    /// Object poses for `seed`: the placement object is drawn uniformly from
    /// its region, everything else stays put.
    pub fn object_poses(&self, seed: u64) -> Vec<(String, Pose2)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.objects
            .iter()
            .map(|o| {
                let pose = match &self.placement {
                    Some(p) if p.object == o.id => {
                        let r = p.region;
                        let x = if r.width() > 0.0 { rng.gen_range(r.x0..=r.x1) } else { r.x0 };
                        let y = if r.height() > 0.0 { rng.gen_range(r.y0..=r.y1) } else { r.y0 };
                        Pose2::new(x, y, o.pose.heading_deg)
                    }
                    _ => o.pose,
                };
                (o.id.clone(), pose)
            })
            .collect()
    }

    pub fn build_world(&self, seed: u64) -> World {
        let mut w = World::new(
            self.robot.config.clone(),
            self.map.extents,
            self.robot.base,
        );
        w.obstacles = self
            .map
            .obstacles
            .iter()
            .map(|o| match o {
                ObstacleSpec::Plain(r) => Obstacle {
                    rect: *r,
                    level: ObstacleLevel::All,
                },
                ObstacleSpec::Leveled(o) => *o,
            })
            .collect();
        w.desks = self.desks();
        for (spec, (_, pose)) in self.objects.iter().zip(self.object_poses(seed)) {
            let mut o = ObjectState::new(pose, spec.size, spec.on.clone());
            o.belief = pose.translated(spec.belief_offset);
            w.objects.insert(spec.id.clone(), o);
        }
        w.anomalies = self.anomalies.iter().cloned().map(Into::into).collect();
        w.allowed_grasp_modes = self.samplers.grasp_modes.clone();
        w
    }
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "map": {"extents": [0, 0, 6, 4],
                "obstacles": [[1, 1, 1.2, 1.2], {"rect": [2, 2, 2.5, 2.5], "level": "high"}],
                "desks": [{"id": "d", "rect": [3.5, 1.5, 4.5, 2.5]}]},
        "robot": {"base": [1.0, 2.0, 0.0], "reach": 0.8},
        "objects": [{"id": "cube", "pose": [3.6, 2.0, 0], "on": "d", "belief_offset": [0.03, 0]}],
        "plan": ["Move", "Pick"],
        "placement": {"object": "cube", "region": [3.55, 1.6, 3.95, 2.4]}
    }"#;

    #[test]
    fn parses_minimal() {
        let s = Scenario::parse(MINIMAL).unwrap();
        let w = s.build_world(0);
        assert_eq!(w.obstacles.len(), 2);
        assert_eq!(w.obstacles[1].level, ObstacleLevel::High);
        let cube = &w.objects["cube"];
        assert!(Rect::new(3.55, 1.6, 3.95, 2.4).contains(cube.true_pose.position()));
        assert!((cube.belief.x - cube.true_pose.x - 0.03).abs() < 1e-12);
        assert_eq!(s.samplers, SamplerConfig::default());
    }

    #[test]
    fn placement_is_seeded() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.object_poses(3), s.object_poses(3));
        assert_ne!(s.object_poses(3), s.object_poses(4));
    }

    #[test]
    fn missing_robot_is_named() {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        v.as_object_mut().unwrap().remove("robot");
        match Scenario::parse(&v.to_string()) {
            Err(ScenarioError::Config { path, .. }) => assert_eq!(path, "robot"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_nested_field_has_path() {
        let bad = MINIMAL.replace(r#""on": "d""#, r#""on": "nope""#);
        match Scenario::parse(&bad) {
            Err(ScenarioError::Config { path, .. }) => assert_eq!(path, "objects[0].on"),
            other => panic!("{other:?}"),
        }
        let bad = MINIMAL.replace(r#""reach": 0.8"#, r#""reach": "far""#);
        match Scenario::parse(&bad) {
            Err(ScenarioError::Config { path, .. }) => assert!(path.starts_with("robot"), "{path}"),
            other => panic!("{other:?}"),
        }
    }
}
