use super::world::{Obstacle, ObstacleLevel, World};
use crate::geom::{Rect, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    AtTick(u64),
    OnActionStart(String),
    OnDetectionCount(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    PerceptionBias {
        object: String,
        delta: Vec2,
    },
    DisplaceObject {
        object: String,
        delta: Vec2,
    },
    InsertObstacle {
        rect: Rect,
        #[serde(default)]
        level: ObstacleLevel,
    },
    RemoveObstacle {
        index: usize,
    },
    Occlude {
        object: String,
        rect: Rect,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub trigger: Trigger,
    pub effect: Effect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledAnomaly {
    pub event: AnomalyEvent,
    pub fired: bool,
}

impl From<AnomalyEvent> for ScheduledAnomaly {
    fn from(event: AnomalyEvent) -> Self {
        ScheduledAnomaly { event, fired: false }
    }
}

/// The point in execution at which anomalies are checked.
#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    Tick,
    ActionStart(String),
    Detection,
}

/// Fires every due, not-yet-fired event once and logs it. Returns the
/// indices of the events applied.
pub fn apply_anomalies(world: &mut World, phase: &Phase) -> Vec<usize> {
    let mut applied = Vec::new();
    for i in 0..world.anomalies.len() {
        if world.anomalies[i].fired {
            continue;
        }
        let due = match (&world.anomalies[i].event.trigger, phase) {
            (Trigger::AtTick(n), _) => world.time >= *n,
            (Trigger::OnActionStart(name), Phase::ActionStart(p)) => name == p,
            (Trigger::OnDetectionCount(k), _) => world.detections >= *k,
            _ => false,
        };
        if !due {
            continue;
        }
        world.anomalies[i].fired = true;
        let effect = world.anomalies[i].event.effect.clone();
        apply_effect(world, &effect);
        let json = serde_json::to_string(&effect).expect("effects serialize");
        world.log_event(&json);
        applied.push(i);
    }
    applied
}

fn apply_effect(world: &mut World, effect: &Effect) {
    match effect {
        Effect::PerceptionBias { object, delta } => {
            if let Some(o) = world.objects.get_mut(object) {
                o.bias = *delta;
            }
        }
        Effect::DisplaceObject { object, delta } => {
            if let Some(o) = world.objects.get_mut(object) {
                o.true_pose = o.true_pose.translated(*delta);
            }
        }
        Effect::InsertObstacle { rect, level } => world.obstacles.push(Obstacle {
            rect: *rect,
            level: *level,
        }),
        Effect::RemoveObstacle { index } => {
            if *index < world.obstacles.len() {
                world.obstacles.remove(*index);
            }
        }
        Effect::Occlude { rect, .. } => world.occluders.push(*rect),
    }
}
