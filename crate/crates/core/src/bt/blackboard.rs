use crate::domain::{ArmPose, FailureRecord, GraspMode};
use crate::geom::{Pose2, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Closed set of values the blackboard can hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Value {
    Pose(Pose2),
    Config(ArmPose),
    Scalar(f64),
    Str(String),
    Grasp(GraspMode),
    Bools(Vec<bool>),
    Failure(FailureRecord),
    Path(Vec<Vec2>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Pose(_) => "pose2d",
            Value::Config(_) => "joint-config",
            Value::Scalar(_) => "scalar",
            Value::Str(_) => "string",
            Value::Grasp(_) => "grasp-mode",
            Value::Bools(_) => "bool-vector",
            Value::Failure(_) => "failure-record",
            Value::Path(_) => "path",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Pose(p) => write!(f, "{p}"),
            Value::Config(a) => write!(f, "{a}"),
            Value::Scalar(x) => write!(f, "{x:.4}"),
            Value::Str(s) => f.write_str(s),
            Value::Grasp(g) => write!(f, "{g}"),
            Value::Bools(b) => {
                for bit in b {
                    f.write_str(if *bit { "1" } else { "0" })?;
                }
                Ok(())
            }
            Value::Failure(r) => write!(f, "{r}"),
            Value::Path(p) => match (p.first(), p.last()) {
                (Some(a), Some(b)) => write!(f, "path[{}]{a}->{b}", p.len()),
                _ => f.write_str("path[0]"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlackboardError {
    #[error("blackboard key `{key}` holds a {found}, expected {expected}")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        found: &'static str,
    },
}

/// Conversion out of a [`Value`] for typed reads.
pub trait FromValue: Sized {
    const TYPE_NAME: &'static str;
    fn from_value(v: &Value) -> Option<Self>;
}

macro_rules! from_value {
    ($t:ty, $variant:ident, $name:literal) => {
        impl FromValue for $t {
            const TYPE_NAME: &'static str = $name;
            fn from_value(v: &Value) -> Option<Self> {
                match v {
                    Value::$variant(x) => Some(x.clone()),
                    _ => None,
                }
            }
        }
    };
}

from_value!(Pose2, Pose, "pose2d");
from_value!(ArmPose, Config, "joint-config");
from_value!(f64, Scalar, "scalar");
from_value!(String, Str, "string");
from_value!(GraspMode, Grasp, "grasp-mode");
from_value!(Vec<bool>, Bools, "bool-vector");
from_value!(FailureRecord, Failure, "failure-record");
from_value!(Vec<Vec2>, Path, "path");

/// Keyed parameter store shared by the nodes of one tree.
///
/// Keys are case-sensitive. Reads never create entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Blackboard {
    entries: BTreeMap<String, Value>,
}

impl Blackboard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&mut self, key: impl Into<String>, value: Value) {
        self.entries.insert(key.into(), value);
    }

    pub fn read(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    /// Typed read; `Ok(None)` when the key is absent.
    pub fn get<T: FromValue>(&self, key: &str) -> Result<Option<T>, BlackboardError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => T::from_value(v)
                .map(Some)
                .ok_or_else(|| BlackboardError::TypeMismatch {
                    key: key.to_string(),
                    expected: T::TYPE_NAME,
                    found: v.type_name(),
                }),
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<Value> {
        self.entries.remove(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}
