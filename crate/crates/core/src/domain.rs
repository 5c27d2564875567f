//! Small value types shared between the tree, the constraint model and the
//! simulator.

use crate::geom::Vec2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Names of the constraints the evaluators know about.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintName {
    PathValid,
    TrajectoryValid,
    NearGrasp,
    CubeInSight,
    CloseCube,
    /// Variable-domain constraint such as `Var_q^g`.
    Var(String),
}

impl fmt::Display for ConstraintName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintName::PathValid => f.write_str("PathValid"),
            ConstraintName::TrajectoryValid => f.write_str("TrajectoryValid"),
            ConstraintName::NearGrasp => f.write_str("NearGrasp"),
            ConstraintName::CubeInSight => f.write_str("CubeInSight"),
            ConstraintName::CloseCube => f.write_str("CloseCube"),
            ConstraintName::Var(id) => write!(f, "Var:{id}"),
        }
    }
}

impl FromStr for ConstraintName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "PathValid" => ConstraintName::PathValid,
            "TrajectoryValid" => ConstraintName::TrajectoryValid,
            "NearGrasp" => ConstraintName::NearGrasp,
            "CubeInSight" => ConstraintName::CubeInSight,
            "CloseCube" => ConstraintName::CloseCube,
            other => match other.strip_prefix("Var:") {
                Some(id) if !id.is_empty() => ConstraintName::Var(id.to_string()),
                _ => return Err(format!("unknown constraint `{other}`")),
            },
        })
    }
}

impl Serialize for ConstraintName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConstraintName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspMode {
    Top,
    Forward,
}

impl GraspMode {
    /// Height class the TCP travels at for this mode.
    pub fn height(self) -> TcpHeight {
        match self {
            GraspMode::Top => TcpHeight::High,
            GraspMode::Forward => TcpHeight::Low,
        }
    }
}

impl fmt::Display for GraspMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraspMode::Top => "top",
            GraspMode::Forward => "forward",
        })
    }
}

impl FromStr for GraspMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "top" => Ok(GraspMode::Top),
            "forward" => Ok(GraspMode::Forward),
            other => Err(format!("unknown grasp mode `{other}`")),
        }
    }
}

/// Height class of the tool center point in the planar arm model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TcpHeight {
    High,
    Low,
}

/// Arm configuration in the planar stand-in: TCP offset from the base
/// position (world-aligned axes) plus a height class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmPose {
    pub offset: Vec2,
    pub height: TcpHeight,
}

impl fmt::Display for ArmPose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = match self.height {
            TcpHeight::High => "high",
            TcpHeight::Low => "low",
        };
        write!(f, "{}@{h}", self.offset)
    }
}

/// The conflicted constraint and the index of the atomic action that failed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FailureRecord {
    pub constraint: ConstraintName,
    pub action_index: usize,
}

impl fmt::Display for FailureRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.constraint, self.action_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_names_round_trip() {
        for name in [
            ConstraintName::PathValid,
            ConstraintName::TrajectoryValid,
            ConstraintName::NearGrasp,
            ConstraintName::CubeInSight,
            ConstraintName::CloseCube,
            ConstraintName::Var("q_g".into()),
        ] {
            assert_eq!(name.to_string().parse::<ConstraintName>().unwrap(), name);
        }
        assert!("Pathvalid".parse::<ConstraintName>().is_err());
        assert!("Var:".parse::<ConstraintName>().is_err());
    }
}

/// Parameter ids of the Move-and-Pick action.
pub mod param {
    /// Base pose when the action starts.
    pub const X0_B: &str = "x0_b";
    /// Sampled base goal pose.
    pub const X_Q_B: &str = "x_q_b";
    /// Base path.
    pub const U_T_B: &str = "u_t_b";
    /// Arm pose when the action starts.
    pub const X0_A: &str = "x0_a";
    /// Sampled pre-approach arm pose.
    pub const X_Q_A: &str = "x_q_a";
    /// Sampled grasp mode.
    pub const X_Q_G: &str = "x_q_g";
    /// Arm trajectory (TCP offsets).
    pub const U_T_A: &str = "u_t_a";
    /// Target object id.
    pub const TARGET: &str = "target";
    /// Current base state.
    pub const X_B: &str = "x_b";
    /// Current arm state.
    pub const X_A: &str = "x_a";
    /// Arm state at grasp time; always equal to `x_a`.
    pub const X_A_GRASP: &str = "x_a_grasp";
}
