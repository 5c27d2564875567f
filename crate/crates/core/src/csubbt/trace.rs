//! Trace event lines and the strategy tags derived from them.
//!
//! Event lines share the tick-trace layout, tab-separated `<tick> <KIND> <fields…>`:
//!
//! ```text
//! 3  STATUS  0100
//! 3  SAMPLE  psi_move  resample  {"u_t_b":…}
//! 3  FAILURE  CubeInSight  2
//! 3  LOGISTIC  CloseCube  3
//! 3  EXEC  Approach  OK  0.0300
//! 3  EXEC  Grasp  FAILED  CloseCube
//! 9  RESULT  SUCCESS  done
//! ```

use crate::bt::TraceEntry;
use crate::constraint::Binding;
use crate::domain::{param, ConstraintName};
use std::collections::BTreeSet;
use std::fmt;

pub fn status_line(tick: u64, bits: &[bool]) -> String {
    let s: String = bits.iter().map(|b| if *b { '1' } else { '0' }).collect();
    format!("{tick}\tSTATUS\t{s}")
}

pub fn sample_line(tick: u64, sampler: &str, phase: &str, out: &Binding) -> String {
    let json = serde_json::to_string(out).expect("values serialize");
    format!("{tick}\tSAMPLE\t{sampler}\t{phase}\t{json}")
}

pub fn failure_line(tick: u64, c: &ConstraintName, t: usize) -> String {
    format!("{tick}\tFAILURE\t{c}\t{t}")
}

pub fn logistic_line(tick: u64, c: &ConstraintName, t: usize) -> String {
    format!("{tick}\tLOGISTIC\t{c}\t{t}")
}

/// Node entries and `(tick, line)` events in tick order. Events of tick 0
/// come first, then each tick's node entries followed by its events.
pub(crate) fn merge(entries: &[TraceEntry], events: &[(u64, String)]) -> String {
    let mut out = String::new();
    let mut entries = entries.iter().peekable();
    let mut events = events.iter().peekable();
    while let Some((_, l)) = events.next_if(|(t, _)| *t == 0) {
        out.push_str(l);
        out.push('\n');
    }
    loop {
        let tick = match (entries.peek(), events.peek()) {
            (Some(e), Some((t, _))) => e.tick_index.min(*t),
            (Some(e), None) => e.tick_index,
            (None, Some((t, _))) => *t,
            (None, None) => break,
        };
        while let Some(e) = entries.next_if(|e| e.tick_index == tick) {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        while let Some((_, l)) = events.next_if(|(t, _)| *t == tick) {
            out.push_str(l);
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyTag {
    Relocate,
    WaveArm,
    MoveBase,
    RedirectGrasp,
}

impl fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyTag::Relocate => "relocate",
            StrategyTag::WaveArm => "wave_arm",
            StrategyTag::MoveBase => "move_base",
            StrategyTag::RedirectGrasp => "redirect_grasp",
        })
    }
}

impl std::str::FromStr for StrategyTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "relocate" => StrategyTag::Relocate,
            "wave_arm" => StrategyTag::WaveArm,
            "move_base" => StrategyTag::MoveBase,
            "redirect_grasp" => StrategyTag::RedirectGrasp,
            _ => return Err(format!("unknown strategy tag `{s}`")),
        })
    }
}

/// Tags read off one CSubBT trace:
///
/// * relocate: an Approach finished after moving the TCP,
/// * wave_arm: ψ_Wave emitted,
/// * move_base: ψ_Move emitted after seeding,
/// * redirect_grasp: the grasp mode changed between ψ_Pick emissions.
pub fn strategy_tags(trace: &str) -> BTreeSet<StrategyTag> {
    let mut tags = BTreeSet::new();
    let mut last_mode: Option<serde_json::Value> = None;
    for line in trace.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        match f.get(1..) {
            Some(["EXEC", "Approach", "OK", travel, ..]) => {
                if travel.parse::<f64>().is_ok_and(|t| t > 1e-6) {
                    tags.insert(StrategyTag::Relocate);
                }
            }
            Some(["SAMPLE", "psi_wave", ..]) => {
                tags.insert(StrategyTag::WaveArm);
            }
            Some(["SAMPLE", "psi_move", phase, ..]) if *phase != "seed" => {
                tags.insert(StrategyTag::MoveBase);
            }
            Some(["SAMPLE", "psi_pick", _, json]) => {
                let mode = serde_json::from_str::<serde_json::Value>(json)
                    .ok()
                    .and_then(|v| v.get(param::X_Q_G).cloned());
                if let (Some(prev), Some(now)) = (&last_mode, &mode) {
                    if prev != now {
                        tags.insert(StrategyTag::RedirectGrasp);
                    }
                }
                if mode.is_some() {
                    last_mode = mode;
                }
            }
            _ => {}
        }
    }
    tags
}

pub fn format_tags(tags: &BTreeSet<StrategyTag>) -> String {
    tags.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_from_lines() {
        let t = "1\tEXEC\tApproach\tOK\t0.0000\n\
                 1\tSAMPLE\tpsi_pick\tseed\t{\"x_q_g\":{\"type\":\"grasp\",\"value\":\"top\"}}\n\
                 2\tSAMPLE\tpsi_move\tseed\t{}\n";
        assert!(strategy_tags(t).is_empty());
        let t = "1\tSAMPLE\tpsi_pick\tseed\t{\"x_q_g\":{\"type\":\"grasp\",\"value\":\"top\"}}\n\
                 2\tSAMPLE\tpsi_pick\tresample\t{\"x_q_g\":{\"type\":\"grasp\",\"value\":\"forward\"}}\n\
                 3\tEXEC\tApproach\tOK\t0.1500\n\
                 4\tSAMPLE\tpsi_wave\tresample\t{}\n\
                 5\tSAMPLE\tpsi_move\tresample\t{}\n";
        assert_eq!(
            format_tags(&strategy_tags(t)),
            "relocate;wave_arm;move_base;redirect_grasp"
        );
    }
}
