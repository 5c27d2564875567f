//! Behavior-tree interpreter: node taxonomy, tick routing, blackboard and
//! the JSON tree-file parser.
//!
//! Control nodes are memoryless: a Sequence or Fallback restarts from its
//! first child on every root tick.

mod blackboard;
mod node;
mod parse;

pub use blackboard::{Blackboard, BlackboardError, FromValue, Value};
pub use node::{
    parallel_status, tick, tick_root, BtError, BtNode, DecoratorPolicy, LeafHandler, NodeKind,
    NodeStatus, TickContext, TraceEntry,
};
pub use parse::{parse_tree, tree_to_json, ParseError};
