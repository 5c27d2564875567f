use super::blackboard::Blackboard;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeStatus {
    Success,
    Running,
    Failure,
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeStatus::Success => "SUCCESS",
            NodeStatus::Running => "RUNNING",
            NodeStatus::Failure => "FAILURE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoratorPolicy {
    /// Re-tick the child on later root ticks until it succeeds.
    /// `max_attempts == 0` means unbounded.
    RetryUntilSuccessful { max_attempts: u32 },
    Inverter,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Sequence,
    Fallback,
    /// Succeeds once `success_threshold` children succeed.
    Parallel { success_threshold: usize },
    Decorator(DecoratorPolicy),
    Action(String),
    Condition(String),
    /// Conditional action node, resolved by the CSubBT layer.
    CaNode { atomic: String },
    /// Conditional switch node, resolved by the CSubBT layer.
    CsNode {
        logistic: Vec<String>,
        samplers: Vec<String>,
    },
}

impl NodeKind {
    pub fn label(&self) -> &'static str {
        match self {
            NodeKind::Sequence => "Sequence",
            NodeKind::Fallback => "Fallback",
            NodeKind::Parallel { .. } => "Parallel",
            NodeKind::Decorator(_) => "Decorator",
            NodeKind::Action(_) => "Action",
            NodeKind::Condition(_) => "Condition",
            NodeKind::CaNode { .. } => "CANode",
            NodeKind::CsNode { .. } => "CSNode",
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(
            self,
            NodeKind::Action(_)
                | NodeKind::Condition(_)
                | NodeKind::CaNode { .. }
                | NodeKind::CsNode { .. }
        )
    }

    /// Leaves that must never report `Running`.
    fn is_condition_like(&self) -> bool {
        matches!(self, NodeKind::Condition(_) | NodeKind::CsNode { .. })
    }
}

/// A behavior-tree node. Carries its own tick counter and decorator state.
#[derive(Debug, Clone, PartialEq)]
pub struct BtNode {
    pub name: String,
    pub kind: NodeKind,
    pub children: Vec<BtNode>,
    pub ticks: u64,
    attempts: u32,
}

impl BtNode {
    pub fn new(name: impl Into<String>, kind: NodeKind, children: Vec<BtNode>) -> Self {
        BtNode {
            name: name.into(),
            kind,
            children,
            ticks: 0,
            attempts: 0,
        }
    }

    pub fn leaf(name: impl Into<String>, kind: NodeKind) -> Self {
        Self::new(name, kind, Vec::new())
    }

    pub fn sequence(name: impl Into<String>, children: Vec<BtNode>) -> Self {
        Self::new(name, NodeKind::Sequence, children)
    }

    pub fn fallback(name: impl Into<String>, children: Vec<BtNode>) -> Self {
        Self::new(name, NodeKind::Fallback, children)
    }

    pub fn parallel(name: impl Into<String>, success_threshold: usize, children: Vec<BtNode>) -> Self {
        Self::new(name, NodeKind::Parallel { success_threshold }, children)
    }

    pub fn decorator(name: impl Into<String>, policy: DecoratorPolicy, child: BtNode) -> Self {
        Self::new(name, NodeKind::Decorator(policy), vec![child])
    }

    pub fn action(name: impl Into<String>) -> Self {
        let name = name.into();
        Self::leaf(name.clone(), NodeKind::Action(name))
    }

    pub fn condition(name: impl Into<String>) -> Self {
        let name = name.into();
        Self::leaf(name.clone(), NodeKind::Condition(name))
    }

    /// Checks the arity rules of this node only.
    pub fn check_arity(&self) -> Result<(), BtError> {
        let n = self.children.len();
        let ok = match &self.kind {
            k if k.is_leaf() => n == 0,
            NodeKind::Decorator(_) => n == 1,
            NodeKind::Parallel { success_threshold } => {
                n >= 1 && *success_threshold >= 1 && *success_threshold <= n
            }
            _ => n >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(BtError::Arity {
                node: self.name.clone(),
                kind: self.kind.label(),
                children: n,
            })
        }
    }

    /// Checks arity for the whole subtree.
    pub fn validate(&self) -> Result<(), BtError> {
        self.check_arity()?;
        self.children.iter().try_for_each(BtNode::validate)
    }

    /// Depth-first search by name.
    pub fn find(&self, name: &str) -> Option<&BtNode> {
        if self.name == name {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(name))
    }

    /// Structural equality ignoring runtime counters.
    pub fn same_shape(&self, other: &BtNode) -> bool {
        self.name == other.name
            && self.kind == other.kind
            && self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|(a, b)| a.same_shape(b))
    }

    /// Clears tick counters and decorator state in the subtree.
    pub fn reset_runtime(&mut self) {
        self.ticks = 0;
        self.attempts = 0;
        self.children.iter_mut().for_each(BtNode::reset_runtime);
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BtError {
    #[error("node `{node}` of kind {kind} has invalid arity ({children} children)")]
    Arity {
        node: String,
        kind: &'static str,
        children: usize,
    },
    #[error("condition node `{0}` returned Running")]
    ConditionRunning(String),
    #[error("leaf `{node}`: {message}")]
    Leaf { node: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub tick_index: u64,
    pub path: String,
    pub status: NodeStatus,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.tick_index, self.path, self.status)
    }
}

/// Blackboard plus the tick counter and the append-only tick trace.
#[derive(Debug, Clone, Default)]
pub struct TickContext {
    pub blackboard: Blackboard,
    pub tick_index: u64,
    pub trace: Vec<TraceEntry>,
}

impl TickContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_blackboard(blackboard: Blackboard) -> Self {
        TickContext {
            blackboard,
            ..Self::default()
        }
    }

    pub fn trace_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.trace {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

/// Executes leaf nodes. `path` is the slash-joined name path from the root.
pub trait LeafHandler {
    fn tick_leaf(
        &mut self,
        node: &BtNode,
        path: &str,
        ctx: &mut TickContext,
    ) -> Result<NodeStatus, BtError>;
}

impl<F> LeafHandler for F
where
    F: FnMut(&BtNode, &str, &mut TickContext) -> Result<NodeStatus, BtError>,
{
    fn tick_leaf(
        &mut self,
        node: &BtNode,
        path: &str,
        ctx: &mut TickContext,
    ) -> Result<NodeStatus, BtError> {
        self(node, path, ctx)
    }
}

/// One root tick: validates the tree, bumps the tick index and ticks `root`.
pub fn tick_root(
    root: &mut BtNode,
    ctx: &mut TickContext,
    leaves: &mut dyn LeafHandler,
) -> Result<NodeStatus, BtError> {
    root.validate()?;
    ctx.tick_index += 1;
    let path = root.name.clone();
    tick(root, &path, ctx, leaves)
}

/// Ticks `node` (reachable at `path`) and records one trace entry for it.
pub fn tick(
    node: &mut BtNode,
    path: &str,
    ctx: &mut TickContext,
    leaves: &mut dyn LeafHandler,
) -> Result<NodeStatus, BtError> {
    node.check_arity()?;
    node.ticks += 1;
    let status = match node.kind.clone() {
        NodeKind::Sequence => {
            let mut out = NodeStatus::Success;
            for child in node.children.iter_mut() {
                let s = tick_child(child, path, ctx, leaves)?;
                if s != NodeStatus::Success {
                    out = s;
                    break;
                }
            }
            out
        }
        NodeKind::Fallback => {
            let mut out = NodeStatus::Failure;
            for child in node.children.iter_mut() {
                let s = tick_child(child, path, ctx, leaves)?;
                if s != NodeStatus::Failure {
                    out = s;
                    break;
                }
            }
            out
        }
        NodeKind::Parallel { success_threshold } => {
            let n = node.children.len();
            let (mut ok, mut failed) = (0, 0);
            for child in node.children.iter_mut() {
                match tick_child(child, path, ctx, leaves)? {
                    NodeStatus::Success => ok += 1,
                    NodeStatus::Failure => failed += 1,
                    NodeStatus::Running => {}
                }
            }
            parallel_status(n, success_threshold, ok, failed)
        }
        NodeKind::Decorator(policy) => {
            let s = tick_child(&mut node.children[0], path, ctx, leaves)?;
            match policy {
                DecoratorPolicy::Inverter => match s {
                    NodeStatus::Success => NodeStatus::Failure,
                    NodeStatus::Failure => NodeStatus::Success,
                    NodeStatus::Running => NodeStatus::Running,
                },
                DecoratorPolicy::RetryUntilSuccessful { max_attempts } => match s {
                    NodeStatus::Success => {
                        node.attempts = 0;
                        NodeStatus::Success
                    }
                    NodeStatus::Running => NodeStatus::Running,
                    NodeStatus::Failure => {
                        node.attempts += 1;
                        if max_attempts > 0 && node.attempts >= max_attempts {
                            node.attempts = 0;
                            NodeStatus::Failure
                        } else {
                            NodeStatus::Running
                        }
                    }
                },
            }
        }
        _ => {
            let s = leaves.tick_leaf(node, path, ctx)?;
            if s == NodeStatus::Running && node.kind.is_condition_like() {
                return Err(BtError::ConditionRunning(node.name.clone()));
            }
            s
        }
    };
    ctx.trace.push(TraceEntry {
        tick_index: ctx.tick_index,
        path: path.to_string(),
        status,
    });
    Ok(status)
}

fn tick_child(
    child: &mut BtNode,
    parent_path: &str,
    ctx: &mut TickContext,
    leaves: &mut dyn LeafHandler,
) -> Result<NodeStatus, BtError> {
    let path = format!("{parent_path}/{}", child.name);
    tick(child, &path, ctx, leaves)
}

/// Parallel return rule: the success condition is checked first, then the
/// failure condition, otherwise Running.
pub fn parallel_status(n: usize, m: usize, successes: usize, failures: usize) -> NodeStatus {
    if successes >= m {
        NodeStatus::Success
    } else if failures + m > n {
        // failures >= N - M + 1
        NodeStatus::Failure
    } else {
        NodeStatus::Running
    }
}
