//! Conditional subtrees: status-table gated action nodes (CANodes), the
//! switch node (CSNode) that repairs failures by resampling parameters, and
//! the run loop.
//!
//! Layout of an assembled tree:
//!
//! ```text
//! Decorator(RetryUntilSuccessful, unbounded)
//! └── Sequence
//!     ├── CSNode
//!     ├── CANode 0
//!     ├── …
//!     └── CANode k
//! ```

mod runtime;
mod trace;

pub use runtime::{run_csubbt, run_csubbt_observed, Executor, RunOutcome, Terminal, UpdateOutcome};
pub use trace::{format_tags, strategy_tags, StrategyTag};
pub(crate) use runtime::{attempt, resample, seed_emissions, Attempt};
pub(crate) use trace::{failure_line, logistic_line, merge, sample_line};

use crate::bt::{BlackboardError, BtError, BtNode, DecoratorPolicy, NodeKind, TickContext, Value};
use crate::constraint::{build_constraint_network, Binding, ConstraintError, ConstraintNetwork, FactorableAction};
use crate::domain::{param, ConstraintName};
use crate::samplers::{ConditionalSampler, SamplerError};
use crate::sim::{with_state, SamplerConfig, SimError, World};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Reserved blackboard key of the status table.
pub const STATUS_KEY: &str = "__status_table";
/// Reserved blackboard key of the failure record.
pub const FAILURE_KEY: &str = "__failure_record";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsubbtError {
    #[error("no sampler produces free parameter(s) {0}")]
    NoSampler(String),
    #[error("free parameter `{0}` is produced by more than one sampler")]
    AmbiguousProducer(String),
    #[error("unknown sampler `{0}`")]
    UnknownSampler(String),
    #[error("sampler `{sampler}` input `{param}` is not covered")]
    Uncovered { sampler: String, param: String },
    #[error("bad CSubBT tree: {0}")]
    Tree(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Blackboard(#[from] BlackboardError),
    #[error(transparent)]
    Bt(#[from] BtError),
}

/// Which samplers a CSNode holds and how it reacts to each constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct CsubbtConfig {
    /// Constraints repaired by re-running the predecessor.
    pub logistic: BTreeSet<ConstraintName>,
    /// Samplers tried for each constraint, in order.
    pub registrations: Vec<(ConstraintName, Vec<String>)>,
    /// Samplers that jointly produce the free parameters, in sequence order.
    /// Any other sampler is recovery-only.
    pub primary: Vec<String>,
    /// Consecutive logistic retries for one (constraint, index) before
    /// escalating to the sampler path.
    pub logistic_budget: usize,
}

impl CsubbtConfig {
    pub fn move_and_pick() -> Self {
        use ConstraintName::*;
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        CsubbtConfig {
            logistic: [NearGrasp, CloseCube].into_iter().collect(),
            registrations: vec![
                (PathValid, s(&["psi_move"])),
                (TrajectoryValid, s(&["psi_pick", "psi_move"])),
                (CubeInSight, s(&["psi_wave", "psi_move"])),
                (NearGrasp, s(&["psi_move"])),
                (CloseCube, s(&["psi_move"])),
            ],
            primary: s(&["psi_move", "psi_pick"]),
            logistic_budget: 3,
        }
    }

    pub fn registered(&self, c: &ConstraintName) -> &[String] {
        self.registrations
            .iter()
            .find(|(k, _)| k == c)
            .map(|(_, v)| v.as_slice())
            .unwrap_or(&[])
    }
}

/// ψ_Move, ψ_Pick and ψ_Wave built from scenario settings.
pub fn move_and_pick_samplers(config: &SamplerConfig) -> Vec<ConditionalSampler> {
    vec![
        crate::samplers::move_sampler(config),
        crate::samplers::pick_sampler(config),
        crate::samplers::wave_sampler(config),
    ]
}

/// Counters kept while a CSubBT runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stats {
    /// Executor invocations per CANode.
    pub executions: Vec<u64>,
    /// Reset operations per status bit, whether or not it was set.
    pub cleared: Vec<u64>,
    /// Sampler-path updates.
    pub resamples: u64,
    pub logistic_retries: u64,
}

pub(crate) struct Core {
    pub action: FactorableAction,
    pub network: ConstraintNetwork,
    pub samplers: Vec<ConditionalSampler>,
    pub config: CsubbtConfig,
    pub canode_index: BTreeMap<String, usize>,
    pub streaks: BTreeMap<(ConstraintName, usize), usize>,
    pub terminal: bool,
    pub error: Option<CsubbtError>,
    pub stats: Stats,
    pub events: Vec<(u64, String)>,
    pub executors: BTreeMap<String, Executor>,
}

/// An assembled conditional subtree with its blackboard and samplers.
pub struct CSubBT {
    pub root: BtNode,
    pub ctx: TickContext,
    pub(crate) core: Core,
}

impl CSubBT {
    pub fn status_table(&self) -> Vec<bool> {
        self.ctx
            .blackboard
            .get::<Vec<bool>>(STATUS_KEY)
            .ok()
            .flatten()
            .unwrap_or_default()
    }

    pub fn set_status_table(&mut self, bits: Vec<bool>) {
        self.ctx.blackboard.write(STATUS_KEY, Value::Bools(bits));
    }

    pub fn stats(&self) -> &Stats {
        &self.core.stats
    }

    pub fn network(&self) -> &ConstraintNetwork {
        &self.core.network
    }

    pub fn action(&self) -> &FactorableAction {
        &self.core.action
    }

    pub fn config(&self) -> &CsubbtConfig {
        &self.core.config
    }

    pub fn sampler(&self, name: &str) -> Option<&ConditionalSampler> {
        self.core.samplers.iter().find(|s| s.name == name)
    }

    pub fn sampler_mut(&mut self, name: &str) -> Option<&mut ConditionalSampler> {
        self.core.samplers.iter_mut().find(|s| s.name == name)
    }

    pub fn samplers(&self) -> &[ConditionalSampler] {
        &self.core.samplers
    }

    /// Total `next` calls over all samplers.
    pub fn sampler_calls(&self) -> u64 {
        self.core.samplers.iter().map(|s| s.calls()).sum()
    }

    /// Replaces the executor for an atomic action's `executor_id`.
    pub fn set_executor(&mut self, id: &str, executor: Executor) {
        self.core.executors.insert(id.to_string(), executor);
    }

    /// Parameter values currently on the blackboard, reserved keys excluded.
    pub fn parameters(&self) -> Binding {
        self.ctx
            .blackboard
            .iter()
            .filter(|(k, _)| !k.starts_with("__"))
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    /// Tick trace interleaved with CSubBT events, ordered by tick.
    pub fn trace_text(&self) -> String {
        trace::merge(&self.ctx.trace, &self.core.events)
    }

    pub fn strategy_tags(&self) -> BTreeSet<StrategyTag> {
        strategy_tags(&self.trace_text())
    }

    pub(crate) fn log(&mut self, line: String) {
        self.core.events.push((self.ctx.tick_index, line));
    }
}

/// The standard tree for `action`.
pub fn csubbt_tree(action: &FactorableAction, config: &CsubbtConfig) -> BtNode {
    let mut children = vec![BtNode::leaf(
        "CSNode",
        NodeKind::CsNode {
            logistic: config.logistic.iter().map(|c| c.to_string()).collect(),
            samplers: config.registrations.iter().flat_map(|(_, v)| v.clone()).fold(
                Vec::new(),
                |mut acc, s| {
                    if !acc.contains(&s) {
                        acc.push(s);
                    }
                    acc
                },
            ),
        },
    )];
    for a in &action.atomic_actions {
        children.push(BtNode::leaf(
            a.name.clone(),
            NodeKind::CaNode {
                atomic: a.name.clone(),
            },
        ));
    }
    BtNode::decorator(
        action.name.clone(),
        DecoratorPolicy::RetryUntilSuccessful { max_attempts: 0 },
        BtNode::sequence("Sequence", children),
    )
}

/// Assembles the standard tree for `action` and seeds the free parameters.
pub fn assemble_csubbt(
    action: FactorableAction,
    samplers: Vec<ConditionalSampler>,
    config: CsubbtConfig,
    initial: Binding,
    world: &World,
) -> Result<CSubBT, CsubbtError> {
    let root = csubbt_tree(&action, &config);
    assemble_with_tree(root, action, samplers, config, initial, world)
}

/// Assembles from a parsed tree: its CSNode supplies the logistic set and
/// sampler ids (registrations come from `config`), its CANodes must list
/// the atomic actions in order.
pub fn assemble_from_tree(
    root: BtNode,
    action: FactorableAction,
    samplers: Vec<ConditionalSampler>,
    mut config: CsubbtConfig,
    initial: Binding,
    world: &World,
) -> Result<CSubBT, CsubbtError> {
    root.validate()?;
    let seq = match (&root.kind, root.children.first()) {
        (NodeKind::Decorator(DecoratorPolicy::RetryUntilSuccessful { .. }), Some(s))
            if s.kind == NodeKind::Sequence =>
        {
            s
        }
        _ => {
            return Err(CsubbtError::Tree(
                "root must be RetryUntilSuccessful over a Sequence".into(),
            ))
        }
    };
    let Some(NodeKind::CsNode { logistic, samplers: ids }) = seq.children.first().map(|c| &c.kind) else {
        return Err(CsubbtError::Tree("first child of the sequence must be a CSNode".into()));
    };
    config.logistic = logistic
        .iter()
        .map(|s| s.parse().map_err(CsubbtError::Tree))
        .collect::<Result<_, _>>()?;
    for id in ids {
        if !samplers.iter().any(|s| &s.name == id) {
            return Err(CsubbtError::UnknownSampler(id.clone()));
        }
    }
    let atomics: Vec<&str> = seq.children[1..]
        .iter()
        .map(|c| match &c.kind {
            NodeKind::CaNode { atomic } => Ok(atomic.as_str()),
            _ => Err(CsubbtError::Tree(format!("`{}` is not a CANode", c.name))),
        })
        .collect::<Result<_, _>>()?;
    let expected: Vec<&str> = action.atomic_actions.iter().map(|a| a.name.as_str()).collect();
    if atomics != expected {
        return Err(CsubbtError::Tree(format!(
            "CANodes {atomics:?} do not match atomic actions {expected:?}"
        )));
    }
    assemble_with_tree(root, action, samplers, config, initial, world)
}

fn assemble_with_tree(
    root: BtNode,
    action: FactorableAction,
    samplers: Vec<ConditionalSampler>,
    config: CsubbtConfig,
    initial: Binding,
    world: &World,
) -> Result<CSubBT, CsubbtError> {
    // primary samplers first, in sequence order
    let mut pool: Vec<Option<ConditionalSampler>> = samplers.into_iter().map(Some).collect();
    let mut ordered = Vec::new();
    for name in &config.primary {
        let slot = pool
            .iter_mut()
            .find(|s| s.as_ref().is_some_and(|s| &s.name == name))
            .ok_or_else(|| CsubbtError::UnknownSampler(name.clone()))?;
        ordered.push(slot.take().expect("present"));
    }
    ordered.extend(pool.into_iter().flatten());
    let n_primary = config.primary.len();
    for (_, names) in &config.registrations {
        for n in names {
            if !ordered.iter().any(|s| &s.name == n) {
                return Err(CsubbtError::UnknownSampler(n.clone()));
            }
        }
    }

    let produced: BTreeSet<String> = ordered
        .iter()
        .flat_map(|s| s.outputs.iter().cloned())
        .collect();
    let network = build_constraint_network(&action, &initial, &produced)?;
    let mut missing = Vec::new();
    for p in network.free_parameters() {
        let producers = ordered[..n_primary]
            .iter()
            .filter(|s| s.outputs.iter().any(|o| o == p))
            .count();
        match producers {
            0 => missing.push(p.to_string()),
            1 => {}
            _ => return Err(CsubbtError::AmbiguousProducer(p.to_string())),
        }
    }
    if !missing.is_empty() {
        return Err(CsubbtError::NoSampler(missing.join(", ")));
    }
    let state_ids = [param::X_B, param::X_A, param::X_A_GRASP];
    let mut have: Vec<&str> = initial.keys().map(String::as_str).collect();
    have.extend(state_ids);
    for s in &ordered[..n_primary] {
        if let Some(p) = s.inputs.iter().find(|p| !have.contains(&p.as_str())) {
            return Err(CsubbtError::Uncovered {
                sampler: s.name.clone(),
                param: p.clone(),
            });
        }
        have.extend(s.outputs.iter().map(String::as_str));
    }

    let k = action.atomic_actions.len();
    let canode_index = action
        .atomic_actions
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.clone(), i))
        .collect();
    let mut ctx = TickContext::new();
    for (key, v) in &initial {
        ctx.blackboard.write(key.clone(), v.clone());
    }
    let mut tree = CSubBT {
        root,
        ctx,
        core: Core {
            action,
            network,
            samplers: ordered,
            config,
            canode_index,
            streaks: BTreeMap::new(),
            terminal: false,
            error: None,
            stats: Stats {
                executions: vec![0; k],
                cleared: vec![0; k],
                ..Stats::default()
            },
            events: Vec::new(),
            executors: BTreeMap::new(),
        },
    };
    tree.set_status_table(vec![false; k]);
    tree.log(trace::status_line(0, &vec![false; k]));
    seed(&mut tree, world)?;
    Ok(tree)
}

/// Initial emissions for every free parameter.
fn seed(tree: &mut CSubBT, world: &World) -> Result<(), CsubbtError> {
    let n = tree.core.config.primary.len();
    let start = with_state(&tree.parameters(), world);
    for (name, out) in runtime::seed_emissions(&mut tree.core.samplers, n, &start, world)? {
        for (k, v) in &out {
            tree.ctx.blackboard.write(k.clone(), v.clone());
        }
        tree.log(trace::sample_line(0, &name, "seed", &out));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
