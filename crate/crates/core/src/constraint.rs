//! Plans, factorable actions, clauses and the bipartite constraint network.

use crate::bt::Value;
use crate::domain::{param, ConstraintName};
use crate::sim::{evaluate_constraint, SimError, World};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Parameter id → value.
pub type Binding = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintError {
    #[error("no fusion recipe for ({0}, {1})")]
    FusionUnsupported(String, String),
    #[error("parameter `{param}` of constraint {constraint} is not read or written by any atomic action")]
    DanglingParameter {
        param: String,
        constraint: ConstraintName,
    },
    #[error("action `{0}` needs one clause per atomic action and at least one atomic action")]
    Malformed(String),
    #[error("constraint {0} has an empty scope")]
    EmptyScope(ConstraintName),
    #[error("bad recipe: {0}")]
    Recipe(String),
}

/// Parameters a constraint's evaluator reads.
pub fn default_scope(name: &ConstraintName) -> Vec<String> {
    let ids: &[&str] = match name {
        ConstraintName::PathValid => &[param::U_T_B],
        ConstraintName::TrajectoryValid => {
            &[param::X_Q_B, param::X_Q_A, param::X_Q_G, param::U_T_A, param::TARGET]
        }
        ConstraintName::NearGrasp => &[param::X_Q_B, param::TARGET],
        ConstraintName::CubeInSight => &[param::X_B, param::X_A, param::TARGET],
        ConstraintName::CloseCube => &[param::X_B, param::X_A_GRASP, param::TARGET],
        ConstraintName::Var(id) => return vec![format!("x_{id}")],
    };
    ids.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: ConstraintName,
    pub scope: Vec<String>,
}

impl Constraint {
    pub fn new(name: ConstraintName) -> Self {
        let scope = default_scope(&name);
        Constraint { name, scope }
    }

    pub fn with_scope(name: ConstraintName, scope: Vec<String>) -> Result<Self, ConstraintError> {
        if scope.is_empty() {
            return Err(ConstraintError::EmptyScope(name));
        }
        Ok(Constraint { name, scope })
    }
}

/// Conjunction of constraints; the empty clause holds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Clause {
    pub constraints: Vec<Constraint>,
}

impl Clause {
    pub fn new(names: impl IntoIterator<Item = ConstraintName>) -> Self {
        Clause {
            constraints: names.into_iter().map(Constraint::new).collect(),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &ConstraintName> {
        self.constraints.iter().map(|c| &c.name)
    }

    pub fn mentions(&self, p: &str) -> bool {
        self.constraints.iter().any(|c| c.scope.iter().any(|s| s == p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicActionSpec {
    pub name: String,
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    pub executor_id: String,
}

impl AtomicActionSpec {
    pub fn new(name: &str, reads: &[&str], writes: &[&str]) -> Self {
        AtomicActionSpec {
            name: name.to_string(),
            reads: reads.iter().map(|s| s.to_string()).collect(),
            writes: writes.iter().map(|s| s.to_string()).collect(),
            executor_id: name.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorableAction {
    pub name: String,
    pub atomic_actions: Vec<AtomicActionSpec>,
    /// `clauses[i]` is the precondition clause of `atomic_actions[i]`.
    pub clauses: Vec<Clause>,
    /// Pairs of parameters pinned equal to each other.
    pub aliases: Vec<(String, String)>,
}

impl FactorableAction {
    pub fn new(
        name: &str,
        atomic_actions: Vec<AtomicActionSpec>,
        clauses: Vec<Clause>,
    ) -> Result<Self, ConstraintError> {
        if atomic_actions.is_empty() || atomic_actions.len() != clauses.len() {
            return Err(ConstraintError::Malformed(name.to_string()));
        }
        Ok(FactorableAction {
            name: name.to_string(),
            atomic_actions,
            clauses,
            aliases: Vec::new(),
        })
    }

    /// A symbolic action as a one-step factorable action with an empty clause.
    pub fn single(name: &str) -> Self {
        FactorableAction {
            name: name.to_string(),
            atomic_actions: vec![AtomicActionSpec::new(name, &[], &[])],
            clauses: vec![Clause::default()],
            aliases: Vec::new(),
        }
    }

    /// Every parameter id read or written by an atomic action.
    pub fn parameters(&self) -> BTreeSet<String> {
        self.atomic_actions
            .iter()
            .flat_map(|a| a.reads.iter().chain(a.writes.iter()).cloned())
            .collect()
    }
}

/// ⟨X, U, T⟩ with the initial binding and a goal clause.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredTransitionSystem {
    pub states: BTreeSet<String>,
    pub controls: BTreeSet<String>,
    pub components: Vec<(AtomicActionSpec, Clause)>,
    pub initial: Binding,
    pub goal: Clause,
}

impl FactoredTransitionSystem {
    /// Path and trajectory parameters (`u_*`) are controls; the rest are states.
    pub fn from_action(action: &FactorableAction, initial: Binding, goal: Clause) -> Self {
        let (controls, states) = action
            .parameters()
            .into_iter()
            .partition(|p| p.starts_with("u_"));
        FactoredTransitionSystem {
            states,
            controls,
            components: action
                .atomic_actions
                .iter()
                .cloned()
                .zip(action.clauses.iter().cloned())
                .collect(),
            initial,
            goal,
        }
    }

    /// Whether every clause parameter lies in X ∪ U.
    pub fn is_closed(&self) -> bool {
        self.components.iter().all(|(_, c)| {
            c.constraints
                .iter()
                .flat_map(|k| k.scope.iter())
                .all(|p| self.states.contains(p) || self.controls.contains(p))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ParamRole {
    Constant,
    Free,
    TransientFixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintNetwork {
    pub parameters: BTreeMap<String, ParamRole>,
    /// One node per distinct constraint name, in first-appearance order.
    pub constraints: Vec<Constraint>,
    pub edges: BTreeSet<(ConstraintName, String)>,
    pub clause_count: usize,
    /// Atomic actions that write both members of an alias pair.
    pub alias_conflicts: Vec<String>,
}

impl ConstraintNetwork {
    pub fn degree(&self, p: &str) -> usize {
        self.edges.iter().filter(|(_, q)| q == p).count()
    }

    pub fn free_parameters(&self) -> impl Iterator<Item = &str> {
        self.parameters
            .iter()
            .filter(|(_, r)| **r == ParamRole::Free)
            .map(|(p, _)| p.as_str())
    }

    /// Every edge joins a constraint node to a parameter node.
    pub fn is_bipartite(&self) -> bool {
        self.edges.iter().all(|(c, p)| {
            self.constraints.iter().any(|k| &k.name == c) && self.parameters.contains_key(p)
        })
    }
}

/// Builds the network. Roles: bound in `initial` → constant; produced by a
/// sampler → free; written by an atomic action or aliased → transient-fixed.
pub fn build_constraint_network(
    action: &FactorableAction,
    initial: &Binding,
    sampler_outputs: &BTreeSet<String>,
) -> Result<ConstraintNetwork, ConstraintError> {
    let known = action.parameters();
    let mut constraints: Vec<Constraint> = Vec::new();
    let mut edges = BTreeSet::new();
    for clause in &action.clauses {
        for c in &clause.constraints {
            for p in &c.scope {
                if !known.contains(p) {
                    return Err(ConstraintError::DanglingParameter {
                        param: p.clone(),
                        constraint: c.name.clone(),
                    });
                }
                edges.insert((c.name.clone(), p.clone()));
            }
            if !constraints.iter().any(|k| k.name == c.name) {
                constraints.push(c.clone());
            }
        }
    }
    let written: BTreeSet<&String> = action.atomic_actions.iter().flat_map(|a| &a.writes).collect();
    let aliased: BTreeSet<&String> = action.aliases.iter().flat_map(|(a, b)| [a, b]).collect();
    let parameters = known
        .iter()
        .map(|p| {
            let role = if initial.contains_key(p) {
                ParamRole::Constant
            } else if sampler_outputs.contains(p) {
                ParamRole::Free
            } else if written.contains(p) || aliased.contains(p) {
                ParamRole::TransientFixed
            } else {
                ParamRole::Free
            };
            (p.clone(), role)
        })
        .collect();
    let alias_conflicts = action
        .atomic_actions
        .iter()
        .filter(|a| {
            action
                .aliases
                .iter()
                .any(|(x, y)| a.writes.contains(x) && a.writes.contains(y))
        })
        .map(|a| a.name.clone())
        .collect();
    Ok(ConstraintNetwork {
        parameters,
        constraints,
        edges,
        clause_count: action.clauses.len(),
        alias_conflicts,
    })
}

/// Conjunction over the clause, reporting the first violated constraint in
/// declaration order.
pub fn evaluate_clause(
    clause: &Clause,
    binding: &Binding,
    world: &World,
) -> Result<(bool, Option<Constraint>), SimError> {
    for c in &clause.constraints {
        if let Some(p) = c.scope.iter().find(|p| !binding.contains_key(*p)) {
            return Err(SimError::IncompleteBinding(p.clone()));
        }
    }
    for c in &clause.constraints {
        if !evaluate_constraint(&c.name, binding, world)? {
            return Ok((false, Some(c.clone())));
        }
    }
    Ok((true, None))
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RecipeAtomic {
    name: String,
    #[serde(default)]
    clause: Vec<ConstraintName>,
    #[serde(default)]
    reads: Vec<String>,
    #[serde(default)]
    writes: Vec<String>,
    #[serde(default)]
    executor: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RecipeFile {
    fuse: [String; 2],
    name: String,
    #[serde(default)]
    aliases: Vec<(String, String)>,
    atomic: Vec<RecipeAtomic>,
}

/// Declarative fusion recipes keyed by the pair of symbolic action names.
#[derive(Debug, Clone, Default)]
pub struct RecipeBook {
    recipes: BTreeMap<(String, String), FactorableAction>,
}

pub const NOOP: &str = "NoOp";

impl RecipeBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// The shipped book: Move + Pick.
    pub fn standard() -> Self {
        let mut b = RecipeBook::new();
        b.add_json(include_str!("../recipes/move_and_pick.json"))
            .expect("shipped recipe parses");
        b
    }

    pub fn add_json(&mut self, text: &str) -> Result<(), ConstraintError> {
        let r: RecipeFile =
            serde_json::from_str(text).map_err(|e| ConstraintError::Recipe(e.to_string()))?;
        let mut atomic = Vec::new();
        let mut clauses = Vec::new();
        for a in r.atomic {
            let refs = |v: &[String]| v.iter().cloned().collect::<BTreeSet<_>>();
            atomic.push(AtomicActionSpec {
                executor_id: a.executor.unwrap_or_else(|| a.name.clone()),
                name: a.name,
                reads: refs(&a.reads),
                writes: refs(&a.writes),
            });
            clauses.push(Clause::new(a.clause));
        }
        let mut action = FactorableAction::new(&r.name, atomic, clauses)?;
        action.aliases = r.aliases;
        let [a, b] = r.fuse;
        self.recipes.insert((a, b), action);
        Ok(())
    }

    /// Fuses two adjacent symbolic actions. `NoOp` on either side is the
    /// identity.
    pub fn fuse(&self, a: &str, b: &str) -> Result<FactorableAction, ConstraintError> {
        if b == NOOP {
            return Ok(FactorableAction::single(a));
        }
        if a == NOOP {
            return Ok(FactorableAction::single(b));
        }
        self.recipes
            .get(&(a.to_string(), b.to_string()))
            .cloned()
            .ok_or_else(|| ConstraintError::FusionUnsupported(a.to_string(), b.to_string()))
    }
}

/// A factored plan step and its target.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub action: FactorableAction,
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub actions: Vec<PlanStep>,
    /// Length of the symbolic plan before fusion.
    pub symbolic_len: usize,
}

impl Plan {
    /// Greedily fuses adjacent pairs left to right. Steps may carry a
    /// target as `Name:target`; a fused step takes the target of its
    /// second member. `NoOp` is absorbed by its neighbour. Unfusable steps
    /// stay single.
    pub fn factor(symbolic: &[String], book: &RecipeBook) -> Plan {
        let split = |s: &String| match s.split_once(':') {
            Some((n, t)) => (n.to_string(), Some(t.to_string())),
            None => (s.clone(), None),
        };
        let steps: Vec<_> = symbolic.iter().map(split).collect();
        let mut actions = Vec::new();
        let mut i = 0;
        while i < steps.len() {
            if let Some(next) = steps.get(i + 1) {
                if let Ok(action) = book.fuse(&steps[i].0, &next.0) {
                    let target = if next.0 == NOOP { &steps[i].1 } else { &next.1 };
                    actions.push(PlanStep {
                        action,
                        target: target.clone().or(steps[i].1.clone()),
                    });
                    i += 2;
                    continue;
                }
            }
            actions.push(PlanStep {
                action: FactorableAction::single(&steps[i].0),
                target: steps[i].1.clone(),
            });
            i += 1;
        }
        Plan {
            actions,
            symbolic_len: symbolic.len(),
        }
    }
}

/// The Move-and-Pick action from the shipped recipe.
pub fn move_and_pick() -> FactorableAction {
    RecipeBook::standard()
        .fuse("Move", "Pick")
        .expect("shipped recipe")
}
