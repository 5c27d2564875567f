//! Hand-built postcondition-precondition-action tree for Move-and-Pick.
//!
//! ```text
//! Decorator(RetryUntilSuccessful, unbounded)
//! └── Fallback Pick
//!     ├── Condition Holding
//!     ├── Sequence PPA
//!     │   ├── Fallback Base [Condition BaseAtGoal, Action Move]
//!     │   ├── Fallback Arm  [Condition ArmAtGoal, Action Pre-approach]
//!     │   ├── Action Approach
//!     │   └── Action Grasp
//!     └── Action Adjust
//! ```
//!
//! Actions check the same precondition clauses as the CANodes. `Adjust`
//! applies the CSNode's repair to the last failure and reports `Running`,
//! or `Failure` once every registered sampler is exhausted.

use crate::bt::{tick_root, BtError, BtNode, DecoratorPolicy, LeafHandler, NodeKind, NodeStatus, TickContext};
use crate::constraint::{build_constraint_network, Binding, ConstraintNetwork, FactorableAction};
use crate::csubbt::{
    attempt, failure_line, logistic_line, merge, resample, sample_line, seed_emissions, strategy_tags,
    Attempt, CsubbtConfig, CsubbtError, RunOutcome, StrategyTag, Terminal,
};
use crate::domain::{param, ArmPose, ConstraintName, FailureRecord};
use crate::geom::Pose2;
use crate::samplers::ConditionalSampler;
use crate::sim::{with_state, ActionResult, Gripper, World};
use std::collections::{BTreeMap, BTreeSet};

struct State {
    action: FactorableAction,
    network: ConstraintNetwork,
    samplers: Vec<ConditionalSampler>,
    config: CsubbtConfig,
    target: String,
    last_failure: Option<FailureRecord>,
    streaks: BTreeMap<(ConstraintName, usize), usize>,
    terminal: bool,
    error: Option<CsubbtError>,
    resamples: u64,
    events: Vec<(u64, String)>,
}

pub struct TradiBt {
    pub root: BtNode,
    pub ctx: TickContext,
    state: State,
}

pub fn tradibt_tree(action: &FactorableAction) -> BtNode {
    let atomic = |i: usize| BtNode::action(action.atomic_actions[i].name.clone());
    let ppa = BtNode::sequence(
        "PPA",
        vec![
            BtNode::fallback("Base", vec![BtNode::condition("BaseAtGoal"), atomic(0)]),
            BtNode::fallback("Arm", vec![BtNode::condition("ArmAtGoal"), atomic(1)]),
            atomic(2),
            atomic(3),
        ],
    );
    BtNode::decorator(
        "TradiBT",
        DecoratorPolicy::RetryUntilSuccessful { max_attempts: 0 },
        BtNode::fallback(
            "Pick",
            vec![BtNode::condition("Holding"), ppa, BtNode::action("Adjust")],
        ),
    )
}

impl TradiBt {
    /// Same seeding as the CSubBT: the first joint binding of the primary
    /// samplers, written to the blackboard before the first tick.
    pub fn new(
        action: FactorableAction,
        mut samplers: Vec<ConditionalSampler>,
        config: CsubbtConfig,
        initial: Binding,
        world: &World,
    ) -> Result<Self, CsubbtError> {
        if action.atomic_actions.len() != 4 {
            return Err(CsubbtError::Tree(format!(
                "`{}` is not a four-step Move-and-Pick action",
                action.name
            )));
        }
        let produced: BTreeSet<String> = samplers.iter().flat_map(|s| s.outputs.iter().cloned()).collect();
        let network = build_constraint_network(&action, &initial, &produced)?;
        // primary samplers first, as in the CSubBT
        samplers.sort_by_key(|s| config.primary.iter().position(|p| *p == s.name).unwrap_or(usize::MAX));
        let target = crate::sim::get::<String>(&initial, param::TARGET)?;
        let mut ctx = TickContext::new();
        for (k, v) in &initial {
            ctx.blackboard.write(k.clone(), v.clone());
        }
        let mut events = Vec::new();
        let start = with_state(&initial, world);
        let n = config.primary.len();
        for (name, out) in seed_emissions(&mut samplers, n, &start, world)? {
            for (k, v) in &out {
                ctx.blackboard.write(k.clone(), v.clone());
            }
            events.push((0, sample_line(0, &name, "seed", &out)));
        }
        Ok(TradiBt {
            root: tradibt_tree(&action),
            ctx,
            state: State {
                action,
                network,
                samplers,
                config,
                target,
                last_failure: None,
                streaks: BTreeMap::new(),
                terminal: false,
                error: None,
                resamples: 0,
                events,
            },
        })
    }

    pub fn sampler_calls(&self) -> u64 {
        self.state.samplers.iter().map(|s| s.calls()).sum()
    }

    pub fn resamples(&self) -> u64 {
        self.state.resamples
    }

    pub fn trace_text(&self) -> String {
        merge(&self.ctx.trace, &self.state.events)
    }

    pub fn strategy_tags(&self) -> BTreeSet<StrategyTag> {
        strategy_tags(&self.trace_text())
    }

    pub fn tick(&mut self, world: &mut World) -> Result<NodeStatus, CsubbtError> {
        let mut h = Handler {
            state: &mut self.state,
            world,
        };
        match tick_root(&mut self.root, &mut self.ctx, &mut h) {
            Ok(s) => Ok(s),
            Err(e) => Err(self.state.error.take().unwrap_or(CsubbtError::Bt(e))),
        }
    }

    /// Ticks until Success, sampler exhaustion, or `max_root_ticks`.
    pub fn run(&mut self, world: &mut World, max_root_ticks: u64) -> Result<RunOutcome, CsubbtError> {
        let mut ticks = 0;
        let outcome = loop {
            if ticks >= max_root_ticks {
                break RunOutcome {
                    status: NodeStatus::Failure,
                    terminal: Some(Terminal::BudgetExhausted),
                    root_ticks: ticks,
                };
            }
            ticks += 1;
            if self.tick(world)? == NodeStatus::Success {
                break RunOutcome {
                    status: NodeStatus::Success,
                    terminal: None,
                    root_ticks: ticks,
                };
            }
            if self.state.terminal {
                break RunOutcome {
                    status: NodeStatus::Failure,
                    terminal: Some(Terminal::SamplerExhausted),
                    root_ticks: ticks,
                };
            }
        };
        let reason = match outcome.terminal {
            None => "done",
            Some(Terminal::SamplerExhausted) => "sampler-exhausted",
            Some(Terminal::BudgetExhausted) => "budget-exhausted",
        };
        let tick = self.ctx.tick_index;
        self.state
            .events
            .push((tick, format!("{tick}\tRESULT\t{}\t{reason}", outcome.status)));
        Ok(outcome)
    }
}

struct Handler<'a> {
    state: &'a mut State,
    world: &'a mut World,
}

impl LeafHandler for Handler<'_> {
    fn tick_leaf(&mut self, node: &BtNode, _path: &str, ctx: &mut TickContext) -> Result<NodeStatus, BtError> {
        let r = match &node.kind {
            NodeKind::Condition(name) => self.condition(name, ctx),
            NodeKind::Action(name) if name == "Adjust" => self.adjust(ctx),
            NodeKind::Action(name) => match self.state.action.atomic_actions.iter().position(|a| &a.name == name) {
                Some(i) => self.run_atomic(i, ctx),
                None => Err(CsubbtError::Tree(format!("unknown action `{name}`"))),
            },
            other => Err(CsubbtError::Tree(format!("{} leaf in TradiBT", other.label()))),
        };
        r.map_err(|e| {
            let message = e.to_string();
            self.state.error = Some(e);
            BtError::Leaf {
                node: node.name.clone(),
                message,
            }
        })
    }
}

fn parameters(ctx: &TickContext, world: &World) -> Binding {
    let b: Binding = ctx
        .blackboard
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    with_state(&b, world)
}

impl Handler<'_> {
    fn condition(&mut self, name: &str, ctx: &TickContext) -> Result<NodeStatus, CsubbtError> {
        let w = &*self.world;
        let base_at = || -> Result<bool, CsubbtError> {
            let goal: Option<Pose2> = ctx.blackboard.get(param::X_Q_B)?;
            Ok(goal.is_some_and(|g| g.position().dist(w.base.position()) <= 1e-6))
        };
        let holds = match name {
            "Holding" => w.gripper == Gripper::Holding(self.state.target.clone()),
            "BaseAtGoal" => base_at()?,
            "ArmAtGoal" => {
                let goal: Option<ArmPose> = ctx.blackboard.get(param::X_Q_A)?;
                base_at()?
                    && goal.is_some_and(|g| {
                        g.height == w.arm.height && g.offset.dist(w.arm.offset) <= 1e-6
                    })
            }
            other => return Err(CsubbtError::Tree(format!("unknown condition `{other}`"))),
        };
        Ok(if holds { NodeStatus::Success } else { NodeStatus::Failure })
    }

    fn log(&mut self, ctx: &TickContext, line: String) {
        self.state.events.push((ctx.tick_index, line));
    }

    fn fail(&mut self, ctx: &TickContext, c: ConstraintName, i: usize) -> Result<NodeStatus, CsubbtError> {
        self.log(ctx, failure_line(ctx.tick_index, &c, i));
        self.state.last_failure = Some(FailureRecord {
            constraint: c,
            action_index: i,
        });
        Ok(NodeStatus::Failure)
    }

    fn run_atomic(&mut self, i: usize, ctx: &mut TickContext) -> Result<NodeStatus, CsubbtError> {
        let binding = parameters(ctx, self.world);
        let result = match attempt(&self.state.action, &self.state.network, i, &binding, self.world, None)? {
            Attempt::Violated(c) => return self.fail(ctx, c, i),
            Attempt::Ran(r) => r,
        };
        let name = self.state.action.atomic_actions[i].name.clone();
        let tick = ctx.tick_index;
        match result {
            ActionResult::Ok { travel } => {
                self.log(ctx, format!("{tick}\tEXEC\t{name}\tOK\t{travel:.4}"));
                Ok(NodeStatus::Success)
            }
            ActionResult::Failed(c) => {
                self.log(ctx, format!("{tick}\tEXEC\t{name}\tFAILED\t{c}"));
                self.fail(ctx, c, i)
            }
        }
    }

    fn adjust(&mut self, ctx: &mut TickContext) -> Result<NodeStatus, CsubbtError> {
        let Some(record) = self.state.last_failure.take() else {
            return Ok(NodeStatus::Running);
        };
        let (c, t) = (record.constraint, record.action_index);
        if self.state.config.logistic.contains(&c) {
            let budget = self.state.config.logistic_budget;
            let streak = self.state.streaks.entry((c.clone(), t)).or_insert(0);
            if *streak < budget {
                if t == 0 {
                    self.state.terminal = true;
                    return Ok(NodeStatus::Failure);
                }
                // the PPA conditions re-run whatever is no longer satisfied
                *streak += 1;
                self.log(ctx, logistic_line(ctx.tick_index, &c, t));
                return Ok(NodeStatus::Running);
            }
            *streak = 0;
        }
        let current = parameters(ctx, self.world);
        let tick = ctx.tick_index;
        let mut lines = Vec::new();
        let found = resample(
            &mut self.state.samplers,
            &self.state.config,
            &c,
            &current,
            self.world,
            &mut |phase, name, out| lines.push(sample_line(tick, name, phase, out)),
        )?;
        for l in lines {
            self.log(ctx, l);
        }
        match found {
            Some(updates) => {
                for (k, v) in updates {
                    ctx.blackboard.write(k, v);
                }
                self.state.resamples += 1;
                self.state.streaks.clear();
                Ok(NodeStatus::Running)
            }
            None => {
                self.log(ctx, format!("{tick}\tEXHAUSTED\t{c}\t{t}"));
                self.state.terminal = true;
                Ok(NodeStatus::Failure)
            }
        }
    }
}
