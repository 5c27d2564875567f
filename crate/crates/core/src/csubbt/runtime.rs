use super::trace::{failure_line, logistic_line, sample_line, status_line};
use super::{CSubBT, CsubbtError, FAILURE_KEY, STATUS_KEY};
use crate::bt::{tick_root, BtError, BtNode, LeafHandler, NodeKind, NodeStatus, TickContext, Value};
use crate::constraint::{Binding, ParamRole};
use crate::domain::{param, ArmPose, ConstraintName, FailureRecord};
use crate::geom::{Pose2, Vec2};
use crate::sim::{
    evaluate_constraint, exec_approach, exec_grasp, exec_move, exec_pre_approach, get, with_state,
    ActionResult, SimError, World,
};
use crate::samplers::ConditionalSampler;
use std::collections::BTreeSet;

/// Custom executor for an atomic action, given the full parameter binding.
pub type Executor = Box<dyn FnMut(&mut World, &Binding) -> Result<ActionResult, SimError> + Send>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Continue,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    /// Every registered sampler for the conflicted constraint is exhausted.
    SamplerExhausted,
    /// The root-tick budget ran out.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: NodeStatus,
    pub terminal: Option<Terminal>,
    pub root_ticks: u64,
}

/// Everything but the root node, so the root can be ticked while leaves
/// mutate the rest.
struct Handler<'a> {
    core: &'a mut super::Core,
    world: &'a mut World,
}

impl LeafHandler for Handler<'_> {
    fn tick_leaf(&mut self, node: &BtNode, _path: &str, ctx: &mut TickContext) -> Result<NodeStatus, BtError> {
        let result = match &node.kind {
            NodeKind::CsNode { .. } => csnode_tick(self.core, ctx, self.world),
            NodeKind::CaNode { atomic } => match self.core.canode_index.get(atomic).copied() {
                Some(i) => canode_tick(self.core, ctx, self.world, i),
                None => Err(CsubbtError::Tree(format!("unknown atomic action `{atomic}`"))),
            },
            other => Err(CsubbtError::Tree(format!(
                "{} leaf `{}` inside a CSubBT",
                other.label(),
                node.name
            ))),
        };
        result.map_err(|e| {
            let message = e.to_string();
            self.core.error = Some(e);
            BtError::Leaf {
                node: node.name.clone(),
                message,
            }
        })
    }
}

fn log(core: &mut super::Core, ctx: &TickContext, line: String) {
    core.events.push((ctx.tick_index, line));
}

fn table(ctx: &TickContext) -> Result<Vec<bool>, CsubbtError> {
    Ok(ctx.blackboard.get::<Vec<bool>>(STATUS_KEY)?.unwrap_or_default())
}

fn write_table(core: &mut super::Core, ctx: &mut TickContext, bits: Vec<bool>) -> Result<(), CsubbtError> {
    if table(ctx)? != bits {
        log(core, ctx, status_line(ctx.tick_index, &bits));
        ctx.blackboard.write(STATUS_KEY, Value::Bools(bits));
    }
    Ok(())
}

/// Resets the given bits; every reset counts, set or not.
fn clear_bits(
    core: &mut super::Core,
    ctx: &mut TickContext,
    indices: impl IntoIterator<Item = usize>,
) -> Result<(), CsubbtError> {
    let mut bits = table(ctx)?;
    for i in indices {
        bits[i] = false;
        core.stats.cleared[i] += 1;
    }
    write_table(core, ctx, bits)
}

fn parameters(ctx: &TickContext, world: &World) -> Binding {
    let b: Binding = ctx
        .blackboard
        .iter()
        .filter(|(k, _)| !k.starts_with("__"))
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    with_state(&b, world)
}

fn canode_tick(
    core: &mut super::Core,
    ctx: &mut TickContext,
    world: &mut World,
    i: usize,
) -> Result<NodeStatus, CsubbtError> {
    let mut bits = table(ctx)?;
    if bits.get(i).copied().unwrap_or(false) {
        return Ok(NodeStatus::Success);
    }
    let binding = parameters(ctx, world);
    let atomic = core.action.atomic_actions[i].clone();
    let executor = core.executors.get_mut(&atomic.executor_id);
    let result = match attempt(&core.action, &core.network, i, &binding, world, executor)? {
        Attempt::Violated(c) => return fail(core, ctx, c, i),
        Attempt::Ran(r) => r,
    };
    core.stats.executions[i] += 1;
    let line = match &result {
        ActionResult::Ok { travel } => format!("{}\tEXEC\t{}\tOK\t{travel:.4}", ctx.tick_index, atomic.name),
        ActionResult::Failed(c) => format!("{}\tEXEC\t{}\tFAILED\t{c}", ctx.tick_index, atomic.name),
    };
    log(core, ctx, line);
    match result {
        ActionResult::Ok { .. } => {
            bits[i] = true;
            write_table(core, ctx, bits)?;
            ctx.blackboard.remove(FAILURE_KEY);
            Ok(NodeStatus::Success)
        }
        ActionResult::Failed(c) => fail(core, ctx, c, i),
    }
}

fn fail(
    core: &mut super::Core,
    ctx: &mut TickContext,
    constraint: ConstraintName,
    action_index: usize,
) -> Result<NodeStatus, CsubbtError> {
    log(core, ctx, failure_line(ctx.tick_index, &constraint, action_index));
    ctx.blackboard.write(
        FAILURE_KEY,
        Value::Failure(FailureRecord {
            constraint,
            action_index,
        }),
    );
    Ok(NodeStatus::Failure)
}

pub(crate) enum Attempt {
    /// A precondition did not hold; nothing was executed.
    Violated(ConstraintName),
    Ran(ActionResult),
}

/// Checks the precondition clause of atomic action `i` against `binding`,
/// then runs its executor. A constraint whose free parameter is unbound
/// counts as violated; any other unbound parameter is an error.
pub(crate) fn attempt(
    action: &crate::constraint::FactorableAction,
    network: &crate::constraint::ConstraintNetwork,
    i: usize,
    binding: &Binding,
    world: &mut World,
    executor: Option<&mut Executor>,
) -> Result<Attempt, CsubbtError> {
    for c in &action.clauses[i].constraints {
        if let Some(p) = c.scope.iter().find(|p| !binding.contains_key(*p)) {
            if network.parameters.get(p) == Some(&ParamRole::Free) {
                return Ok(Attempt::Violated(c.name.clone()));
            }
            return Err(SimError::IncompleteBinding(p.clone()).into());
        }
        if !evaluate_constraint(&c.name, binding, world)? {
            return Ok(Attempt::Violated(c.name.clone()));
        }
    }
    let id = &action.atomic_actions[i].executor_id;
    let result = match executor {
        Some(exec) => exec(world, binding)?,
        None => execute(id, binding, world)?,
    };
    Ok(Attempt::Ran(result))
}

/// Built-in executors of the Move-and-Pick atomic actions.
fn execute(id: &str, b: &Binding, world: &mut World) -> Result<ActionResult, SimError> {
    match id {
        "Move" => {
            let path: Vec<Vec2> = get(b, param::U_T_B)?;
            let goal: Pose2 = get(b, param::X_Q_B)?;
            // a path sampled from an earlier base position is stale
            if path.first().is_none_or(|p| p.dist(world.base.position()) > 1e-6) {
                return Ok(ActionResult::Failed(ConstraintName::PathValid));
            }
            exec_move(world, &path, goal.heading_deg)
        }
        "Pre-approach" => {
            let goal: ArmPose = get(b, param::X_Q_A)?;
            let traj: Vec<Vec2> = get(b, param::U_T_A)?;
            let target: String = get(b, param::TARGET)?;
            exec_pre_approach(world, goal, &traj, &target)
        }
        "Approach" => exec_approach(world, &get::<String>(b, param::TARGET)?),
        "Grasp" => exec_grasp(world, &get::<String>(b, param::TARGET)?),
        other => Err(SimError::UnknownExecutor(other.to_string())),
    }
}

fn csnode_tick(core: &mut super::Core, ctx: &mut TickContext, world: &mut World) -> Result<NodeStatus, CsubbtError> {
    if core.terminal {
        return Ok(NodeStatus::Failure);
    }
    let Some(record) = ctx.blackboard.get::<FailureRecord>(FAILURE_KEY)? else {
        return Ok(NodeStatus::Success);
    };
    match update_parameters(core, ctx, world, &record)? {
        UpdateOutcome::Continue => {
            ctx.blackboard.remove(FAILURE_KEY);
            Ok(NodeStatus::Success)
        }
        UpdateOutcome::Failure => {
            core.terminal = true;
            Ok(NodeStatus::Failure)
        }
    }
}

/// Repairs the parameters after `record`'s failure.
///
/// Logistic constraints re-run the predecessor (clear bits t−1 and t) with
/// no sampler call, up to the retry budget; past it, and for every other
/// constraint, the registered samplers are tried in order and the first
/// emission is written back. Bits of `t` and of every CANode reading an
/// updated parameter are cleared.
fn update_parameters(
    core: &mut super::Core,
    ctx: &mut TickContext,
    world: &mut World,
    record: &FailureRecord,
) -> Result<UpdateOutcome, CsubbtError> {
    let c = record.constraint.clone();
    let t = record.action_index;
    if core.config.logistic.contains(&c) {
        let streak = core.streaks.entry((c.clone(), t)).or_insert(0);
        if *streak < core.config.logistic_budget {
            if t == 0 {
                return Ok(UpdateOutcome::Failure);
            }
            *streak += 1;
            core.stats.logistic_retries += 1;
            log(core, ctx, logistic_line(ctx.tick_index, &c, t));
            clear_bits(core, ctx, [t - 1, t])?;
            return Ok(UpdateOutcome::Continue);
        }
        *streak = 0;
    }

    let current = parameters(ctx, world);
    let tick = ctx.tick_index;
    let mut lines = Vec::new();
    let found = resample(
        &mut core.samplers,
        &core.config,
        &c,
        &current,
        world,
        &mut |phase, name, out| lines.push(sample_line(tick, name, phase, out)),
    )?;
    for l in lines {
        log(core, ctx, l);
    }
    let Some(updates) = found else {
        log(core, ctx, format!("{tick}\tEXHAUSTED\t{c}\t{t}"));
        return Ok(UpdateOutcome::Failure);
    };
    for (k, v) in &updates {
        ctx.blackboard.write(k.clone(), v.clone());
    }
    core.stats.resamples += 1;
    core.streaks.clear();
    let stale: BTreeSet<usize> = core
        .action
        .atomic_actions
        .iter()
        .enumerate()
        .filter(|(_, a)| a.reads.iter().any(|p| updates.contains_key(p)))
        .map(|(i, _)| i)
        .chain([t])
        .collect();
    clear_bits(core, ctx, stale)?;
    Ok(UpdateOutcome::Continue)
}

/// The sampler path: tries the samplers registered for `c` in order and
/// returns the first emission, completed by later primary samplers whose
/// inputs it touched and whose outputs `current` lacks. `None` when every
/// registered sampler is exhausted. `emit(phase, sampler, values)` sees
/// every emission, including ones later dropped.
pub(crate) fn resample(
    samplers: &mut [ConditionalSampler],
    config: &super::CsubbtConfig,
    c: &ConstraintName,
    current: &Binding,
    world: &World,
    emit: &mut dyn FnMut(&str, &str, &Binding),
) -> Result<Option<Binding>, CsubbtError> {
    let index = |samplers: &[ConditionalSampler], name: &str| {
        samplers
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| CsubbtError::UnknownSampler(name.to_string()))
    };
    for name in config.registered(c).to_vec() {
        let si = index(samplers, &name)?;
        let primary_pos = config.primary.iter().position(|p| *p == name);
        'emissions: while let Some(out) = samplers[si].next(current, world)? {
            emit("resample", &name, &out);
            let mut merged = current.clone();
            merged.extend(out.clone());
            let mut updates = out;
            if let Some(pos) = primary_pos {
                for later in &config.primary[pos + 1..] {
                    let sj = index(samplers, later)?;
                    let s = &samplers[sj];
                    let touched = s.inputs.iter().any(|p| updates.contains_key(p));
                    let unbound = s.outputs.iter().any(|o| !current.contains_key(o));
                    if !(touched && unbound) {
                        continue;
                    }
                    let Some(o2) = samplers[sj].next(&merged, world)? else {
                        continue 'emissions;
                    };
                    emit("fill", later, &o2);
                    merged.extend(o2.clone());
                    updates.extend(o2);
                }
            }
            return Ok(Some(updates));
        }
    }
    Ok(None)
}

/// Initial emissions of the first `n` samplers: the first joint binding,
/// or, when there is none, one call per sampler whose inputs are bound.
pub(crate) fn seed_emissions(
    samplers: &mut [ConditionalSampler],
    n: usize,
    start: &Binding,
    world: &World,
) -> Result<Vec<(String, Binding)>, CsubbtError> {
    let mut emissions = Vec::new();
    if n == 0 {
        return Ok(emissions);
    }
    let joint = crate::samplers::enumerate_joint(&mut samplers[..n], start, world, 1)?;
    if let Some(b) = joint.into_iter().next() {
        for s in &samplers[..n] {
            let out: Binding = s
                .outputs
                .iter()
                .filter_map(|o| b.get(o).map(|v| (o.clone(), v.clone())))
                .collect();
            emissions.push((s.name.clone(), out));
        }
        return Ok(emissions);
    }
    let mut b = start.clone();
    for s in &mut samplers[..n] {
        if s.inputs.iter().any(|p| !b.contains_key(p)) {
            continue;
        }
        if let Some(out) = s.next(&b, world)? {
            b.extend(out.clone());
            emissions.push((s.name.clone(), out));
        }
    }
    Ok(emissions)
}

impl CSubBT {
    /// Runs one parameter update for `record` outside the tick loop.
    pub fn update_parameters(
        &mut self,
        record: &FailureRecord,
        world: &mut World,
    ) -> Result<UpdateOutcome, CsubbtError> {
        update_parameters(&mut self.core, &mut self.ctx, world, record)
    }

    /// Ticks one CANode outside the tick loop.
    pub fn tick_canode(&mut self, index: usize, world: &mut World) -> Result<NodeStatus, CsubbtError> {
        canode_tick(&mut self.core, &mut self.ctx, world, index)
    }

    /// One root tick.
    pub fn tick(&mut self, world: &mut World) -> Result<NodeStatus, CsubbtError> {
        let mut handler = Handler {
            core: &mut self.core,
            world,
        };
        let r = tick_root(&mut self.root, &mut self.ctx, &mut handler);
        match r {
            Ok(s) => Ok(s),
            Err(e) => Err(self.core.error.take().unwrap_or(CsubbtError::Bt(e))),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.core.terminal
    }
}

/// Ticks until Success, sampler exhaustion, or `max_root_ticks`.
pub fn run_csubbt(tree: &mut CSubBT, world: &mut World, max_root_ticks: u64) -> Result<RunOutcome, CsubbtError> {
    run_csubbt_observed(tree, world, max_root_ticks, &mut |_, _| Ok(()))
}

/// [`run_csubbt`] with `observe` called after every root tick.
pub fn run_csubbt_observed(
    tree: &mut CSubBT,
    world: &mut World,
    max_root_ticks: u64,
    observe: &mut dyn FnMut(&mut CSubBT, &World) -> Result<(), CsubbtError>,
) -> Result<RunOutcome, CsubbtError> {
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
        let status = tree.tick(world)?;
        observe(tree, world)?;
        if status == NodeStatus::Success {
            break RunOutcome {
                status,
                terminal: None,
                root_ticks: ticks,
            };
        }
        if tree.is_terminal() {
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
    let line = format!("{}\tRESULT\t{}\t{reason}", tree.ctx.tick_index, outcome.status);
    tree.log(line);
    Ok(outcome)
}
