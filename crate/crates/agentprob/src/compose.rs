//! Executable topologies: agent chains, control-flow graphs, parallel
//! branch/recombine, and hierarchical delegation with context emissions.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::dist::Distribution;
use crate::error::{Error, Result, Violation};
use crate::ids::{ActionId, ClassId, ContextId, ParamId};
use crate::kernel::{Kernel, StepOption};
use crate::model::{
    apply_update, build_initial_state, ActionSpace, ContextAlphabet, InitBuilder, Segment, State,
    ThoughtAlphabet, ThoughtSlot, UpdateFn,
};

/// Cap on the number of distinct run outcomes validation will enumerate per
/// component before giving up with a violation.
const VALIDATION_RUN_CAP: usize = 200_000;

// ---------------------------------------------------------------------------
// Agents
// ---------------------------------------------------------------------------

/// A single agent: kernel + update function + initial-state builder, bounded
/// by a step horizon over one action space.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub name: String,
    pub kernel: Arc<Kernel>,
    pub update: UpdateFn,
    pub init: InitBuilder,
    /// Chosen values for the template parameters declared by `init`.
    pub bindings: BTreeMap<ParamId, String>,
    pub horizon: usize,
    pub space: Arc<ActionSpace>,
}

impl AgentSpec {
    /// The state this agent starts from under `context`. Concat agents
    /// instantiate their template; summary agents start from the declared
    /// initial summary for the context; selective agents start with empty
    /// memory.
    pub fn initial_state(&self, contexts: &ContextAlphabet, context: &ContextId) -> Result<State> {
        if !contexts.contains(context) {
            return Err(Error::UnknownContext(context.to_string()));
        }
        match &self.update {
            UpdateFn::Concat => build_initial_state(&self.init, contexts, context, &self.bindings),
            UpdateFn::Summary { initial, .. } => initial
                .get(context)
                .cloned()
                .map(State::Summary)
                .ok_or_else(|| Error::MissingTransition {
                    what: "initial summary",
                    key: context.to_string(),
                }),
            UpdateFn::Selective { .. } => Ok(State::empty_memory()),
        }
    }
}

// ---------------------------------------------------------------------------
// Context emission
// ---------------------------------------------------------------------------

/// Canonical key for an action sequence: ids joined with commas.
pub fn seq_key(actions: &[ActionId]) -> String {
    actions
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// P(c|a): a table from the emitting component's action sequence to a
/// distribution over a declared context codomain. The row `*` is a
/// stationary fallback applying to every sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextEmission {
    contexts: Vec<ContextId>,
    rows: BTreeMap<String, Distribution<ContextId>>,
    stationary: Option<Distribution<ContextId>>,
}

impl ContextEmission {
    pub fn new(
        mut contexts: Vec<ContextId>,
        rows: BTreeMap<String, Distribution<ContextId>>,
        stationary: Option<Distribution<ContextId>>,
        path: &str,
    ) -> Result<Self> {
        contexts.sort();
        contexts.dedup();
        if contexts.is_empty() {
            return Err(Error::BadDistribution {
                path: path.to_string(),
                reason: "emission codomain is empty".into(),
            });
        }
        let check_row = |key: &str, d: &Distribution<ContextId>| -> Result<()> {
            if d.support() != contexts.as_slice() {
                return Err(Error::BadDistribution {
                    path: format!("{path}.{key}"),
                    reason: "row support must list every codomain context exactly once".into(),
                });
            }
            Ok(())
        };
        for (key, d) in &rows {
            check_row(key, d)?;
        }
        if let Some(d) = &stationary {
            check_row("*", d)?;
        }
        Ok(Self {
            contexts,
            rows,
            stationary,
        })
    }

    /// Degenerate emission: every sequence maps to `forced` with probability
    /// one, over the same codomain.
    pub fn forced(&self, forced: &ContextId) -> Result<Self> {
        if !self.contexts.contains(forced) {
            return Err(Error::UnknownContext(forced.to_string()));
        }
        let d = Distribution::new(
            self.contexts
                .iter()
                .map(|c| (c.clone(), if c == forced { 1.0 } else { 0.0 }))
                .collect(),
            "forced emission",
        )?;
        Ok(Self {
            contexts: self.contexts.clone(),
            rows: BTreeMap::new(),
            stationary: Some(d),
        })
    }

    /// The transferable context symbols at this boundary.
    pub fn codomain(&self) -> &[ContextId] {
        &self.contexts
    }

    pub fn lookup(&self, actions: &[ActionId]) -> Result<&Distribution<ContextId>> {
        let key = seq_key(actions);
        self.rows
            .get(&key)
            .or(self.stationary.as_ref())
            .ok_or(Error::EmissionGap { key })
    }

    pub fn covers(&self, actions: &[ActionId]) -> bool {
        self.stationary.is_some() || self.rows.contains_key(&seq_key(actions))
    }
}

// ---------------------------------------------------------------------------
// Topologies
// ---------------------------------------------------------------------------

/// How a parallel node merges its two branch final states before the tail
/// stage runs.
#[derive(Debug, Clone, PartialEq)]
pub enum Recombiner {
    /// Concatenate the two history transcripts, left then right.
    ConcatHistories,
    /// Explicit total map keyed by (left final key, right final key).
    Table(BTreeMap<(String, String), State>),
}

impl Recombiner {
    pub fn merge(&self, left: &State, right: &State) -> Result<State> {
        match self {
            Recombiner::ConcatHistories => match (left, right) {
                (State::History(a), State::History(b)) => {
                    let mut merged = a.clone();
                    merged.extend(b.iter().cloned());
                    Ok(State::History(merged))
                }
                _ => Err(Error::RecombinerGap {
                    left: left.key(),
                    right: right.key(),
                }),
            },
            Recombiner::Table(map) => {
                map.get(&(left.key(), right.key()))
                    .cloned()
                    .ok_or_else(|| Error::RecombinerGap {
                        left: left.key(),
                        right: right.key(),
                    })
            }
        }
    }
}

/// One node of a control-flow graph: a kernel filtered to an allowed action
/// set, with optional prompt/update overrides applied while the walk is at
/// this node.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNode {
    pub kernel: Arc<Kernel>,
    pub allowed: BTreeSet<ActionId>,
    pub init: Option<InitBuilder>,
    pub update: Option<UpdateFn>,
}

/// A control-flow graph over a base agent. Edges are keyed by the class of
/// the action just taken; the base agent supplies the horizon, the default
/// update, and the initial prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlFlowGraph {
    pub base: AgentSpec,
    pub nodes: Vec<FlowNode>,
    pub edges: BTreeMap<(usize, ClassId), usize>,
    pub start: usize,
}

/// A composition tree of agents.
#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    Chain(AgentSpec),
    ControlFlow(ControlFlowGraph),
    Parallel(ParallelNode),
    Hierarchical(Box<HierarchicalNode>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelNode {
    pub left: Box<Topology>,
    pub right: Box<Topology>,
    pub recombiner: Recombiner,
    pub tail: Option<Box<Topology>>,
}

/// The delegation pattern: an outer agent acts, hands a context to an inner
/// topology, which hands a context back to a resume agent.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalNode {
    pub outer: AgentSpec,
    pub emission_out: ContextEmission,
    pub inner: Box<Topology>,
    pub emission_back: ContextEmission,
    pub resume: AgentSpec,
    /// When set, the resume agent starts from the outer agent's final state
    /// with the returned context appended, instead of a fresh prompt.
    pub resume_carries_history: bool,
}

fn overlap_violation(
    path: &str,
    a: &BTreeSet<ActionId>,
    b: &BTreeSet<ActionId>,
) -> Option<Violation> {
    let shared: Vec<String> = a.intersection(b).map(|x| x.to_string()).collect();
    if shared.is_empty() {
        None
    } else {
        Some(Violation::new(
            path,
            format!("partition overlap: {{{}}}", shared.join(", ")),
        ))
    }
}

impl Topology {
    /// The set of action ids this topology can emit.
    pub fn partition(&self) -> BTreeSet<ActionId> {
        match self {
            Topology::Chain(agent) => agent.kernel.action_support(),
            Topology::ControlFlow(cf) => {
                let mut out = BTreeSet::new();
                for node in &cf.nodes {
                    out.extend(
                        node.kernel
                            .action_support()
                            .intersection(&node.allowed)
                            .cloned(),
                    );
                }
                out
            }
            Topology::Parallel(p) => {
                let mut out = p.left.partition();
                out.extend(p.right.partition());
                if let Some(tail) = &p.tail {
                    out.extend(tail.partition());
                }
                out
            }
            Topology::Hierarchical(h) => {
                let mut out = h.outer.kernel.action_support();
                out.extend(h.inner.partition());
                out.extend(h.resume.kernel.action_support());
                out
            }
        }
    }

    /// Maximum hierarchical nesting depth.
    pub fn depth(&self) -> usize {
        match self {
            Topology::Chain(_) | Topology::ControlFlow(_) => 0,
            Topology::Parallel(p) => {
                let tail = p.tail.as_ref().map_or(0, |t| t.depth());
                p.left.depth().max(p.right.depth()).max(tail)
            }
            Topology::Hierarchical(h) => 1 + h.inner.depth(),
        }
    }
}

/// Build a hierarchical topology, rejecting overlapping action partitions.
pub fn compose_hierarchical(
    outer: AgentSpec,
    emission_out: ContextEmission,
    inner: Topology,
    emission_back: ContextEmission,
    resume: AgentSpec,
    resume_carries_history: bool,
) -> Result<Topology> {
    let node = HierarchicalNode {
        outer,
        emission_out,
        inner: Box::new(inner),
        emission_back,
        resume,
        resume_carries_history,
    };
    let mut violations = Vec::new();
    let outer_p = node.outer.kernel.action_support();
    let inner_p = node.inner.partition();
    let resume_p = node.resume.kernel.action_support();
    for (pth, a, b) in [
        ("hierarchical.outer/inner", &outer_p, &inner_p),
        ("hierarchical.inner/resume", &inner_p, &resume_p),
        ("hierarchical.outer/resume", &outer_p, &resume_p),
    ] {
        if let Some(v) = overlap_violation(pth, a, b) {
            violations.push(v);
        }
    }
    if violations.is_empty() {
        Ok(Topology::Hierarchical(Box::new(node)))
    } else {
        Err(Error::Invalid(violations))
    }
}

/// Build a parallel topology, rejecting overlapping branch partitions.
pub fn compose_parallel(
    left: Topology,
    right: Topology,
    recombiner: Recombiner,
    tail: Option<Topology>,
) -> Result<Topology> {
    if let Some(v) = overlap_violation("parallel", &left.partition(), &right.partition()) {
        return Err(Error::Invalid(vec![v]));
    }
    Ok(Topology::Parallel(ParallelNode {
        left: Box::new(left),
        right: Box::new(right),
        recombiner,
        tail: tail.map(Box::new),
    }))
}

// ---------------------------------------------------------------------------
// Goal queries
// ---------------------------------------------------------------------------

/// The target action sequence, shaped like the topology it queries.
#[derive(Debug, Clone, PartialEq)]
pub enum GoalSpec {
    Seq(Vec<ActionId>),
    Parallel {
        left: Box<GoalSpec>,
        right: Box<GoalSpec>,
        tail: Option<Box<GoalSpec>>,
    },
    Hierarchical {
        outer: Vec<ActionId>,
        inner: Box<GoalSpec>,
        resume: Vec<ActionId>,
    },
}

impl GoalSpec {
    pub fn flatten(&self) -> Vec<ActionId> {
        match self {
            GoalSpec::Seq(v) => v.clone(),
            GoalSpec::Parallel { left, right, tail } => {
                let mut out = left.flatten();
                out.extend(right.flatten());
                if let Some(t) = tail {
                    out.extend(t.flatten());
                }
                out
            }
            GoalSpec::Hierarchical {
                outer,
                inner,
                resume,
            } => {
                let mut out = outer.clone();
                out.extend(inner.flatten());
                out.extend(resume.iter().cloned());
                out
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            GoalSpec::Seq(v) => v.len(),
            GoalSpec::Parallel { left, right, tail } => {
                left.len() + right.len() + tail.as_ref().map_or(0, |t| t.len())
            }
            GoalSpec::Hierarchical {
                outer,
                inner,
                resume,
            } => outer.len() + inner.len() + resume.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// An empty goal of the same shape.
    fn empty_like(&self) -> GoalSpec {
        match self {
            GoalSpec::Seq(_) => GoalSpec::Seq(Vec::new()),
            GoalSpec::Parallel { left, right, .. } => GoalSpec::Parallel {
                left: Box::new(left.empty_like()),
                right: Box::new(right.empty_like()),
                tail: None,
            },
            GoalSpec::Hierarchical { inner, .. } => GoalSpec::Hierarchical {
                outer: Vec::new(),
                inner: Box::new(inner.empty_like()),
                resume: Vec::new(),
            },
        }
    }

    /// Keep only the first `k` goal actions in execution order (left-to-right
    /// through stages); later stages become unconstrained.
    pub fn truncated(&self, k: usize) -> GoalSpec {
        match self {
            GoalSpec::Seq(v) => GoalSpec::Seq(v[..k.min(v.len())].to_vec()),
            GoalSpec::Parallel { left, right, tail } => {
                let nl = left.len();
                let nr = right.len();
                if k <= nl {
                    GoalSpec::Parallel {
                        left: Box::new(left.truncated(k)),
                        right: Box::new(right.empty_like()),
                        tail: None,
                    }
                } else if k <= nl + nr {
                    GoalSpec::Parallel {
                        left: left.clone(),
                        right: Box::new(right.truncated(k - nl)),
                        tail: None,
                    }
                } else {
                    GoalSpec::Parallel {
                        left: left.clone(),
                        right: right.clone(),
                        tail: tail.as_ref().map(|t| Box::new(t.truncated(k - nl - nr))),
                    }
                }
            }
            GoalSpec::Hierarchical {
                outer,
                inner,
                resume,
            } => {
                let no = outer.len();
                let ni = inner.len();
                if k <= no {
                    GoalSpec::Hierarchical {
                        outer: outer[..k].to_vec(),
                        inner: Box::new(inner.empty_like()),
                        resume: Vec::new(),
                    }
                } else if k <= no + ni {
                    GoalSpec::Hierarchical {
                        outer: outer.clone(),
                        inner: Box::new(inner.truncated(k - no)),
                        resume: Vec::new(),
                    }
                } else {
                    GoalSpec::Hierarchical {
                        outer: outer.clone(),
                        inner: inner.clone(),
                        resume: resume[..(k - no - ni).min(resume.len())].to_vec(),
                    }
                }
            }
        }
    }
}

/// A goal sequence plus the input context it is conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalQuery {
    pub goal: GoalSpec,
    pub context: ContextId,
}

// ---------------------------------------------------------------------------
// A validated system: alphabets + topology
// ---------------------------------------------------------------------------

/// The full executable object: global alphabets and the topology they
/// govern. Immutable after validation; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub thoughts: ThoughtAlphabet,
    pub contexts: ContextAlphabet,
    pub topology: Topology,
}

// ---------------------------------------------------------------------------
// Chain execution view
// ---------------------------------------------------------------------------

/// Uniform step interface over plain chains and control-flow graphs, used by
/// the enumerator, the sampler, and validation.
#[derive(Clone, Copy)]
pub(crate) enum ChainView<'a> {
    Plain(&'a AgentSpec),
    Flow(&'a ControlFlowGraph),
}

impl<'a> ChainView<'a> {
    pub(crate) fn horizon(&self) -> usize {
        match self {
            ChainView::Plain(a) => a.horizon,
            ChainView::Flow(cf) => cf.base.horizon,
        }
    }

    pub(crate) fn space(&self) -> &ActionSpace {
        match self {
            ChainView::Plain(a) => &a.space,
            ChainView::Flow(cf) => &cf.base.space,
        }
    }

    pub(crate) fn agent(&self) -> &AgentSpec {
        match self {
            ChainView::Plain(a) => a,
            ChainView::Flow(cf) => &cf.base,
        }
    }

    pub(crate) fn start_pos(&self) -> usize {
        match self {
            ChainView::Plain(_) => 0,
            ChainView::Flow(cf) => cf.start,
        }
    }

    /// Initial state for a run beginning at `context`, or from an injected
    /// state (parallel tails). Node prompt overrides win at the start node.
    pub(crate) fn start_state(
        &self,
        contexts: &ContextAlphabet,
        context: &ContextId,
        injected: Option<&State>,
    ) -> Result<State> {
        if let ChainView::Flow(cf) = self {
            if let Some(init) = &cf.nodes[cf.start].init {
                return build_initial_state(init, contexts, context, &cf.base.bindings);
            }
        }
        match injected {
            Some(s) => Ok(s.clone()),
            None => self.agent().initial_state(contexts, context),
        }
    }

    pub(crate) fn update_at(&self, pos: usize) -> &UpdateFn {
        match self {
            ChainView::Plain(a) => &a.update,
            ChainView::Flow(cf) => cf.nodes[pos].update.as_ref().unwrap_or(&cf.base.update),
        }
    }

    /// Joint (thought, action) options at `pos`/`state`, restricted and
    /// renormalized for control-flow nodes.
    pub(crate) fn step_options(&self, pos: usize, state: &State) -> Result<Vec<StepOption>> {
        match self {
            ChainView::Plain(a) => a.kernel.step_options(state),
            ChainView::Flow(cf) => {
                let node = &cf.nodes[pos];
                let base = node.kernel.step_options(state)?;
                let kept: Vec<StepOption> = base
                    .into_iter()
                    .filter(|o| node.allowed.contains(&o.action))
                    .collect();
                let z: f64 = kept.iter().map(|o| o.prob).sum();
                if z <= 0.0 {
                    let names: Vec<String> = node.allowed.iter().map(|a| a.to_string()).collect();
                    return Err(Error::DeadEnd {
                        allowed: format!("{{{}}}", names.join(", ")),
                        key: state.key(),
                    });
                }
                Ok(kept
                    .into_iter()
                    .map(|mut o| {
                        o.prob /= z;
                        o
                    })
                    .collect())
            }
        }
    }

    /// Evolve `state` by one accepted option and move to the successor node.
    /// Returns the next (pos, state) or an error if a non-terminal class has
    /// no outgoing edge.
    pub(crate) fn advance(
        &self,
        contexts: &ContextAlphabet,
        context: &ContextId,
        pos: usize,
        state: &State,
        option: &StepOption,
    ) -> Result<(usize, State)> {
        let action = self.space().action(&option.action)?;
        let updated = apply_update(
            self.update_at(pos),
            state,
            option.thought.as_ref(),
            &action.obs,
        )?;
        match self {
            ChainView::Plain(_) => Ok((0, updated)),
            ChainView::Flow(cf) => {
                if self.space().is_terminal(&action.class) {
                    return Ok((pos, updated));
                }
                let next = *cf.edges.get(&(pos, action.class.clone())).ok_or_else(|| {
                    Error::MissingTransition {
                        what: "control-flow edge",
                        key: format!("node {pos}, class {}", action.class),
                    }
                })?;
                let state = match &cf.nodes[next].init {
                    Some(init) => build_initial_state(init, contexts, context, &cf.base.bindings)?,
                    None => updated,
                };
                Ok((next, state))
            }
        }
    }
}

pub(crate) fn chain_view(t: &Topology) -> Option<ChainView<'_>> {
    match t {
        Topology::Chain(a) => Some(ChainView::Plain(a)),
        Topology::ControlFlow(cf) => Some(ChainView::Flow(cf)),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Exhaustive run enumeration (validation)
// ---------------------------------------------------------------------------

/// One complete run of a component: the flattened action sequence, the
/// final state, and the probability mass of all latent paths ending there.
#[derive(Debug, Clone)]
pub(crate) struct RunOutcome {
    pub actions: Vec<ActionId>,
    pub final_state: State,
    pub prob: f64,
}

pub(crate) enum StartRef<'a> {
    Context(&'a ContextId),
    Injected(&'a State),
}

/// Enumerate every positive-probability complete run of `t` (to horizon or
/// terminal action), merging runs that share both action sequence and final
/// state. Used by validation; errors surface coverage gaps.
pub(crate) fn enumerate_runs(
    t: &Topology,
    contexts: &ContextAlphabet,
    start: StartRef<'_>,
    query_context: &ContextId,
) -> Result<Vec<RunOutcome>> {
    let mut acc: BTreeMap<(Vec<ActionId>, State), f64> = BTreeMap::new();
    match t {
        Topology::Chain(_) | Topology::ControlFlow(_) => {
            let view = chain_view(t).expect("chain-like");
            let (ctx, injected) = match start {
                StartRef::Context(c) => (c, None),
                StartRef::Injected(s) => (query_context, Some(s)),
            };
            let state = view.start_state(contexts, ctx, injected)?;
            walk_chain(
                &view,
                contexts,
                ctx,
                view.start_pos(),
                state,
                Vec::new(),
                1.0,
                &mut acc,
            )?;
        }
        Topology::Parallel(p) => {
            let left = enumerate_runs(
                &p.left,
                contexts,
                reborrow(&start, query_context),
                query_context,
            )?;
            let right = enumerate_runs(
                &p.right,
                contexts,
                reborrow(&start, query_context),
                query_context,
            )?;
            for l in &left {
                for r in &right {
                    let merged = p.recombiner.merge(&l.final_state, &r.final_state)?;
                    let mut actions = l.actions.clone();
                    actions.extend(r.actions.iter().cloned());
                    let prob = l.prob * r.prob;
                    match &p.tail {
                        None => insert_run(&mut acc, actions, merged, prob),
                        Some(tail) => {
                            let tails = enumerate_runs(
                                tail,
                                contexts,
                                StartRef::Injected(&merged),
                                query_context,
                            )?;
                            for trun in tails {
                                let mut a = actions.clone();
                                a.extend(trun.actions.iter().cloned());
                                insert_run(&mut acc, a, trun.final_state, prob * trun.prob);
                            }
                        }
                    }
                }
            }
        }
        Topology::Hierarchical(h) => {
            let outer_runs = enumerate_runs(
                &Topology::Chain(h.outer.clone()),
                contexts,
                reborrow(&start, query_context),
                query_context,
            )?;
            for orun in &outer_runs {
                let e_out = h.emission_out.lookup(&orun.actions)?;
                for (c_l, p_l) in e_out.iter() {
                    if p_l <= 0.0 {
                        continue;
                    }
                    let inner_runs =
                        enumerate_runs(&h.inner, contexts, StartRef::Context(c_l), query_context)?;
                    for irun in &inner_runs {
                        let e_back = h.emission_back.lookup(&irun.actions)?;
                        for (c_k, p_k) in e_back.iter() {
                            if p_k <= 0.0 {
                                continue;
                            }
                            let resume_runs = if h.resume_carries_history {
                                let injected = carry_state(&orun.final_state, c_k)?;
                                enumerate_runs(
                                    &Topology::Chain(h.resume.clone()),
                                    contexts,
                                    StartRef::Injected(&injected),
                                    query_context,
                                )?
                            } else {
                                enumerate_runs(
                                    &Topology::Chain(h.resume.clone()),
                                    contexts,
                                    StartRef::Context(c_k),
                                    query_context,
                                )?
                            };
                            for rrun in resume_runs {
                                let mut a = orun.actions.clone();
                                a.extend(irun.actions.iter().cloned());
                                a.extend(rrun.actions.iter().cloned());
                                insert_run(
                                    &mut acc,
                                    a,
                                    rrun.final_state,
                                    orun.prob * p_l * irun.prob * p_k * rrun.prob,
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    if acc.len() > VALIDATION_RUN_CAP {
        return Err(Error::BudgetExceeded {
            terms: acc.len() as u128,
            budget: VALIDATION_RUN_CAP as u64,
        });
    }
    Ok(acc
        .into_iter()
        .map(|((actions, final_state), prob)| RunOutcome {
            actions,
            final_state,
            prob,
        })
        .collect())
}

fn reborrow<'a>(start: &StartRef<'a>, _query: &ContextId) -> StartRef<'a> {
    match start {
        StartRef::Context(c) => StartRef::Context(c),
        StartRef::Injected(s) => StartRef::Injected(s),
    }
}

/// Resume-agent start state when history carries over: the outer final
/// transcript with the returned context appended.
pub(crate) fn carry_state(outer_final: &State, c_k: &ContextId) -> Result<State> {
    match outer_final {
        State::History(segs) => {
            let mut segs = segs.clone();
            segs.push(Segment::Context(c_k.clone()));
            Ok(State::History(segs))
        }
        other => Err(Error::FormMismatch {
            update_kind: "carry-history resume",
            state_form: other.form(),
        }),
    }
}

fn insert_run(
    acc: &mut BTreeMap<(Vec<ActionId>, State), f64>,
    actions: Vec<ActionId>,
    final_state: State,
    prob: f64,
) {
    *acc.entry((actions, final_state)).or_insert(0.0) += prob;
}

#[allow(clippy::too_many_arguments)]
fn walk_chain(
    view: &ChainView<'_>,
    contexts: &ContextAlphabet,
    context: &ContextId,
    pos: usize,
    state: State,
    actions: Vec<ActionId>,
    prob: f64,
    acc: &mut BTreeMap<(Vec<ActionId>, State), f64>,
) -> Result<()> {
    if actions.len() == view.horizon() {
        insert_run(acc, actions, state, prob);
        return Ok(());
    }
    if acc.len() > VALIDATION_RUN_CAP {
        return Err(Error::BudgetExceeded {
            terms: acc.len() as u128,
            budget: VALIDATION_RUN_CAP as u64,
        });
    }
    for option in view.step_options(pos, &state)? {
        let (next_pos, next_state) = view.advance(contexts, context, pos, &state, &option)?;
        let mut next_actions = actions.clone();
        next_actions.push(option.action.clone());
        if view.space().is_terminal(&option.action.class) {
            insert_run(acc, next_actions, next_state, prob * option.prob);
        } else {
            walk_chain(
                view,
                contexts,
                context,
                next_pos,
                next_state,
                next_actions,
                prob * option.prob,
                acc,
            )?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Validate a topology against its alphabets and the goal query: partition
/// disjointness, control-flow edge totality, kernel totality over every
/// reachable state, emission and recombiner totality, update-map totality,
/// and goal shape/length rules. Empty report = valid.
pub fn validate_topology(system: &System, query: &GoalQuery) -> Vec<Violation> {
    let mut out = Vec::new();
    if !system.contexts.contains(&query.context) {
        out.push(Violation::new(
            "objective.context",
            format!("unknown context {}", query.context),
        ));
        return out;
    }
    let starts = vec![query.context.clone()];
    validate_component(
        system,
        &system.topology,
        &starts,
        None,
        Some(&query.goal),
        false,
        "topology",
        &mut out,
    );
    out
}

/// Stage-completeness: the goal pins the whole run (full horizon or an
/// explicit terminal action last).
fn seq_complete(space: &ActionSpace, goal: &[ActionId], horizon: usize) -> bool {
    goal.len() == horizon || goal.last().is_some_and(|a| space.is_terminal(&a.class))
}

#[allow(clippy::too_many_arguments)]
fn validate_component(
    system: &System,
    t: &Topology,
    start_contexts: &[ContextId],
    injected_starts: Option<&[State]>,
    goal: Option<&GoalSpec>,
    must_complete: bool,
    path: &str,
    out: &mut Vec<Violation>,
) {
    match t {
        Topology::Chain(agent) => {
            validate_agent(system, agent, start_contexts, &format!("{path}.agent"), out);
            if let Some(goal) = goal {
                validate_seq_goal(agent, goal, must_complete, path, out);
            }
            enumerate_for_coverage(system, t, start_contexts, injected_starts, path, out);
        }
        Topology::ControlFlow(cf) => {
            validate_agent(
                system,
                &cf.base,
                start_contexts,
                &format!("{path}.base"),
                out,
            );
            validate_flow_structure(cf, path, out);
            if let Some(goal) = goal {
                validate_seq_goal(&cf.base, goal, must_complete, path, out);
            }
            enumerate_for_coverage(system, t, start_contexts, injected_starts, path, out);
        }
        Topology::Parallel(p) => {
            if let Some(v) = overlap_violation(path, &p.left.partition(), &p.right.partition()) {
                out.push(v);
            }
            let (goal_left, goal_right, goal_tail) = match goal {
                Some(GoalSpec::Parallel { left, right, tail }) => {
                    if tail.is_some() && p.tail.is_none() {
                        out.push(Violation::new(
                            path,
                            "goal names a tail stage but the topology has none",
                        ));
                    }
                    if must_complete && p.tail.is_some() && tail.is_none() {
                        out.push(Violation::new(
                            path,
                            "goal must constrain the tail stage when a later stage is constrained",
                        ));
                    }
                    (Some(left.as_ref()), Some(right.as_ref()), tail.as_deref())
                }
                Some(_) => {
                    out.push(Violation::new(path, "goal shape must be parallel"));
                    (None, None, None)
                }
                None => (None, None, None),
            };
            let branches_complete = must_complete || goal_tail.is_some();
            validate_component(
                system,
                &p.left,
                start_contexts,
                injected_starts,
                goal_left,
                branches_complete,
                &format!("{path}.left"),
                out,
            );
            validate_component(
                system,
                &p.right,
                start_contexts,
                injected_starts,
                goal_right,
                branches_complete,
                &format!("{path}.right"),
                out,
            );
            if let Some(tail) = &p.tail {
                // Tail runs from merged finals; enumerate them.
                match merged_finals(system, p, start_contexts, injected_starts) {
                    Ok(merged) => {
                        validate_component(
                            system,
                            tail,
                            start_contexts,
                            Some(&merged),
                            goal_tail,
                            must_complete,
                            &format!("{path}.tail"),
                            out,
                        );
                    }
                    Err(e) => out.push(Violation::new(format!("{path}.recombiner"), e.to_string())),
                }
            }
        }
        Topology::Hierarchical(h) => {
            let outer_p = h.outer.kernel.action_support();
            let inner_p = h.inner.partition();
            let resume_p = h.resume.kernel.action_support();
            for (suffix, a, b) in [
                ("outer/inner", &outer_p, &inner_p),
                ("inner/resume", &inner_p, &resume_p),
                ("outer/resume", &outer_p, &resume_p),
            ] {
                if let Some(v) = overlap_violation(&format!("{path}.{suffix}"), a, b) {
                    out.push(v);
                }
            }
            let (goal_outer, goal_inner, goal_resume) = match goal {
                Some(GoalSpec::Hierarchical {
                    outer,
                    inner,
                    resume,
                }) => (
                    Some(outer.as_slice()),
                    Some(inner.as_ref()),
                    Some(resume.as_slice()),
                ),
                Some(_) => {
                    out.push(Violation::new(path, "goal shape must be hierarchical"));
                    (None, None, None)
                }
                None => (None, None, None),
            };
            let inner_nonempty = goal_inner.is_some_and(|g| !g.is_empty());
            let resume_nonempty = goal_resume.is_some_and(|g| !g.is_empty());

            validate_agent(
                system,
                &h.outer,
                start_contexts,
                &format!("{path}.outer"),
                out,
            );
            if let Some(g) = goal_outer {
                validate_seq_goal(
                    &h.outer,
                    &GoalSpec::Seq(g.to_vec()),
                    must_complete || inner_nonempty || resume_nonempty,
                    &format!("{path}.outer"),
                    out,
                );
            }

            // Outer runs and emission-out totality.
            let outer_chain = Topology::Chain(h.outer.clone());
            let mut outer_finals = Vec::new();
            for (runs, label) in start_runs(system, &outer_chain, start_contexts, injected_starts) {
                match runs {
                    Ok(runs) => {
                        for run in &runs {
                            if !h.emission_out.covers(&run.actions) {
                                out.push(Violation::new(
                                    format!("{path}.emission_out"),
                                    format!(
                                        "no row for action sequence {:?}",
                                        seq_key(&run.actions)
                                    ),
                                ));
                            }
                            outer_finals.push(run.final_state.clone());
                        }
                    }
                    Err(e) => out.push(Violation::new(
                        format!("{path}.outer ({label})"),
                        e.to_string(),
                    )),
                }
            }
            for c in h.emission_out.codomain() {
                if !system.contexts.contains(c) {
                    out.push(Violation::new(
                        format!("{path}.emission_out"),
                        format!("codomain context {c} not in the context alphabet"),
                    ));
                }
            }

            // Inner from every handoff context. The inward emission
            // conditions on the full inner sequence, so the inner goal must
            // be complete whenever the resume stage is constrained.
            let inner_starts: Vec<ContextId> = h.emission_out.codomain().to_vec();
            validate_component(
                system,
                &h.inner,
                &inner_starts,
                None,
                goal_inner,
                must_complete || resume_nonempty,
                &format!("{path}.inner"),
                out,
            );

            // Emission-back totality over inner sequences.
            for c_l in &inner_starts {
                match enumerate_runs(&h.inner, &system.contexts, StartRef::Context(c_l), c_l) {
                    Ok(runs) => {
                        for run in &runs {
                            if !h.emission_back.covers(&run.actions) {
                                out.push(Violation::new(
                                    format!("{path}.emission_back"),
                                    format!(
                                        "no row for action sequence {:?}",
                                        seq_key(&run.actions)
                                    ),
                                ));
                            }
                        }
                    }
                    Err(e) => out.push(Violation::new(format!("{path}.inner"), e.to_string())),
                }
            }
            for c in h.emission_back.codomain() {
                if !system.contexts.contains(c) {
                    out.push(Violation::new(
                        format!("{path}.emission_back"),
                        format!("codomain context {c} not in the context alphabet"),
                    ));
                }
            }

            // Resume from every returned context (or carried histories).
            let resume_contexts: Vec<ContextId> = h.emission_back.codomain().to_vec();
            let resume_chain = Topology::Chain(h.resume.clone());
            if h.resume_carries_history {
                let mut carried = Vec::new();
                for f in &outer_finals {
                    for c_k in &resume_contexts {
                        match carry_state(f, c_k) {
                            Ok(s) => carried.push(s),
                            Err(e) => {
                                out.push(Violation::new(format!("{path}.resume"), e.to_string()))
                            }
                        }
                    }
                }
                validate_component(
                    system,
                    &resume_chain,
                    start_contexts,
                    Some(&carried),
                    goal_resume.map(|g| GoalSpec::Seq(g.to_vec())).as_ref(),
                    must_complete,
                    &format!("{path}.resume"),
                    out,
                );
            } else {
                validate_component(
                    system,
                    &resume_chain,
                    &resume_contexts,
                    None,
                    goal_resume.map(|g| GoalSpec::Seq(g.to_vec())).as_ref(),
                    must_complete,
                    &format!("{path}.resume"),
                    out,
                );
            }
        }
    }
}

fn validate_seq_goal(
    agent: &AgentSpec,
    goal: &GoalSpec,
    must_complete: bool,
    path: &str,
    out: &mut Vec<Violation>,
) {
    let actions = match goal {
        GoalSpec::Seq(v) => v,
        _ => {
            out.push(Violation::new(path, "goal shape must be a plain sequence"));
            return;
        }
    };
    for a in actions {
        if !agent.space.contains_action(a) {
            out.push(Violation::new(
                format!("{path}.goal"),
                format!("action {a} is not in this partition's action space"),
            ));
        }
    }
    if actions.len() > agent.horizon {
        out.push(Violation::new(
            format!("{path}.goal"),
            format!(
                "goal length {} exceeds horizon {}",
                actions.len(),
                agent.horizon
            ),
        ));
    } else if must_complete
        && !actions.is_empty()
        && !seq_complete(&agent.space, actions, agent.horizon)
    {
        out.push(Violation::new(
            format!("{path}.goal"),
            format!(
                "stage goal must cover the full horizon {} (or end with a terminal action); got {} actions",
                agent.horizon,
                actions.len()
            ),
        ));
    } else if must_complete && actions.is_empty() && agent.horizon > 0 {
        out.push(Violation::new(
            format!("{path}.goal"),
            "stage goal must not be empty when a later stage is constrained",
        ));
    }
}

fn validate_agent(
    system: &System,
    agent: &AgentSpec,
    start_contexts: &[ContextId],
    path: &str,
    out: &mut Vec<Violation>,
) {
    if agent.horizon == 0 {
        out.push(Violation::new(path, "horizon must be at least 1"));
    }
    let slots: Vec<ThoughtSlot> = if agent.kernel.has_thoughts() {
        system
            .thoughts
            .members()
            .iter()
            .map(|t| ThoughtSlot::Thought(t.clone()))
            .collect()
    } else {
        vec![ThoughtSlot::None]
    };
    let observations: BTreeSet<_> = agent
        .space
        .action_ids()
        .iter()
        .map(|a| {
            agent
                .space
                .obs_of(&a.class, &a.arg)
                .expect("action space is internally consistent")
                .clone()
        })
        .collect();
    match &agent.update {
        UpdateFn::Concat => {}
        UpdateFn::Summary { map, initial } => {
            let summaries: BTreeSet<_> = map
                .keys()
                .map(|(s, _, _)| s.clone())
                .chain(map.values().cloned())
                .chain(initial.values().cloned())
                .collect();
            for s in &summaries {
                for slot in &slots {
                    for o in &observations {
                        if !map.contains_key(&(s.clone(), slot.clone(), o.clone())) {
                            out.push(Violation::new(
                                format!("{path}.update"),
                                format!(
                                    "summary map missing transition ({s}, {}, {o})",
                                    slot.render()
                                ),
                            ));
                        }
                    }
                }
            }
            for c in start_contexts {
                if !initial.contains_key(c) {
                    out.push(Violation::new(
                        format!("{path}.update"),
                        format!("summary update has no initial summary for context {c}"),
                    ));
                }
            }
        }
        UpdateFn::Selective { selector } => {
            for slot in &slots {
                for o in &observations {
                    if !selector.contains_key(&(slot.clone(), o.clone())) {
                        out.push(Violation::new(
                            format!("{path}.update"),
                            format!("selector missing transition ({}, {o})", slot.render()),
                        ));
                    }
                }
            }
        }
    }
}

fn validate_flow_structure(cf: &ControlFlowGraph, path: &str, out: &mut Vec<Violation>) {
    if cf.nodes.is_empty() {
        out.push(Violation::new(path, "control flow has no nodes"));
        return;
    }
    if cf.start >= cf.nodes.len() {
        out.push(Violation::new(
            path,
            format!("start node {} out of range", cf.start),
        ));
    }
    for ((from, class), to) in &cf.edges {
        if *from >= cf.nodes.len() || *to >= cf.nodes.len() {
            out.push(Violation::new(
                format!("{path}.edges"),
                format!("edge ({from}, {class}) -> {to} references a missing node"),
            ));
        }
    }
    for (i, node) in cf.nodes.iter().enumerate() {
        let npath = format!("{path}.nodes[{i}]");
        if node.allowed.is_empty() {
            out.push(Violation::new(&npath, "allowed action set is empty"));
        }
        for a in &node.allowed {
            if !cf.base.space.contains_action(a) {
                out.push(Violation::new(
                    &npath,
                    format!("allowed action {a} is not in the action space"),
                ));
            }
        }
        if node.init.is_some() {
            let effective = node.update.as_ref().unwrap_or(&cf.base.update);
            if !matches!(effective, UpdateFn::Concat) {
                out.push(Violation::new(
                    &npath,
                    "prompt override requires a concat update at this node",
                ));
            }
        }
        // Edge totality for non-terminal classes reachable from this node.
        let classes: BTreeSet<&ClassId> = node.allowed.iter().map(|a| &a.class).collect();
        for class in classes {
            if !cf.base.space.is_terminal(class) && !cf.edges.contains_key(&(i, class.clone())) {
                out.push(Violation::new(
                    format!("{path}.edges"),
                    format!("no successor for node {i} on class {class}"),
                ));
            }
        }
    }
}

/// Run the exhaustive walker from every declared start, reporting coverage
/// errors (uncovered states, dead ends, missing update transitions) as
/// violations.
fn enumerate_for_coverage(
    system: &System,
    t: &Topology,
    start_contexts: &[ContextId],
    injected_starts: Option<&[State]>,
    path: &str,
    out: &mut Vec<Violation>,
) {
    for (runs, label) in start_runs(system, t, start_contexts, injected_starts) {
        if let Err(e) = runs {
            out.push(Violation::new(format!("{path} ({label})"), e.to_string()));
        }
    }
}

/// Enumerate runs from each start (contexts or injected states), labelled.
fn start_runs(
    system: &System,
    t: &Topology,
    start_contexts: &[ContextId],
    injected_starts: Option<&[State]>,
) -> Vec<(Result<Vec<RunOutcome>>, String)> {
    let mut results = Vec::new();
    match injected_starts {
        Some(states) => {
            let query = &start_contexts[0];
            for s in states {
                results.push((
                    enumerate_runs(t, &system.contexts, StartRef::Injected(s), query),
                    format!("from state {}", s.key()),
                ));
            }
        }
        None => {
            for c in start_contexts {
                results.push((
                    enumerate_runs(t, &system.contexts, StartRef::Context(c), c),
                    format!("from context {c}"),
                ));
            }
        }
    }
    results
}

/// All merged final states of a parallel node's branches.
fn merged_finals(
    system: &System,
    p: &ParallelNode,
    start_contexts: &[ContextId],
    injected_starts: Option<&[State]>,
) -> Result<Vec<State>> {
    let mut merged = BTreeSet::new();
    for (left_runs, _) in start_runs(system, &p.left, start_contexts, injected_starts) {
        let left_runs = left_runs?;
        for (right_runs, _) in start_runs(system, &p.right, start_contexts, injected_starts) {
            let right_runs = right_runs?;
            for l in &left_runs {
                for r in &right_runs {
                    merged.insert(p.recombiner.merge(&l.final_state, &r.final_state)?);
                }
            }
        }
    }
    Ok(merged.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Distribution;
    use crate::ids::{ArgId, ClassId, ObsId, ThoughtId};
    use crate::kernel::{StateTable, TabularKernel};

    fn act(class: &str) -> ActionId {
        ActionId::new(ClassId::new(class).unwrap(), ArgId::new("x").unwrap())
    }

    fn space(classes: &[&str]) -> Arc<ActionSpace> {
        Arc::new(
            ActionSpace::new(
                classes
                    .iter()
                    .map(|c| {
                        (
                            ClassId::new(*c).unwrap(),
                            vec![(
                                ArgId::new("x").unwrap(),
                                ObsId::new(format!("o{c}")).unwrap(),
                            )],
                        )
                    })
                    .collect(),
                BTreeSet::new(),
            )
            .unwrap(),
        )
    }

    fn uniform_agent(name: &str, classes: &[&str], horizon: usize) -> AgentSpec {
        let sp = space(classes);
        let p = 1.0 / classes.len() as f64;
        let row = Distribution::new(classes.iter().map(|c| (act(c), p)).collect(), "row").unwrap();
        AgentSpec {
            name: name.to_string(),
            kernel: Arc::new(Kernel::Tabular(TabularKernel {
                table: StateTable::stationary(row),
            })),
            update: UpdateFn::Concat,
            init: InitBuilder::context_only(),
            bindings: BTreeMap::new(),
            horizon,
            space: sp,
        }
    }

    fn system(topology: Topology) -> System {
        System {
            thoughts: ThoughtAlphabet::new(vec![ThoughtId::new("t0").unwrap()]).unwrap(),
            contexts: ContextAlphabet::new(vec![ContextId::new("c0").unwrap()]).unwrap(),
            topology,
        }
    }

    fn emission(codomain: &[&str], to: &str) -> ContextEmission {
        let d = Distribution::new(
            codomain
                .iter()
                .map(|c| {
                    (
                        ContextId::new(*c).unwrap(),
                        if *c == to { 1.0 } else { 0.0 },
                    )
                })
                .collect(),
            "e",
        )
        .unwrap();
        ContextEmission::new(
            codomain
                .iter()
                .map(|c| ContextId::new(*c).unwrap())
                .collect(),
            BTreeMap::new(),
            Some(d),
            "e",
        )
        .unwrap()
    }

    #[test]
    fn parallel_rejects_overlapping_partitions() {
        let left = Topology::Chain(uniform_agent("l", &["A", "B"], 1));
        let right = Topology::Chain(uniform_agent("r", &["B", "C"], 1));
        match compose_parallel(left, right, Recombiner::ConcatHistories, None) {
            Err(Error::Invalid(vs)) => {
                assert!(vs[0].message.contains("partition overlap"), "{}", vs[0]);
                assert!(vs[0].message.contains("B.x"), "{}", vs[0]);
            }
            other => panic!("expected overlap rejection, got {other:?}"),
        }
    }

    #[test]
    fn hierarchical_rejects_overlap_and_accepts_disjoint() {
        let outer = uniform_agent("outer", &["A"], 1);
        let inner = Topology::Chain(uniform_agent("inner", &["G"], 1));
        let resume = uniform_agent("resume", &["U"], 1);
        let e1 = emission(&["c0"], "c0");
        let e2 = emission(&["c0"], "c0");
        assert!(compose_hierarchical(
            outer.clone(),
            e1.clone(),
            inner.clone(),
            e2.clone(),
            resume,
            false
        )
        .is_ok());

        let clash = uniform_agent("resume", &["A"], 1);
        assert!(matches!(
            compose_hierarchical(outer, e1, inner, e2, clash, false),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn valid_chain_produces_empty_report() {
        let sys = system(Topology::Chain(uniform_agent("m", &["A", "B"], 2)));
        let query = GoalQuery {
            goal: GoalSpec::Seq(vec![act("A")]),
            context: ContextId::new("c0").unwrap(),
        };
        let report = validate_topology(&sys, &query);
        assert!(report.is_empty(), "{report:?}");
    }

    #[test]
    fn goal_longer_than_horizon_is_flagged() {
        let sys = system(Topology::Chain(uniform_agent("m", &["A"], 1)));
        let query = GoalQuery {
            goal: GoalSpec::Seq(vec![act("A"), act("A")]),
            context: ContextId::new("c0").unwrap(),
        };
        let report = validate_topology(&sys, &query);
        assert!(report.iter().any(|v| v.message.contains("exceeds horizon")));
    }

    #[test]
    fn missing_emission_row_is_flagged() {
        let outer = uniform_agent("outer", &["A", "B"], 1);
        let inner = Topology::Chain(uniform_agent("inner", &["G"], 1));
        let resume = uniform_agent("resume", &["U"], 1);
        // Row only for [A]; outer can also emit [B].
        let mut rows = BTreeMap::new();
        rows.insert(
            "A.x".to_string(),
            Distribution::new(vec![(ContextId::new("c0").unwrap(), 1.0)], "e").unwrap(),
        );
        let e_out =
            ContextEmission::new(vec![ContextId::new("c0").unwrap()], rows, None, "e_out").unwrap();
        let e_back = emission(&["c0"], "c0");
        let topo = compose_hierarchical(outer, e_out, inner, e_back, resume, false).unwrap();
        let sys = system(topo);
        let query = GoalQuery {
            goal: GoalSpec::Hierarchical {
                outer: vec![act("A")],
                inner: Box::new(GoalSpec::Seq(vec![act("G")])),
                resume: vec![act("U")],
            },
            context: ContextId::new("c0").unwrap(),
        };
        let report = validate_topology(&sys, &query);
        assert!(
            report
                .iter()
                .any(|v| v.path.contains("emission_out") && v.message.contains("B.x")),
            "{report:?}"
        );
    }

    #[test]
    fn goal_truncation_walks_stages_in_order() {
        let goal = GoalSpec::Hierarchical {
            outer: vec![act("A")],
            inner: Box::new(GoalSpec::Seq(vec![act("G")])),
            resume: vec![act("U")],
        };
        assert_eq!(goal.len(), 3);
        let t1 = goal.truncated(1);
        match &t1 {
            GoalSpec::Hierarchical {
                outer,
                inner,
                resume,
            } => {
                assert_eq!(outer.len(), 1);
                assert!(inner.is_empty());
                assert!(resume.is_empty());
            }
            _ => panic!("shape preserved"),
        }
        assert_eq!(goal.truncated(3), goal);
        assert_eq!(goal.truncated(9), goal);
        assert_eq!(t1.flatten(), vec![act("A")]);
    }

    #[test]
    fn recombiner_concat_merges_histories() {
        let l = State::History(vec![Segment::Literal("L".into())]);
        let r = State::History(vec![Segment::Literal("R".into())]);
        let merged = Recombiner::ConcatHistories.merge(&l, &r).unwrap();
        assert_eq!(
            merged,
            State::History(vec![
                Segment::Literal("L".into()),
                Segment::Literal("R".into())
            ])
        );
        let bad = Recombiner::ConcatHistories.merge(&l, &State::empty_memory());
        assert!(matches!(bad, Err(Error::RecombinerGap { .. })));
    }
}
