//! Degrees-of-freedom registry, collaboration cost, the regularized
//! objective, and search over a strategy's declared levers.

use std::collections::BTreeSet;
use std::fmt;

use crate::compose::{GoalQuery, System, Topology};
use crate::error::{Error, Result};
use crate::ids::ContextId;
use crate::inference::exact_goal_probability;
use crate::scenario::{MutationDomainDoc, ScenarioDoc, TopologyDoc};

/// The seven architecture strategies whose optimizable levers differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StrategyKind {
    ReAct,
    ComposableInference,
    DeepThinking,
    FineTuning,
    ControlFlow,
    MultiAgentNoCollab,
    MultiAgentCollab,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::ReAct,
        StrategyKind::ComposableInference,
        StrategyKind::DeepThinking,
        StrategyKind::FineTuning,
        StrategyKind::ControlFlow,
        StrategyKind::MultiAgentNoCollab,
        StrategyKind::MultiAgentCollab,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::ReAct => "ReAct",
            StrategyKind::ComposableInference => "ComposableInference",
            StrategyKind::DeepThinking => "DeepThinking",
            StrategyKind::FineTuning => "FineTuning",
            StrategyKind::ControlFlow => "ControlFlow",
            StrategyKind::MultiAgentNoCollab => "MultiAgentNoCollab",
            StrategyKind::MultiAgentCollab => "MultiAgentCollab",
        }
    }

    pub fn parse(s: &str) -> Option<StrategyKind> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One mutable surface of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DofHandle {
    InitState,
    Update,
    Kernel,
    ActionPartition,
    EmissionOut,
    EmissionBack,
}

impl DofHandle {
    pub const ALL: [DofHandle; 6] = [
        DofHandle::InitState,
        DofHandle::Update,
        DofHandle::Kernel,
        DofHandle::ActionPartition,
        DofHandle::EmissionOut,
        DofHandle::EmissionBack,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DofHandle::InitState => "init_state",
            DofHandle::Update => "update",
            DofHandle::Kernel => "kernel",
            DofHandle::ActionPartition => "action_partition",
            DofHandle::EmissionOut => "emission_out",
            DofHandle::EmissionBack => "emission_back",
        }
    }
}

impl fmt::Display for DofHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The optimizable handles each strategy exposes.
pub fn dof_handles(kind: StrategyKind) -> BTreeSet<DofHandle> {
    use DofHandle::*;
    let handles: &[DofHandle] = match kind {
        StrategyKind::ReAct => &[InitState, Update],
        StrategyKind::ComposableInference
        | StrategyKind::DeepThinking
        | StrategyKind::FineTuning => &[Kernel],
        StrategyKind::ControlFlow | StrategyKind::MultiAgentNoCollab => {
            &[Kernel, Update, InitState, ActionPartition]
        }
        StrategyKind::MultiAgentCollab => &[
            Kernel,
            Update,
            InitState,
            ActionPartition,
            EmissionOut,
            EmissionBack,
        ],
    };
    handles.iter().copied().collect()
}

/// Structural collaboration-cost weights: per boundary crossing, per
/// transferable context symbol, per nesting level. All dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub w_msg: f64,
    pub w_ctx: f64,
    pub w_depth: f64,
}

impl CostModel {
    pub fn new(w_msg: f64, w_ctx: f64, w_depth: f64) -> Result<Self> {
        for (name, w) in [("w_msg", w_msg), ("w_ctx", w_ctx), ("w_depth", w_depth)] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::BadDistribution {
                    path: format!("cost_model.{name}"),
                    reason: format!("weight must be a non-negative number, got {w}"),
                });
            }
        }
        Ok(CostModel {
            w_msg,
            w_ctx,
            w_depth,
        })
    }
}

/// Goal query plus the regularization that trades probability against
/// collaboration cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub goal: GoalQuery,
    pub lambda: f64,
    pub cost_model: CostModel,
}

impl Objective {
    pub fn new(goal: GoalQuery, lambda: f64, cost_model: CostModel) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::NegativeLambda(lambda));
        }
        Ok(Objective {
            goal,
            lambda,
            cost_model,
        })
    }
}

fn boundary_stats(t: &Topology) -> (u64, u64) {
    match t {
        Topology::Chain(_) | Topology::ControlFlow(_) => (0, 0),
        Topology::Parallel(p) => {
            let (lc, ls) = boundary_stats(&p.left);
            let (rc, rs) = boundary_stats(&p.right);
            let (tc, ts) = p.tail.as_ref().map_or((0, 0), |t| boundary_stats(t));
            (lc + rc + tc, ls + rs + ts)
        }
        Topology::Hierarchical(h) => {
            let (ic, is) = boundary_stats(&h.inner);
            (
                2 + ic,
                h.emission_out.codomain().len() as u64
                    + h.emission_back.codomain().len() as u64
                    + is,
            )
        }
    }
}

/// Structural collaboration cost of a topology: weighted boundary
/// crossings, transferable context symbols, and nesting depth. Deterministic
/// and independent of any sampled trajectory.
pub fn collab_cost(t: &Topology, cm: &CostModel) -> f64 {
    let (crossings, symbols) = boundary_stats(t);
    cm.w_msg * crossings as f64 + cm.w_ctx * symbols as f64 + cm.w_depth * t.depth() as f64
}

/// Exact goal probability minus λ times the collaboration cost.
pub fn regularized_objective(system: &System, objective: &Objective, budget: u64) -> Result<f64> {
    let p = exact_goal_probability(system, &objective.goal, budget)?;
    Ok(p - objective.lambda * collab_cost(&system.topology, &objective.cost_model))
}

/// Search over forcing the outward emission to each candidate handoff
/// context (a degenerate emission), returning the best context and its
/// regularized objective. Ties break to the lexicographically smallest
/// context; never exceeds `budget` objective evaluations.
pub fn optimize_context(
    system: &System,
    objective: &Objective,
    budget: u64,
    enumeration_budget: u64,
) -> Result<(ContextId, f64)> {
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    let h = match &system.topology {
        Topology::Hierarchical(h) => h,
        _ => return Err(Error::NotHierarchical),
    };
    let candidates: Vec<ContextId> = h.emission_out.codomain().to_vec();
    let mut best: Option<(ContextId, f64)> = None;
    for candidate in candidates.into_iter().take(budget as usize) {
        let mut forced = h.clone();
        forced.emission_out = h.emission_out.forced(&candidate)?;
        let forced_system = System {
            thoughts: system.thoughts.clone(),
            contexts: system.contexts.clone(),
            topology: Topology::Hierarchical(forced),
        };
        let value = regularized_objective(&forced_system, objective, enumeration_budget)?;
        let better = match &best {
            None => true,
            Some((_, v)) => value > *v,
        };
        if better {
            best = Some((candidate, value));
        }
    }
    best.ok_or(Error::ZeroBudget)
}

/// Symmetric counterpart of [`optimize_context`] for the returned context:
/// forces the inward emission to each candidate in its codomain.
pub fn optimize_return_context(
    system: &System,
    objective: &Objective,
    budget: u64,
    enumeration_budget: u64,
) -> Result<(ContextId, f64)> {
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    let h = match &system.topology {
        Topology::Hierarchical(h) => h,
        _ => return Err(Error::NotHierarchical),
    };
    let candidates: Vec<ContextId> = h.emission_back.codomain().to_vec();
    let mut best: Option<(ContextId, f64)> = None;
    for candidate in candidates.into_iter().take(budget as usize) {
        let mut forced = h.clone();
        forced.emission_back = h.emission_back.forced(&candidate)?;
        let forced_system = System {
            thoughts: system.thoughts.clone(),
            contexts: system.contexts.clone(),
            topology: Topology::Hierarchical(forced),
        };
        let value = regularized_objective(&forced_system, objective, enumeration_budget)?;
        let better = match &best {
            None => true,
            Some((_, v)) => value > *v,
        };
        if better {
            best = Some((candidate, value));
        }
    }
    best.ok_or(Error::ZeroBudget)
}

// ---------------------------------------------------------------------------
// DOF search over a scenario's declared mutation domains
// ---------------------------------------------------------------------------

/// One evaluated candidate configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEval {
    pub digest: String,
    pub probability: f64,
    pub cost: f64,
    pub objective: f64,
}

/// Result of a DOF search: the best configuration (a full scenario
/// document), its exactly evaluated objective, and the evaluation log.
#[derive(Debug, Clone)]
pub struct DofOutcome {
    pub doc: ScenarioDoc,
    pub value: f64,
    pub log: Vec<CandidateEval>,
}

#[derive(Debug, Clone, PartialEq)]
enum AxisTarget {
    InitState { agent: String, param: String },
    Update { agent: String },
    Kernel { agent: String },
    ActionPartition { node: usize },
    EmissionOut,
    EmissionBack,
}

impl AxisTarget {
    fn handle(&self) -> DofHandle {
        match self {
            AxisTarget::InitState { .. } => DofHandle::InitState,
            AxisTarget::Update { .. } => DofHandle::Update,
            AxisTarget::Kernel { .. } => DofHandle::Kernel,
            AxisTarget::ActionPartition { .. } => DofHandle::ActionPartition,
            AxisTarget::EmissionOut => DofHandle::EmissionOut,
            AxisTarget::EmissionBack => DofHandle::EmissionBack,
        }
    }

    fn key(&self) -> String {
        match self {
            AxisTarget::InitState { agent, param } => format!("init_state:{agent}.{param}"),
            AxisTarget::Update { agent } => format!("update:{agent}"),
            AxisTarget::Kernel { agent } => format!("kernel:{agent}"),
            AxisTarget::ActionPartition { node } => format!("action_partition:node{node}"),
            AxisTarget::EmissionOut => "emission_out".to_string(),
            AxisTarget::EmissionBack => "emission_back".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Choice {
    Value(String),
    Set(Vec<String>),
}

impl Choice {
    fn render(&self) -> String {
        match self {
            Choice::Value(v) => v.clone(),
            Choice::Set(s) => s.join("+"),
        }
    }
}

#[derive(Debug, Clone)]
struct Axis {
    target: AxisTarget,
    choices: Vec<Choice>,
}

fn build_axes(doc: &ScenarioDoc, kind: StrategyKind) -> Result<Vec<Axis>> {
    let allowed = dof_handles(kind);
    let mut axes = Vec::new();
    for dom in &doc.mutation_domains {
        let (target, mut choices) = match dom {
            MutationDomainDoc::InitState {
                agent,
                param,
                values,
            } => (
                AxisTarget::InitState {
                    agent: agent.clone(),
                    param: param.clone(),
                },
                values
                    .iter()
                    .cloned()
                    .map(Choice::Value)
                    .collect::<Vec<_>>(),
            ),
            MutationDomainDoc::Update { agent, candidates } => (
                AxisTarget::Update {
                    agent: agent.clone(),
                },
                candidates.iter().cloned().map(Choice::Value).collect(),
            ),
            MutationDomainDoc::Kernel { agent, candidates } => (
                AxisTarget::Kernel {
                    agent: agent.clone(),
                },
                candidates.iter().cloned().map(Choice::Value).collect(),
            ),
            MutationDomainDoc::ActionPartition { node, candidates } => (
                AxisTarget::ActionPartition { node: *node },
                candidates.iter().cloned().map(Choice::Set).collect(),
            ),
            MutationDomainDoc::EmissionOut { candidates } => (
                AxisTarget::EmissionOut,
                candidates.iter().cloned().map(Choice::Value).collect(),
            ),
            MutationDomainDoc::EmissionBack { candidates } => (
                AxisTarget::EmissionBack,
                candidates.iter().cloned().map(Choice::Value).collect(),
            ),
        };
        let handle = target.handle();
        if !allowed.contains(&handle) {
            return Err(Error::DofViolation {
                handle: handle.name().to_string(),
                strategy: kind.name().to_string(),
            });
        }
        choices.sort_by_key(|c| c.render());
        choices.dedup();
        axes.push(Axis { target, choices });
    }
    axes.sort_by_key(|a| a.target.key());
    Ok(axes)
}

fn apply_choice(doc: &mut ScenarioDoc, target: &AxisTarget, choice: &Choice) -> Result<()> {
    match (target, choice) {
        (AxisTarget::InitState { agent, param }, Choice::Value(v)) => {
            let a = doc
                .agents
                .iter_mut()
                .find(|a| a.id == *agent)
                .ok_or_else(|| Error::UnresolvedRef {
                    path: "mutation".into(),
                    id: agent.clone(),
                })?;
            a.bindings.insert(param.clone(), v.clone());
        }
        (AxisTarget::Update { agent }, Choice::Value(v)) => {
            let a = doc
                .agents
                .iter_mut()
                .find(|a| a.id == *agent)
                .ok_or_else(|| Error::UnresolvedRef {
                    path: "mutation".into(),
                    id: agent.clone(),
                })?;
            a.update = v.clone();
        }
        (AxisTarget::Kernel { agent }, Choice::Value(v)) => {
            let a = doc
                .agents
                .iter_mut()
                .find(|a| a.id == *agent)
                .ok_or_else(|| Error::UnresolvedRef {
                    path: "mutation".into(),
                    id: agent.clone(),
                })?;
            a.kernel = v.clone();
        }
        (AxisTarget::ActionPartition { node }, Choice::Set(set)) => match &mut doc.topology {
            TopologyDoc::Controlflow { nodes, .. } if *node < nodes.len() => {
                nodes[*node].allowed = set.clone();
            }
            _ => {
                return Err(Error::UnresolvedRef {
                    path: "mutation.action_partition".into(),
                    id: format!("node {node}"),
                })
            }
        },
        (AxisTarget::EmissionOut, Choice::Value(v)) => match &mut doc.topology {
            TopologyDoc::Hierarchical { emission_out, .. } => *emission_out = v.clone(),
            _ => return Err(Error::NotHierarchical),
        },
        (AxisTarget::EmissionBack, Choice::Value(v)) => match &mut doc.topology {
            TopologyDoc::Hierarchical { emission_back, .. } => *emission_back = v.clone(),
            _ => return Err(Error::NotHierarchical),
        },
        _ => unreachable!("choice shape matches its axis"),
    }
    Ok(())
}

fn evaluate_doc(doc: &ScenarioDoc) -> Result<(f64, f64, f64)> {
    let compiled = doc.compile()?;
    let p = exact_goal_probability(
        &compiled.system,
        &compiled.objective.goal,
        compiled.enumeration_budget,
    )?;
    let cost = collab_cost(&compiled.system.topology, &compiled.objective.cost_model);
    Ok((p, cost, p - compiled.objective.lambda * cost))
}

/// Optimize the scenario over its declared mutation domains, gated by the
/// strategy's DOF handles.
///
/// Exhaustive when the configuration product fits the budget, greedy
/// coordinate ascent otherwise (axes in canonical order, strict
/// improvements only). The returned value is the exact evaluation of the
/// returned configuration.
pub fn optimize_dof(doc: &ScenarioDoc, kind: StrategyKind, budget: u64) -> Result<DofOutcome> {
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    let axes = build_axes(doc, kind)?;
    if axes.is_empty() {
        let (p, cost, value) = evaluate_doc(doc)?;
        return Ok(DofOutcome {
            doc: doc.clone(),
            value,
            log: vec![CandidateEval {
                digest: "baseline".into(),
                probability: p,
                cost,
                objective: value,
            }],
        });
    }

    let space: u128 = axes.iter().map(|a| a.choices.len() as u128).product();
    if space <= budget as u128 {
        exhaustive(doc, &axes)
    } else {
        greedy(doc, &axes, budget)
    }
}

fn digest(axes: &[Axis], selection: &[usize]) -> String {
    axes.iter()
        .zip(selection)
        .map(|(a, i)| format!("{}={}", a.target.key(), a.choices[*i].render()))
        .collect::<Vec<_>>()
        .join("|")
}

fn configured(doc: &ScenarioDoc, axes: &[Axis], selection: &[usize]) -> Result<ScenarioDoc> {
    let mut out = doc.clone();
    for (axis, idx) in axes.iter().zip(selection) {
        apply_choice(&mut out, &axis.target, &axis.choices[*idx])?;
    }
    Ok(out)
}

fn exhaustive(doc: &ScenarioDoc, axes: &[Axis]) -> Result<DofOutcome> {
    let mut selection = vec![0usize; axes.len()];
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut log = Vec::new();
    loop {
        let candidate = configured(doc, axes, &selection)?;
        let (p, cost, value) = evaluate_doc(&candidate)?;
        log.push(CandidateEval {
            digest: digest(axes, &selection),
            probability: p,
            cost,
            objective: value,
        });
        let better = match &best {
            None => true,
            Some((_, v)) => value > *v,
        };
        if better {
            best = Some((selection.clone(), value));
        }
        // Odometer increment, last axis fastest.
        let mut i = axes.len();
        loop {
            if i == 0 {
                let (sel, value) = best.expect("at least one candidate");
                let doc = configured(doc, axes, &sel)?;
                return Ok(DofOutcome { doc, value, log });
            }
            i -= 1;
            selection[i] += 1;
            if selection[i] < axes[i].choices.len() {
                break;
            }
            selection[i] = 0;
        }
    }
}

fn greedy(doc: &ScenarioDoc, axes: &[Axis], budget: u64) -> Result<DofOutcome> {
    let mut evals = 0u64;
    let (p, cost, mut best_value) = evaluate_doc(doc)?;
    evals += 1;
    let mut log = vec![CandidateEval {
        digest: "baseline".into(),
        probability: p,
        cost,
        objective: best_value,
    }];
    let mut best_doc = doc.clone();
    // Selections start at the baseline (no axis applied); each adopted
    // choice is applied cumulatively.
    let mut selection: Vec<Option<usize>> = vec![None; axes.len()];

    loop {
        let mut improved = false;
        for (ai, axis) in axes.iter().enumerate() {
            for (ci, choice) in axis.choices.iter().enumerate() {
                if selection[ai] == Some(ci) {
                    continue;
                }
                let mut candidate = best_doc.clone();
                apply_choice(&mut candidate, &axis.target, choice)?;
                // A choice that leaves the document unchanged cannot improve.
                if candidate == best_doc {
                    continue;
                }
                if evals >= budget {
                    return Ok(DofOutcome {
                        doc: best_doc,
                        value: best_value,
                        log,
                    });
                }
                let (p, cost, value) = evaluate_doc(&candidate)?;
                evals += 1;
                let mut parts: Vec<String> = Vec::new();
                for (aj, sel) in selection.iter().enumerate() {
                    if let Some(cj) = sel {
                        if aj != ai {
                            parts.push(format!(
                                "{}={}",
                                axes[aj].target.key(),
                                axes[aj].choices[*cj].render()
                            ));
                        }
                    }
                }
                parts.push(format!("{}={}", axis.target.key(), choice.render()));
                parts.sort();
                log.push(CandidateEval {
                    digest: parts.join("|"),
                    probability: p,
                    cost,
                    objective: value,
                });
                if value > best_value {
                    best_value = value;
                    best_doc = candidate;
                    selection[ai] = Some(ci);
                    improved = true;
                }
            }
        }
        if !improved {
            return Ok(DofOutcome {
                doc: best_doc,
                value: best_value,
                log,
            });
        }
    }
}
