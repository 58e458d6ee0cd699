//! Scenario documents: strict JSON parsing, cross-reference resolution,
//! validation, and serialization.
//!
//! A scenario is a single JSON object declaring alphabets, action spaces,
//! kernels, update functions, emissions, agents, one topology, one
//! objective, optional mutation domains, and budgets. Parsing rejects
//! unknown fields; probabilities are never defaulted or renormalized.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::compose::{
    validate_topology, AgentSpec, ContextEmission, ControlFlowGraph, FlowNode, GoalQuery, GoalSpec,
    HierarchicalNode, ParallelNode, Recombiner, System, Topology,
};
use crate::dist::Distribution;
use crate::error::{Error, Result, Violation};
use crate::ids::{
    ActionId, ArgId, ClassId, ContextId, KeyId, ObsId, ParamId, SummaryId, ThoughtId, ValueId,
};
use crate::inference::DEFAULT_ENUMERATION_BUDGET;
use crate::kernel::{Kernel, ReActKernel, RestrictedKernel, StateTable, TabularKernel};
use crate::model::{
    ActionSpace, ContextAlphabet, InitBuilder, Segment, State, TemplateSegment, ThoughtAlphabet,
    ThoughtSlot, UpdateFn,
};
use crate::optimize::{CostModel, Objective};

pub const FORMAT_VERSION: &str = "1";

const DEFAULT_OPTIMIZER_BUDGET: u64 = 64;

fn is_false(b: &bool) -> bool {
    !b
}

// ---------------------------------------------------------------------------
// Document model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub version: String,
    pub alphabets: AlphabetsDoc,
    pub action_spaces: Vec<ActionSpaceDoc>,
    pub kernels: Vec<KernelDoc>,
    pub updates: Vec<UpdateDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub emissions: Vec<EmissionDoc>,
    pub agents: Vec<AgentDoc>,
    pub topology: TopologyDoc,
    pub objective: ObjectiveDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mutation_domains: Vec<MutationDomainDoc>,
    #[serde(default)]
    pub budgets: BudgetsDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphabetsDoc {
    pub thoughts: Vec<String>,
    pub contexts: Vec<String>,
    pub observations: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub summaries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpaceDoc {
    pub id: String,
    pub classes: Vec<ClassDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassDoc {
    pub id: String,
    /// argument id -> observation id
    pub args: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub terminal: bool,
}

pub type RowDoc = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum KernelDoc {
    Tabular {
        id: String,
        space: String,
        /// state key (or `*`) -> action -> probability
        table: BTreeMap<String, RowDoc>,
    },
    React {
        id: String,
        space: String,
        thought_given_state: BTreeMap<String, RowDoc>,
        /// thought -> state key (or `*`) -> action -> probability
        action_given_thought_state: BTreeMap<String, BTreeMap<String, RowDoc>>,
    },
    Restricted {
        id: String,
        base: String,
        /// state key (or `*`) -> allowed actions
        allowed: BTreeMap<String, Vec<String>>,
    },
}

impl KernelDoc {
    pub fn id(&self) -> &str {
        match self {
            KernelDoc::Tabular { id, .. }
            | KernelDoc::React { id, .. }
            | KernelDoc::Restricted { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum UpdateDoc {
    Concat {
        id: String,
    },
    Summary {
        id: String,
        /// start context -> initial summary
        initial: BTreeMap<String, String>,
        /// "summary,thought,obs" -> next summary (`_` = no-thought slot)
        map: BTreeMap<String, String>,
    },
    Selective {
        id: String,
        /// "thought,obs" -> [key, value]
        selector: BTreeMap<String, (String, String)>,
    },
}

impl UpdateDoc {
    pub fn id(&self) -> &str {
        match self {
            UpdateDoc::Concat { id }
            | UpdateDoc::Summary { id, .. }
            | UpdateDoc::Selective { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionDoc {
    pub id: String,
    /// The codomain: contexts this emission can transfer.
    pub contexts: Vec<String>,
    /// action sequence key (comma-joined, or `*`) -> context -> probability
    pub rows: BTreeMap<String, RowDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDoc {
    pub id: String,
    pub kernel: String,
    pub update: String,
    pub space: String,
    pub init: InitDoc,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bindings: BTreeMap<String, String>,
    pub horizon: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitDoc {
    pub template: Vec<TemplateSegDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Vec<String>>,
}

/// Template segment: `"context"`, `{"lit": "..."}`, or `{"param": "..."}`.
#[derive(Debug, Clone, PartialEq)]
pub enum TemplateSegDoc {
    Context,
    Lit(String),
    Param(String),
}

impl Serialize for TemplateSegDoc {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TemplateSegDoc::Context => s.serialize_str("context"),
            TemplateSegDoc::Lit(v) => {
                let mut m = BTreeMap::new();
                m.insert("lit", v);
                m.serialize(s)
            }
            TemplateSegDoc::Param(v) => {
                let mut m = BTreeMap::new();
                m.insert("param", v);
                m.serialize(s)
            }
        }
    }
}

impl<'de> Deserialize<'de> for TemplateSegDoc {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct SegVisitor;
        impl<'de> Visitor<'de> for SegVisitor {
            type Value = TemplateSegDoc;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("\"context\", {\"lit\": ...}, or {\"param\": ...}")
            }

            fn visit_str<E: serde::de::Error>(
                self,
                v: &str,
            ) -> std::result::Result<Self::Value, E> {
                if v == "context" {
                    Ok(TemplateSegDoc::Context)
                } else {
                    Err(E::custom(format!(
                        "unknown template segment {v:?}; the only bare keyword is \"context\""
                    )))
                }
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let Some(key) = map.next_key::<String>()? else {
                    return Err(serde::de::Error::custom("empty template segment"));
                };
                let seg = match key.as_str() {
                    "lit" => TemplateSegDoc::Lit(map.next_value()?),
                    "param" => TemplateSegDoc::Param(map.next_value()?),
                    other => {
                        return Err(serde::de::Error::custom(format!(
                            "unknown template segment key {other:?}"
                        )))
                    }
                };
                if map.next_key::<String>()?.is_some() {
                    return Err(serde::de::Error::custom(
                        "template segment must have exactly one key",
                    ));
                }
                Ok(seg)
            }
        }
        d.deserialize_any(SegVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum TopologyDoc {
    Chain {
        agent: String,
    },
    Controlflow {
        agent: String,
        nodes: Vec<FlowNodeDoc>,
        /// node index (as string) -> action class -> successor node index
        edges: BTreeMap<String, BTreeMap<String, usize>>,
        start: usize,
    },
    Parallel {
        left: Box<TopologyDoc>,
        right: Box<TopologyDoc>,
        recombiner: RecombinerDoc,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail: Option<Box<TopologyDoc>>,
    },
    Hierarchical {
        outer: String,
        emission_out: String,
        inner: Box<TopologyDoc>,
        emission_back: String,
        resume: String,
        #[serde(default, skip_serializing_if = "is_false")]
        resume_carries_history: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowNodeDoc {
    pub kernel: String,
    pub allowed: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum RecombinerDoc {
    Concat,
    /// "left state key||right state key" -> merged state
    Table(BTreeMap<String, StateDoc>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum StateDoc {
    History(Vec<SegmentDoc>),
    Summary(String),
    Memory(BTreeMap<String, String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum SegmentDoc {
    Lit(String),
    Ctx(String),
    T(String),
    O(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveDoc {
    pub goal: GoalDoc,
    pub context: String,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub cost_model: CostModelDoc,
}

fn default_lambda() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModelDoc {
    pub w_msg: f64,
    pub w_ctx: f64,
    pub w_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum GoalDoc {
    Seq(Vec<String>),
    Parallel {
        left: Box<GoalDoc>,
        right: Box<GoalDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail: Option<Box<GoalDoc>>,
    },
    Hierarchical {
        outer: Vec<String>,
        inner: Box<GoalDoc>,
        resume: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum MutationDomainDoc {
    InitState {
        agent: String,
        param: String,
        values: Vec<String>,
    },
    Update {
        agent: String,
        candidates: Vec<String>,
    },
    Kernel {
        agent: String,
        candidates: Vec<String>,
    },
    ActionPartition {
        node: usize,
        candidates: Vec<Vec<String>>,
    },
    EmissionOut {
        candidates: Vec<String>,
    },
    EmissionBack {
        candidates: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetsDoc {
    #[serde(default = "default_enumeration_budget")]
    pub enumeration: u64,
    #[serde(default = "default_optimizer_budget")]
    pub optimizer: u64,
}

fn default_enumeration_budget() -> u64 {
    DEFAULT_ENUMERATION_BUDGET
}

fn default_optimizer_budget() -> u64 {
    DEFAULT_OPTIMIZER_BUDGET
}

impl Default for BudgetsDoc {
    fn default() -> Self {
        BudgetsDoc {
            enumeration: default_enumeration_budget(),
            optimizer: default_optimizer_budget(),
        }
    }
}

// ---------------------------------------------------------------------------
// Parse / serialize
// ---------------------------------------------------------------------------

/// Parse and fully validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioDoc> {
    let doc: ScenarioDoc = serde_json::from_str(text)
        .map_err(|e| Error::Syntax(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    if doc.version != FORMAT_VERSION {
        return Err(Error::Version {
            found: doc.version,
            expected: FORMAT_VERSION.to_string(),
        });
    }
    doc.compile()?;
    Ok(doc)
}

/// Canonical pretty-printed form; `parse_scenario` of the output yields a
/// value-equal document.
pub fn serialize_scenario(doc: &ScenarioDoc) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("scenario documents are serializable");
    text.push('\n');
    text
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

/// A compiled, validated scenario ready for inference and optimization.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub system: System,
    pub objective: Objective,
    pub enumeration_budget: u64,
    pub optimizer_budget: u64,
}

struct Registry {
    thoughts: ThoughtAlphabet,
    contexts: ContextAlphabet,
    observations: BTreeSet<ObsId>,
    summaries: BTreeSet<SummaryId>,
    kernels: BTreeMap<String, (Arc<Kernel>, String)>,
    updates: BTreeMap<String, UpdateFn>,
    emissions: BTreeMap<String, EmissionEntry>,
    agents: BTreeMap<String, AgentSpec>,
}

struct EmissionEntry {
    codomain: Vec<ContextId>,
    rows: Vec<(String, Distribution<ContextId>)>,
    stationary: Option<Distribution<ContextId>>,
}

fn unresolved(path: impl Into<String>, id: impl Into<String>) -> Error {
    Error::UnresolvedRef {
        path: path.into(),
        id: id.into(),
    }
}

fn unique_ids<'a>(what: &str, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::BadIdentifier {
                id: id.to_string(),
                reason: format!("duplicate {what} id"),
            });
        }
    }
    Ok(())
}

impl ScenarioDoc {
    /// Resolve all references, build the executable system, and run full
    /// validation. Any violation fails compilation.
    pub fn compile(&self) -> Result<Compiled> {
        let reg = self.build_registry()?;
        let topology = self.build_topology(&self.topology, &reg, "topology")?;
        let system = System {
            thoughts: reg.thoughts.clone(),
            contexts: reg.contexts.clone(),
            topology,
        };

        let context = ContextId::new(&self.objective.context)?;
        let goal = resolve_goal(&self.objective.goal, &system.topology, "objective.goal")?;
        let query = GoalQuery { goal, context };
        let cost_model = CostModel::new(
            self.objective.cost_model.w_msg,
            self.objective.cost_model.w_ctx,
            self.objective.cost_model.w_depth,
        )?;
        let objective = Objective::new(query, self.objective.lambda, cost_model)?;

        let mut violations = validate_topology(&system, &objective.goal);
        self.validate_budgets(&mut violations);
        self.validate_mutation_domains(&reg, &mut violations);
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        Ok(Compiled {
            system,
            objective,
            enumeration_budget: self.budgets.enumeration,
            optimizer_budget: self.budgets.optimizer,
        })
    }

    fn validate_budgets(&self, out: &mut Vec<Violation>) {
        if self.budgets.enumeration == 0 {
            out.push(Violation::new("budgets.enumeration", "must be at least 1"));
        }
        if self.budgets.optimizer == 0 {
            out.push(Violation::new("budgets.optimizer", "must be at least 1"));
        }
    }

    fn validate_mutation_domains(&self, reg: &Registry, out: &mut Vec<Violation>) {
        let mut seen = BTreeSet::new();
        for (i, dom) in self.mutation_domains.iter().enumerate() {
            let path = format!("mutation_domains[{i}]");
            let axis_key = match dom {
                MutationDomainDoc::InitState { agent, param, .. } => {
                    format!("init_state:{agent}.{param}")
                }
                MutationDomainDoc::Update { agent, .. } => format!("update:{agent}"),
                MutationDomainDoc::Kernel { agent, .. } => format!("kernel:{agent}"),
                MutationDomainDoc::ActionPartition { node, .. } => {
                    format!("action_partition:node{node}")
                }
                MutationDomainDoc::EmissionOut { .. } => "emission_out".to_string(),
                MutationDomainDoc::EmissionBack { .. } => "emission_back".to_string(),
            };
            if !seen.insert(axis_key.clone()) {
                out.push(Violation::new(&path, format!("duplicate axis {axis_key}")));
            }
            match dom {
                MutationDomainDoc::InitState {
                    agent,
                    param,
                    values,
                } => {
                    match self.agents.iter().find(|a| a.id == *agent) {
                        None => out.push(Violation::new(&path, format!("unknown agent {agent}"))),
                        Some(a) => match a.init.params.get(param) {
                            None => out.push(Violation::new(
                                &path,
                                format!("agent {agent} declares no template parameter {param}"),
                            )),
                            Some(domain) => {
                                if values.is_empty() {
                                    out.push(Violation::new(&path, "empty value list"));
                                }
                                for v in values {
                                    if !domain.contains(v) {
                                        out.push(Violation::new(
                                        &path,
                                        format!("value {v:?} outside the declared domain of {param}"),
                                    ));
                                    }
                                }
                            }
                        },
                    }
                }
                MutationDomainDoc::Update { agent, candidates } => {
                    if !reg.agents.contains_key(agent) {
                        out.push(Violation::new(&path, format!("unknown agent {agent}")));
                    }
                    if candidates.is_empty() {
                        out.push(Violation::new(&path, "empty candidate list"));
                    }
                    for c in candidates {
                        if !reg.updates.contains_key(c) {
                            out.push(Violation::new(&path, format!("unknown update {c}")));
                        }
                    }
                }
                MutationDomainDoc::Kernel { agent, candidates } => {
                    let agent_space = self
                        .agents
                        .iter()
                        .find(|a| a.id == *agent)
                        .map(|a| &a.space);
                    if agent_space.is_none() {
                        out.push(Violation::new(&path, format!("unknown agent {agent}")));
                    }
                    if candidates.is_empty() {
                        out.push(Violation::new(&path, "empty candidate list"));
                    }
                    for c in candidates {
                        match reg.kernels.get(c) {
                            None => out.push(Violation::new(&path, format!("unknown kernel {c}"))),
                            Some((_, space_id)) => {
                                if let Some(expected) = agent_space {
                                    if space_id != expected {
                                        out.push(Violation::new(
                                            &path,
                                            format!(
                                                "kernel {c} is over space {space_id}, agent {agent} uses {expected}"
                                            ),
                                        ));
                                    }
                                }
                            }
                        }
                    }
                }
                MutationDomainDoc::ActionPartition { node, candidates } => {
                    match &self.topology {
                        TopologyDoc::Controlflow { nodes, .. } => {
                            if *node >= nodes.len() {
                                out.push(Violation::new(
                                    &path,
                                    format!("node {node} out of range ({} nodes)", nodes.len()),
                                ));
                            }
                        }
                        _ => out.push(Violation::new(
                            &path,
                            "action_partition mutations require a control-flow topology",
                        )),
                    }
                    if candidates.is_empty() {
                        out.push(Violation::new(&path, "empty candidate list"));
                    }
                    for set in candidates {
                        if set.is_empty() {
                            out.push(Violation::new(&path, "candidate allowed set is empty"));
                        }
                    }
                }
                MutationDomainDoc::EmissionOut { candidates }
                | MutationDomainDoc::EmissionBack { candidates } => {
                    if !matches!(self.topology, TopologyDoc::Hierarchical { .. }) {
                        out.push(Violation::new(
                            &path,
                            "emission mutations require a hierarchical topology",
                        ));
                    }
                    if candidates.is_empty() {
                        out.push(Violation::new(&path, "empty candidate list"));
                    }
                    for c in candidates {
                        if !reg.emissions.contains_key(c) {
                            out.push(Violation::new(&path, format!("unknown emission {c}")));
                        }
                    }
                }
            }
        }
    }

    fn build_registry(&self) -> Result<Registry> {
        let thoughts = ThoughtAlphabet::new(
            self.alphabets
                .thoughts
                .iter()
                .map(ThoughtId::new)
                .collect::<Result<Vec<_>>>()?,
        )?;
        let contexts = ContextAlphabet::new(
            self.alphabets
                .contexts
                .iter()
                .map(ContextId::new)
                .collect::<Result<Vec<_>>>()?,
        )?;
        let observations: BTreeSet<ObsId> = self
            .alphabets
            .observations
            .iter()
            .map(ObsId::new)
            .collect::<Result<_>>()?;
        let summaries: BTreeSet<SummaryId> = self
            .alphabets
            .summaries
            .iter()
            .map(SummaryId::new)
            .collect::<Result<_>>()?;

        unique_ids(
            "action space",
            self.action_spaces.iter().map(|s| s.id.as_str()),
        )?;
        unique_ids("kernel", self.kernels.iter().map(|k| k.id()))?;
        unique_ids("update", self.updates.iter().map(|u| u.id()))?;
        unique_ids("emission", self.emissions.iter().map(|e| e.id.as_str()))?;
        unique_ids("agent", self.agents.iter().map(|a| a.id.as_str()))?;

        let mut spaces = BTreeMap::new();
        for sdoc in &self.action_spaces {
            let path = format!("action_spaces.{}", sdoc.id);
            let mut class_args = Vec::new();
            let mut terminal = BTreeSet::new();
            for cdoc in &sdoc.classes {
                let class = ClassId::new(&cdoc.id)?;
                let mut args = Vec::new();
                for (arg, obs) in &cdoc.args {
                    let obs = ObsId::new(obs)?;
                    if !observations.contains(&obs) {
                        return Err(unresolved(format!("{path}.{}", cdoc.id), obs.to_string()));
                    }
                    args.push((ArgId::new(arg)?, obs));
                }
                if cdoc.terminal {
                    terminal.insert(class.clone());
                }
                class_args.push((class, args));
            }
            spaces.insert(
                sdoc.id.clone(),
                Arc::new(ActionSpace::new(class_args, terminal)?),
            );
        }

        let mut kernels: BTreeMap<String, (Arc<Kernel>, String)> = BTreeMap::new();
        for kdoc in &self.kernels {
            let (kernel, space_id) = self.build_kernel(kdoc, &spaces, &thoughts, &kernels)?;
            kernels.insert(kdoc.id().to_string(), (Arc::new(kernel), space_id));
        }

        let mut updates = BTreeMap::new();
        for udoc in &self.updates {
            updates.insert(
                udoc.id().to_string(),
                self.build_update(udoc, &thoughts, &contexts, &observations, &summaries)?,
            );
        }

        let mut emissions = BTreeMap::new();
        for edoc in &self.emissions {
            emissions.insert(edoc.id.clone(), self.build_emission(edoc, &contexts)?);
        }

        let mut agents = BTreeMap::new();
        for adoc in &self.agents {
            agents.insert(
                adoc.id.clone(),
                build_agent(adoc, &spaces, &kernels, &updates)?,
            );
        }

        Ok(Registry {
            thoughts,
            contexts,
            observations,
            summaries,
            kernels,
            updates,
            emissions,
            agents,
        })
    }

    fn build_kernel(
        &self,
        kdoc: &KernelDoc,
        spaces: &BTreeMap<String, Arc<ActionSpace>>,
        thoughts: &ThoughtAlphabet,
        kernels: &BTreeMap<String, (Arc<Kernel>, String)>,
    ) -> Result<(Kernel, String)> {
        match kdoc {
            KernelDoc::Tabular { id, space, table } => {
                let path = format!("kernels.{id}");
                let sp = spaces.get(space).ok_or_else(|| unresolved(&path, space))?;
                let table = build_action_table(table, sp, &path)?;
                Ok((Kernel::Tabular(TabularKernel { table }), space.clone()))
            }
            KernelDoc::React {
                id,
                space,
                thought_given_state,
                action_given_thought_state,
            } => {
                let path = format!("kernels.{id}");
                let sp = spaces.get(space).ok_or_else(|| unresolved(&path, space))?;
                let thought_table = build_thought_table(
                    thought_given_state,
                    thoughts,
                    &format!("{path}.thought_given_state"),
                )?;
                let mut per_thought = BTreeMap::new();
                for t in thoughts.members() {
                    let rows = action_given_thought_state.get(t.as_str()).ok_or_else(|| {
                        Error::BadDistribution {
                            path: format!("{path}.action_given_thought_state"),
                            reason: format!("missing table for thought {t}"),
                        }
                    })?;
                    per_thought.insert(
                        t.clone(),
                        build_action_table(rows, sp, &format!("{path}.{t}"))?,
                    );
                }
                for t in action_given_thought_state.keys() {
                    if !thoughts.contains(&ThoughtId::new(t)?) {
                        return Err(unresolved(format!("{path}.action_given_thought_state"), t));
                    }
                }
                Ok((
                    Kernel::ReAct(ReActKernel {
                        thought_given_state: thought_table,
                        action_given_thought_state: per_thought,
                    }),
                    space.clone(),
                ))
            }
            KernelDoc::Restricted { id, base, allowed } => {
                let path = format!("kernels.{id}");
                let (base_kernel, space_id) = kernels.get(base).ok_or_else(|| {
                    unresolved(&path, format!("{base} (bases must be declared first)"))
                })?;
                let sp = &spaces[space_id];
                let mut rows = BTreeMap::new();
                let mut stationary = None;
                for (key, refs) in allowed {
                    let mut set = BTreeSet::new();
                    for r in refs {
                        set.insert(sp.resolve(r).map_err(|_| unresolved(&path, r))?);
                    }
                    if set.is_empty() {
                        return Err(Error::BadDistribution {
                            path: path.clone(),
                            reason: format!("allowed set for {key} is empty"),
                        });
                    }
                    if key == "*" {
                        stationary = Some(set);
                    } else {
                        rows.insert(key.clone(), set);
                    }
                }
                Ok((
                    Kernel::Restricted(RestrictedKernel {
                        base: base_kernel.clone(),
                        allowed: StateTable::new(rows, stationary),
                    }),
                    space_id.clone(),
                ))
            }
        }
    }

    fn build_update(
        &self,
        udoc: &UpdateDoc,
        thoughts: &ThoughtAlphabet,
        contexts: &ContextAlphabet,
        observations: &BTreeSet<ObsId>,
        summaries: &BTreeSet<SummaryId>,
    ) -> Result<UpdateFn> {
        match udoc {
            UpdateDoc::Concat { .. } => Ok(UpdateFn::Concat),
            UpdateDoc::Summary { id, initial, map } => {
                let path = format!("updates.{id}");
                let mut initial_map = BTreeMap::new();
                for (c, s) in initial {
                    let c = ContextId::new(c)?;
                    if !contexts.contains(&c) {
                        return Err(unresolved(format!("{path}.initial"), c.to_string()));
                    }
                    let s = SummaryId::new(s)?;
                    if !summaries.contains(&s) {
                        return Err(unresolved(format!("{path}.initial"), s.to_string()));
                    }
                    initial_map.insert(c, s);
                }
                let mut transition = BTreeMap::new();
                for (key, next) in map {
                    let parts: Vec<&str> = key.split(',').collect();
                    if parts.len() != 3 {
                        return Err(Error::Syntax(format!(
                            "{path}.map: key {key:?} must be \"summary,thought,obs\""
                        )));
                    }
                    let s = SummaryId::new(parts[0])?;
                    if !summaries.contains(&s) {
                        return Err(unresolved(format!("{path}.map"), s.to_string()));
                    }
                    let slot = parse_slot(parts[1], thoughts, &format!("{path}.map"))?;
                    let o = ObsId::new(parts[2])?;
                    if !observations.contains(&o) {
                        return Err(unresolved(format!("{path}.map"), o.to_string()));
                    }
                    let next = SummaryId::new(next)?;
                    if !summaries.contains(&next) {
                        return Err(unresolved(format!("{path}.map"), next.to_string()));
                    }
                    transition.insert((s, slot, o), next);
                }
                Ok(UpdateFn::Summary {
                    map: transition,
                    initial: initial_map,
                })
            }
            UpdateDoc::Selective { id, selector } => {
                let path = format!("updates.{id}");
                let mut sel = BTreeMap::new();
                for (key, (slot_key, value)) in selector {
                    let parts: Vec<&str> = key.split(',').collect();
                    if parts.len() != 2 {
                        return Err(Error::Syntax(format!(
                            "{path}.selector: key {key:?} must be \"thought,obs\""
                        )));
                    }
                    let slot = parse_slot(parts[0], thoughts, &format!("{path}.selector"))?;
                    let o = ObsId::new(parts[1])?;
                    if !observations.contains(&o) {
                        return Err(unresolved(format!("{path}.selector"), o.to_string()));
                    }
                    sel.insert((slot, o), (KeyId::new(slot_key)?, ValueId::new(value)?));
                }
                Ok(UpdateFn::Selective { selector: sel })
            }
        }
    }

    fn build_emission(
        &self,
        edoc: &EmissionDoc,
        contexts: &ContextAlphabet,
    ) -> Result<EmissionEntry> {
        let path = format!("emissions.{}", edoc.id);
        let mut codomain = Vec::new();
        for c in &edoc.contexts {
            let c = ContextId::new(c)?;
            if !contexts.contains(&c) {
                return Err(unresolved(&path, c.to_string()));
            }
            codomain.push(c);
        }
        codomain.sort();
        codomain.dedup();
        let mut rows = Vec::new();
        let mut stationary = None;
        for (key, row) in &edoc.rows {
            let mut pairs = Vec::new();
            for (c, p) in row {
                pairs.push((ContextId::new(c)?, *p));
            }
            let dist = Distribution::new(pairs, &format!("{path}.rows.{key}"))?;
            if dist.support() != codomain.as_slice() {
                return Err(Error::BadDistribution {
                    path: format!("{path}.rows.{key}"),
                    reason: "row must assign a probability to every codomain context".into(),
                });
            }
            if key == "*" {
                stationary = Some(dist);
            } else {
                rows.push((key.clone(), dist));
            }
        }
        Ok(EmissionEntry {
            codomain,
            rows,
            stationary,
        })
    }

    fn build_topology(&self, tdoc: &TopologyDoc, reg: &Registry, path: &str) -> Result<Topology> {
        match tdoc {
            TopologyDoc::Chain { agent } => {
                let agent = reg
                    .agents
                    .get(agent)
                    .ok_or_else(|| unresolved(path, agent))?;
                Ok(Topology::Chain(agent.clone()))
            }
            TopologyDoc::Controlflow {
                agent,
                nodes,
                edges,
                start,
            } => {
                let base = reg
                    .agents
                    .get(agent)
                    .ok_or_else(|| unresolved(path, agent))?
                    .clone();
                let base_space_id = self
                    .agents
                    .iter()
                    .find(|a| a.id == *agent)
                    .map(|a| a.space.clone())
                    .expect("agent resolved above");
                let mut flow_nodes = Vec::new();
                for (i, ndoc) in nodes.iter().enumerate() {
                    let npath = format!("{path}.nodes[{i}]");
                    let (kernel, kspace) = reg
                        .kernels
                        .get(&ndoc.kernel)
                        .ok_or_else(|| unresolved(&npath, &ndoc.kernel))?;
                    if *kspace != base_space_id {
                        return Err(Error::InvalidGoal(format!(
                            "{npath}: node kernel is over space {kspace}, base agent uses {base_space_id}"
                        )));
                    }
                    let mut allowed = BTreeSet::new();
                    for r in &ndoc.allowed {
                        allowed.insert(base.space.resolve(r).map_err(|_| unresolved(&npath, r))?);
                    }
                    let init = match &ndoc.init {
                        Some(idoc) => Some(build_init(idoc, &npath)?),
                        None => None,
                    };
                    let update = match &ndoc.update {
                        Some(uid) => Some(
                            reg.updates
                                .get(uid)
                                .cloned()
                                .ok_or_else(|| unresolved(&npath, uid))?,
                        ),
                        None => None,
                    };
                    flow_nodes.push(FlowNode {
                        kernel: kernel.clone(),
                        allowed,
                        init,
                        update,
                    });
                }
                let mut edge_map = BTreeMap::new();
                for (from, per_class) in edges {
                    let from: usize = from.parse().map_err(|_| {
                        Error::Syntax(format!("{path}.edges: node index {from:?} is not a number"))
                    })?;
                    for (class, to) in per_class {
                        edge_map.insert((from, ClassId::new(class)?), *to);
                    }
                }
                Ok(Topology::ControlFlow(ControlFlowGraph {
                    base,
                    nodes: flow_nodes,
                    edges: edge_map,
                    start: *start,
                }))
            }
            TopologyDoc::Parallel {
                left,
                right,
                recombiner,
                tail,
            } => {
                let left = self.build_topology(left, reg, &format!("{path}.left"))?;
                let right = self.build_topology(right, reg, &format!("{path}.right"))?;
                let tail = match tail {
                    Some(t) => Some(Box::new(self.build_topology(
                        t,
                        reg,
                        &format!("{path}.tail"),
                    )?)),
                    None => None,
                };
                let recombiner = build_recombiner(recombiner, reg, &format!("{path}.recombiner"))?;
                Ok(Topology::Parallel(ParallelNode {
                    left: Box::new(left),
                    right: Box::new(right),
                    recombiner,
                    tail,
                }))
            }
            TopologyDoc::Hierarchical {
                outer,
                emission_out,
                inner,
                emission_back,
                resume,
                resume_carries_history,
            } => {
                let outer_agent = reg
                    .agents
                    .get(outer)
                    .ok_or_else(|| unresolved(format!("{path}.outer"), outer))?
                    .clone();
                let resume_agent = reg
                    .agents
                    .get(resume)
                    .ok_or_else(|| unresolved(format!("{path}.resume"), resume))?
                    .clone();
                let inner_topology = self.build_topology(inner, reg, &format!("{path}.inner"))?;

                let out_entry = reg
                    .emissions
                    .get(emission_out)
                    .ok_or_else(|| unresolved(format!("{path}.emission_out"), emission_out))?;
                let outer_spaces = vec![outer_agent.space.clone()];
                let e_out = instantiate_emission(
                    out_entry,
                    &outer_spaces,
                    &format!("{path}.emission_out"),
                )?;

                let back_entry = reg
                    .emissions
                    .get(emission_back)
                    .ok_or_else(|| unresolved(format!("{path}.emission_back"), emission_back))?;
                let inner_spaces = topology_spaces(&inner_topology);
                let e_back = instantiate_emission(
                    back_entry,
                    &inner_spaces,
                    &format!("{path}.emission_back"),
                )?;

                Ok(Topology::Hierarchical(Box::new(HierarchicalNode {
                    outer: outer_agent,
                    emission_out: e_out,
                    inner: Box::new(inner_topology),
                    emission_back: e_back,
                    resume: resume_agent,
                    resume_carries_history: *resume_carries_history,
                })))
            }
        }
    }
}

fn parse_slot(raw: &str, thoughts: &ThoughtAlphabet, path: &str) -> Result<ThoughtSlot> {
    if raw == "_" {
        return Ok(ThoughtSlot::None);
    }
    let t = ThoughtId::new(raw)?;
    if !thoughts.contains(&t) {
        return Err(unresolved(path, t.to_string()));
    }
    Ok(ThoughtSlot::Thought(t))
}

fn build_action_table(
    rows: &BTreeMap<String, RowDoc>,
    space: &Arc<ActionSpace>,
    path: &str,
) -> Result<StateTable<Distribution<ActionId>>> {
    let all_actions = space.action_ids();
    let mut table = BTreeMap::new();
    let mut stationary = None;
    for (key, row) in rows {
        let row_path = format!("{path}.{key}");
        let mut pairs = Vec::new();
        for (r, p) in row {
            let action = space.resolve(r).map_err(|_| unresolved(&row_path, r))?;
            pairs.push((action, *p));
        }
        let dist = Distribution::new(pairs, &row_path)?;
        if dist.support() != all_actions.as_slice() {
            return Err(Error::BadDistribution {
                path: row_path,
                reason: "row must assign a probability to every action in the space".into(),
            });
        }
        if key == "*" {
            stationary = Some(dist);
        } else {
            table.insert(key.clone(), dist);
        }
    }
    Ok(StateTable::new(table, stationary))
}

fn build_thought_table(
    rows: &BTreeMap<String, RowDoc>,
    thoughts: &ThoughtAlphabet,
    path: &str,
) -> Result<StateTable<Distribution<ThoughtId>>> {
    let mut table = BTreeMap::new();
    let mut stationary = None;
    for (key, row) in rows {
        let row_path = format!("{path}.{key}");
        let mut pairs = Vec::new();
        for (t, p) in row {
            let t = ThoughtId::new(t)?;
            if !thoughts.contains(&t) {
                return Err(unresolved(&row_path, t.to_string()));
            }
            pairs.push((t, *p));
        }
        let dist = Distribution::new(pairs, &row_path)?;
        if dist.support() != thoughts.members() {
            return Err(Error::BadDistribution {
                path: row_path,
                reason: "row must assign a probability to every thought".into(),
            });
        }
        if key == "*" {
            stationary = Some(dist);
        } else {
            table.insert(key.clone(), dist);
        }
    }
    Ok(StateTable::new(table, stationary))
}

fn build_init(idoc: &InitDoc, path: &str) -> Result<InitBuilder> {
    let mut template = Vec::new();
    for seg in &idoc.template {
        template.push(match seg {
            TemplateSegDoc::Context => TemplateSegment::ContextSlot,
            TemplateSegDoc::Lit(s) => TemplateSegment::Literal(s.clone()),
            TemplateSegDoc::Param(p) => TemplateSegment::Param(ParamId::new(p)?),
        });
    }
    let mut params = BTreeMap::new();
    for (p, domain) in &idoc.params {
        if domain.is_empty() {
            return Err(Error::BadBinding {
                param: p.clone(),
                reason: format!("{path}: parameter domain is empty"),
            });
        }
        params.insert(ParamId::new(p)?, domain.clone());
    }
    InitBuilder::new(template, params)
}

fn build_agent(
    adoc: &AgentDoc,
    spaces: &BTreeMap<String, Arc<ActionSpace>>,
    kernels: &BTreeMap<String, (Arc<Kernel>, String)>,
    updates: &BTreeMap<String, UpdateFn>,
) -> Result<AgentSpec> {
    let path = format!("agents.{}", adoc.id);
    let space = spaces
        .get(&adoc.space)
        .ok_or_else(|| unresolved(&path, &adoc.space))?
        .clone();
    let (kernel, kernel_space) = kernels
        .get(&adoc.kernel)
        .ok_or_else(|| unresolved(&path, &adoc.kernel))?;
    if *kernel_space != adoc.space {
        return Err(Error::InvalidGoal(format!(
            "{path}: kernel {} is over space {kernel_space}, agent declares {}",
            adoc.kernel, adoc.space
        )));
    }
    let update = updates
        .get(&adoc.update)
        .cloned()
        .ok_or_else(|| unresolved(&path, &adoc.update))?;
    let init = build_init(&adoc.init, &path)?;
    let mut bindings = BTreeMap::new();
    for (p, v) in &adoc.bindings {
        bindings.insert(ParamId::new(p)?, v.clone());
    }
    Ok(AgentSpec {
        name: adoc.id.clone(),
        kernel: kernel.clone(),
        update,
        init,
        bindings,
        horizon: adoc.horizon as usize,
        space,
    })
}

fn build_recombiner(rdoc: &RecombinerDoc, reg: &Registry, path: &str) -> Result<Recombiner> {
    match rdoc {
        RecombinerDoc::Concat => Ok(Recombiner::ConcatHistories),
        RecombinerDoc::Table(rows) => {
            let mut map = BTreeMap::new();
            for (key, sdoc) in rows {
                let Some((left, right)) = key.split_once("||") else {
                    return Err(Error::Syntax(format!(
                        "{path}: key {key:?} must be \"left key||right key\""
                    )));
                };
                map.insert(
                    (left.to_string(), right.to_string()),
                    build_state(sdoc, reg, path)?,
                );
            }
            Ok(Recombiner::Table(map))
        }
    }
}

fn build_state(sdoc: &StateDoc, reg: &Registry, path: &str) -> Result<State> {
    match sdoc {
        StateDoc::History(segs) => {
            let mut out = Vec::new();
            for seg in segs {
                out.push(match seg {
                    SegmentDoc::Lit(s) => Segment::Literal(s.clone()),
                    SegmentDoc::Ctx(c) => {
                        let c = ContextId::new(c)?;
                        if !reg.contexts.contains(&c) {
                            return Err(unresolved(path, c.to_string()));
                        }
                        Segment::Context(c)
                    }
                    SegmentDoc::T(t) => {
                        let t = ThoughtId::new(t)?;
                        if !reg.thoughts.contains(&t) {
                            return Err(unresolved(path, t.to_string()));
                        }
                        Segment::Thought(t)
                    }
                    SegmentDoc::O(o) => {
                        let o = ObsId::new(o)?;
                        if !reg.observations.contains(&o) {
                            return Err(unresolved(path, o.to_string()));
                        }
                        Segment::Observation(o)
                    }
                });
            }
            Ok(State::History(out))
        }
        StateDoc::Summary(s) => {
            let s = SummaryId::new(s)?;
            if !reg.summaries.contains(&s) {
                return Err(unresolved(path, s.to_string()));
            }
            Ok(State::Summary(s))
        }
        StateDoc::Memory(m) => {
            let mut out = BTreeMap::new();
            for (k, v) in m {
                out.insert(KeyId::new(k)?, ValueId::new(v)?);
            }
            Ok(State::Memory(out))
        }
    }
}

/// Every action space appearing in a topology, outermost first.
fn topology_spaces(t: &Topology) -> Vec<Arc<ActionSpace>> {
    match t {
        Topology::Chain(a) => vec![a.space.clone()],
        Topology::ControlFlow(cf) => vec![cf.base.space.clone()],
        Topology::Parallel(p) => {
            let mut out = topology_spaces(&p.left);
            out.extend(topology_spaces(&p.right));
            if let Some(tail) = &p.tail {
                out.extend(topology_spaces(tail));
            }
            out
        }
        Topology::Hierarchical(h) => {
            let mut out = vec![h.outer.space.clone()];
            out.extend(topology_spaces(&h.inner));
            out.push(h.resume.space.clone());
            out
        }
    }
}

/// Resolve an action reference against a list of candidate spaces; exactly
/// one resolution must exist.
fn resolve_in_spaces(reference: &str, spaces: &[Arc<ActionSpace>], path: &str) -> Result<ActionId> {
    let mut found: BTreeSet<ActionId> = BTreeSet::new();
    for sp in spaces {
        if let Ok(a) = sp.resolve(reference) {
            found.insert(a);
        }
    }
    match found.len() {
        1 => Ok(found.into_iter().next().expect("one element")),
        0 => Err(unresolved(path, reference)),
        _ => Err(unresolved(
            path,
            format!("{reference} (ambiguous across action spaces)"),
        )),
    }
}

fn instantiate_emission(
    entry: &EmissionEntry,
    emitting_spaces: &[Arc<ActionSpace>],
    path: &str,
) -> Result<ContextEmission> {
    let mut rows = BTreeMap::new();
    for (raw_key, dist) in &entry.rows {
        let mut actions = Vec::new();
        if !raw_key.is_empty() {
            for part in raw_key.split(',') {
                actions.push(resolve_in_spaces(part, emitting_spaces, path)?);
            }
        }
        rows.insert(crate::compose::seq_key(&actions), dist.clone());
    }
    ContextEmission::new(entry.codomain.clone(), rows, entry.stationary.clone(), path)
}

fn resolve_goal(goal: &GoalDoc, topology: &Topology, path: &str) -> Result<GoalSpec> {
    match (goal, topology) {
        (GoalDoc::Seq(refs), Topology::Chain(agent)) => {
            Ok(GoalSpec::Seq(resolve_seq(refs, &agent.space, path)?))
        }
        (GoalDoc::Seq(refs), Topology::ControlFlow(cf)) => {
            Ok(GoalSpec::Seq(resolve_seq(refs, &cf.base.space, path)?))
        }
        (GoalDoc::Parallel { left, right, tail }, Topology::Parallel(p)) => {
            let tail_goal = match (tail, &p.tail) {
                (Some(g), Some(t)) => Some(Box::new(resolve_goal(g, t, &format!("{path}.tail"))?)),
                (None, _) => None,
                (Some(_), None) => {
                    return Err(Error::InvalidGoal(format!(
                        "{path}: goal names a tail stage but the topology has none"
                    )))
                }
            };
            Ok(GoalSpec::Parallel {
                left: Box::new(resolve_goal(left, &p.left, &format!("{path}.left"))?),
                right: Box::new(resolve_goal(right, &p.right, &format!("{path}.right"))?),
                tail: tail_goal,
            })
        }
        (
            GoalDoc::Hierarchical {
                outer,
                inner,
                resume,
            },
            Topology::Hierarchical(h),
        ) => Ok(GoalSpec::Hierarchical {
            outer: resolve_seq(outer, &h.outer.space, &format!("{path}.outer"))?,
            inner: Box::new(resolve_goal(inner, &h.inner, &format!("{path}.inner"))?),
            resume: resolve_seq(resume, &h.resume.space, &format!("{path}.resume"))?,
        }),
        _ => Err(Error::InvalidGoal(format!(
            "{path}: goal shape does not match the topology"
        ))),
    }
}

fn resolve_seq(refs: &[String], space: &Arc<ActionSpace>, path: &str) -> Result<Vec<ActionId>> {
    refs.iter()
        .map(|r| space.resolve(r).map_err(|_| unresolved(path, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
  "version": "1",
  "alphabets": {
    "thoughts": ["t0"],
    "contexts": ["c0"],
    "observations": ["oA", "oB"]
  },
  "action_spaces": [
    {"id": "main", "classes": [
      {"id": "A", "args": {"x": "oA"}},
      {"id": "B", "args": {"x": "oB"}}
    ]}
  ],
  "kernels": [
    {"tabular": {"id": "k", "space": "main", "table": {"*": {"A": 0.25, "B": 0.75}}}}
  ],
  "updates": [{"concat": {"id": "u"}}],
  "agents": [
    {"id": "m", "kernel": "k", "update": "u", "space": "main",
     "init": {"template": ["context"]}, "horizon": 1}
  ],
  "topology": {"chain": {"agent": "m"}},
  "objective": {
    "goal": {"seq": ["A"]},
    "context": "c0",
    "lambda": 0.0,
    "cost_model": {"w_msg": 1.0, "w_ctx": 0.1, "w_depth": 0.5}
  }
}"#
        .to_string()
    }

    #[test]
    fn minimal_document_parses_and_compiles() {
        let doc = parse_scenario(&minimal()).unwrap();
        let compiled = doc.compile().unwrap();
        assert_eq!(compiled.enumeration_budget, DEFAULT_ENUMERATION_BUDGET);
        assert_eq!(compiled.optimizer_budget, 64);
    }

    #[test]
    fn unnormalized_row_reports_sum_and_path() {
        let text = minimal().replace("\"A\": 0.25, \"B\": 0.75", "\"A\": 0.6, \"B\": 0.5");
        let err = parse_scenario(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("kernels.k"), "{msg}");
        assert!(msg.contains("1.1"), "{msg}");
    }

    #[test]
    fn undeclared_goal_action_is_unresolved() {
        let text = minimal().replace("\"seq\": [\"A\"]", "\"seq\": [\"Z\"]");
        let err = parse_scenario(&text).unwrap_err();
        match err {
            Error::UnresolvedRef { id, .. } => assert!(id.contains('Z'), "{id}"),
            other => panic!("expected unresolved reference, got {other}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = minimal().replace("\"version\": \"1\",", "\"version\": \"1\", \"extra\": 3,");
        assert!(matches!(parse_scenario(&text), Err(Error::Syntax(_))));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = minimal().replace("\"version\": \"1\"", "\"version\": \"2\"");
        assert!(matches!(parse_scenario(&text), Err(Error::Version { .. })));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_scenario("{ nope }").unwrap_err();
        match err {
            Error::Syntax(msg) => assert!(msg.contains("line 1"), "{msg}"),
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn missing_probability_is_rejected_not_defaulted() {
        // Drop B from the row: the row must name every action in the space.
        let text = minimal().replace("{\"A\": 0.25, \"B\": 0.75}", "{\"A\": 1.0}");
        let err = parse_scenario(&text).unwrap_err();
        assert!(
            err.to_string().contains("every action"),
            "unexpected error: {err}"
        );
    }

    #[test]
    fn zero_horizon_fails_validation() {
        let text = minimal().replace("\"horizon\": 1", "\"horizon\": 0");
        match parse_scenario(&text) {
            Err(Error::Invalid(violations)) => {
                assert!(violations.iter().any(|v| v.message.contains("horizon")));
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn lambda_defaults_when_omitted() {
        let text = minimal().replace("\"lambda\": 0.0,\n", "");
        let doc = parse_scenario(&text).unwrap();
        assert_eq!(doc.objective.lambda, 0.01);
    }

    #[test]
    fn round_trips_through_serialization() {
        let doc = parse_scenario(&minimal()).unwrap();
        let text = serialize_scenario(&doc);
        let again = parse_scenario(&text).unwrap();
        assert_eq!(doc, again);
    }
}
