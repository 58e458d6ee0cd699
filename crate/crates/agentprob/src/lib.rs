//! A discrete, exactly computable probability engine for composed agent
//! architectures.
//!
//! Agents are probability kernels over finite action universes. They
//! compose into chains, control-flow graphs, parallel branches, and
//! hierarchical delegations with context handoffs. The engine computes
//! goal-sequence probabilities exactly (full enumeration over latent
//! thoughts and handed-off contexts), estimates them by seeded Monte Carlo
//! rollout, and optimizes the degrees of freedom each architecture strategy
//! exposes under a collaboration-cost-regularized objective.
//!
//! Everything is finite and deterministic: alphabets are enumerated,
//! observations are functions of actions, tie-breaking is lexicographic,
//! and sampling is addressed by counters, so every number this crate
//! produces is reproducible bit-for-bit.

pub mod compose;
pub mod dist;
pub mod error;
pub mod ids;
pub mod inference;
pub mod kernel;
pub mod model;
pub mod optimize;
pub mod report;
pub mod sample;
pub mod scenario;

pub use compose::{
    compose_hierarchical, compose_parallel, seq_key, validate_topology, AgentSpec, ContextEmission,
    ControlFlowGraph, FlowNode, GoalQuery, GoalSpec, HierarchicalNode, ParallelNode, Recombiner,
    System, Topology,
};
pub use dist::Distribution;
pub use error::{Error, Result, Violation};
pub use ids::{
    ActionId, ArgId, ClassId, ContextId, KeyId, ObsId, ParamId, SummaryId, ThoughtId, ValueId,
};
pub use inference::{
    exact_goal_probability, prefix_probabilities, term_count, DEFAULT_ENUMERATION_BUDGET,
};
pub use kernel::{
    marginalize_thoughts, restrict, Kernel, ReActKernel, RestrictedKernel, StateTable,
    TabularKernel,
};
pub use model::{
    apply_update, build_initial_state, Action, ActionSpace, ContextAlphabet, InitBuilder, Segment,
    State, TemplateSegment, ThoughtAlphabet, ThoughtSlot, UpdateFn,
};
pub use optimize::{
    collab_cost, dof_handles, optimize_context, optimize_dof, optimize_return_context,
    regularized_objective, CandidateEval, CostModel, DofHandle, DofOutcome, Objective,
    StrategyKind,
};
pub use report::{emit_report, format_sig12, ReportRow, REPORT_HEADER};
pub use sample::{estimate_goal_probability, sample_trajectory, Estimate, Trace, TraceStep};
pub use scenario::{parse_scenario, serialize_scenario, Compiled, ScenarioDoc, FORMAT_VERSION};
