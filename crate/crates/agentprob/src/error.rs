//! Engine-wide error type.

use thiserror::Error;

/// One finding produced by topology or scenario validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Dotted path to the offending element, e.g. `kernels.k1.table.h[c=c0]`.
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad identifier {id:?}: {reason}")]
    BadIdentifier { id: String, reason: String },

    #[error("unknown context {0:?}")]
    UnknownContext(String),

    #[error("parameter {param:?}: {reason}")]
    BadBinding { param: String, reason: String },

    #[error("update/state form mismatch: {update_kind} update applied to {state_form} state")]
    FormMismatch {
        update_kind: &'static str,
        state_form: &'static str,
    },

    #[error("no {what} transition for {key}")]
    MissingTransition { what: &'static str, key: String },

    #[error("distribution row {path}: {reason}")]
    BadDistribution { path: String, reason: String },

    #[error("state not covered by kernel table: {key}")]
    StateNotCovered { key: String },

    #[error("dead-end node: allowed set {allowed} receives zero mass at state {key}")]
    DeadEnd { allowed: String, key: String },

    #[error("emission has no row for action sequence {key}")]
    EmissionGap { key: String },

    #[error("recombiner has no entry for final-state pair ({left}, {right})")]
    RecombinerGap { left: String, right: String },

    #[error("enumeration budget exceeded: {terms} terms > budget {budget}")]
    BudgetExceeded { terms: u128, budget: u64 },

    #[error("DOF violation: handle {handle} is not optimizable under strategy {strategy}")]
    DofViolation { handle: String, strategy: String },

    #[error("invalid goal: {0}")]
    InvalidGoal(String),

    #[error("optimizer budget must be at least 1")]
    ZeroBudget,

    #[error("operation requires a hierarchical topology")]
    NotHierarchical,

    #[error("sample count must be at least 1")]
    ZeroSamples,

    #[error("regularization weight must be non-negative, got {0}")]
    NegativeLambda(f64),

    #[error("scenario syntax error: {0}")]
    Syntax(String),

    #[error("unresolved reference at {path}: {id:?}")]
    UnresolvedRef { path: String, id: String },

    #[error("unsupported scenario version {found:?}, expected {expected:?}")]
    Version { found: String, expected: String },

    #[error("scenario invalid ({} violation(s)):\n{}", .0.len(), render_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn render_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;
