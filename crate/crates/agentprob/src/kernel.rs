//! Stochastic kernels P(a|s): tabular, thought-latent, and restricted.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::ids::{ActionId, ThoughtId};
use crate::model::State;

/// A table of rows indexed by canonical state key, with an optional
/// stationary row (spelled `*` in scenarios) that applies to every state.
/// Exact keys take precedence over the stationary row.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTable<T> {
    rows: BTreeMap<String, T>,
    stationary: Option<T>,
}

impl<T> StateTable<T> {
    pub fn new(rows: BTreeMap<String, T>, stationary: Option<T>) -> Self {
        Self { rows, stationary }
    }

    pub fn stationary(value: T) -> Self {
        Self {
            rows: BTreeMap::new(),
            stationary: Some(value),
        }
    }

    pub fn lookup(&self, state: &State) -> Result<&T> {
        // Purely stationary tables are the common case; skip building the
        // canonical key for them.
        if self.rows.is_empty() {
            if let Some(row) = &self.stationary {
                return Ok(row);
            }
        }
        self.get(&state.key())
    }

    pub fn get(&self, key: &str) -> Result<&T> {
        self.rows
            .get(key)
            .or(self.stationary.as_ref())
            .ok_or_else(|| Error::StateNotCovered {
                key: key.to_string(),
            })
    }

    pub fn covers(&self, key: &str) -> bool {
        self.stationary.is_some() || self.rows.contains_key(key)
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = (&String, &T)> {
        self.rows.iter()
    }

    pub fn stationary_row(&self) -> Option<&T> {
        self.stationary.as_ref()
    }
}

/// The inference functional: a conditional distribution over actions given a
/// state, possibly factored through latent thoughts or filtered by an
/// allowed-action set.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Tabular(TabularKernel),
    ReAct(ReActKernel),
    Restricted(RestrictedKernel),
}

/// Direct rows P(a|s); the identity functional with no latent structure.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularKernel {
    pub table: StateTable<Distribution<ActionId>>,
}

/// Thought-latent rows: P(t|s) and P(a|t,s).
#[derive(Debug, Clone, PartialEq)]
pub struct ReActKernel {
    pub thought_given_state: StateTable<Distribution<ThoughtId>>,
    pub action_given_thought_state: BTreeMap<ThoughtId, StateTable<Distribution<ActionId>>>,
}

/// A base kernel filtered to an allowed action subset per state and
/// renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedKernel {
    pub base: Arc<Kernel>,
    pub allowed: StateTable<BTreeSet<ActionId>>,
}

/// One atomic step choice: an optional latent thought, the chosen action,
/// and the joint probability of that (thought, action) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOption {
    pub thought: Option<ThoughtId>,
    pub action: ActionId,
    pub prob: f64,
}

impl Kernel {
    /// Whether steps through this kernel draw a latent thought.
    pub fn has_thoughts(&self) -> bool {
        match self {
            Kernel::Tabular(_) => false,
            Kernel::ReAct(_) => true,
            Kernel::Restricted(r) => r.base.has_thoughts(),
        }
    }

    /// Enumerate the joint (thought, action) options at `state`, in canonical
    /// order, restricted and renormalized where applicable. Zero-probability
    /// options are omitted.
    pub fn step_options(&self, state: &State) -> Result<Vec<StepOption>> {
        match self {
            Kernel::Tabular(k) => {
                let row = k.table.lookup(state)?;
                Ok(row
                    .iter()
                    .filter(|(_, p)| *p > 0.0)
                    .map(|(a, p)| StepOption {
                        thought: None,
                        action: a.clone(),
                        prob: p,
                    })
                    .collect())
            }
            Kernel::ReAct(k) => {
                let thoughts = k.thought_given_state.lookup(state)?;
                let mut options = Vec::new();
                for (t, pt) in thoughts.iter() {
                    if pt <= 0.0 {
                        continue;
                    }
                    let table = k.action_given_thought_state.get(t).ok_or_else(|| {
                        Error::MissingTransition {
                            what: "action_given_thought_state",
                            key: t.to_string(),
                        }
                    })?;
                    let actions = table.lookup(state)?;
                    for (a, pa) in actions.iter() {
                        if pa <= 0.0 {
                            continue;
                        }
                        options.push(StepOption {
                            thought: Some(t.clone()),
                            action: a.clone(),
                            prob: pt * pa,
                        });
                    }
                }
                Ok(options)
            }
            Kernel::Restricted(k) => {
                let allowed = k.allowed.lookup(state)?;
                let base = k.base.step_options(state)?;
                let kept: Vec<StepOption> = base
                    .into_iter()
                    .filter(|opt| allowed.contains(&opt.action))
                    .collect();
                let z: f64 = kept.iter().map(|o| o.prob).sum();
                if z <= 0.0 {
                    let names: Vec<String> = allowed.iter().map(|a| a.to_string()).collect();
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

    /// Every action id this kernel can emit from some state: the union of
    /// its row supports, filtered by the allowed sets for restricted
    /// kernels. Defines the partition a component occupies.
    pub fn action_support(&self) -> BTreeSet<ActionId> {
        fn table_support(t: &StateTable<Distribution<ActionId>>) -> BTreeSet<ActionId> {
            let mut out = BTreeSet::new();
            for (_, d) in t.iter_rows() {
                out.extend(d.support().iter().cloned());
            }
            if let Some(d) = t.stationary_row() {
                out.extend(d.support().iter().cloned());
            }
            out
        }
        match self {
            Kernel::Tabular(k) => table_support(&k.table),
            Kernel::ReAct(k) => {
                let mut out = BTreeSet::new();
                for t in k.action_given_thought_state.values() {
                    out.extend(table_support(t));
                }
                out
            }
            Kernel::Restricted(k) => {
                let mut allowed_union = BTreeSet::new();
                for (_, set) in k.allowed.iter_rows() {
                    allowed_union.extend(set.iter().cloned());
                }
                if let Some(set) = k.allowed.stationary_row() {
                    allowed_union.extend(set.iter().cloned());
                }
                k.base
                    .action_support()
                    .intersection(&allowed_union)
                    .cloned()
                    .collect()
            }
        }
    }

    /// The action distribution P(a|s). For thought-latent kernels this is
    /// the thought-marginal.
    pub fn action_distribution(&self, state: &State) -> Result<Distribution<ActionId>> {
        match self {
            Kernel::Tabular(k) => Ok(k.table.lookup(state)?.clone()),
            Kernel::ReAct(k) => marginalize_thoughts(k, state),
            Kernel::Restricted(k) => {
                let base = k.base.action_distribution(state)?;
                let allowed = k.allowed.lookup(state)?;
                base.restricted(allowed, &state.key())
            }
        }
    }
}

/// P(a|s) = Σ_t P(a|t,s)·P(t|s).
pub fn marginalize_thoughts(k: &ReActKernel, state: &State) -> Result<Distribution<ActionId>> {
    let thoughts = k.thought_given_state.lookup(state)?;
    let mut components = Vec::new();
    for (t, pt) in thoughts.iter() {
        let table =
            k.action_given_thought_state
                .get(t)
                .ok_or_else(|| Error::MissingTransition {
                    what: "action_given_thought_state",
                    key: t.to_string(),
                })?;
        components.push((pt, table.lookup(state)?));
    }
    Ok(Distribution::mixture(&components))
}

/// Restriction of a kernel's action distribution at one state:
/// P'(a|s) = P(a|s)·1[a ∈ allowed] / Z.
pub fn restrict(
    kernel: &Kernel,
    allowed: &BTreeSet<ActionId>,
    state: &State,
) -> Result<Distribution<ActionId>> {
    kernel
        .action_distribution(state)?
        .restricted(allowed, &state.key())
}
