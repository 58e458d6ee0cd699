//! Exact goal-sequence probabilities by depth-first enumeration over every
//! latent assignment (thoughts and handed-off contexts).

use std::collections::BTreeMap;

use crate::compose::{
    carry_state, chain_view, ChainView, GoalQuery, GoalSpec, StartRef, System, Topology,
};
use crate::error::{Error, Result};
use crate::ids::{ActionId, ContextId};
use crate::model::State;

/// Default cap on enumeration leaf terms.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

/// Chains longer than this accumulate their path products in log space.
const LOG_SPACE_THRESHOLD: usize = 32;

/// Per-path product accumulator; switches representation for long chains to
/// avoid underflow, converting back to linear for reporting.
#[derive(Clone, Copy)]
struct ProductAcc {
    log_space: bool,
    value: f64,
}

impl ProductAcc {
    fn for_len(len: usize) -> Self {
        let log_space = len > LOG_SPACE_THRESHOLD;
        ProductAcc {
            log_space,
            value: if log_space { 0.0 } else { 1.0 },
        }
    }

    fn times(self, p: f64) -> Self {
        ProductAcc {
            log_space: self.log_space,
            value: if self.log_space {
                self.value + p.ln()
            } else {
                self.value * p
            },
        }
    }

    fn linear(self) -> f64 {
        if self.log_space {
            self.value.exp()
        } else {
            self.value
        }
    }
}

/// Exact probability that the system produces the goal action sequence from
/// the query context: the finite sum over all latent assignments of the
/// product of kernel, emission, and restriction factors.
pub fn exact_goal_probability(system: &System, query: &GoalQuery, budget: u64) -> Result<f64> {
    check_goal_actions(&system.topology, &query.goal)?;
    let terms = term_count(system, &system.topology, &query.goal);
    if terms > budget as u128 {
        return Err(Error::BudgetExceeded { terms, budget });
    }
    eval_goal(
        system,
        &system.topology,
        StartRef::Context(&query.context),
        &query.context,
        &query.goal,
    )
}

fn check_seq_actions(space: &crate::model::ActionSpace, actions: &[ActionId]) -> Result<()> {
    for a in actions {
        if !space.contains_action(a) {
            return Err(Error::InvalidGoal(format!(
                "action {a} is not in this partition's action space"
            )));
        }
    }
    Ok(())
}

fn check_goal_actions(t: &Topology, goal: &GoalSpec) -> Result<()> {
    match (t, goal) {
        (Topology::Chain(a), GoalSpec::Seq(v)) => check_seq_actions(&a.space, v),
        (Topology::ControlFlow(cf), GoalSpec::Seq(v)) => check_seq_actions(&cf.base.space, v),
        (Topology::Parallel(p), GoalSpec::Parallel { left, right, tail }) => {
            check_goal_actions(&p.left, left)?;
            check_goal_actions(&p.right, right)?;
            if let (Some(pt), Some(gt)) = (&p.tail, tail) {
                check_goal_actions(pt, gt)?;
            }
            Ok(())
        }
        (
            Topology::Hierarchical(h),
            GoalSpec::Hierarchical {
                outer,
                inner,
                resume,
            },
        ) => {
            check_seq_actions(&h.outer.space, outer)?;
            check_goal_actions(&h.inner, inner)?;
            check_seq_actions(&h.resume.space, resume)
        }
        // Shape mismatches surface from evaluation itself.
        _ => Ok(()),
    }
}

/// Probabilities of the goal prefixes: entry `k-1` is the exact probability
/// of the first `k` goal actions (in execution order). Non-increasing.
pub fn prefix_probabilities(system: &System, query: &GoalQuery, budget: u64) -> Result<Vec<f64>> {
    let n = query.goal.len();
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let q = GoalQuery {
            goal: query.goal.truncated(k),
            context: query.context.clone(),
        };
        out.push(exact_goal_probability(system, &q, budget)?);
    }
    Ok(out)
}

/// A-priori enumeration size: the product over stages of thought assignments
/// per step and context choices at each evaluated boundary.
pub fn term_count(system: &System, t: &Topology, goal: &GoalSpec) -> u128 {
    if goal.is_empty() {
        return 1;
    }
    match (t, goal) {
        (Topology::Chain(_) | Topology::ControlFlow(_), GoalSpec::Seq(actions)) => {
            chain_term_count(system, t, actions)
        }
        (Topology::Parallel(p), GoalSpec::Parallel { left, right, tail }) => {
            let mut n = term_count(system, &p.left, left)
                .saturating_mul(term_count(system, &p.right, right));
            if let (Some(pt), Some(gt)) = (&p.tail, tail) {
                n = n.saturating_mul(term_count(system, pt, gt));
            }
            n
        }
        (
            Topology::Hierarchical(h),
            GoalSpec::Hierarchical {
                outer,
                inner,
                resume,
            },
        ) => {
            let outer_chain = Topology::Chain(h.outer.clone());
            let mut n = chain_term_count(system, &outer_chain, outer);
            if !inner.is_empty() || !resume.is_empty() {
                n = n
                    .saturating_mul(h.emission_out.codomain().len() as u128)
                    .saturating_mul(term_count(system, &h.inner, inner));
            }
            if !resume.is_empty() {
                let resume_chain = Topology::Chain(h.resume.clone());
                n = n
                    .saturating_mul(h.emission_back.codomain().len() as u128)
                    .saturating_mul(chain_term_count(system, &resume_chain, resume));
            }
            n
        }
        // Shape mismatches are caught by validation; cost them as a single
        // term so evaluation reports the real error.
        _ => 1,
    }
}

fn chain_term_count(system: &System, t: &Topology, goal: &[ActionId]) -> u128 {
    let view = match chain_view(t) {
        Some(v) => v,
        None => return 1,
    };
    let thoughts = system.thoughts.len() as u128;
    match view {
        ChainView::Plain(agent) => {
            if agent.kernel.has_thoughts() {
                thoughts.saturating_pow(goal.len().min(u32::MAX as usize) as u32)
            } else {
                1
            }
        }
        ChainView::Flow(cf) => {
            let mut n: u128 = 1;
            let mut pos = cf.start;
            for action in goal {
                if cf.nodes[pos].kernel.has_thoughts() {
                    n = n.saturating_mul(thoughts);
                }
                if cf.base.space.is_terminal(&action.class) {
                    break;
                }
                match cf.edges.get(&(pos, action.class.clone())) {
                    Some(next) => pos = *next,
                    None => break,
                }
            }
            n
        }
    }
}

fn eval_goal(
    system: &System,
    t: &Topology,
    start: StartRef<'_>,
    query_context: &ContextId,
    goal: &GoalSpec,
) -> Result<f64> {
    if goal.is_empty() {
        return Ok(1.0);
    }
    match (t, goal) {
        (Topology::Chain(_) | Topology::ControlFlow(_), GoalSpec::Seq(actions)) => {
            chain_goal_probability(system, t, start, query_context, actions)
        }
        (Topology::Parallel(p), GoalSpec::Parallel { left, right, tail }) => {
            match (&p.tail, tail) {
                (_, None) => {
                    let pl = eval_goal(system, &p.left, reborrow(&start), query_context, left)?;
                    let pr = eval_goal(system, &p.right, reborrow(&start), query_context, right)?;
                    Ok(pl * pr)
                }
                (Some(tail_topology), Some(tail_goal)) => {
                    let lefts =
                        goal_outcomes(system, &p.left, reborrow(&start), query_context, left)?;
                    let rights =
                        goal_outcomes(system, &p.right, reborrow(&start), query_context, right)?;
                    let mut total = 0.0;
                    for (ls, lp) in &lefts {
                        for (rs, rp) in &rights {
                            let merged = p.recombiner.merge(ls, rs)?;
                            let pt = eval_goal(
                                system,
                                tail_topology,
                                StartRef::Injected(&merged),
                                query_context,
                                tail_goal,
                            )?;
                            total += lp * rp * pt;
                        }
                    }
                    Ok(total)
                }
                (None, Some(_)) => Err(Error::InvalidGoal(
                    "goal names a tail stage but the topology has none".into(),
                )),
            }
        }
        (
            Topology::Hierarchical(h),
            GoalSpec::Hierarchical {
                outer,
                inner,
                resume,
            },
        ) => {
            let outer_chain = Topology::Chain(h.outer.clone());
            if inner.is_empty() && resume.is_empty() {
                return chain_goal_probability(system, &outer_chain, start, query_context, outer);
            }
            // Sum over the handed-off context; the inner factor does not
            // depend on the outer latent path.
            let inner_factor = {
                let row = h.emission_out.lookup(outer)?;
                let mut sum = 0.0;
                for (c_l, p_l) in row.iter() {
                    if p_l <= 0.0 {
                        continue;
                    }
                    sum += p_l
                        * eval_goal(
                            system,
                            &h.inner,
                            StartRef::Context(c_l),
                            query_context,
                            inner,
                        )?;
                }
                sum
            };
            if !h.resume_carries_history || resume.is_empty() {
                let p_outer =
                    chain_goal_probability(system, &outer_chain, start, query_context, outer)?;
                let resume_factor = if resume.is_empty() {
                    1.0
                } else {
                    let row = h.emission_back.lookup(&inner.flatten())?;
                    let resume_chain = Topology::Chain(h.resume.clone());
                    let mut sum = 0.0;
                    for (c_k, p_k) in row.iter() {
                        if p_k <= 0.0 {
                            continue;
                        }
                        sum += p_k
                            * chain_goal_probability(
                                system,
                                &resume_chain,
                                StartRef::Context(c_k),
                                query_context,
                                resume,
                            )?;
                    }
                    sum
                };
                Ok(p_outer * inner_factor * resume_factor)
            } else {
                // Resume continues from the outer transcript, so outer latent
                // paths stay entangled with the resume stage.
                let outer_finals = goal_outcomes(
                    system,
                    &outer_chain,
                    start,
                    query_context,
                    &GoalSpec::Seq(outer.clone()),
                )?;
                let row = h.emission_back.lookup(&inner.flatten())?;
                let resume_chain = Topology::Chain(h.resume.clone());
                let mut total = 0.0;
                for (final_state, p_f) in &outer_finals {
                    let mut resume_factor = 0.0;
                    for (c_k, p_k) in row.iter() {
                        if p_k <= 0.0 {
                            continue;
                        }
                        let injected = carry_state(final_state, c_k)?;
                        resume_factor += p_k
                            * chain_goal_probability(
                                system,
                                &resume_chain,
                                StartRef::Injected(&injected),
                                query_context,
                                resume,
                            )?;
                    }
                    total += p_f * resume_factor;
                }
                Ok(inner_factor * total)
            }
        }
        _ => Err(Error::InvalidGoal(
            "goal shape does not match the topology".into(),
        )),
    }
}

fn reborrow<'a>(start: &StartRef<'a>) -> StartRef<'a> {
    match start {
        StartRef::Context(c) => StartRef::Context(c),
        StartRef::Injected(s) => StartRef::Injected(s),
    }
}

/// Probability that a chain-like component takes exactly `goal` as its first
/// actions, summed over its latent thought paths.
fn chain_goal_probability(
    system: &System,
    t: &Topology,
    start: StartRef<'_>,
    query_context: &ContextId,
    goal: &[ActionId],
) -> Result<f64> {
    let view = chain_view(t).expect("chain-like component");
    let (context, injected) = match start {
        StartRef::Context(c) => (c, None),
        StartRef::Injected(s) => (query_context, Some(s)),
    };
    let state = view.start_state(&system.contexts, context, injected)?;
    dfs_prob(
        system,
        &view,
        context,
        view.start_pos(),
        state,
        goal,
        0,
        ProductAcc::for_len(goal.len()),
    )
}

#[allow(clippy::too_many_arguments)]
fn dfs_prob(
    system: &System,
    view: &ChainView<'_>,
    context: &ContextId,
    pos: usize,
    state: State,
    goal: &[ActionId],
    index: usize,
    acc: ProductAcc,
) -> Result<f64> {
    if index == goal.len() {
        return Ok(acc.linear());
    }
    if index > 0 && view.space().is_terminal(&goal[index - 1].class) {
        // The chain already terminated; the remaining goal is unreachable.
        return Ok(0.0);
    }
    let target = &goal[index];
    let mut total = 0.0;
    for option in view.step_options(pos, &state)? {
        if option.action != *target {
            continue;
        }
        let (next_pos, next_state) =
            view.advance(&system.contexts, context, pos, &state, &option)?;
        total += dfs_prob(
            system,
            view,
            context,
            next_pos,
            next_state,
            goal,
            index + 1,
            acc.times(option.prob),
        )?;
    }
    Ok(total)
}

/// Final-state masses of a component conditioned on its goal: a map from
/// final state to the total probability of latent paths that produce the
/// goal actions and end there.
fn goal_outcomes(
    system: &System,
    t: &Topology,
    start: StartRef<'_>,
    query_context: &ContextId,
    goal: &GoalSpec,
) -> Result<BTreeMap<State, f64>> {
    match (t, goal) {
        (Topology::Chain(_) | Topology::ControlFlow(_), GoalSpec::Seq(actions)) => {
            let view = chain_view(t).expect("chain-like component");
            let (context, injected) = match start {
                StartRef::Context(c) => (c, None),
                StartRef::Injected(s) => (query_context, Some(s)),
            };
            let state = view.start_state(&system.contexts, context, injected)?;
            let mut acc = BTreeMap::new();
            dfs_outcomes(
                system,
                &view,
                context,
                view.start_pos(),
                state,
                actions,
                0,
                1.0,
                &mut acc,
            )?;
            Ok(acc)
        }
        (Topology::Parallel(p), GoalSpec::Parallel { left, right, tail }) => {
            let lefts = goal_outcomes(system, &p.left, reborrow(&start), query_context, left)?;
            let rights = goal_outcomes(system, &p.right, reborrow(&start), query_context, right)?;
            let mut out = BTreeMap::new();
            for (ls, lp) in &lefts {
                for (rs, rp) in &rights {
                    let merged = p.recombiner.merge(ls, rs)?;
                    match (&p.tail, tail) {
                        (Some(tt), Some(tg)) => {
                            let tails = goal_outcomes(
                                system,
                                tt,
                                StartRef::Injected(&merged),
                                query_context,
                                tg,
                            )?;
                            for (ts, tp) in tails {
                                *out.entry(ts).or_insert(0.0) += lp * rp * tp;
                            }
                        }
                        _ => {
                            *out.entry(merged).or_insert(0.0) += lp * rp;
                        }
                    }
                }
            }
            Ok(out)
        }
        (
            Topology::Hierarchical(h),
            GoalSpec::Hierarchical {
                outer,
                inner,
                resume,
            },
        ) => {
            let outer_chain = Topology::Chain(h.outer.clone());
            let outer_finals = goal_outcomes(
                system,
                &outer_chain,
                start,
                query_context,
                &GoalSpec::Seq(outer.clone()),
            )?;
            let inner_factor = {
                let row = h.emission_out.lookup(outer)?;
                let mut sum = 0.0;
                for (c_l, p_l) in row.iter() {
                    if p_l <= 0.0 {
                        continue;
                    }
                    sum += p_l
                        * eval_goal(
                            system,
                            &h.inner,
                            StartRef::Context(c_l),
                            query_context,
                            inner,
                        )?;
                }
                sum
            };
            let back_row = h.emission_back.lookup(&inner.flatten())?;
            let resume_chain = Topology::Chain(h.resume.clone());
            let mut out = BTreeMap::new();
            for (final_state, p_f) in &outer_finals {
                for (c_k, p_k) in back_row.iter() {
                    if p_k <= 0.0 {
                        continue;
                    }
                    let resume_start_state;
                    let resume_start = if h.resume_carries_history {
                        resume_start_state = carry_state(final_state, c_k)?;
                        StartRef::Injected(&resume_start_state)
                    } else {
                        StartRef::Context(c_k)
                    };
                    let finals = goal_outcomes(
                        system,
                        &resume_chain,
                        resume_start,
                        query_context,
                        &GoalSpec::Seq(resume.clone()),
                    )?;
                    for (rs, rp) in finals {
                        *out.entry(rs).or_insert(0.0) += p_f * inner_factor * p_k * rp;
                    }
                }
            }
            Ok(out)
        }
        _ => Err(Error::InvalidGoal(
            "goal shape does not match the topology".into(),
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn dfs_outcomes(
    system: &System,
    view: &ChainView<'_>,
    context: &ContextId,
    pos: usize,
    state: State,
    goal: &[ActionId],
    index: usize,
    prob: f64,
    acc: &mut BTreeMap<State, f64>,
) -> Result<()> {
    if index == goal.len() {
        *acc.entry(state).or_insert(0.0) += prob;
        return Ok(());
    }
    if index > 0 && view.space().is_terminal(&goal[index - 1].class) {
        return Ok(());
    }
    let target = &goal[index];
    for option in view.step_options(pos, &state)? {
        if option.action != *target {
            continue;
        }
        let (next_pos, next_state) =
            view.advance(&system.contexts, context, pos, &state, &option)?;
        dfs_outcomes(
            system,
            view,
            context,
            next_pos,
            next_state,
            goal,
            index + 1,
            prob * option.prob,
            acc,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::AgentSpec;
    use crate::dist::Distribution;
    use crate::ids::{ArgId, ClassId, ObsId, ThoughtId};
    use crate::kernel::{Kernel, ReActKernel, StateTable, TabularKernel};
    use crate::model::{ActionSpace, ContextAlphabet, InitBuilder, ThoughtAlphabet, UpdateFn};
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn act(class: &str) -> ActionId {
        ActionId::new(ClassId::new(class).unwrap(), ArgId::new("x").unwrap())
    }

    fn ab_space() -> Arc<ActionSpace> {
        Arc::new(
            ActionSpace::new(
                vec![
                    (
                        ClassId::new("A").unwrap(),
                        vec![(ArgId::new("x").unwrap(), ObsId::new("oA").unwrap())],
                    ),
                    (
                        ClassId::new("B").unwrap(),
                        vec![(ArgId::new("x").unwrap(), ObsId::new("oB").unwrap())],
                    ),
                ],
                BTreeSet::new(),
            )
            .unwrap(),
        )
    }

    fn k1_kernel() -> Arc<Kernel> {
        let thoughts = Distribution::new(
            vec![
                (ThoughtId::new("t0").unwrap(), 0.2),
                (ThoughtId::new("t1").unwrap(), 0.8),
            ],
            "t",
        )
        .unwrap();
        let mut per_thought = BTreeMap::new();
        per_thought.insert(
            ThoughtId::new("t0").unwrap(),
            StateTable::stationary(
                Distribution::new(vec![(act("A"), 0.5), (act("B"), 0.5)], "a").unwrap(),
            ),
        );
        per_thought.insert(
            ThoughtId::new("t1").unwrap(),
            StateTable::stationary(
                Distribution::new(vec![(act("A"), 0.9), (act("B"), 0.1)], "a").unwrap(),
            ),
        );
        Arc::new(Kernel::ReAct(ReActKernel {
            thought_given_state: StateTable::stationary(thoughts),
            action_given_thought_state: per_thought,
        }))
    }

    fn k1_system(horizon: usize) -> System {
        System {
            thoughts: ThoughtAlphabet::new(vec![
                ThoughtId::new("t0").unwrap(),
                ThoughtId::new("t1").unwrap(),
            ])
            .unwrap(),
            contexts: ContextAlphabet::new(vec![ContextId::new("c0").unwrap()]).unwrap(),
            topology: Topology::Chain(AgentSpec {
                name: "main".into(),
                kernel: k1_kernel(),
                update: UpdateFn::Concat,
                init: InitBuilder::context_only(),
                bindings: BTreeMap::new(),
                horizon,
                space: ab_space(),
            }),
        }
    }

    fn query(actions: &[&str]) -> GoalQuery {
        GoalQuery {
            goal: GoalSpec::Seq(actions.iter().map(|a| act(a)).collect()),
            context: ContextId::new("c0").unwrap(),
        }
    }

    /// Brute-force oracle over the 2^n thought paths of the K1 chain.
    fn k1_chain_oracle(goal: &[&str], horizon: usize) -> f64 {
        assert!(goal.len() <= horizon);
        let p_t = [0.2, 0.8];
        let p_a = |t: usize, a: &str| match (t, a) {
            (0, "A") => 0.5,
            (0, "B") => 0.5,
            (1, "A") => 0.9,
            (1, "B") => 0.1,
            _ => unreachable!(),
        };
        let n = goal.len();
        let mut total = 0.0;
        for assignment in 0..(1usize << n) {
            let mut p = 1.0;
            for (i, a) in goal.iter().enumerate() {
                let t = (assignment >> i) & 1;
                p *= p_t[t] * p_a(t, a);
            }
            total += p;
        }
        total
    }

    #[test]
    fn k1_single_step_matches_marginal() {
        let sys = k1_system(1);
        let p = exact_goal_probability(&sys, &query(&["A"]), DEFAULT_ENUMERATION_BUDGET).unwrap();
        let oracle = k1_chain_oracle(&["A"], 1);
        assert!((p - oracle).abs() < 1e-15);
        assert!((p - 0.82).abs() < 1e-12);
    }

    #[test]
    fn k1_two_steps_matches_four_path_enumeration() {
        let sys = k1_system(2);
        let p =
            exact_goal_probability(&sys, &query(&["A", "A"]), DEFAULT_ENUMERATION_BUDGET).unwrap();
        let oracle = k1_chain_oracle(&["A", "A"], 2);
        assert!((p - oracle).abs() < 1e-15);
        assert!((p - 0.6724).abs() < 1e-12);
    }

    #[test]
    fn empty_goal_has_probability_one() {
        let sys = k1_system(1);
        let p = exact_goal_probability(&sys, &query(&[]), DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(
            prefix_probabilities(&sys, &query(&[]), DEFAULT_ENUMERATION_BUDGET).unwrap(),
            Vec::<f64>::new()
        );
    }

    #[test]
    fn prefixes_match_per_step_products() {
        let sys = k1_system(2);
        let prefixes =
            prefix_probabilities(&sys, &query(&["A", "A"]), DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert_eq!(prefixes.len(), 2);
        assert!((prefixes[0] - 0.82).abs() < 1e-12);
        assert!((prefixes[1] - 0.6724).abs() < 1e-12);
        assert!(prefixes[1] <= prefixes[0]);
    }

    #[test]
    fn deterministic_kernel_chain_stays_at_one() {
        let row = Distribution::new(vec![(act("A"), 1.0), (act("B"), 0.0)], "a").unwrap();
        let sys = System {
            thoughts: ThoughtAlphabet::new(vec![ThoughtId::new("t0").unwrap()]).unwrap(),
            contexts: ContextAlphabet::new(vec![ContextId::new("c0").unwrap()]).unwrap(),
            topology: Topology::Chain(AgentSpec {
                name: "det".into(),
                kernel: Arc::new(Kernel::Tabular(TabularKernel {
                    table: StateTable::stationary(row),
                })),
                update: UpdateFn::Concat,
                init: InitBuilder::context_only(),
                bindings: BTreeMap::new(),
                horizon: 3,
                space: ab_space(),
            }),
        };
        let prefixes =
            prefix_probabilities(&sys, &query(&["A", "A", "A"]), DEFAULT_ENUMERATION_BUDGET)
                .unwrap();
        assert_eq!(prefixes, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn unknown_goal_action_is_an_error_not_zero() {
        let sys = k1_system(1);
        let q = GoalQuery {
            goal: GoalSpec::Seq(vec![ActionId::new(
                crate::ids::ClassId::new("Z").unwrap(),
                crate::ids::ArgId::new("x").unwrap(),
            )]),
            context: ContextId::new("c0").unwrap(),
        };
        assert!(matches!(
            exact_goal_probability(&sys, &q, DEFAULT_ENUMERATION_BUDGET),
            Err(Error::InvalidGoal(_))
        ));
    }

    #[test]
    fn budget_is_enforced_with_term_count() {
        let sys = k1_system(2);
        let err = exact_goal_probability(&sys, &query(&["A", "A"]), 3).unwrap_err();
        match err {
            Error::BudgetExceeded { terms, budget } => {
                assert_eq!(terms, 4);
                assert_eq!(budget, 3);
            }
            other => panic!("expected budget error, got {other}"),
        }
    }

    #[test]
    fn long_chain_uses_log_space_consistently() {
        // 40 steps of a deterministic-ish kernel: p = 0.9^40 either way.
        let row = Distribution::new(vec![(act("A"), 0.9), (act("B"), 0.1)], "a").unwrap();
        let sys = System {
            thoughts: ThoughtAlphabet::new(vec![ThoughtId::new("t0").unwrap()]).unwrap(),
            contexts: ContextAlphabet::new(vec![ContextId::new("c0").unwrap()]).unwrap(),
            topology: Topology::Chain(AgentSpec {
                name: "long".into(),
                kernel: Arc::new(Kernel::Tabular(TabularKernel {
                    table: StateTable::stationary(row),
                })),
                update: UpdateFn::Concat,
                init: InitBuilder::context_only(),
                bindings: BTreeMap::new(),
                horizon: 40,
                space: ab_space(),
            }),
        };
        let goal = vec!["A"; 40];
        let p = exact_goal_probability(&sys, &query(&goal), DEFAULT_ENUMERATION_BUDGET).unwrap();
        let direct = 0.9f64.powi(40);
        assert!((p - direct).abs() < 1e-12, "{p} vs {direct}");
    }
}
