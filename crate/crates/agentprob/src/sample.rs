//! Seeded Monte Carlo rollout.
//!
//! Every random draw is addressed by (master seed, component stage, step
//! index, draw kind) through a counter-based generator, so a trajectory is a
//! pure function of its seed and the estimator is reproducible for any
//! worker count.

use std::collections::BTreeMap;

use crate::compose::{chain_view, GoalQuery, GoalSpec, StartRef, System, Topology};
use crate::error::{Error, Result};
use crate::ids::{ActionId, ContextId, ThoughtId};
use crate::kernel::StepOption;
use crate::model::{apply_update, Action, State};

const KIND_THOUGHT: u64 = 0;
const KIND_ACTION: u64 = 1;
const KIND_CONTEXT: u64 = 2;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; full-avalanche bijection on u64.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Uniform variate in [0, 1) for one addressed draw.
fn draw_unit(seed: u64, stage: u64, step: u64, kind: u64) -> f64 {
    let mut h = mix64(seed ^ GOLDEN);
    h = mix64(h ^ stage);
    h = mix64(h ^ step.wrapping_mul(0xd6e8_feb8_6659_fd93));
    h = mix64(h ^ kind.wrapping_mul(0xa076_1d64_78bd_642f));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Per-trajectory seed for sample index `i` under a master seed.
fn trajectory_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_mul(GOLDEN).wrapping_add(1)))
}

/// One executed step of a sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// Component path, e.g. `topology/outer`.
    pub component: String,
    pub state_before: State,
    pub thought: Option<ThoughtId>,
    pub action: Action,
    pub state_after: State,
}

/// A single sampled execution: one choice of every hidden variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    /// Contexts drawn at hierarchical boundaries, keyed by boundary path.
    pub contexts_emitted: Vec<(String, ContextId)>,
    /// True when some stage ended with a terminal-class action rather than
    /// horizon exhaustion.
    pub terminal: bool,
}

/// Monte Carlo estimate of a goal probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

struct Sampler<'a> {
    system: &'a System,
    seed: u64,
    seqs: BTreeMap<String, Vec<ActionId>>,
    trace: Option<Trace>,
}

impl<'a> Sampler<'a> {
    fn run_topology(
        &mut self,
        t: &Topology,
        path: &str,
        start: StartRef<'_>,
        query_context: &ContextId,
    ) -> Result<State> {
        match t {
            Topology::Chain(_) | Topology::ControlFlow(_) => {
                self.run_chain(t, path, start, query_context)
            }
            Topology::Parallel(p) => {
                let left = self.run_topology(
                    &p.left,
                    &format!("{path}/left"),
                    reborrow(&start),
                    query_context,
                )?;
                let right = self.run_topology(
                    &p.right,
                    &format!("{path}/right"),
                    reborrow(&start),
                    query_context,
                )?;
                let merged = p.recombiner.merge(&left, &right)?;
                match &p.tail {
                    Some(tail) => self.run_topology(
                        tail,
                        &format!("{path}/tail"),
                        StartRef::Injected(&merged),
                        query_context,
                    ),
                    None => Ok(merged),
                }
            }
            Topology::Hierarchical(h) => {
                let outer_chain = Topology::Chain(h.outer.clone());
                let outer_path = format!("{path}/outer");
                let outer_final =
                    self.run_topology(&outer_chain, &outer_path, start, query_context)?;

                let a_l = self.seqs.get(&outer_path).cloned().unwrap_or_default();
                let c_l = self.draw_context(&h.emission_out.lookup(&a_l)?.clone(), path, "out")?;

                let inner_path = format!("{path}/inner");
                self.run_topology(
                    &h.inner,
                    &inner_path,
                    StartRef::Context(&c_l),
                    query_context,
                )?;

                let a_k = self.collected_actions(&h.inner, &inner_path);
                let c_k =
                    self.draw_context(&h.emission_back.lookup(&a_k)?.clone(), path, "back")?;

                let resume_chain = Topology::Chain(h.resume.clone());
                let resume_path = format!("{path}/resume");
                if h.resume_carries_history {
                    let injected = crate::compose::carry_state(&outer_final, &c_k)?;
                    self.run_topology(
                        &resume_chain,
                        &resume_path,
                        StartRef::Injected(&injected),
                        query_context,
                    )
                } else {
                    self.run_topology(
                        &resume_chain,
                        &resume_path,
                        StartRef::Context(&c_k),
                        query_context,
                    )
                }
            }
        }
    }

    /// Flattened action sequence sampled under a component, in execution
    /// order (matches `GoalSpec::flatten`).
    fn collected_actions(&self, t: &Topology, path: &str) -> Vec<ActionId> {
        match t {
            Topology::Chain(_) | Topology::ControlFlow(_) => {
                self.seqs.get(path).cloned().unwrap_or_default()
            }
            Topology::Parallel(p) => {
                let mut out = self.collected_actions(&p.left, &format!("{path}/left"));
                out.extend(self.collected_actions(&p.right, &format!("{path}/right")));
                if let Some(tail) = &p.tail {
                    out.extend(self.collected_actions(tail, &format!("{path}/tail")));
                }
                out
            }
            Topology::Hierarchical(h) => {
                let outer_chain = Topology::Chain(h.outer.clone());
                let resume_chain = Topology::Chain(h.resume.clone());
                let mut out = self.collected_actions(&outer_chain, &format!("{path}/outer"));
                out.extend(self.collected_actions(&h.inner, &format!("{path}/inner")));
                out.extend(self.collected_actions(&resume_chain, &format!("{path}/resume")));
                out
            }
        }
    }

    fn draw_context(
        &mut self,
        row: &crate::dist::Distribution<ContextId>,
        path: &str,
        boundary: &str,
    ) -> Result<ContextId> {
        let boundary_path = format!("{path}/{boundary}");
        let u = draw_unit(self.seed, fnv64(&boundary_path), 0, KIND_CONTEXT);
        let c = row.sample(u).clone();
        if let Some(trace) = &mut self.trace {
            trace.contexts_emitted.push((boundary_path, c.clone()));
        }
        Ok(c)
    }

    fn run_chain(
        &mut self,
        t: &Topology,
        path: &str,
        start: StartRef<'_>,
        query_context: &ContextId,
    ) -> Result<State> {
        let view = chain_view(t).expect("chain-like component");
        let (context, injected) = match start {
            StartRef::Context(c) => (c.clone(), None),
            StartRef::Injected(s) => (query_context.clone(), Some(s)),
        };
        let mut state = view.start_state(&self.system.contexts, &context, injected)?;
        let mut pos = view.start_pos();
        let stage = fnv64(path);
        self.seqs.entry(path.to_string()).or_default();

        for step in 0..view.horizon() {
            let options = view.step_options(pos, &state)?;
            let option = self.draw_option(&options, stage, step as u64).clone();

            self.seqs
                .get_mut(path)
                .expect("sequence registered")
                .push(option.action.clone());

            if self.trace.is_some() {
                let action = view.space().action(&option.action)?;
                let state_after = apply_update(
                    view.update_at(pos),
                    &state,
                    option.thought.as_ref(),
                    &action.obs,
                )?;
                if let Some(trace) = &mut self.trace {
                    trace.steps.push(TraceStep {
                        component: path.to_string(),
                        state_before: state.clone(),
                        thought: option.thought.clone(),
                        action,
                        state_after,
                    });
                }
            }

            let terminal = view.space().is_terminal(&option.action.class);
            let (next_pos, next_state) =
                view.advance(&self.system.contexts, &context, pos, &state, &option)?;
            pos = next_pos;
            state = next_state;
            if terminal {
                if let Some(trace) = &mut self.trace {
                    trace.terminal = true;
                }
                break;
            }
        }
        Ok(state)
    }

    /// Draw a (thought, action) option: one thought draw over the thought
    /// marginal, then one action draw over that thought's conditional.
    fn draw_option<'o>(&self, options: &'o [StepOption], stage: u64, step: u64) -> &'o StepOption {
        debug_assert!(!options.is_empty());
        if options[0].thought.is_none() {
            let u = draw_unit(self.seed, stage, step, KIND_ACTION);
            return pick(options, |o| o.prob, u);
        }
        // Thought groups arrive contiguously and in canonical order.
        let mut groups: Vec<(usize, usize, f64)> = Vec::new();
        let mut begin = 0;
        while begin < options.len() {
            let mut end = begin;
            let mut mass = 0.0;
            while end < options.len() && options[end].thought == options[begin].thought {
                mass += options[end].prob;
                end += 1;
            }
            groups.push((begin, end, mass));
            begin = end;
        }
        let u_t = draw_unit(self.seed, stage, step, KIND_THOUGHT);
        let &(begin, end, mass) = pick(&groups, |g| g.2, u_t);
        let u_a = draw_unit(self.seed, stage, step, KIND_ACTION);
        pick(&options[begin..end], |o| o.prob / mass, u_a)
    }
}

fn pick<T>(items: &[T], weight: impl Fn(&T) -> f64, unit: f64) -> &T {
    let mut acc = 0.0;
    let mut last = None;
    for item in items {
        let w = weight(item);
        if w > 0.0 {
            acc += w;
            last = Some(item);
            if unit < acc {
                return item;
            }
        }
    }
    last.expect("positive mass")
}

fn reborrow<'a>(start: &StartRef<'a>) -> StartRef<'a> {
    match start {
        StartRef::Context(c) => StartRef::Context(c),
        StartRef::Injected(s) => StartRef::Injected(s),
    }
}

/// Sample one complete trajectory. Fully deterministic given the seed.
pub fn sample_trajectory(system: &System, context: &ContextId, seed: u64) -> Result<Trace> {
    if !system.contexts.contains(context) {
        return Err(Error::UnknownContext(context.to_string()));
    }
    let mut sampler = Sampler {
        system,
        seed,
        seqs: BTreeMap::new(),
        trace: Some(Trace {
            steps: Vec::new(),
            contexts_emitted: Vec::new(),
            terminal: false,
        }),
    };
    sampler.run_topology(
        &system.topology,
        "topology",
        StartRef::Context(context),
        context,
    )?;
    Ok(sampler.trace.expect("trace enabled"))
}

fn goal_matches(goal: &GoalSpec, seqs: &BTreeMap<String, Vec<ActionId>>, path: &str) -> bool {
    match goal {
        GoalSpec::Seq(expected) => {
            let run = seqs.get(path).map(|v| v.as_slice()).unwrap_or(&[]);
            run.len() >= expected.len() && run[..expected.len()] == expected[..]
        }
        GoalSpec::Parallel { left, right, tail } => {
            goal_matches(left, seqs, &format!("{path}/left"))
                && goal_matches(right, seqs, &format!("{path}/right"))
                && tail
                    .as_ref()
                    .is_none_or(|t| goal_matches(t, seqs, &format!("{path}/tail")))
        }
        GoalSpec::Hierarchical {
            outer,
            inner,
            resume,
        } => {
            goal_matches(
                &GoalSpec::Seq(outer.clone()),
                seqs,
                &format!("{path}/outer"),
            ) && goal_matches(inner, seqs, &format!("{path}/inner"))
                && goal_matches(
                    &GoalSpec::Seq(resume.clone()),
                    seqs,
                    &format!("{path}/resume"),
                )
        }
    }
}

fn sample_hit(system: &System, query: &GoalQuery, seed: u64) -> Result<bool> {
    let mut sampler = Sampler {
        system,
        seed,
        seqs: BTreeMap::new(),
        trace: None,
    };
    sampler.run_topology(
        &system.topology,
        "topology",
        StartRef::Context(&query.context),
        &query.context,
    )?;
    Ok(goal_matches(&query.goal, &sampler.seqs, "topology"))
}

/// Goal-hit frequency over `n` independently seeded trajectories.
///
/// Trajectory `i` always uses the same derived seed, so the estimate is
/// identical for any `workers` count.
pub fn estimate_goal_probability(
    system: &System,
    query: &GoalQuery,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::ZeroSamples);
    }
    let workers = workers.max(1).min(n as usize);
    let hits: u64 = if workers == 1 {
        count_hits(system, query, 0, n, seed)?
    } else {
        let chunk = n.div_ceil(workers as u64);
        let results: Vec<Result<u64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers as u64)
                .map(|w| {
                    let lo = w * chunk;
                    let hi = ((w + 1) * chunk).min(n);
                    scope.spawn(move || count_hits(system, query, lo, hi, seed))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        let mut total = 0;
        for r in results {
            total += r?;
        }
        total
    };
    let mean = hits as f64 / n as f64;
    let stderr = (mean * (1.0 - mean) / n as f64).sqrt();
    Ok(Estimate {
        mean,
        stderr,
        n,
        seed,
    })
}

fn count_hits(system: &System, query: &GoalQuery, lo: u64, hi: u64, seed: u64) -> Result<u64> {
    let mut hits = 0;
    for i in lo..hi {
        if sample_hit(system, query, trajectory_seed(seed, i))? {
            hits += 1;
        }
    }
    Ok(hits)
}
