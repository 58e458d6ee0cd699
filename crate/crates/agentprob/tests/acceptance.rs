//! Acceptance suite. Each test prints one pass/fail line per criterion and
//! asserts it. Oracles here are independent re-derivations from the raw
//! fixture numbers, never calls back into the code path under test.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use agentprob::scenario::{KernelDoc, MutationDomainDoc};
use agentprob::{
    collab_cost, compose_hierarchical, compose_parallel, dof_handles, estimate_goal_probability,
    exact_goal_probability, optimize_context, optimize_dof, parse_scenario, prefix_probabilities,
    seq_key, serialize_scenario, ActionId, ActionSpace, AgentSpec, ArgId, ClassId, Compiled,
    ContextAlphabet, ContextEmission, ContextId, Distribution, DofHandle, Error, GoalQuery,
    GoalSpec, InitBuilder, Kernel, Objective, ObsId, ReActKernel, Recombiner, ScenarioDoc,
    StateTable, StrategyKind, System, TabularKernel, ThoughtAlphabet, ThoughtId, Topology,
    UpdateFn,
};

const ENUM_BUDGET: u64 = 10_000_000;

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(fixtures_dir())
        .expect("fixtures directory present")
        .filter_map(|e| {
            let name = e.unwrap().file_name().to_string_lossy().into_owned();
            name.ends_with(".scn").then_some(name)
        })
        .collect();
    names.sort();
    names
}

fn load(name: &str) -> (ScenarioDoc, Compiled) {
    let text = std::fs::read_to_string(fixtures_dir().join(name)).expect("fixture readable");
    let doc = parse_scenario(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    let compiled = doc.compile().unwrap_or_else(|e| panic!("{name}: {e}"));
    (doc, compiled)
}

fn check(line: &str, ok: bool) {
    println!("[{}] {line}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{line}");
}

fn eval(compiled: &Compiled) -> f64 {
    exact_goal_probability(
        &compiled.system,
        &compiled.objective.goal,
        compiled.enumeration_budget,
    )
    .expect("fixture evaluates")
}

/// Evaluate a fixture document after an in-place edit.
fn eval_edited(doc: &ScenarioDoc, edit: impl FnOnce(&mut ScenarioDoc)) -> f64 {
    let mut doc = doc.clone();
    edit(&mut doc);
    eval(&doc.compile().expect("edited document compiles"))
}

// -- deterministic generator for randomized desk fixtures -------------------

struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }

    fn weights(&mut self, k: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| 1.0 + (self.next() % 1000) as f64).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

fn space_of(prefix: &str, n: usize) -> Arc<ActionSpace> {
    Arc::new(
        ActionSpace::new(
            (0..n)
                .map(|i| {
                    (
                        ClassId::new(format!("{prefix}{i}")).unwrap(),
                        vec![(
                            ArgId::new("x").unwrap(),
                            ObsId::new(format!("o{prefix}{i}")).unwrap(),
                        )],
                    )
                })
                .collect(),
            BTreeSet::new(),
        )
        .unwrap(),
    )
}

fn dist_over_actions(space: &ActionSpace, weights: &[f64]) -> Distribution<ActionId> {
    Distribution::new(
        space
            .action_ids()
            .into_iter()
            .zip(weights.iter().copied())
            .collect(),
        "gen",
    )
    .unwrap()
}

fn agent(name: &str, kernel: Kernel, space: Arc<ActionSpace>, horizon: usize) -> AgentSpec {
    AgentSpec {
        name: name.to_string(),
        kernel: Arc::new(kernel),
        update: UpdateFn::Concat,
        init: InitBuilder::context_only(),
        bindings: BTreeMap::new(),
        horizon,
        space,
    }
}

/// A stationary thought-latent kernel plus its raw tables for oracles.
struct RawReact {
    p_thought: Vec<f64>,
    p_action: Vec<Vec<f64>>, // [thought][action index]
}

fn random_react(rng: &mut Rng, thoughts: &[ThoughtId], space: &ActionSpace) -> (Kernel, RawReact) {
    let p_thought = rng.weights(thoughts.len());
    let thought_dist = Distribution::new(
        thoughts
            .iter()
            .cloned()
            .zip(p_thought.iter().copied())
            .collect(),
        "gen",
    )
    .unwrap();
    let mut p_action = Vec::new();
    let mut per_thought = BTreeMap::new();
    for t in thoughts {
        let w = rng.weights(space.action_ids().len());
        per_thought.insert(
            t.clone(),
            StateTable::stationary(dist_over_actions(space, &w)),
        );
        p_action.push(w);
    }
    (
        Kernel::ReAct(ReActKernel {
            thought_given_state: StateTable::stationary(thought_dist),
            action_given_thought_state: per_thought,
        }),
        RawReact {
            p_thought,
            p_action,
        },
    )
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_normalization_suite() {
    let started = Instant::now();
    let names = fixture_names();
    assert!(names.len() >= 8, "fixture corpus present");

    // Every kernel and emission row sums to 1 within 1e-9 (checked on the
    // raw document numbers, independent of Distribution validation).
    for name in &names {
        let (doc, compiled) = load(name);
        let mut row_sums: Vec<(String, f64)> = Vec::new();
        for k in &doc.kernels {
            match k {
                KernelDoc::Tabular { id, table, .. } => {
                    for (key, row) in table {
                        row_sums.push((format!("{id}/{key}"), row.values().sum()));
                    }
                }
                KernelDoc::React {
                    id,
                    thought_given_state,
                    action_given_thought_state,
                    ..
                } => {
                    for (key, row) in thought_given_state {
                        row_sums.push((format!("{id}/t/{key}"), row.values().sum()));
                    }
                    for (t, rows) in action_given_thought_state {
                        for (key, row) in rows {
                            row_sums.push((format!("{id}/{t}/{key}"), row.values().sum()));
                        }
                    }
                }
                KernelDoc::Restricted { .. } => {}
            }
        }
        for e in &doc.emissions {
            for (key, row) in &e.rows {
                row_sums.push((format!("{}/{key}", e.id), row.values().sum()));
            }
        }
        for (path, sum) in row_sums {
            assert!(
                (sum - 1.0).abs() <= 1e-9,
                "{name}: row {path} sums to {sum}"
            );
        }

        // Total mass over all complete action sequences of single chains.
        if let Topology::Chain(chain_agent) = &compiled.system.topology {
            let actions = chain_agent.space.action_ids();
            let horizon = chain_agent.horizon;
            let mut total = 0.0;
            let mut seq = vec![0usize; horizon];
            loop {
                let goal: Vec<ActionId> = seq.iter().map(|i| actions[*i].clone()).collect();
                let q = GoalQuery {
                    goal: GoalSpec::Seq(goal),
                    context: compiled.objective.goal.context.clone(),
                };
                total += exact_goal_probability(&compiled.system, &q, compiled.enumeration_budget)
                    .unwrap();
                let mut i = horizon;
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    seq[i] += 1;
                    if seq[i] < actions.len() {
                        break;
                    }
                    seq[i] = 0;
                }
                if seq.iter().all(|v| *v == 0) {
                    break;
                }
            }
            assert!(
                (total - 1.0).abs() <= 1e-9,
                "{name}: total mass {total} over length-{horizon} sequences"
            );
        }
    }
    let elapsed = started.elapsed();
    check(
        &format!(
            "criterion 1: all rows normalized and single-chain total mass = 1 (1e-9) across {} fixtures in {:.3}s",
            names.len(),
            elapsed.as_secs_f64()
        ),
        elapsed.as_secs_f64() < 1.0,
    );
}

#[test]
fn criterion_02_thought_marginalization() {
    // Two-term oracle for the one-step marginal.
    let oracle_a = 0.8 * 0.9 + 0.2 * 0.5;
    let oracle_b = 0.8 * 0.1 + 0.2 * 0.5;
    let (doc1, c1) = load("k1_chain.scn");
    let p_a = eval(&c1);
    let p_b = eval_edited(&doc1, |d| {
        d.objective.goal = agentprob::scenario::GoalDoc::Seq(vec!["B".into()]);
    });
    let marginal_ok = (p_a - 0.82).abs() <= 1e-12
        && (p_b - 0.18).abs() <= 1e-12
        && (p_a - oracle_a).abs() <= 1e-12
        && (p_b - oracle_b).abs() <= 1e-12;

    // Two-step goal: chain formula vs full 4-path enumeration.
    let (_, c2) = load("k1_chain2.scn");
    let p_aa = eval(&c2);
    let prefixes = prefix_probabilities(&c2.system, &c2.objective.goal, ENUM_BUDGET).unwrap();
    let chain_formula = prefixes[0] * prefixes[0];
    let mut four_path = 0.0f64;
    for t1 in [(0.2, 0.5), (0.8, 0.9)] {
        for t2 in [(0.2, 0.5), (0.8, 0.9)] {
            four_path += t1.0 * t1.1 * t2.0 * t2.1;
        }
    }
    let two_step_ok = (p_aa - 0.6724).abs() <= 1e-12
        && (chain_formula - 0.6724).abs() <= 1e-12
        && (four_path - 0.6724).abs() <= 1e-12
        && (p_aa - four_path).abs() <= 1e-12;

    check(
        &format!("criterion 2: K1 marginal {{A: {p_a:.6}, B: {p_b:.6}}}, [A,A] = {p_aa:.6} by chain formula and 4-path enumeration (1e-12)"),
        marginal_ok && two_step_ok,
    );
}

#[test]
fn criterion_03_react_identity_witness() {
    // Thought generation changes the action law...
    let (doc, compiled) = load("k1_chain.scn");
    let p_react = eval(&compiled);
    let p_flat = eval_edited(&doc, |d| {
        if let KernelDoc::React { .. } = &d.kernels[0] {
            d.agents[0].kernel = "k1_flat".into();
        }
    });
    let separated = (p_react - p_flat).abs() >= 0.05;

    // ...except when the action law ignores the thought.
    let (doc_c, compiled_c) = load("k1_collapse.scn");
    let p_latent = eval(&compiled_c);
    let p_collapsed = eval_edited(&doc_c, |d| {
        d.agents[0].kernel = "kc_flat".into();
    });
    let collapsed = (p_latent - p_collapsed).abs() <= 1e-12;

    check(
        &format!(
            "criterion 3: ReAct vs identity-kernel gap {:.4} >= 0.05; thought-independent gap {:.2e} <= 1e-12",
            (p_react - p_flat).abs(),
            (p_latent - p_collapsed).abs()
        ),
        separated && collapsed,
    );
}

#[test]
#[allow(clippy::needless_range_loop)]
fn criterion_04_hierarchical_oracle_equivalence() {
    let started = Instant::now();

    // F2: flat oracle over thoughts x c_L x c_K from the fixture numbers.
    let (_, f2) = load("f2_hier.scn");
    let p_f2 = eval(&f2);
    let mut oracle = 0.0;
    for (pt, pa) in [(0.2, 0.5), (0.8, 0.9)] {
        for (pcl, pg) in [(0.3, 0.4), (0.7, 0.9)] {
            for (pck, pu) in [(1.0, 0.5), (0.0, 0.5)] {
                oracle += pt * pa * pcl * pg * pck * pu;
            }
        }
    }
    let f2_ok = (p_f2 - 0.30750).abs() <= 1e-12 && (p_f2 - oracle).abs() <= 1e-12;
    assert!(f2_ok, "F2 engine {p_f2} vs oracle {oracle}");

    // 20 randomized desk fixtures.
    let mut rng = Rng(0x1234_5678);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let nt = 1 + rng.below(3);
        let thoughts: Vec<ThoughtId> = (0..nt)
            .map(|i| ThoughtId::new(format!("t{i}")).unwrap())
            .collect();
        let outer_space = space_of("A", 1 + rng.below(3));
        let inner_space = space_of("G", 1 + rng.below(3));
        let resume_space = space_of("U", 1 + rng.below(3));
        let outer_h = 1 + rng.below(2);
        let inner_h = 1 + rng.below(2);
        let resume_h = 1 + rng.below(2);
        let n_cl = 1 + rng.below(3);
        let n_ck = 1 + rng.below(3);
        let cls: Vec<ContextId> = (0..n_cl)
            .map(|i| ContextId::new(format!("cl{i}")).unwrap())
            .collect();
        let cks: Vec<ContextId> = (0..n_ck)
            .map(|i| ContextId::new(format!("ck{i}")).unwrap())
            .collect();
        let query_ctx = ContextId::new("c0").unwrap();
        let mut all_contexts = vec![query_ctx.clone()];
        all_contexts.extend(cls.iter().cloned());
        all_contexts.extend(cks.iter().cloned());

        let (outer_kernel, outer_raw) = random_react(&mut rng, &thoughts, &outer_space);

        // Inner and resume: first step depends on the received context,
        // later steps use a stationary row.
        let build_ctx_kernel = |rng: &mut Rng, space: &Arc<ActionSpace>, contexts: &[ContextId]| {
            let n = space.action_ids().len();
            let mut rows = BTreeMap::new();
            let mut row0 = Vec::new();
            for c in contexts {
                let w = rng.weights(n);
                rows.insert(format!("h[c={c}]"), dist_over_actions(space, &w));
                row0.push(w);
            }
            let rest = rng.weights(n);
            let kernel = Kernel::Tabular(TabularKernel {
                table: StateTable::new(rows, Some(dist_over_actions(space, &rest))),
            });
            (kernel, row0, rest)
        };
        let (inner_kernel, inner_row0, inner_rest) = build_ctx_kernel(&mut rng, &inner_space, &cls);
        let (resume_kernel, resume_row0, resume_rest) =
            build_ctx_kernel(&mut rng, &resume_space, &cks);

        // Outward emission: an explicit row per possible outer sequence.
        let outer_actions = outer_space.action_ids();
        let mut e_out_rows = BTreeMap::new();
        let mut e_out_raw: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
        let mut seq = vec![0usize; outer_h];
        loop {
            let ids: Vec<ActionId> = seq.iter().map(|i| outer_actions[*i].clone()).collect();
            let w = rng.weights(n_cl);
            e_out_rows.insert(
                seq_key(&ids),
                Distribution::new(cls.iter().cloned().zip(w.iter().copied()).collect(), "gen")
                    .unwrap(),
            );
            e_out_raw.insert(seq.clone(), w);
            let mut i = outer_h;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                seq[i] += 1;
                if seq[i] < outer_actions.len() {
                    break;
                }
                seq[i] = 0;
            }
            if seq.iter().all(|v| *v == 0) {
                break;
            }
        }
        let e_out = ContextEmission::new(cls.clone(), e_out_rows, None, "gen").unwrap();
        let e_back_w = rng.weights(n_ck);
        let e_back = ContextEmission::new(
            cks.clone(),
            BTreeMap::new(),
            Some(
                Distribution::new(
                    cks.iter().cloned().zip(e_back_w.iter().copied()).collect(),
                    "gen",
                )
                .unwrap(),
            ),
            "gen",
        )
        .unwrap();

        let topology = compose_hierarchical(
            agent("outer", outer_kernel, outer_space.clone(), outer_h),
            e_out,
            Topology::Chain(agent("inner", inner_kernel, inner_space.clone(), inner_h)),
            e_back,
            agent("resume", resume_kernel, resume_space.clone(), resume_h),
            false,
        )
        .unwrap();
        let system = System {
            thoughts: ThoughtAlphabet::new(thoughts.clone()).unwrap(),
            contexts: ContextAlphabet::new(all_contexts).unwrap(),
            topology,
        };

        let outer_goal: Vec<usize> = (0..outer_h)
            .map(|_| rng.below(outer_actions.len()))
            .collect();
        let inner_goal: Vec<usize> = (0..inner_h)
            .map(|_| rng.below(inner_space.action_ids().len()))
            .collect();
        let resume_goal: Vec<usize> = (0..resume_h)
            .map(|_| rng.below(resume_space.action_ids().len()))
            .collect();

        let query = GoalQuery {
            goal: GoalSpec::Hierarchical {
                outer: outer_goal
                    .iter()
                    .map(|i| outer_actions[*i].clone())
                    .collect(),
                inner: Box::new(GoalSpec::Seq(
                    inner_goal
                        .iter()
                        .map(|i| inner_space.action_ids()[*i].clone())
                        .collect(),
                )),
                resume: resume_goal
                    .iter()
                    .map(|i| resume_space.action_ids()[*i].clone())
                    .collect(),
            },
            context: query_ctx,
        };
        let engine = exact_goal_probability(&system, &query, ENUM_BUDGET).unwrap();

        // Flat oracle: explicit sum over (thought vector, c_L, c_K).
        let chain_prob = |row0: &[Vec<f64>], rest: &[f64], ctx: usize, goal: &[usize]| -> f64 {
            let mut p = row0[ctx][goal[0]];
            for g in &goal[1..] {
                p *= rest[*g];
            }
            p
        };
        let mut oracle = 0.0;
        let mut tvec = vec![0usize; outer_h];
        loop {
            let mut outer_term = 1.0;
            for (i, t) in tvec.iter().enumerate() {
                outer_term *= outer_raw.p_thought[*t] * outer_raw.p_action[*t][outer_goal[i]];
            }
            let e_row = &e_out_raw[&outer_goal];
            for cl in 0..n_cl {
                for ck in 0..n_ck {
                    oracle += outer_term
                        * e_row[cl]
                        * chain_prob(&inner_row0, &inner_rest, cl, &inner_goal)
                        * e_back_w[ck]
                        * chain_prob(&resume_row0, &resume_rest, ck, &resume_goal);
                }
            }
            let mut i = outer_h;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                tvec[i] += 1;
                if tvec[i] < nt {
                    break;
                }
                tvec[i] = 0;
            }
            if tvec.iter().all(|v| *v == 0) {
                break;
            }
        }
        let diff = (engine - oracle).abs();
        worst = worst.max(diff);
        assert!(
            diff <= 1e-9,
            "trial {trial}: engine {engine} vs oracle {oracle}"
        );
    }

    let elapsed = started.elapsed();
    check(
        &format!(
            "criterion 4: F2 = {p_f2:.5} (1e-12) and 20 randomized hierarchies match flat enumeration (worst gap {worst:.2e} <= 1e-9) in {:.3}s",
            elapsed.as_secs_f64()
        ),
        elapsed.as_secs_f64() < 10.0,
    );
}

#[test]
fn criterion_05_parallel_factorization() {
    // Fixture: branch product with a recombining tail.
    let (doc, compiled) = load("parallel.scn");
    let p = eval(&compiled);
    let tail_ok = (p - 0.075).abs() <= 1e-12;
    // Dropping the tail stage leaves the pure branch product.
    let no_tail = GoalQuery {
        goal: compiled.objective.goal.goal.truncated(2),
        context: compiled.objective.goal.context.clone(),
    };
    let p_no_tail = exact_goal_probability(&compiled.system, &no_tail, ENUM_BUDGET).unwrap();
    let product_ok = (p_no_tail - 0.125).abs() <= 1e-12;
    drop(doc);

    // 20 randomized independent-branch fixtures.
    let mut rng = Rng(0xabcd_0001);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let thoughts: Vec<ThoughtId> = (0..1 + rng.below(3))
            .map(|i| ThoughtId::new(format!("t{i}")).unwrap())
            .collect();
        let query_ctx = ContextId::new("c0").unwrap();
        let contexts = ContextAlphabet::new(vec![query_ctx.clone()]).unwrap();

        let make_branch = |rng: &mut Rng, prefix: &str| {
            let space = space_of(prefix, 1 + rng.below(3));
            let horizon = 1 + rng.below(2);
            let kernel = if rng.below(2) == 0 {
                let w = rng.weights(space.action_ids().len());
                Kernel::Tabular(TabularKernel {
                    table: StateTable::stationary(dist_over_actions(&space, &w)),
                })
            } else {
                random_react(rng, &thoughts, &space).0
            };
            let goal_len = rng.below(horizon + 1);
            let goal: Vec<ActionId> = (0..goal_len)
                .map(|_| space.action_ids()[rng.below(space.action_ids().len())].clone())
                .collect();
            (agent(prefix, kernel, space, horizon), goal)
        };
        let (left_agent, left_goal) = make_branch(&mut rng, "L");
        let (right_agent, right_goal) = make_branch(&mut rng, "R");

        let left_chain = System {
            thoughts: ThoughtAlphabet::new(thoughts.clone()).unwrap(),
            contexts: contexts.clone(),
            topology: Topology::Chain(left_agent.clone()),
        };
        let right_chain = System {
            thoughts: ThoughtAlphabet::new(thoughts.clone()).unwrap(),
            contexts: contexts.clone(),
            topology: Topology::Chain(right_agent.clone()),
        };
        let joint = System {
            thoughts: ThoughtAlphabet::new(thoughts.clone()).unwrap(),
            contexts: contexts.clone(),
            topology: compose_parallel(
                Topology::Chain(left_agent),
                Topology::Chain(right_agent),
                Recombiner::ConcatHistories,
                None,
            )
            .unwrap(),
        };

        let seq_query = |goal: &[ActionId]| GoalQuery {
            goal: GoalSpec::Seq(goal.to_vec()),
            context: query_ctx.clone(),
        };
        let p_left =
            exact_goal_probability(&left_chain, &seq_query(&left_goal), ENUM_BUDGET).unwrap();
        let p_right =
            exact_goal_probability(&right_chain, &seq_query(&right_goal), ENUM_BUDGET).unwrap();
        let p_joint = exact_goal_probability(
            &joint,
            &GoalQuery {
                goal: GoalSpec::Parallel {
                    left: Box::new(GoalSpec::Seq(left_goal.clone())),
                    right: Box::new(GoalSpec::Seq(right_goal.clone())),
                    tail: None,
                },
                context: query_ctx.clone(),
            },
            ENUM_BUDGET,
        )
        .unwrap();
        let diff = (p_joint - p_left * p_right).abs();
        worst = worst.max(diff);
        assert!(
            diff <= 1e-12,
            "trial {trial}: joint {p_joint} vs product {}",
            p_left * p_right
        );
    }

    check(
        &format!(
            "criterion 5: parallel fixture = 0.075 and no-tail product = 0.125 (1e-12); 20 randomized joints factor exactly (worst gap {worst:.2e} <= 1e-12)"
        ),
        tail_ok && product_ok,
    );
}

#[test]
fn criterion_06_prefix_monotonicity_and_restriction_dominance() {
    // 50 randomized chains.
    let mut rng = Rng(0xfeed_0042);
    for trial in 0..50 {
        let thoughts: Vec<ThoughtId> = (0..1 + rng.below(3))
            .map(|i| ThoughtId::new(format!("t{i}")).unwrap())
            .collect();
        let space = space_of("A", 1 + rng.below(3));
        let horizon = 1 + rng.below(4);
        let kernel = if rng.below(2) == 0 {
            let w = rng.weights(space.action_ids().len());
            Kernel::Tabular(TabularKernel {
                table: StateTable::stationary(dist_over_actions(&space, &w)),
            })
        } else {
            random_react(&mut rng, &thoughts, &space).0
        };
        let system = System {
            thoughts: ThoughtAlphabet::new(thoughts).unwrap(),
            contexts: ContextAlphabet::new(vec![ContextId::new("c0").unwrap()]).unwrap(),
            topology: Topology::Chain(agent("m", kernel, space.clone(), horizon)),
        };
        let goal_len = 1 + rng.below(horizon);
        let goal: Vec<ActionId> = (0..goal_len)
            .map(|_| space.action_ids()[rng.below(space.action_ids().len())].clone())
            .collect();
        let q = GoalQuery {
            goal: GoalSpec::Seq(goal),
            context: ContextId::new("c0").unwrap(),
        };
        let prefixes = prefix_probabilities(&system, &q, ENUM_BUDGET).unwrap();
        for w in prefixes.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-12,
                "trial {trial}: prefixes not monotone: {prefixes:?}"
            );
        }
    }

    // Restriction dominance: the control-flow fixture vs its unrestricted
    // counterpart (allowed sets widened to the whole space).
    let (_, cf) = load("controlflow.scn");
    let p_restricted = eval(&cf);
    let mut unrestricted = cf.system.clone();
    if let Topology::ControlFlow(graph) = &mut unrestricted.topology {
        let full: BTreeSet<ActionId> = graph.base.space.action_ids().into_iter().collect();
        for node in &mut graph.nodes {
            node.allowed = full.clone();
        }
    } else {
        panic!("controlflow fixture is a control-flow topology");
    }
    let p_unrestricted =
        exact_goal_probability(&unrestricted, &cf.objective.goal, ENUM_BUDGET).unwrap();
    let cf_dominates = p_restricted >= p_unrestricted;

    // Same check for the restricted-kernel chain fixture.
    let (doc_rc, rc) = load("restricted_chain.scn");
    let p_rc = eval(&rc);
    let p_rc_base = eval_edited(&doc_rc, |d| {
        d.agents[0].kernel = "kb".into();
    });
    let rc_dominates = p_rc >= p_rc_base;

    check(
        &format!(
            "criterion 6: 50 random chains have non-increasing prefixes; restriction dominance {p_restricted:.4} >= {p_unrestricted:.4} (control flow) and {p_rc:.4} >= {p_rc_base:.4} (restricted kernel)"
        ),
        cf_dominates && rc_dominates,
    );
}

#[test]
fn criterion_07_monte_carlo_consistency() {
    let started = Instant::now();
    let mut lines = Vec::new();
    for name in fixture_names() {
        let (_, compiled) = load(&name);
        let exact = eval(&compiled);
        let one =
            estimate_goal_probability(&compiled.system, &compiled.objective.goal, 100_000, 7, 1)
                .unwrap();
        let four =
            estimate_goal_probability(&compiled.system, &compiled.objective.goal, 100_000, 7, 4)
                .unwrap();
        assert_eq!(one, four, "{name}: worker-count changed the estimate");
        let bound = 4.0 * one.stderr;
        assert!(
            (one.mean - exact).abs() <= bound,
            "{name}: estimate {} vs exact {exact} exceeds 4*stderr {bound}",
            one.mean
        );
        lines.push(format!("{name} |{:.5}-{exact:.5}|<={bound:.5}", one.mean));
    }
    let elapsed = started.elapsed();
    check(
        &format!(
            "criterion 7: n=100000 seed=7 estimates within 4*stderr of exact and byte-identical for 1 vs 4 workers ({}) in {:.2}s",
            lines.len(),
            elapsed.as_secs_f64()
        ),
        elapsed.as_secs_f64() < 30.0,
    );
}

#[test]
fn criterion_08_optimizer_soundness() {
    // Exhaustive search matches an independent brute-force argmax.
    let (doc, _) = load("react_opt.scn");
    let outcome = optimize_dof(&doc, StrategyKind::ReAct, 64).unwrap();
    assert_eq!(outcome.log.len(), 4, "exhaustive log covers all candidates");

    let mut brute_best: Option<(String, String, f64)> = None;
    for style in ["plain", "primed"] {
        for update in ["u_concat", "u_sum"] {
            let value = eval_edited(&doc, |d| {
                d.agents[0].bindings.insert("style".into(), style.into());
                d.agents[0].update = update.into();
            });
            let better = match &brute_best {
                None => true,
                Some((_, _, v)) => value > *v,
            };
            if better {
                brute_best = Some((style.into(), update.into(), value));
            }
        }
    }
    let (best_style, best_update, best_value) = brute_best.unwrap();
    let exhaustive_ok = (outcome.value - best_value).abs() <= 1e-12
        && outcome.doc.agents[0].bindings["style"] == best_style
        && outcome.doc.agents[0].update == best_update
        && (outcome.value - 0.666).abs() <= 1e-12;

    // Soundness: the returned value is the exact evaluation of the
    // returned configuration.
    let re_eval = eval(&outcome.doc.compile().unwrap());
    let sound = (re_eval - outcome.value).abs() <= 1e-12;

    // lambda = 0 reduces context search to pure probability maximization.
    let (_, f2) = load("f2_hier.scn");
    let lambda0 = Objective::new(f2.objective.goal.clone(), 0.0, f2.objective.cost_model).unwrap();
    let (best_ctx, best_val) = optimize_context(&f2.system, &lambda0, 16, ENUM_BUDGET).unwrap();
    let context_ok = best_ctx == ContextId::new("c1").unwrap() && (best_val - 0.369).abs() <= 1e-12;

    // lambda sweep: non-increasing when cost > 0, constant when cost = 0.
    let cost = collab_cost(&f2.system.topology, &f2.objective.cost_model);
    assert!((cost - 2.9).abs() <= 1e-12, "F2 collab cost {cost}");
    let sweep: Vec<f64> = [0.0, 0.01, 0.1, 1.0, 10.0]
        .iter()
        .map(|l| {
            let obj =
                Objective::new(f2.objective.goal.clone(), *l, f2.objective.cost_model).unwrap();
            agentprob::regularized_objective(&f2.system, &obj, ENUM_BUDGET).unwrap()
        })
        .collect();
    let monotone = sweep.windows(2).all(|w| w[1] < w[0]);
    let f2_objective_ok = (sweep[1] - 0.2785).abs() <= 1e-12;

    let (_, k1) = load("k1_chain.scn");
    let k1_sweep: Vec<f64> = [0.0, 0.01, 0.1, 1.0, 10.0]
        .iter()
        .map(|l| {
            let obj =
                Objective::new(k1.objective.goal.clone(), *l, k1.objective.cost_model).unwrap();
            agentprob::regularized_objective(&k1.system, &obj, ENUM_BUDGET).unwrap()
        })
        .collect();
    let constant = k1_sweep.windows(2).all(|w| (w[1] - w[0]).abs() <= 1e-15);

    check(
        &format!(
            "criterion 8: exhaustive argmax ({best_style}, {best_update}) = {best_value:.4} matches brute force and re-evaluation; optimize_context(lambda=0) -> ({best_ctx}, {best_val:.4}); lambda sweep monotone on F2, constant on zero-cost chain"
        ),
        exhaustive_ok && sound && context_ok && monotone && f2_objective_ok && constant,
    );
}

#[test]
fn criterion_09_dof_gating() {
    use DofHandle::*;
    let expected: Vec<(StrategyKind, Vec<DofHandle>)> = vec![
        (StrategyKind::ReAct, vec![InitState, Update]),
        (StrategyKind::ComposableInference, vec![Kernel]),
        (StrategyKind::DeepThinking, vec![Kernel]),
        (StrategyKind::FineTuning, vec![Kernel]),
        (
            StrategyKind::ControlFlow,
            vec![InitState, Update, Kernel, ActionPartition],
        ),
        (
            StrategyKind::MultiAgentNoCollab,
            vec![InitState, Update, Kernel, ActionPartition],
        ),
        (
            StrategyKind::MultiAgentCollab,
            vec![
                InitState,
                Update,
                Kernel,
                ActionPartition,
                EmissionOut,
                EmissionBack,
            ],
        ),
    ];
    for (kind, handles) in &expected {
        assert_eq!(
            dof_handles(*kind),
            handles.iter().copied().collect::<BTreeSet<_>>(),
            "declared set for {kind}"
        );
    }

    let domain_for = |handle: DofHandle| -> MutationDomainDoc {
        match handle {
            InitState => MutationDomainDoc::InitState {
                agent: "main".into(),
                param: "style".into(),
                values: vec!["plain".into()],
            },
            Update => MutationDomainDoc::Update {
                agent: "main".into(),
                candidates: vec!["u_concat".into()],
            },
            Kernel => MutationDomainDoc::Kernel {
                agent: "main".into(),
                candidates: vec!["kr".into()],
            },
            ActionPartition => MutationDomainDoc::ActionPartition {
                node: 0,
                candidates: vec![vec!["A".into()]],
            },
            EmissionOut => MutationDomainDoc::EmissionOut {
                candidates: vec!["e".into()],
            },
            EmissionBack => MutationDomainDoc::EmissionBack {
                candidates: vec!["e".into()],
            },
        }
    };

    let (doc, _) = load("react_opt.scn");
    let mut negatives = 0;
    for kind in StrategyKind::ALL {
        let allowed = dof_handles(kind);
        for handle in DofHandle::ALL {
            if allowed.contains(&handle) {
                continue;
            }
            let mut gated = doc.clone();
            gated.mutation_domains = vec![domain_for(handle)];
            match optimize_dof(&gated, kind, 8) {
                Err(Error::DofViolation {
                    handle: h,
                    strategy: s,
                }) => {
                    assert_eq!(h, handle.name());
                    assert_eq!(s, kind.name());
                    negatives += 1;
                }
                other => panic!(
                    "{kind}/{handle}: expected DOF violation, got {other:?}",
                    kind = kind.name(),
                    handle = handle.name()
                ),
            }
        }
    }

    check(
        &format!(
            "criterion 9: declared DOF sets match the strategy table row-for-row; {negatives} out-of-set mutations all raise DOF violations"
        ),
        negatives == 23,
    );
}

#[test]
fn criterion_10_io_round_trip() {
    for name in fixture_names() {
        let text = std::fs::read_to_string(fixtures_dir().join(name.clone())).unwrap();
        let doc = parse_scenario(&text).unwrap();
        let again = parse_scenario(&serialize_scenario(&doc)).unwrap();
        assert_eq!(doc, again, "{name}: round trip changed the document");
    }

    // A probability edit must either parse normalized or fail loudly.
    let text = std::fs::read_to_string(fixtures_dir().join("k1_chain.scn")).unwrap();
    let broken = text.replace("\"t0\": 0.2, \"t1\": 0.8", "\"t0\": 0.9, \"t1\": 0.8");
    let broken_fails = match parse_scenario(&broken) {
        Err(Error::BadDistribution { reason, .. }) => reason.contains("1.7"),
        other => panic!("expected normalization failure, got {other:?}"),
    };
    let swapped = text.replace("\"t0\": 0.2, \"t1\": 0.8", "\"t0\": 0.8, \"t1\": 0.2");
    let swapped_parses = parse_scenario(&swapped).is_ok();

    check(
        &format!(
            "criterion 10 (library half): parse-serialize identity on {} fixtures; probability edits never silently renormalize",
            fixture_names().len()
        ),
        broken_fails && swapped_parses,
    );
}
