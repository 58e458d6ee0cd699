//! Base symbols of the calculus: finite alphabets, the action space, states,
//! update functions, and initial-state builders.
//!
//! Everything here is an immutable value after construction. States compare
//! by structural value equality and serialize to a canonical key used to
//! index kernel tables.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::ids::{
    check_ident, ActionId, ArgId, ClassId, ContextId, KeyId, ObsId, ParamId, SummaryId, ThoughtId,
    ValueId,
};

// ---------------------------------------------------------------------------
// Alphabets
// ---------------------------------------------------------------------------

/// A non-empty, lexicographically ordered set of thought symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThoughtAlphabet {
    thoughts: Vec<ThoughtId>,
}

/// A non-empty, lexicographically ordered set of context symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextAlphabet {
    contexts: Vec<ContextId>,
}

fn ordered_unique<T: Ord + Clone + std::fmt::Display>(
    mut items: Vec<T>,
    what: &str,
) -> Result<Vec<T>> {
    items.sort();
    for w in items.windows(2) {
        if w[0] == w[1] {
            return Err(Error::BadIdentifier {
                id: w[0].to_string(),
                reason: format!("duplicate {what}"),
            });
        }
    }
    Ok(items)
}

impl ThoughtAlphabet {
    pub fn new(thoughts: Vec<ThoughtId>) -> Result<Self> {
        if thoughts.is_empty() {
            return Err(Error::BadIdentifier {
                id: String::new(),
                reason: "thought alphabet is empty".into(),
            });
        }
        Ok(Self {
            thoughts: ordered_unique(thoughts, "thought")?,
        })
    }

    pub fn members(&self) -> &[ThoughtId] {
        &self.thoughts
    }

    pub fn contains(&self, t: &ThoughtId) -> bool {
        self.thoughts.binary_search(t).is_ok()
    }

    pub fn len(&self) -> usize {
        self.thoughts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thoughts.is_empty()
    }
}

impl ContextAlphabet {
    pub fn new(contexts: Vec<ContextId>) -> Result<Self> {
        if contexts.is_empty() {
            return Err(Error::BadIdentifier {
                id: String::new(),
                reason: "context alphabet is empty".into(),
            });
        }
        Ok(Self {
            contexts: ordered_unique(contexts, "context")?,
        })
    }

    pub fn members(&self) -> &[ContextId] {
        &self.contexts
    }

    pub fn contains(&self, c: &ContextId) -> bool {
        self.contexts.binary_search(c).is_ok()
    }
}

// ---------------------------------------------------------------------------
// Action space
// ---------------------------------------------------------------------------

/// The finite action universe of one agent (or one partition of a composite
/// system): classes, their arguments, the observation each invocation yields,
/// and which classes terminate a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpace {
    classes: Vec<ClassId>,
    args_of: BTreeMap<ClassId, Vec<ArgId>>,
    obs_of: BTreeMap<(ClassId, ArgId), ObsId>,
    terminal_classes: BTreeSet<ClassId>,
}

impl ActionSpace {
    pub fn new(
        class_args: Vec<(ClassId, Vec<(ArgId, ObsId)>)>,
        terminal_classes: BTreeSet<ClassId>,
    ) -> Result<Self> {
        let mut classes = Vec::new();
        let mut args_of = BTreeMap::new();
        let mut obs_of = BTreeMap::new();
        for (class, args) in class_args {
            if args.is_empty() {
                return Err(Error::BadIdentifier {
                    id: class.to_string(),
                    reason: "action class has no arguments".into(),
                });
            }
            if args_of.contains_key(&class) {
                return Err(Error::BadIdentifier {
                    id: class.to_string(),
                    reason: "duplicate action class".into(),
                });
            }
            let mut arg_ids = Vec::new();
            for (arg, obs) in args {
                if obs_of.insert((class.clone(), arg.clone()), obs).is_some() {
                    return Err(Error::BadIdentifier {
                        id: format!("{class}.{arg}"),
                        reason: "duplicate argument".into(),
                    });
                }
                arg_ids.push(arg);
            }
            arg_ids.sort();
            args_of.insert(class.clone(), arg_ids);
            classes.push(class);
        }
        classes.sort();
        for t in &terminal_classes {
            if !args_of.contains_key(t) {
                return Err(Error::UnresolvedRef {
                    path: "terminal_classes".into(),
                    id: t.to_string(),
                });
            }
        }
        Ok(Self {
            classes,
            args_of,
            obs_of,
            terminal_classes,
        })
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn args_of(&self, class: &ClassId) -> Option<&[ArgId]> {
        self.args_of.get(class).map(|v| v.as_slice())
    }

    pub fn obs_of(&self, class: &ClassId, arg: &ArgId) -> Option<&ObsId> {
        self.obs_of.get(&(class.clone(), arg.clone()))
    }

    pub fn is_terminal(&self, class: &ClassId) -> bool {
        self.terminal_classes.contains(class)
    }

    /// All action identifiers in canonical (class, arg) order.
    pub fn action_ids(&self) -> Vec<ActionId> {
        self.obs_of
            .keys()
            .map(|(c, a)| ActionId::new(c.clone(), a.clone()))
            .collect()
    }

    pub fn contains_action(&self, id: &ActionId) -> bool {
        self.obs_of
            .contains_key(&(id.class.clone(), id.arg.clone()))
    }

    /// Materialize the full `{class, arg, obs}` triple for an action id.
    pub fn action(&self, id: &ActionId) -> Result<Action> {
        let obs = self
            .obs_of(&id.class, &id.arg)
            .ok_or_else(|| Error::UnresolvedRef {
                path: "action".into(),
                id: id.to_string(),
            })?;
        Ok(Action {
            class: id.class.clone(),
            arg: id.arg.clone(),
            obs: obs.clone(),
        })
    }

    /// Resolve an action reference: either `class.arg` or a bare class name
    /// when the class has exactly one argument.
    pub fn resolve(&self, reference: &str) -> Result<ActionId> {
        let unresolved = |reason: String| Error::UnresolvedRef {
            path: "action".into(),
            id: format!("{reference} ({reason})"),
        };
        if let Some((class_s, arg_s)) = reference.split_once('.') {
            let class = ClassId::new(class_s)?;
            let arg = ArgId::new(arg_s)?;
            let id = ActionId::new(class, arg);
            if !self.contains_action(&id) {
                return Err(unresolved("no such class.arg".into()));
            }
            return Ok(id);
        }
        let class = ClassId::new(reference)?;
        let args = self
            .args_of(&class)
            .ok_or_else(|| unresolved("no such class".into()))?;
        if args.len() != 1 {
            return Err(unresolved(format!(
                "bare class name is ambiguous over {} arguments",
                args.len()
            )));
        }
        Ok(ActionId::new(class, args[0].clone()))
    }
}

/// One executed step: the `{class, arg, obs}` triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub class: ClassId,
    pub arg: ArgId,
    pub obs: ObsId,
}

impl Action {
    pub fn id(&self) -> ActionId {
        ActionId::new(self.class.clone(), self.arg.clone())
    }
}

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

/// One element of a history-form state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Segment {
    /// A literal template fragment or instantiated parameter value.
    Literal(String),
    Context(ContextId),
    Thought(ThoughtId),
    Observation(ObsId),
}

/// An agent state. History states are lossless transcripts; summary and
/// memory states are the compressed forms produced by the other two update
/// kinds. Equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum State {
    History(Vec<Segment>),
    Summary(SummaryId),
    Memory(BTreeMap<KeyId, ValueId>),
}

fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if matches!(c, '\\' | ',' | ']' | '=') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

impl State {
    pub fn empty_history() -> Self {
        State::History(Vec::new())
    }

    pub fn empty_memory() -> Self {
        State::Memory(BTreeMap::new())
    }

    pub fn form(&self) -> &'static str {
        match self {
            State::History(_) => "history",
            State::Summary(_) => "summary",
            State::Memory(_) => "memory",
        }
    }

    pub fn segments(&self) -> Option<&[Segment]> {
        match self {
            State::History(segs) => Some(segs),
            _ => None,
        }
    }

    /// Canonical serialization; the key under which kernels index states.
    ///
    /// `h[...]` for histories, `s[...]` for summaries, `m[...]` for memory.
    /// Identifier segments are written as `c=`, `t=`, `o=`; literals as
    /// `l=` with `\`-escaping of `\ , ] =`.
    pub fn key(&self) -> String {
        match self {
            State::History(segs) => {
                let parts: Vec<String> = segs
                    .iter()
                    .map(|seg| match seg {
                        Segment::Literal(s) => format!("l={}", escape_literal(s)),
                        Segment::Context(c) => format!("c={c}"),
                        Segment::Thought(t) => format!("t={t}"),
                        Segment::Observation(o) => format!("o={o}"),
                    })
                    .collect();
                format!("h[{}]", parts.join(","))
            }
            State::Summary(s) => format!("s[{s}]"),
            State::Memory(m) => {
                let parts: Vec<String> = m.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("m[{}]", parts.join(","))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Update functions
// ---------------------------------------------------------------------------

/// Marker for the thought slot in update-function maps when the step was
/// produced by a kernel without latent thoughts. Spelled `_` in scenarios.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ThoughtSlot {
    None,
    Thought(ThoughtId),
}

impl ThoughtSlot {
    pub fn from_option(t: Option<&ThoughtId>) -> Self {
        match t {
            Some(t) => ThoughtSlot::Thought(t.clone()),
            None => ThoughtSlot::None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            ThoughtSlot::None => "_".to_string(),
            ThoughtSlot::Thought(t) => t.to_string(),
        }
    }
}

/// The state update rule `u`.
///
/// * `Concat` is lossless: it appends the thought (if any) and observation
///   to a history state.
/// * `Summary` is lossy: a total table maps (summary, thought, observation)
///   to the next summary. `initial` fixes the summary that stands in for the
///   instantiated initial prompt, per start context.
/// * `Selective` is structured memory: a total table maps (thought,
///   observation) to a single `key := value` write.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateFn {
    Concat,
    Summary {
        map: BTreeMap<(SummaryId, ThoughtSlot, ObsId), SummaryId>,
        initial: BTreeMap<ContextId, SummaryId>,
    },
    Selective {
        selector: BTreeMap<(ThoughtSlot, ObsId), (KeyId, ValueId)>,
    },
}

impl UpdateFn {
    pub fn kind(&self) -> &'static str {
        match self {
            UpdateFn::Concat => "concat",
            UpdateFn::Summary { .. } => "summary",
            UpdateFn::Selective { .. } => "selective",
        }
    }
}

/// Apply update `u` to state `s` with thought `t` (if the kernel produced
/// one) and observation `o`. Pure: the input state is not modified.
pub fn apply_update(u: &UpdateFn, s: &State, t: Option<&ThoughtId>, o: &ObsId) -> Result<State> {
    match (u, s) {
        (UpdateFn::Concat, State::History(segs)) => {
            let mut next = segs.clone();
            if let Some(t) = t {
                next.push(Segment::Thought(t.clone()));
            }
            next.push(Segment::Observation(o.clone()));
            Ok(State::History(next))
        }
        (UpdateFn::Summary { map, .. }, State::Summary(current)) => {
            let slot = ThoughtSlot::from_option(t);
            let key = (current.clone(), slot.clone(), o.clone());
            let next = map.get(&key).ok_or_else(|| Error::MissingTransition {
                what: "summary",
                key: format!("({current}, {}, {o})", slot.render()),
            })?;
            Ok(State::Summary(next.clone()))
        }
        (UpdateFn::Selective { selector }, State::Memory(mem)) => {
            let slot = ThoughtSlot::from_option(t);
            let (key, value) = selector.get(&(slot.clone(), o.clone())).ok_or_else(|| {
                Error::MissingTransition {
                    what: "selector",
                    key: format!("({}, {o})", slot.render()),
                }
            })?;
            let mut next = mem.clone();
            next.insert(key.clone(), value.clone());
            Ok(State::Memory(next))
        }
        (u, s) => Err(Error::FormMismatch {
            update_kind: u.kind(),
            state_form: s.form(),
        }),
    }
}

// ---------------------------------------------------------------------------
// Initial-state builder
// ---------------------------------------------------------------------------

/// One element of an initial-prompt template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateSegment {
    Literal(String),
    /// The single context placeholder.
    ContextSlot,
    Param(ParamId),
}

/// Builds the initial state from a prompt template, the input context, and a
/// binding of finite-valued template parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitBuilder {
    template: Vec<TemplateSegment>,
    params: BTreeMap<ParamId, Vec<String>>,
}

impl InitBuilder {
    pub fn new(
        template: Vec<TemplateSegment>,
        params: BTreeMap<ParamId, Vec<String>>,
    ) -> Result<Self> {
        let slots = template
            .iter()
            .filter(|s| matches!(s, TemplateSegment::ContextSlot))
            .count();
        if slots != 1 {
            return Err(Error::InvalidGoal(format!(
                "template must contain exactly one context placeholder, found {slots}"
            )));
        }
        for seg in &template {
            if let TemplateSegment::Param(p) = seg {
                if !params.contains_key(p) {
                    return Err(Error::BadBinding {
                        param: p.to_string(),
                        reason: "referenced by template but not declared".into(),
                    });
                }
            }
        }
        for values in params.values() {
            for v in values {
                check_ident(v)?;
            }
        }
        Ok(Self { template, params })
    }

    /// The bare `[⟨c⟩]` template with no parameters.
    pub fn context_only() -> Self {
        Self {
            template: vec![TemplateSegment::ContextSlot],
            params: BTreeMap::new(),
        }
    }

    pub fn template(&self) -> &[TemplateSegment] {
        &self.template
    }

    pub fn params(&self) -> &BTreeMap<ParamId, Vec<String>> {
        &self.params
    }
}

/// Instantiate the template: literals stay, the placeholder becomes the
/// context, parameter references become their bound values. Deterministic.
pub fn build_initial_state(
    builder: &InitBuilder,
    alphabet: &ContextAlphabet,
    context: &ContextId,
    bindings: &BTreeMap<ParamId, String>,
) -> Result<State> {
    if !alphabet.contains(context) {
        return Err(Error::UnknownContext(context.to_string()));
    }
    for (param, domain) in &builder.params {
        match bindings.get(param) {
            None => {
                return Err(Error::BadBinding {
                    param: param.to_string(),
                    reason: "unbound".into(),
                })
            }
            Some(value) if !domain.contains(value) => {
                return Err(Error::BadBinding {
                    param: param.to_string(),
                    reason: format!("value {value:?} outside declared domain"),
                })
            }
            Some(_) => {}
        }
    }
    for param in bindings.keys() {
        if !builder.params.contains_key(param) {
            return Err(Error::BadBinding {
                param: param.to_string(),
                reason: "bound but not declared".into(),
            });
        }
    }
    let segments = builder
        .template
        .iter()
        .map(|seg| match seg {
            TemplateSegment::Literal(s) => Segment::Literal(s.clone()),
            TemplateSegment::ContextSlot => Segment::Context(context.clone()),
            TemplateSegment::Param(p) => Segment::Literal(bindings[p].clone()),
        })
        .collect();
    Ok(State::History(segments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cid(s: &str) -> ClassId {
        ClassId::new(s).unwrap()
    }
    fn aid(s: &str) -> ArgId {
        ArgId::new(s).unwrap()
    }
    fn oid(s: &str) -> ObsId {
        ObsId::new(s).unwrap()
    }
    fn tid(s: &str) -> ThoughtId {
        ThoughtId::new(s).unwrap()
    }
    fn ctx(s: &str) -> ContextId {
        ContextId::new(s).unwrap()
    }
    fn sid(s: &str) -> SummaryId {
        SummaryId::new(s).unwrap()
    }

    fn two_action_space() -> ActionSpace {
        ActionSpace::new(
            vec![
                (cid("A"), vec![(aid("x"), oid("oA"))]),
                (cid("B"), vec![(aid("x"), oid("oB"))]),
            ],
            BTreeSet::new(),
        )
        .unwrap()
    }

    #[test]
    fn resolve_accepts_bare_class_for_single_arg() {
        let space = two_action_space();
        let a = space.resolve("A").unwrap();
        assert_eq!(a.to_string(), "A.x");
        assert_eq!(space.resolve("A.x").unwrap(), a);
        assert!(space.resolve("Z").is_err());
    }

    #[test]
    fn resolve_rejects_ambiguous_bare_class() {
        let space = ActionSpace::new(
            vec![(cid("A"), vec![(aid("x"), oid("oX")), (aid("y"), oid("oY"))])],
            BTreeSet::new(),
        )
        .unwrap();
        assert!(space.resolve("A").is_err());
        assert!(space.resolve("A.y").is_ok());
    }

    #[test]
    fn action_carries_its_observation() {
        let space = two_action_space();
        let a = space.action(&space.resolve("B").unwrap()).unwrap();
        assert_eq!(a.obs, oid("oB"));
    }

    #[test]
    fn build_initial_state_substitutes_template() {
        let alphabet = ContextAlphabet::new(vec![ctx("c0"), ctx("c1")]).unwrap();
        let builder = InitBuilder::new(
            vec![
                TemplateSegment::Literal("CTX=".into()),
                TemplateSegment::ContextSlot,
            ],
            BTreeMap::new(),
        )
        .unwrap();
        let s = build_initial_state(&builder, &alphabet, &ctx("c0"), &BTreeMap::new()).unwrap();
        assert_eq!(
            s,
            State::History(vec![
                Segment::Literal("CTX=".into()),
                Segment::Context(ctx("c0")),
            ])
        );
        // identity template
        let plain = InitBuilder::context_only();
        let s1 = build_initial_state(&plain, &alphabet, &ctx("c1"), &BTreeMap::new()).unwrap();
        assert_eq!(s1, State::History(vec![Segment::Context(ctx("c1"))]));
    }

    #[test]
    fn template_needs_exactly_one_context_slot() {
        assert!(
            InitBuilder::new(vec![TemplateSegment::Literal("x".into())], BTreeMap::new()).is_err()
        );
        assert!(InitBuilder::new(
            vec![TemplateSegment::ContextSlot, TemplateSegment::ContextSlot],
            BTreeMap::new()
        )
        .is_err());
        // Undeclared parameter reference.
        assert!(InitBuilder::new(
            vec![
                TemplateSegment::ContextSlot,
                TemplateSegment::Param(ParamId::new("style").unwrap()),
            ],
            BTreeMap::new()
        )
        .is_err());
    }

    #[test]
    fn build_initial_state_rejects_bad_inputs() {
        let alphabet = ContextAlphabet::new(vec![ctx("c0")]).unwrap();
        let mut params = BTreeMap::new();
        params.insert(
            ParamId::new("style").unwrap(),
            vec!["terse".to_string(), "verbose".to_string()],
        );
        let builder = InitBuilder::new(
            vec![
                TemplateSegment::ContextSlot,
                TemplateSegment::Param(ParamId::new("style").unwrap()),
            ],
            params,
        )
        .unwrap();

        // unknown context
        assert!(matches!(
            build_initial_state(&builder, &alphabet, &ctx("cZ"), &BTreeMap::new()),
            Err(Error::UnknownContext(_))
        ));
        // unbound parameter
        assert!(matches!(
            build_initial_state(&builder, &alphabet, &ctx("c0"), &BTreeMap::new()),
            Err(Error::BadBinding { .. })
        ));
        // out-of-domain value
        let mut bad = BTreeMap::new();
        bad.insert(ParamId::new("style").unwrap(), "chatty".to_string());
        assert!(matches!(
            build_initial_state(&builder, &alphabet, &ctx("c0"), &bad),
            Err(Error::BadBinding { .. })
        ));
    }

    #[test]
    fn concat_appends_thought_and_observation() {
        let s0 = State::History(vec![Segment::Context(ctx("c0"))]);
        let s1 = apply_update(&UpdateFn::Concat, &s0, Some(&tid("t1")), &oid("oA")).unwrap();
        assert_eq!(
            s1,
            State::History(vec![
                Segment::Context(ctx("c0")),
                Segment::Thought(tid("t1")),
                Segment::Observation(oid("oA")),
            ])
        );
        // input untouched
        assert_eq!(s0.segments().unwrap().len(), 1);
    }

    #[test]
    fn summary_update_is_table_lookup() {
        let mut map = BTreeMap::new();
        map.insert(
            (sid("S0"), ThoughtSlot::Thought(tid("t1")), oid("oA")),
            sid("S1"),
        );
        let u = UpdateFn::Summary {
            map,
            initial: BTreeMap::new(),
        };
        let s1 =
            apply_update(&u, &State::Summary(sid("S0")), Some(&tid("t1")), &oid("oA")).unwrap();
        assert_eq!(s1, State::Summary(sid("S1")));
        assert!(matches!(
            apply_update(&u, &State::Summary(sid("S0")), Some(&tid("t1")), &oid("oB")),
            Err(Error::MissingTransition { .. })
        ));
    }

    #[test]
    fn selective_update_writes_one_slot() {
        let mut selector = BTreeMap::new();
        selector.insert(
            (ThoughtSlot::Thought(tid("t1")), oid("oA")),
            (KeyId::new("last_obs").unwrap(), ValueId::new("oA").unwrap()),
        );
        let u = UpdateFn::Selective { selector };
        let s1 = apply_update(&u, &State::empty_memory(), Some(&tid("t1")), &oid("oA")).unwrap();
        match &s1 {
            State::Memory(m) => {
                assert_eq!(m.len(), 1);
                assert_eq!(
                    m.get(&KeyId::new("last_obs").unwrap()),
                    Some(&ValueId::new("oA").unwrap())
                );
            }
            other => panic!("expected memory state, got {other:?}"),
        }
    }

    #[test]
    fn form_mismatch_is_an_error() {
        let u = UpdateFn::Summary {
            map: BTreeMap::new(),
            initial: BTreeMap::new(),
        };
        let s = State::History(vec![]);
        assert!(matches!(
            apply_update(&u, &s, Some(&tid("t0")), &oid("oA")),
            Err(Error::FormMismatch { .. })
        ));
    }

    #[test]
    fn state_keys_are_unambiguous() {
        let tricky = State::History(vec![
            Segment::Literal("a,b".into()),
            Segment::Literal("c".into()),
        ]);
        let plain = State::History(vec![
            Segment::Literal("a".into()),
            Segment::Literal("b,c".into()),
        ]);
        assert_ne!(tricky.key(), plain.key());
        assert_eq!(tricky.key(), r"h[l=a\,b,l=c]");
    }

    proptest! {
        /// Chained concat updates keep the full construction sequence
        /// recoverable from the final state.
        #[test]
        fn concat_is_lossless(steps in proptest::collection::vec((0u8..3, 0u8..3), 0..12)) {
            let thoughts = [tid("t0"), tid("t1"), tid("t2")];
            let observations = [oid("o0"), oid("o1"), oid("o2")];
            let mut s = State::History(vec![Segment::Context(ctx("c0"))]);
            for (ti, oi) in &steps {
                s = apply_update(
                    &UpdateFn::Concat,
                    &s,
                    Some(&thoughts[*ti as usize]),
                    &observations[*oi as usize],
                ).unwrap();
            }
            let segs = s.segments().unwrap();
            prop_assert_eq!(segs[0].clone(), Segment::Context(ctx("c0")));
            prop_assert_eq!(segs.len(), 1 + 2 * steps.len());
            for (i, (ti, oi)) in steps.iter().enumerate() {
                prop_assert_eq!(segs[1 + 2 * i].clone(), Segment::Thought(thoughts[*ti as usize].clone()));
                prop_assert_eq!(segs[2 + 2 * i].clone(), Segment::Observation(observations[*oi as usize].clone()));
            }
        }

        /// apply_update is a pure function: value-equal inputs give
        /// value-equal outputs and the key is stable.
        #[test]
        fn update_is_deterministic(ti in 0u8..3, oi in 0u8..3) {
            let thoughts = [tid("t0"), tid("t1"), tid("t2")];
            let observations = [oid("o0"), oid("o1"), oid("o2")];
            let s = State::History(vec![Segment::Context(ctx("c0"))]);
            let a = apply_update(&UpdateFn::Concat, &s, Some(&thoughts[ti as usize]), &observations[oi as usize]).unwrap();
            let b = apply_update(&UpdateFn::Concat, &s, Some(&thoughts[ti as usize]), &observations[oi as usize]).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.key(), b.key());
        }
    }
}
