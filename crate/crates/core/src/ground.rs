//! Grounding a [`LiftedModel`] into a STRIPS task, plus execution
//! semantics: the transition function, plan cost, and plan validation.
//!
//! Grounding is the full Cartesian instantiation with type filtering; no
//! reachability pruning, since model edits change reachability. Bindings
//! whose add and delete effects overlap (self-moves and the like) are
//! degenerate under set semantics and are skipped.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::pddl::{GroundAtom, Ident, LiftedModel, Term};

/// Plan or state cost with the paper's `∞` error channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cost {
    Finite(u64),
    Infinite,
}

impl Cost {
    pub fn is_finite(&self) -> bool {
        matches!(self, Cost::Finite(_))
    }

    pub fn finite(&self) -> Option<u64> {
        match self {
            Cost::Finite(c) => Some(*c),
            Cost::Infinite => None,
        }
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Finite(c) => write!(f, "{c}"),
            Cost::Infinite => write!(f, "inf"),
        }
    }
}

/// Fixed-width bitset over the task's fluent universe.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FluentSet {
    words: Vec<u64>,
}

impl FluentSet {
    pub fn with_capacity(n_fluents: usize) -> Self {
        FluentSet { words: vec![0; n_fluents.div_ceil(64)] }
    }

    pub fn insert(&mut self, i: u32) {
        self.words[i as usize / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: u32) {
        self.words[i as usize / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: u32) -> bool {
        self.words[i as usize / 64] & (1 << (i % 64)) != 0
    }

    pub fn is_subset(&self, other: &FluentSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// `self ∪ add \ del`, the STRIPS successor.
    pub fn apply(&self, add: &FluentSet, del: &FluentSet) -> FluentSet {
        let words = self
            .words
            .iter()
            .zip(&add.words)
            .zip(&del.words)
            .map(|((s, a), d)| (s | a) & !d)
            .collect();
        FluentSet { words }
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, w)| {
            let mut w = *w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros();
                w &= w - 1;
                Some(wi as u32 * 64 + bit)
            })
        })
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

impl fmt::Debug for FluentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A ground action before fluent indexing: atom-level view shared by the
/// task builder and the grounded-granularity model flattener.
#[derive(Debug, Clone)]
pub struct GroundActionAtoms {
    pub schema: Ident,
    pub args: Vec<Ident>,
    pub pre: Vec<GroundAtom>,
    pub add: Vec<GroundAtom>,
    pub del: Vec<GroundAtom>,
    pub cost: u64,
}

impl GroundActionAtoms {
    /// Canonical identifier: schema and bound objects joined by `_`.
    pub fn id(&self) -> String {
        ground_action_id(&self.schema, &self.args)
    }
}

pub fn ground_action_id(schema: &str, args: &[Ident]) -> String {
    let mut id = schema.to_owned();
    for a in args {
        id.push('_');
        id.push_str(a);
    }
    id
}

/// Enumerates all type-consistent bindings of every schema, in canonical
/// (schema name, then argument tuple) order.
pub fn enumerate_ground_actions(model: &LiftedModel) -> Vec<GroundActionAtoms> {
    let mut out = Vec::new();
    for schema in model.domain.schemas.values() {
        // Candidate objects per parameter, already sorted by name.
        let candidates: Vec<Vec<&Ident>> = schema
            .params
            .iter()
            .map(|p| {
                model
                    .all_objects()
                    .filter(|(_, ty)| model.domain.types.is_subtype(ty, &p.ty))
                    .map(|(name, _)| name)
                    .collect()
            })
            .collect();
        if candidates.iter().any(|c| c.is_empty()) && !schema.params.is_empty() {
            continue;
        }
        let mut idx = vec![0usize; candidates.len()];
        loop {
            let args: Vec<Ident> = idx
                .iter()
                .enumerate()
                .map(|(pi, &i)| candidates[pi][i].clone())
                .collect();
            let subst = |atoms: &std::collections::BTreeSet<crate::pddl::Atom>| -> Vec<GroundAtom> {
                atoms
                    .iter()
                    .map(|atom| GroundAtom {
                        pred: atom.pred.clone(),
                        args: atom
                            .args
                            .iter()
                            .map(|t| match t {
                                Term::Obj(o) => o.clone(),
                                Term::Var(v) => {
                                    let pi = schema.params.iter().position(|p| &p.name == v).unwrap();
                                    args[pi].clone()
                                }
                            })
                            .collect(),
                    })
                    .collect()
            };
            let pre = subst(&schema.pre);
            let add = subst(&schema.add);
            let del = subst(&schema.del);
            let degenerate = add.iter().any(|a| del.contains(a));
            if !degenerate {
                out.push(GroundActionAtoms {
                    schema: schema.name.clone(),
                    args,
                    pre,
                    add,
                    del,
                    cost: schema.cost,
                });
            }
            // Odometer step.
            let mut pi = idx.len();
            loop {
                if pi == 0 {
                    break;
                }
                pi -= 1;
                idx[pi] += 1;
                if idx[pi] < candidates[pi].len() {
                    break;
                }
                idx[pi] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GroundAction {
    pub id: Ident,
    pub schema: Ident,
    pub args: Vec<Ident>,
    pub pre: FluentSet,
    pub add: FluentSet,
    pub del: FluentSet,
    pub cost: u64,
}

impl GroundAction {
    pub fn to_step(&self) -> PlanStep {
        PlanStep { name: self.schema.clone(), args: self.args.clone() }
    }
}

/// Grounded STRIPS task: indexed fluent universe, ground actions, init, goal.
#[derive(Debug, Clone)]
pub struct GroundTask {
    pub fluents: Vec<GroundAtom>,
    fluent_ids: HashMap<GroundAtom, u32>,
    pub actions: Vec<GroundAction>,
    action_ids: HashMap<Ident, usize>,
    pub init: FluentSet,
    pub goal: FluentSet,
}

impl GroundTask {
    pub fn fluent_id(&self, atom: &GroundAtom) -> Option<u32> {
        self.fluent_ids.get(atom).copied()
    }

    pub fn resolve(&self, step: &PlanStep) -> Option<usize> {
        self.action_ids.get(&step.id()).copied()
    }

    /// `s ∪ eff⁺ \ eff⁻` when `pre ⊆ s`, `None` otherwise.
    pub fn progress(&self, state: &FluentSet, action: usize) -> Option<FluentSet> {
        let a = &self.actions[action];
        if a.pre.is_subset(state) {
            Some(state.apply(&a.add, &a.del))
        } else {
            None
        }
    }

    /// Runs the plan from init; `None` as soon as a step is unresolvable
    /// or inapplicable.
    pub fn run(&self, plan: &Plan) -> Option<FluentSet> {
        let mut state = self.init.clone();
        for step in &plan.steps {
            let idx = self.resolve(step)?;
            state = self.progress(&state, idx)?;
        }
        Some(state)
    }

    pub fn goal_satisfied(&self, state: &FluentSet) -> bool {
        self.goal.is_subset(state)
    }

    /// Σ action costs when the progression reaches the goal; `∞` when any
    /// step is undefined, unresolvable, or the goal is unmet.
    pub fn plan_cost(&self, plan: &Plan) -> Cost {
        let mut state = self.init.clone();
        let mut total = 0u64;
        for step in &plan.steps {
            let Some(idx) = self.resolve(step) else {
                return Cost::Infinite;
            };
            let Some(next) = self.progress(&state, idx) else {
                return Cost::Infinite;
            };
            total += self.actions[idx].cost;
            state = next;
        }
        if self.goal_satisfied(&state) {
            Cost::Finite(total)
        } else {
            Cost::Infinite
        }
    }

    /// VAL-style verdict: first failing step and the precondition atoms
    /// absent at that point, or the goal atoms still missing at the end.
    pub fn validate(&self, plan: &Plan) -> Verdict {
        let mut state = self.init.clone();
        for (i, step) in plan.steps.iter().enumerate() {
            let Some(idx) = self.resolve(step) else {
                return Verdict {
                    valid: false,
                    failing_step: Some(i),
                    unknown_action: true,
                    missing_preconditions: Vec::new(),
                    goal_gap: Vec::new(),
                };
            };
            match self.progress(&state, idx) {
                Some(next) => state = next,
                None => {
                    let a = &self.actions[idx];
                    let missing = a
                        .pre
                        .iter()
                        .filter(|&f| !state.contains(f))
                        .map(|f| self.fluents[f as usize].clone())
                        .collect();
                    return Verdict {
                        valid: false,
                        failing_step: Some(i),
                        unknown_action: false,
                        missing_preconditions: missing,
                        goal_gap: Vec::new(),
                    };
                }
            }
        }
        let gap: Vec<GroundAtom> = self
            .goal
            .iter()
            .filter(|&f| !state.contains(f))
            .map(|f| self.fluents[f as usize].clone())
            .collect();
        Verdict {
            valid: gap.is_empty(),
            failing_step: None,
            unknown_action: false,
            missing_preconditions: Vec::new(),
            goal_gap: gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub valid: bool,
    pub failing_step: Option<usize>,
    pub unknown_action: bool,
    pub missing_preconditions: Vec<GroundAtom>,
    pub goal_gap: Vec<GroundAtom>,
}

/// Instantiates the model. The fluent universe is every type-consistent
/// predicate instantiation, so init, goal, and all action atom sets index
/// into it by construction.
pub fn ground(model: &LiftedModel) -> GroundTask {
    let mut fluents = Vec::new();
    let mut fluent_ids = HashMap::new();
    for (pred, params) in &model.domain.predicates {
        let candidates: Vec<Vec<&Ident>> = params
            .iter()
            .map(|p| {
                model
                    .all_objects()
                    .filter(|(_, ty)| model.domain.types.is_subtype(ty, &p.ty))
                    .map(|(name, _)| name)
                    .collect()
            })
            .collect();
        if candidates.iter().any(|c| c.is_empty()) && !params.is_empty() {
            continue;
        }
        let mut idx = vec![0usize; params.len()];
        loop {
            let atom = GroundAtom {
                pred: pred.clone(),
                args: idx.iter().enumerate().map(|(pi, &i)| candidates[pi][i].clone()).collect(),
            };
            let id = fluents.len() as u32;
            fluent_ids.insert(atom.clone(), id);
            fluents.push(atom);
            let mut pi = idx.len();
            loop {
                if pi == 0 {
                    break;
                }
                pi -= 1;
                idx[pi] += 1;
                if idx[pi] < candidates[pi].len() {
                    break;
                }
                idx[pi] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }

    let n = fluents.len();
    let to_set = |atoms: &[GroundAtom], ids: &HashMap<GroundAtom, u32>| {
        let mut s = FluentSet::with_capacity(n);
        for a in atoms {
            s.insert(ids[a]);
        }
        s
    };

    let mut actions = Vec::new();
    let mut action_ids = HashMap::new();
    for ga in enumerate_ground_actions(model) {
        let id = ga.id();
        action_ids.insert(id.clone(), actions.len());
        actions.push(GroundAction {
            id,
            pre: to_set(&ga.pre, &fluent_ids),
            add: to_set(&ga.add, &fluent_ids),
            del: to_set(&ga.del, &fluent_ids),
            cost: ga.cost,
            schema: ga.schema,
            args: ga.args,
        });
    }

    let init: Vec<GroundAtom> = model.init.iter().cloned().collect();
    let goal: Vec<GroundAtom> = model.goal.iter().cloned().collect();
    GroundTask {
        init: to_set(&init, &fluent_ids),
        goal: to_set(&goal, &fluent_ids),
        fluents,
        fluent_ids,
        actions,
        action_ids,
    }
}

/// One step of a plan: action name plus bound objects, as read from a
/// `(name obj1 obj2)` plan line.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlanStep {
    pub name: Ident,
    pub args: Vec<Ident>,
}

impl PlanStep {
    pub fn id(&self) -> String {
        ground_action_id(&self.name, &self.args)
    }
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// Ordered sequence of ground action names. Steps are carried by name and
/// re-resolved per task, since the same plan is evaluated in many
/// hypothesis models.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Schema names occurring in the plan (first token of each step).
    pub fn action_names(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.name.as_str())
    }

    pub fn parse(text: &str) -> Result<Plan, PlanParseError> {
        let mut steps = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split(';').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let inner = line
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or(PlanParseError { line: lineno + 1 })?;
            let mut toks = inner.split_whitespace().map(|t| t.to_ascii_lowercase());
            let name = toks.next().ok_or(PlanParseError { line: lineno + 1 })?;
            steps.push(PlanStep { name, args: toks.collect() });
        }
        Ok(Plan { steps })
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            writeln!(f, "{step}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("line {line}: expected `(action obj1 obj2 ...)`")]
pub struct PlanParseError {
    pub line: usize,
}
