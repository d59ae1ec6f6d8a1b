//! Encoding of planning models as feature-set states, and the unit edits
//! over them: one feature per init atom, goal atom, (action, atom)
//! membership in preconditions / add effects / delete effects, and one
//! cost feature per action.
//!
//! Edits default to the lifted (schema-level) representation; grounded
//! granularity is obtained by flattening a model into one parameterless
//! schema per ground action and encoding that.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ground::enumerate_ground_actions;
use crate::pddl::{Atom, GroundAtom, Ident, LiftedModel, ModelDefect, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Lifted,
    Grounded,
}

/// One atom of the model encoding space.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelFeature {
    InitHas { atom: GroundAtom },
    GoalHas { atom: GroundAtom },
    Precondition { action: Ident, atom: Atom },
    AddEffect { action: Ident, atom: Atom },
    DelEffect { action: Ident, atom: Atom },
    Cost { action: Ident, value: u64 },
}

fn atom_token(pred: &str, args: impl Iterator<Item = impl fmt::Display>) -> String {
    let mut s = pred.to_owned();
    for a in args {
        s.push('_');
        s.push_str(&a.to_string());
    }
    s
}

impl ModelFeature {
    /// Action identifier the feature belongs to; `None` for init/goal.
    pub fn action(&self) -> Option<&str> {
        match self {
            ModelFeature::InitHas { .. } | ModelFeature::GoalHas { .. } => None,
            ModelFeature::Precondition { action, .. }
            | ModelFeature::AddEffect { action, .. }
            | ModelFeature::DelEffect { action, .. }
            | ModelFeature::Cost { action, .. } => Some(action),
        }
    }

    /// Predicate of the feature's atom; `None` for cost features.
    pub fn predicate(&self) -> Option<&str> {
        match self {
            ModelFeature::InitHas { atom } | ModelFeature::GoalHas { atom } => Some(&atom.pred),
            ModelFeature::Precondition { atom, .. }
            | ModelFeature::AddEffect { atom, .. }
            | ModelFeature::DelEffect { atom, .. } => Some(&atom.pred),
            ModelFeature::Cost { .. } => None,
        }
    }
}

impl fmt::Display for ModelFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelFeature::InitHas { atom } => {
                write!(f, "init-has-{}", atom_token(&atom.pred, atom.args.iter()))
            }
            ModelFeature::GoalHas { atom } => {
                write!(f, "goal-has-{}", atom_token(&atom.pred, atom.args.iter()))
            }
            ModelFeature::Precondition { action, atom } => {
                write!(f, "{action}-has-precondition-{}", atom_token(&atom.pred, atom.args.iter()))
            }
            ModelFeature::AddEffect { action, atom } => {
                write!(f, "{action}-has-add-effect-{}", atom_token(&atom.pred, atom.args.iter()))
            }
            ModelFeature::DelEffect { action, atom } => {
                write!(f, "{action}-has-del-effect-{}", atom_token(&atom.pred, atom.args.iter()))
            }
            ModelFeature::Cost { action, value } => write!(f, "{action}-has-cost-{value}"),
        }
    }
}

impl Serialize for ModelFeature {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// The image `Γ(M)` of a model: a set of features.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ModelState {
    pub features: BTreeSet<ModelFeature>,
}

impl ModelState {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn contains(&self, f: &ModelFeature) -> bool {
        self.features.contains(f)
    }

    /// At most one cost feature per action; no atom both added and deleted
    /// by the same action.
    pub fn check_invariants(&self) -> Result<(), SpaceError> {
        let mut costs: BTreeSet<&str> = BTreeSet::new();
        for f in &self.features {
            match f {
                ModelFeature::Cost { action, .. } => {
                    if !costs.insert(action) {
                        return Err(SpaceError::IllFormedState(format!(
                            "action `{action}` has more than one cost feature"
                        )));
                    }
                }
                ModelFeature::AddEffect { action, atom } => {
                    let twin = ModelFeature::DelEffect { action: action.clone(), atom: atom.clone() };
                    if self.features.contains(&twin) {
                        return Err(SpaceError::IllFormedState(format!(
                            "action `{action}` both adds and deletes {atom}"
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Add,
    Remove,
}

/// Unit model change: add or remove a single feature.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Edit {
    pub sign: Sign,
    pub feature: ModelFeature,
}

impl Edit {
    pub fn add(feature: ModelFeature) -> Self {
        Edit { sign: Sign::Add, feature }
    }

    pub fn remove(feature: ModelFeature) -> Self {
        Edit { sign: Sign::Remove, feature }
    }

    /// The same move in the opposite direction.
    pub fn inverse(&self) -> Edit {
        Edit {
            sign: match self.sign {
                Sign::Add => Sign::Remove,
                Sign::Remove => Sign::Add,
            },
            feature: self.feature.clone(),
        }
    }
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            Sign::Add => write!(f, "{}", self.feature),
            Sign::Remove => write!(f, "remove-{}", self.feature),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error("ill-formed model state: {0}")]
    IllFormedState(String),
    #[error("illegal edit: {0}")]
    IllegalEdit(String),
    #[error("templates disagree: {0}")]
    TemplateMismatch(String),
}

/// `Γ(M)`: one feature per init atom, goal atom, per-(schema, atom)
/// membership in pre / add / del, plus one cost feature per schema.
pub fn gamma(model: &LiftedModel) -> ModelState {
    let mut features = BTreeSet::new();
    for atom in &model.init {
        features.insert(ModelFeature::InitHas { atom: atom.clone() });
    }
    for atom in &model.goal {
        features.insert(ModelFeature::GoalHas { atom: atom.clone() });
    }
    for schema in model.domain.schemas.values() {
        for atom in &schema.pre {
            features.insert(ModelFeature::Precondition { action: schema.name.clone(), atom: atom.clone() });
        }
        for atom in &schema.add {
            features.insert(ModelFeature::AddEffect { action: schema.name.clone(), atom: atom.clone() });
        }
        for atom in &schema.del {
            features.insert(ModelFeature::DelEffect { action: schema.name.clone(), atom: atom.clone() });
        }
        features.insert(ModelFeature::Cost { action: schema.name.clone(), value: schema.cost });
    }
    ModelState { features }
}

/// Everything a feature set cannot carry: types, predicates, objects, and
/// schema signatures. Reconstruction instantiates schemas named by the
/// features against these signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    shell: LiftedModel,
}

impl Template {
    pub fn of(model: &LiftedModel) -> Template {
        let mut shell = model.clone();
        for schema in shell.domain.schemas.values_mut() {
            schema.pre.clear();
            schema.add.clear();
            schema.del.clear();
            schema.cost = 1;
        }
        shell.init.clear();
        shell.goal.clear();
        Template { shell }
    }

    /// Union of two templates over the mixed universe `F^H ∪ F^R`,
    /// `A^H ∪ A^R`. Shared names must agree on their signatures.
    pub fn merge(a: &Template, b: &Template) -> Result<Template, SpaceError> {
        let mut shell = a.shell.clone();
        let bs = &b.shell;
        if shell.domain.name != bs.domain.name {
            // Divergent domain names are fine for reconciliation; keep the first.
        }
        for (ty, parent) in bs.domain.types.iter() {
            if !shell.domain.types.contains(ty) {
                shell.domain.types.declare(ty.clone(), parent.clone());
            } else if !shell.domain.types.is_subtype(ty, parent) && !bs.domain.types.is_subtype(ty, parent) {
                return Err(SpaceError::TemplateMismatch(format!("type `{ty}` has different parents")));
            }
        }
        for (name, params) in &bs.domain.predicates {
            match shell.domain.predicates.get(name) {
                None => {
                    shell.domain.predicates.insert(name.clone(), params.clone());
                }
                Some(existing) if existing != params => {
                    return Err(SpaceError::TemplateMismatch(format!("predicate `{name}` has different signatures")));
                }
                _ => {}
            }
        }
        for (name, ty) in bs.all_objects() {
            match shell.object_type(name) {
                None => {
                    shell.objects.insert(name.clone(), ty.clone());
                }
                Some(existing) if existing != ty => {
                    return Err(SpaceError::TemplateMismatch(format!("object `{name}` has different types")));
                }
                _ => {}
            }
        }
        for (name, schema) in &bs.domain.schemas {
            match shell.domain.schemas.get(name) {
                None => {
                    shell.domain.schemas.insert(name.clone(), schema.clone());
                }
                Some(existing) if existing.params != schema.params => {
                    return Err(SpaceError::TemplateMismatch(format!("action `{name}` has different parameters")));
                }
                _ => {}
            }
        }
        shell.domain.uses_costs |= bs.domain.uses_costs;
        Ok(Template { shell })
    }

    pub fn signature(&self, action: &str) -> Option<&crate::pddl::ActionSchema> {
        self.shell.domain.schemas.get(action)
    }
}

/// Model reconstructed from a feature state, with any repairs applied.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub model: LiftedModel,
    /// Actions whose cost feature was absent and defaulted to 1.
    pub defaulted_costs: Vec<Ident>,
}

/// `τ⁻¹`: rebuilds a model from a feature state. An action exists exactly
/// when at least one of its features does; an action with no cost feature
/// gets cost 1 (reported in the reconstruction).
pub fn gamma_inverse(state: &ModelState, template: &Template) -> Result<Reconstruction, SpaceError> {
    state.check_invariants()?;
    let mut model = template.shell.clone();
    model.domain.schemas.clear();

    let mut costs_seen: BTreeSet<Ident> = BTreeSet::new();
    let ensure_schema = |model: &mut LiftedModel, action: &Ident| -> Result<(), SpaceError> {
        if !model.domain.schemas.contains_key(action) {
            let sig = template.signature(action).ok_or_else(|| {
                SpaceError::IllFormedState(format!("feature names unknown action `{action}`"))
            })?;
            let mut schema = crate::pddl::ActionSchema::new(action.clone());
            schema.params = sig.params.clone();
            model.domain.schemas.insert(action.clone(), schema);
        }
        Ok(())
    };

    for f in &state.features {
        match f {
            ModelFeature::InitHas { atom } => {
                model.init.insert(atom.clone());
            }
            ModelFeature::GoalHas { atom } => {
                model.goal.insert(atom.clone());
            }
            ModelFeature::Precondition { action, atom } => {
                ensure_schema(&mut model, action)?;
                model.domain.schemas.get_mut(action).unwrap().pre.insert(atom.clone());
            }
            ModelFeature::AddEffect { action, atom } => {
                ensure_schema(&mut model, action)?;
                model.domain.schemas.get_mut(action).unwrap().add.insert(atom.clone());
            }
            ModelFeature::DelEffect { action, atom } => {
                ensure_schema(&mut model, action)?;
                model.domain.schemas.get_mut(action).unwrap().del.insert(atom.clone());
            }
            ModelFeature::Cost { action, value } => {
                ensure_schema(&mut model, action)?;
                model.domain.schemas.get_mut(action).unwrap().cost = *value;
                costs_seen.insert(action.clone());
            }
        }
    }

    let defaulted: Vec<Ident> = model
        .domain
        .schemas
        .keys()
        .filter(|a| !costs_seen.contains(*a))
        .cloned()
        .collect();
    for a in &defaulted {
        model.domain.schemas.get_mut(a).unwrap().cost = 1;
    }

    model
        .validate()
        .map_err(|d: ModelDefect| SpaceError::IllFormedState(d.to_string()))?;
    Ok(Reconstruction { model, defaulted_costs: defaulted })
}

/// Oriented difference: edits that transform `a` into `b` (`Add` for
/// `b \ a`, `Remove` for `a \ b`).
pub fn model_delta(a: &ModelState, b: &ModelState) -> BTreeSet<Edit> {
    let mut edits = BTreeSet::new();
    for f in b.features.difference(&a.features) {
        edits.insert(Edit::add(f.clone()));
    }
    for f in a.features.difference(&b.features) {
        edits.insert(Edit::remove(f.clone()));
    }
    edits
}

/// Applies a set of unit edits; order-independent. Every `Add` must be
/// absent and every `Remove` present.
pub fn apply_edits<'a>(
    state: &ModelState,
    edits: impl IntoIterator<Item = &'a Edit>,
) -> Result<ModelState, SpaceError> {
    let mut features = state.features.clone();
    for edit in edits {
        match edit.sign {
            Sign::Add => {
                if !features.insert(edit.feature.clone()) {
                    return Err(SpaceError::IllegalEdit(format!("add of present feature {}", edit.feature)));
                }
            }
            Sign::Remove => {
                if !features.remove(&edit.feature) {
                    return Err(SpaceError::IllegalEdit(format!("remove of absent feature {}", edit.feature)));
                }
            }
        }
    }
    Ok(ModelState { features })
}

/// Grounded-granularity preprocessing: every ground action becomes a
/// parameterless schema named by its canonical id, with fully instantiated
/// atoms; objects move into domain constants so schema atoms stay legal.
pub fn flatten(model: &LiftedModel) -> LiftedModel {
    let mut flat = model.clone();
    let constants: BTreeMap<Ident, Ident> =
        model.all_objects().map(|(n, t)| (n.clone(), t.clone())).collect();
    flat.domain.constants = constants;
    flat.objects.clear();
    flat.domain.schemas.clear();
    for ga in enumerate_ground_actions(model) {
        let mut schema = crate::pddl::ActionSchema::new(ga.id());
        let lift = |atoms: &[GroundAtom]| -> BTreeSet<Atom> {
            atoms
                .iter()
                .map(|a| Atom {
                    pred: a.pred.clone(),
                    args: a.args.iter().cloned().map(Term::Obj).collect(),
                })
                .collect()
        };
        schema.pre = lift(&ga.pre);
        schema.add = lift(&ga.add);
        schema.del = lift(&ga.del);
        schema.cost = ga.cost;
        flat.domain.schemas.insert(schema.name.clone(), schema);
    }
    flat
}

/// View of a model at the requested granularity.
pub fn at_granularity(model: &LiftedModel, granularity: Granularity) -> LiftedModel {
    match granularity {
        Granularity::Lifted => model.clone(),
        Granularity::Grounded => flatten(model),
    }
}
