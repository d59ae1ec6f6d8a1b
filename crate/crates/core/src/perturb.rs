//! Seeded fault injection: generates divergent human models by removing
//! parts (preconditions, effects, init or goal atoms) of a model, and
//! optionally by adding spurious ones.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::pddl::{Atom, GroundAtom, LiftedModel, Parameter, Term};
use crate::space::{
    apply_edits, at_granularity, gamma, gamma_inverse, Edit, Granularity, ModelFeature, Template,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FaultKind {
    DropPrecondition,
    DropAddEffect,
    DropDelEffect,
    DropInit,
    DropGoal,
}

impl FaultKind {
    /// The paper's protocol: remove preconditions and effects only.
    pub fn action_model() -> BTreeSet<FaultKind> {
        [FaultKind::DropPrecondition, FaultKind::DropAddEffect, FaultKind::DropDelEffect]
            .into_iter()
            .collect()
    }

    pub fn all() -> BTreeSet<FaultKind> {
        let mut s = Self::action_model();
        s.insert(FaultKind::DropInit);
        s.insert(FaultKind::DropGoal);
        s
    }

    fn matches(&self, f: &ModelFeature) -> bool {
        matches!(
            (self, f),
            (FaultKind::DropPrecondition, ModelFeature::Precondition { .. })
                | (FaultKind::DropAddEffect, ModelFeature::AddEffect { .. })
                | (FaultKind::DropDelEffect, ModelFeature::DelEffect { .. })
                | (FaultKind::DropInit, ModelFeature::InitHas { .. })
                | (FaultKind::DropGoal, ModelFeature::GoalHas { .. })
        )
    }
}

#[derive(Debug, Clone)]
pub struct FaultSpec {
    pub seed: u64,
    pub n_faults: usize,
    pub kinds: BTreeSet<FaultKind>,
    pub granularity: Granularity,
    /// Also inject additions (features absent from the source model),
    /// giving the general reconciliation setting instead of a weakening.
    pub allow_additions: bool,
}

impl FaultSpec {
    pub fn removals(seed: u64, n_faults: usize) -> FaultSpec {
        FaultSpec {
            seed,
            n_faults,
            kinds: FaultKind::action_model(),
            granularity: Granularity::Lifted,
            allow_additions: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InjectError {
    #[error("requested {requested} faults but only {available} candidates exist")]
    InsufficientCandidates { requested: usize, available: usize },
    #[error("fault injection produced an invalid model: {0}")]
    InvalidResult(String),
}

/// Applies `spec.n_faults` random faults to the model. Deterministic under
/// the seed; the result re-validates and its feature distance from the
/// input is exactly `n_faults`.
pub fn inject(model: &LiftedModel, spec: &FaultSpec) -> Result<LiftedModel, InjectError> {
    let model = at_granularity(model, spec.granularity);
    let state = gamma(&model);
    let template = Template::of(&model);

    let mut candidates: Vec<Edit> = state
        .features
        .iter()
        .filter(|f| spec.kinds.iter().any(|k| k.matches(f)))
        .map(|f| Edit::remove(f.clone()))
        .collect();
    if spec.allow_additions {
        candidates.extend(addition_candidates(&model, &spec.kinds).into_iter().map(Edit::add));
    }

    if spec.n_faults > candidates.len() {
        return Err(InjectError::InsufficientCandidates {
            requested: spec.n_faults,
            available: candidates.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    candidates.shuffle(&mut rng);

    // Draw in shuffled order, skipping picks that would make the state
    // ill-formed (an added delete clashing with a kept add, and so on).
    let mut chosen: Vec<Edit> = Vec::new();
    let mut current = state.clone();
    for edit in candidates {
        if chosen.len() == spec.n_faults {
            break;
        }
        let next = match apply_edits(&current, [&edit]) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if next.check_invariants().is_err() {
            continue;
        }
        current = next;
        chosen.push(edit);
    }
    if chosen.len() < spec.n_faults {
        return Err(InjectError::InsufficientCandidates {
            requested: spec.n_faults,
            available: chosen.len(),
        });
    }

    let rec = gamma_inverse(&current, &template).map_err(|e| InjectError::InvalidResult(e.to_string()))?;
    rec.model.validate().map_err(|e| InjectError::InvalidResult(e.to_string()))?;
    Ok(rec.model)
}

/// Features that could be added to the model: atoms over each schema's
/// parameters (and each predicate's ground instantiations for init/goal)
/// that are not already present in the corresponding slot.
fn addition_candidates(model: &LiftedModel, kinds: &BTreeSet<FaultKind>) -> Vec<ModelFeature> {
    let mut out = Vec::new();
    for schema in model.domain.schemas.values() {
        for atom in schema_atom_space(model, &schema.params) {
            if kinds.contains(&FaultKind::DropPrecondition) && !schema.pre.contains(&atom) {
                out.push(ModelFeature::Precondition { action: schema.name.clone(), atom: atom.clone() });
            }
            if kinds.contains(&FaultKind::DropAddEffect) && !schema.add.contains(&atom) {
                out.push(ModelFeature::AddEffect { action: schema.name.clone(), atom: atom.clone() });
            }
            if kinds.contains(&FaultKind::DropDelEffect) && !schema.del.contains(&atom) {
                out.push(ModelFeature::DelEffect { action: schema.name.clone(), atom: atom.clone() });
            }
        }
    }
    if kinds.contains(&FaultKind::DropInit) || kinds.contains(&FaultKind::DropGoal) {
        for atom in ground_atom_space(model) {
            if kinds.contains(&FaultKind::DropInit) && !model.init.contains(&atom) {
                out.push(ModelFeature::InitHas { atom: atom.clone() });
            }
            if kinds.contains(&FaultKind::DropGoal) && !model.goal.contains(&atom) {
                out.push(ModelFeature::GoalHas { atom });
            }
        }
    }
    out
}

fn schema_atom_space(model: &LiftedModel, params: &[Parameter]) -> Vec<Atom> {
    let mut out = Vec::new();
    for (pred, pred_params) in &model.domain.predicates {
        let mut slots: Vec<Vec<Term>> = Vec::new();
        for pp in pred_params {
            let mut options: Vec<Term> = params
                .iter()
                .filter(|p| model.domain.types.is_subtype(&p.ty, &pp.ty))
                .map(|p| Term::Var(p.name.clone()))
                .collect();
            options.extend(
                model
                    .all_objects()
                    .filter(|(_, ty)| model.domain.types.is_subtype(ty, &pp.ty))
                    .map(|(name, _)| Term::Obj(name.clone())),
            );
            slots.push(options);
        }
        cartesian(&slots, &mut |args| {
            out.push(Atom::new(pred.clone(), args.to_vec()));
        });
    }
    out
}

fn ground_atom_space(model: &LiftedModel) -> Vec<GroundAtom> {
    let mut out = Vec::new();
    for (pred, pred_params) in &model.domain.predicates {
        let slots: Vec<Vec<Term>> = pred_params
            .iter()
            .map(|pp| {
                model
                    .all_objects()
                    .filter(|(_, ty)| model.domain.types.is_subtype(ty, &pp.ty))
                    .map(|(name, _)| Term::Obj(name.clone()))
                    .collect()
            })
            .collect();
        cartesian(&slots, &mut |args| {
            out.push(GroundAtom::new(
                pred.clone(),
                args.iter().map(|t| t.name().to_owned()).collect(),
            ));
        });
    }
    out
}

fn cartesian(slots: &[Vec<Term>], emit: &mut impl FnMut(&[Term])) {
    if slots.iter().any(|s| s.is_empty()) && !slots.is_empty() {
        return;
    }
    let mut idx = vec![0usize; slots.len()];
    loop {
        let args: Vec<Term> = idx.iter().enumerate().map(|(i, &j)| slots[i][j].clone()).collect();
        emit(&args);
        let mut pi = idx.len();
        loop {
            if pi == 0 {
                break;
            }
            pi -= 1;
            idx[pi] += 1;
            if idx[pi] < slots[pi].len() {
                break;
            }
            idx[pi] = 0;
        }
        if idx.iter().all(|&i| i == 0) {
            break;
        }
    }
}
