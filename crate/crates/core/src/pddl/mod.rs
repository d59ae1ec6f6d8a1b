//! PDDL front-end for the typed STRIPS subset used by the reconciliation
//! engine: `:strips`, `:typing`, and optional `:action-costs` via
//! `(increase (total-cost) k)`.
//!
//! Identifiers are case-insensitive and normalized to lower case; all
//! collections are ordered so that iteration (and everything derived from
//! it, including search traces) is deterministic.

mod emit;
mod parse;

pub use emit::{emit_domain, emit_pddl, emit_problem};
pub use parse::{parse_domain, parse_problem};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub type Ident = String;

/// Root of the type forest; every declared type descends from it.
pub const OBJECT_TYPE: &str = "object";

#[derive(Debug, Error)]
#[error("{file}:{line}:{col}: {kind}: {msg}")]
pub struct PddlError {
    pub kind: ErrorKind,
    pub msg: String,
    pub file: String,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    UnsupportedFeature,
    Semantic,
    UndeclaredObject,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorKind::Syntax => write!(f, "syntax error"),
            ErrorKind::UnsupportedFeature => write!(f, "unsupported feature"),
            ErrorKind::Semantic => write!(f, "semantic error"),
            ErrorKind::UndeclaredObject => write!(f, "undeclared object"),
        }
    }
}

/// A term in a schema-level atom: a parameter variable or a constant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Ident),
    Obj(Ident),
}

impl Term {
    pub fn name(&self) -> &str {
        match self {
            Term::Var(n) | Term::Obj(n) => n,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Atom over schema parameters (and possibly constants).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: Ident,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<Ident>, args: Vec<Term>) -> Self {
        Atom { pred: pred.into(), args }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.pred)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// Fully instantiated atom: all arguments are object names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub pred: Ident,
    pub args: Vec<Ident>,
}

impl GroundAtom {
    pub fn new(pred: impl Into<Ident>, args: Vec<Ident>) -> Self {
        GroundAtom { pred: pred.into(), args }
    }

    pub fn to_atom(&self) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().cloned().map(Term::Obj).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.pred)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// Ordered, typed parameter of a predicate or action schema.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Parameter {
    pub name: Ident,
    pub ty: Ident,
}

impl Parameter {
    pub fn new(name: impl Into<Ident>, ty: impl Into<Ident>) -> Self {
        Parameter { name: name.into(), ty: ty.into() }
    }
}

/// Forest of named types rooted at `object`. `object` itself is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypeTree {
    parents: BTreeMap<Ident, Ident>,
}

impl TypeTree {
    pub fn declare(&mut self, ty: impl Into<Ident>, parent: impl Into<Ident>) {
        let ty = ty.into();
        if ty != OBJECT_TYPE {
            self.parents.insert(ty, parent.into());
        }
    }

    pub fn contains(&self, ty: &str) -> bool {
        ty == OBJECT_TYPE || self.parents.contains_key(ty)
    }

    /// All declared types resolve transitively to `object`.
    pub fn resolves(&self, ty: &str) -> bool {
        let mut cur = ty;
        for _ in 0..=self.parents.len() {
            if cur == OBJECT_TYPE {
                return true;
            }
            match self.parents.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false // cycle
    }

    /// `sub` is `sup` or a descendant of it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        let mut cur = sub;
        loop {
            if cur == sup {
                return true;
            }
            match self.parents.get(cur) {
                Some(p) => cur = p,
                None => return sup == OBJECT_TYPE && cur == OBJECT_TYPE,
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ident, &Ident)> {
        self.parents.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }
}

/// Action schema `⟨cost, pre, add, del⟩` over ordered typed parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: Ident,
    pub params: Vec<Parameter>,
    pub pre: BTreeSet<Atom>,
    pub add: BTreeSet<Atom>,
    pub del: BTreeSet<Atom>,
    pub cost: u64,
}

impl ActionSchema {
    pub fn new(name: impl Into<Ident>) -> Self {
        ActionSchema {
            name: name.into(),
            params: Vec::new(),
            pre: BTreeSet::new(),
            add: BTreeSet::new(),
            del: BTreeSet::new(),
            cost: 1,
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.pre.iter().chain(self.add.iter()).chain(self.del.iter())
    }
}

/// Domain part of a model: types, predicates, constants, action schemas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub name: Ident,
    pub types: TypeTree,
    /// Predicate name -> typed parameter list.
    pub predicates: BTreeMap<Ident, Vec<Parameter>>,
    /// Objects declared at the domain level.
    pub constants: BTreeMap<Ident, Ident>,
    pub schemas: BTreeMap<Ident, ActionSchema>,
    /// Whether the source declared `:action-costs` / `(total-cost)`.
    pub uses_costs: bool,
}

impl Domain {
    pub fn new(name: impl Into<Ident>) -> Self {
        Domain {
            name: name.into(),
            types: TypeTree::default(),
            predicates: BTreeMap::new(),
            constants: BTreeMap::new(),
            schemas: BTreeMap::new(),
            uses_costs: false,
        }
    }
}

/// A complete planning model `⟨D, I, G⟩`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftedModel {
    pub domain: Domain,
    pub problem_name: Ident,
    /// Objects declared in the problem (constants live in the domain).
    pub objects: BTreeMap<Ident, Ident>,
    pub init: BTreeSet<GroundAtom>,
    pub goal: BTreeSet<GroundAtom>,
}

impl LiftedModel {
    /// Problem objects and domain constants, one namespace.
    pub fn all_objects(&self) -> impl Iterator<Item = (&Ident, &Ident)> {
        self.domain.constants.iter().chain(self.objects.iter())
    }

    pub fn object_type(&self, name: &str) -> Option<&Ident> {
        self.objects.get(name).or_else(|| self.domain.constants.get(name))
    }

    /// Checks every structural invariant; used for programmatically built
    /// models (the parser reports positioned diagnostics separately).
    pub fn validate(&self) -> Result<(), ModelDefect> {
        for (name, params) in &self.domain.predicates {
            for p in params {
                if !self.domain.types.resolves(&p.ty) {
                    return Err(ModelDefect::UnknownType(p.ty.clone(), name.clone()));
                }
            }
        }
        for (name, ty) in self.all_objects() {
            if !self.domain.types.resolves(ty) {
                return Err(ModelDefect::UnknownType(ty.clone(), name.clone()));
            }
        }
        for schema in self.domain.schemas.values() {
            if let Some(atom) = schema.add.intersection(&schema.del).next() {
                return Err(ModelDefect::AddDelOverlap(schema.name.clone(), atom.clone()));
            }
            for p in &schema.params {
                if !self.domain.types.resolves(&p.ty) {
                    return Err(ModelDefect::UnknownType(p.ty.clone(), schema.name.clone()));
                }
            }
            for atom in schema.atoms() {
                self.check_schema_atom(schema, atom)?;
            }
        }
        for atom in self.init.iter().chain(self.goal.iter()) {
            self.check_ground_atom(atom)?;
        }
        Ok(())
    }

    fn check_schema_atom(&self, schema: &ActionSchema, atom: &Atom) -> Result<(), ModelDefect> {
        let params = self
            .domain
            .predicates
            .get(&atom.pred)
            .ok_or_else(|| ModelDefect::UnknownPredicate(atom.pred.clone()))?;
        if params.len() != atom.args.len() {
            return Err(ModelDefect::ArityMismatch(atom.clone(), params.len()));
        }
        for (arg, param) in atom.args.iter().zip(params) {
            let arg_ty = match arg {
                Term::Var(v) => schema
                    .params
                    .iter()
                    .find(|p| &p.name == v)
                    .map(|p| p.ty.clone())
                    .ok_or_else(|| ModelDefect::FreeVariable(v.clone(), schema.name.clone()))?,
                Term::Obj(o) => self
                    .object_type(o)
                    .cloned()
                    .ok_or_else(|| ModelDefect::UnknownObject(o.clone()))?,
            };
            if !self.domain.types.is_subtype(&arg_ty, &param.ty) {
                return Err(ModelDefect::TypeMismatch(atom.clone(), arg.name().to_owned()));
            }
        }
        Ok(())
    }

    fn check_ground_atom(&self, atom: &GroundAtom) -> Result<(), ModelDefect> {
        let params = self
            .domain
            .predicates
            .get(&atom.pred)
            .ok_or_else(|| ModelDefect::UnknownPredicate(atom.pred.clone()))?;
        if params.len() != atom.args.len() {
            return Err(ModelDefect::ArityMismatch(atom.to_atom(), params.len()));
        }
        for (arg, param) in atom.args.iter().zip(params) {
            let ty = self
                .object_type(arg)
                .ok_or_else(|| ModelDefect::UnknownObject(arg.clone()))?;
            if !self.domain.types.is_subtype(ty, &param.ty) {
                return Err(ModelDefect::TypeMismatch(atom.to_atom(), arg.clone()));
            }
        }
        Ok(())
    }
}

/// Structural invariant violation in a programmatically built model.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelDefect {
    #[error("unknown type `{0}` referenced by `{1}`")]
    UnknownType(Ident, Ident),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(Ident),
    #[error("atom {0} does not match declared arity {1}")]
    ArityMismatch(Atom, usize),
    #[error("variable `{0}` of action `{1}` is not a parameter")]
    FreeVariable(Ident, Ident),
    #[error("unknown object `{0}`")]
    UnknownObject(Ident),
    #[error("argument `{1}` of {0} has an incompatible type")]
    TypeMismatch(Atom, Ident),
    #[error("action `{0}` adds and deletes {1}")]
    AddDelOverlap(Ident, Atom),
}
