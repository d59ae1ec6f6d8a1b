//! Recursive-descent parser over an s-expression reader.
//!
//! Rejects anything outside the supported subset with a diagnostic naming
//! the feature and its `file:line:col` position. Negative preconditions are
//! rejected rather than dropped: the feature encoding has no slot for them
//! and a silent drop would corrupt reconciliation.

use std::collections::BTreeMap;

use super::{
    ActionSchema, Atom, Domain, ErrorKind, GroundAtom, Ident, LiftedModel, Parameter, PddlError,
    Term, OBJECT_TYPE,
};

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: u32,
    col: u32,
}

#[derive(Debug)]
enum Sexp {
    Sym(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Sym(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

struct Ctx<'a> {
    file: &'a str,
}

impl<'a> Ctx<'a> {
    fn err(&self, kind: ErrorKind, pos: Pos, msg: impl Into<String>) -> PddlError {
        PddlError {
            kind,
            msg: msg.into(),
            file: self.file.to_owned(),
            line: pos.line,
            col: pos.col,
        }
    }

    fn syntax(&self, pos: Pos, msg: impl Into<String>) -> PddlError {
        self.err(ErrorKind::Syntax, pos, msg)
    }

    fn semantic(&self, pos: Pos, msg: impl Into<String>) -> PddlError {
        self.err(ErrorKind::Semantic, pos, msg)
    }

    fn unsupported(&self, pos: Pos, msg: impl Into<String>) -> PddlError {
        self.err(ErrorKind::UnsupportedFeature, pos, msg)
    }
}

fn lex(ctx: &Ctx, text: &str) -> Result<Vec<Sexp>, PddlError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut top: Vec<Sexp> = Vec::new();
    let mut line = 1u32;
    let mut col = 0u32;
    let mut chars = text.chars().peekable();

    while let Some(c) = chars.next() {
        if c == '\n' {
            line += 1;
            col = 0;
            continue;
        }
        col += 1;
        match c {
            ';' => {
                for nc in chars.by_ref() {
                    if nc == '\n' {
                        line += 1;
                        col = 0;
                        break;
                    }
                }
            }
            '(' => {
                stack.push((std::mem::take(&mut top), Pos { line, col }));
            }
            ')' => {
                let (mut parent, pos) = stack
                    .pop()
                    .ok_or_else(|| ctx.syntax(Pos { line, col }, "unmatched `)`"))?;
                let list = Sexp::List(std::mem::take(&mut top), pos);
                parent.push(list);
                top = parent;
            }
            c if c.is_whitespace() => {}
            _ => {
                let start = Pos { line, col };
                let mut sym = String::new();
                sym.push(c.to_ascii_lowercase());
                while let Some(&nc) = chars.peek() {
                    if nc.is_whitespace() || nc == '(' || nc == ')' || nc == ';' {
                        break;
                    }
                    sym.push(nc.to_ascii_lowercase());
                    chars.next();
                    col += 1;
                }
                top.push(Sexp::Sym(sym, start));
            }
        }
    }
    if let Some((_, pos)) = stack.pop() {
        return Err(ctx.syntax(pos, "unclosed `(`"));
    }
    Ok(top)
}

fn sym<'s>(ctx: &Ctx, e: &'s Sexp, what: &str) -> Result<&'s str, PddlError> {
    match e {
        Sexp::Sym(s, _) => Ok(s),
        Sexp::List(_, p) => Err(ctx.syntax(*p, format!("expected {what}, found a list"))),
    }
}

fn list<'s>(ctx: &Ctx, e: &'s Sexp, what: &str) -> Result<&'s [Sexp], PddlError> {
    match e {
        Sexp::List(items, _) => Ok(items),
        Sexp::Sym(s, p) => Err(ctx.syntax(*p, format!("expected {what}, found `{s}`"))),
    }
}

/// Parses `x y - t u v - s w` into pairs, defaulting untyped names to `object`.
fn typed_list(ctx: &Ctx, items: &[Sexp]) -> Result<Vec<(Ident, Ident, Pos)>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<(Ident, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let s = sym(ctx, &items[i], "a name")?;
        if s == "-" {
            i += 1;
            let ty = match items.get(i) {
                Some(e) => sym(ctx, e, "a type name")?.to_owned(),
                None => return Err(ctx.syntax(items[i - 1].pos(), "dangling `-` in typed list")),
            };
            if pending.is_empty() {
                return Err(ctx.syntax(items[i].pos(), "type with no names before `-`"));
            }
            for (name, pos) in pending.drain(..) {
                out.push((name, ty.clone(), pos));
            }
        } else {
            pending.push((s.to_owned(), items[i].pos()));
        }
        i += 1;
    }
    for (name, pos) in pending {
        out.push((name, OBJECT_TYPE.to_owned(), pos));
    }
    Ok(out)
}

fn expect_define<'s>(ctx: &Ctx, forms: &'s [Sexp], kind: &str) -> Result<&'s [Sexp], PddlError> {
    let root = forms
        .first()
        .ok_or_else(|| ctx.syntax(Pos { line: 1, col: 1 }, "empty input"))?;
    let items = list(ctx, root, "a `(define ...)` form")?;
    match items.first() {
        Some(Sexp::Sym(s, _)) if s == "define" => {}
        _ => return Err(ctx.syntax(root.pos(), format!("expected `(define ({kind} ...) ...)`"))),
    }
    Ok(items)
}

const SUPPORTED_REQUIREMENTS: &[&str] = &[":strips", ":typing", ":action-costs"];

pub fn parse_domain(text: &str, file: &str) -> Result<Domain, PddlError> {
    let ctx = Ctx { file };
    let forms = lex(&ctx, text)?;
    let items = expect_define(&ctx, &forms, "domain")?;

    let head = items
        .get(1)
        .ok_or_else(|| ctx.syntax(forms[0].pos(), "missing `(domain NAME)`"))?;
    let head_items = list(&ctx, head, "`(domain NAME)`")?;
    if head_items.len() != 2 || sym(&ctx, &head_items[0], "`domain`")? != "domain" {
        return Err(ctx.syntax(head.pos(), "expected `(domain NAME)`"));
    }
    let mut dom = Domain::new(sym(&ctx, &head_items[1], "domain name")?);

    for section in &items[2..] {
        let parts = list(&ctx, section, "a domain section")?;
        let tag_pos = section.pos();
        let tag = match parts.first() {
            Some(e) => sym(&ctx, e, "a section keyword")?,
            None => return Err(ctx.syntax(tag_pos, "empty domain section")),
        };
        match tag {
            ":requirements" => {
                for req in &parts[1..] {
                    let r = sym(&ctx, req, "a requirement flag")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return Err(ctx.unsupported(req.pos(), format!("requirement `{r}`")));
                    }
                    if r == ":action-costs" {
                        dom.uses_costs = true;
                    }
                }
            }
            ":types" => {
                for (ty, parent, pos) in typed_list(&ctx, &parts[1..])? {
                    if ty == OBJECT_TYPE {
                        continue;
                    }
                    if dom.types.contains(&ty) {
                        return Err(ctx.semantic(pos, format!("type `{ty}` declared twice")));
                    }
                    dom.types.declare(ty, parent);
                }
                for (ty, parent) in dom.types.iter() {
                    if !dom.types.resolves(parent) {
                        return Err(ctx.semantic(
                            tag_pos,
                            format!("parent type `{parent}` of `{ty}` does not resolve to object"),
                        ));
                    }
                }
            }
            ":constants" => {
                for (name, ty, pos) in typed_list(&ctx, &parts[1..])? {
                    check_type(&ctx, &dom, &ty, pos)?;
                    if dom.constants.insert(name.clone(), ty).is_some() {
                        return Err(ctx.semantic(pos, format!("constant `{name}` declared twice")));
                    }
                }
            }
            ":predicates" => {
                for pred in &parts[1..] {
                    let decl = list(&ctx, pred, "a predicate declaration")?;
                    let name = match decl.first() {
                        Some(e) => sym(&ctx, e, "a predicate name")?.to_owned(),
                        None => return Err(ctx.syntax(pred.pos(), "empty predicate declaration")),
                    };
                    let mut params = Vec::new();
                    for (var, ty, pos) in typed_list(&ctx, &decl[1..])? {
                        if !var.starts_with('?') {
                            return Err(ctx.syntax(pos, format!("predicate parameter `{var}` must be a `?variable`")));
                        }
                        check_type(&ctx, &dom, &ty, pos)?;
                        params.push(Parameter::new(var, ty));
                    }
                    if dom.predicates.insert(name.clone(), params).is_some() {
                        return Err(ctx.semantic(pred.pos(), format!("predicate `{name}` declared twice")));
                    }
                }
            }
            ":functions" => {
                for func in &parts[1..] {
                    match func {
                        Sexp::List(decl, p) => {
                            if decl.len() != 1 || sym(&ctx, &decl[0], "a function name")? != "total-cost" {
                                return Err(ctx.unsupported(*p, "numeric fluents other than (total-cost)"));
                            }
                            dom.uses_costs = true;
                        }
                        Sexp::Sym(s, p) => {
                            if s != "-" && s != "number" {
                                return Err(ctx.unsupported(*p, format!("function declaration `{s}`")));
                            }
                        }
                    }
                }
            }
            ":action" => {
                let schema = parse_action(&ctx, &mut dom, parts, tag_pos)?;
                if dom.schemas.contains_key(&schema.name) {
                    return Err(ctx.semantic(tag_pos, format!("action `{}` declared twice", schema.name)));
                }
                dom.schemas.insert(schema.name.clone(), schema);
            }
            other => {
                return Err(ctx.unsupported(tag_pos, format!("domain section `{other}`")));
            }
        }
    }
    Ok(dom)
}

fn check_type(ctx: &Ctx, dom: &Domain, ty: &str, pos: Pos) -> Result<(), PddlError> {
    if !dom.types.contains(ty) {
        return Err(ctx.semantic(pos, format!("undeclared type `{ty}`")));
    }
    Ok(())
}

fn parse_action(ctx: &Ctx, dom: &mut Domain, parts: &[Sexp], pos: Pos) -> Result<ActionSchema, PddlError> {
    let name = match parts.get(1) {
        Some(e) => sym(ctx, e, "an action name")?.to_owned(),
        None => return Err(ctx.syntax(pos, "action without a name")),
    };
    let mut schema = ActionSchema::new(name);
    let mut saw_cost = false;

    let mut i = 2;
    while i < parts.len() {
        let key = sym(ctx, &parts[i], "an action keyword")?;
        let body = parts
            .get(i + 1)
            .ok_or_else(|| ctx.syntax(parts[i].pos(), format!("`{key}` without a body")))?;
        match key {
            ":parameters" => {
                for (var, ty, vpos) in typed_list(ctx, list(ctx, body, "a parameter list")?)? {
                    if !var.starts_with('?') {
                        return Err(ctx.syntax(vpos, format!("parameter `{var}` must be a `?variable`")));
                    }
                    check_type(ctx, dom, &ty, vpos)?;
                    if schema.params.iter().any(|p| p.name == var) {
                        return Err(ctx.semantic(vpos, format!("parameter `{var}` declared twice")));
                    }
                    schema.params.push(Parameter::new(var, ty));
                }
            }
            ":precondition" => {
                for atom in parse_conjunction(ctx, body, false)? {
                    match atom {
                        Literal::Pos(a, apos) => {
                            check_schema_atom(ctx, dom, &schema, &a, apos)?;
                            schema.pre.insert(a);
                        }
                        Literal::Neg(_, apos) => {
                            return Err(ctx.unsupported(apos, "negative precondition"));
                        }
                        Literal::Increase(_, apos) => {
                            return Err(ctx.syntax(apos, "(increase ...) in a precondition"));
                        }
                    }
                }
            }
            ":effect" => {
                for lit in parse_conjunction(ctx, body, true)? {
                    match lit {
                        Literal::Pos(a, apos) => {
                            check_schema_atom(ctx, dom, &schema, &a, apos)?;
                            if schema.del.contains(&a) {
                                return Err(ctx.semantic(apos, format!("atom {a} both added and deleted")));
                            }
                            schema.add.insert(a);
                        }
                        Literal::Neg(a, apos) => {
                            check_schema_atom(ctx, dom, &schema, &a, apos)?;
                            if schema.add.contains(&a) {
                                return Err(ctx.semantic(apos, format!("atom {a} both added and deleted")));
                            }
                            schema.del.insert(a);
                        }
                        Literal::Increase(k, apos) => {
                            if saw_cost {
                                return Err(ctx.semantic(apos, "action increases (total-cost) twice"));
                            }
                            saw_cost = true;
                            dom.uses_costs = true;
                            schema.cost = k;
                        }
                    }
                }
            }
            other => return Err(ctx.unsupported(parts[i].pos(), format!("action keyword `{other}`"))),
        }
        i += 2;
    }
    if !saw_cost {
        // Unit-cost default; with :action-costs a silent action costs nothing.
        schema.cost = if dom.uses_costs { 0 } else { 1 };
    }
    Ok(schema)
}

enum Literal {
    Pos(Atom, Pos),
    Neg(Atom, Pos),
    Increase(u64, Pos),
}

fn parse_conjunction(ctx: &Ctx, e: &Sexp, effects: bool) -> Result<Vec<Literal>, PddlError> {
    let items = list(ctx, e, "a formula")?;
    match items.first() {
        None => Ok(Vec::new()), // bare `()`
        Some(Sexp::Sym(s, _)) if s == "and" => {
            let mut out = Vec::new();
            for sub in &items[1..] {
                out.push(parse_literal(ctx, sub, effects)?);
            }
            Ok(out)
        }
        Some(_) => Ok(vec![parse_literal(ctx, e, effects)?]),
    }
}

fn parse_literal(ctx: &Ctx, e: &Sexp, effects: bool) -> Result<Literal, PddlError> {
    let items = list(ctx, e, "an atom")?;
    let pos = e.pos();
    let head = match items.first() {
        Some(h) => sym(ctx, h, "a predicate or connective")?,
        None => return Err(ctx.syntax(pos, "empty formula `()` inside a conjunction")),
    };
    match head {
        "not" => {
            if items.len() != 2 {
                return Err(ctx.syntax(pos, "`not` takes exactly one atom"));
            }
            match parse_literal(ctx, &items[1], effects)? {
                Literal::Pos(a, p) => Ok(Literal::Neg(a, p)),
                _ => Err(ctx.syntax(pos, "`not` must wrap a plain atom")),
            }
        }
        "increase" => {
            if !effects {
                return Err(ctx.syntax(pos, "(increase ...) outside an effect"));
            }
            if items.len() != 3 {
                return Err(ctx.syntax(pos, "expected (increase (total-cost) K)"));
            }
            let target = list(ctx, &items[1], "(total-cost)")?;
            if target.len() != 1 || sym(ctx, &target[0], "total-cost")? != "total-cost" {
                return Err(ctx.unsupported(items[1].pos(), "increase of a fluent other than (total-cost)"));
            }
            let k = sym(ctx, &items[2], "a cost literal")?;
            let k = k
                .parse::<u64>()
                .map_err(|_| ctx.unsupported(items[2].pos(), format!("non-integer action cost `{k}`")))?;
            Ok(Literal::Increase(k, pos))
        }
        "forall" | "exists" | "when" | "or" | "imply" => {
            Err(ctx.unsupported(pos, format!("`{head}` formula")))
        }
        "=" | "<" | ">" | "<=" | ">=" | "decrease" | "assign" => {
            Err(ctx.unsupported(pos, format!("`{head}` expression")))
        }
        pred => {
            let mut args = Vec::new();
            for arg in &items[1..] {
                let a = sym(ctx, arg, "an atom argument")?;
                if a.starts_with('?') {
                    args.push(Term::Var(a.to_owned()));
                } else {
                    args.push(Term::Obj(a.to_owned()));
                }
            }
            Ok(Literal::Pos(Atom::new(pred, args), pos))
        }
    }
}

fn check_schema_atom(
    ctx: &Ctx,
    dom: &Domain,
    schema: &ActionSchema,
    atom: &Atom,
    pos: Pos,
) -> Result<(), PddlError> {
    let params = dom
        .predicates
        .get(&atom.pred)
        .ok_or_else(|| ctx.semantic(pos, format!("undeclared predicate `{}`", atom.pred)))?;
    if params.len() != atom.args.len() {
        return Err(ctx.semantic(
            pos,
            format!("predicate `{}` takes {} arguments, got {}", atom.pred, params.len(), atom.args.len()),
        ));
    }
    for (arg, param) in atom.args.iter().zip(params) {
        match arg {
            Term::Var(v) => {
                let p = schema
                    .params
                    .iter()
                    .find(|p| &p.name == v)
                    .ok_or_else(|| ctx.semantic(pos, format!("variable `{v}` is not a parameter of `{}`", schema.name)))?;
                if !dom.types.is_subtype(&p.ty, &param.ty) {
                    return Err(ctx.semantic(pos, format!("variable `{v}` of type `{}` cannot fill `{}`", p.ty, param.ty)));
                }
            }
            Term::Obj(o) => {
                let ty = dom
                    .constants
                    .get(o)
                    .ok_or_else(|| ctx.semantic(pos, format!("undeclared constant `{o}` in action `{}`", schema.name)))?;
                if !dom.types.is_subtype(ty, &param.ty) {
                    return Err(ctx.semantic(pos, format!("constant `{o}` of type `{ty}` cannot fill `{}`", param.ty)));
                }
            }
        }
    }
    Ok(())
}

pub fn parse_problem(text: &str, file: &str, domain: &Domain) -> Result<LiftedModel, PddlError> {
    let ctx = Ctx { file };
    let forms = lex(&ctx, text)?;
    let items = expect_define(&ctx, &forms, "problem")?;

    let head = items
        .get(1)
        .ok_or_else(|| ctx.syntax(forms[0].pos(), "missing `(problem NAME)`"))?;
    let head_items = list(&ctx, head, "`(problem NAME)`")?;
    if head_items.len() != 2 || sym(&ctx, &head_items[0], "`problem`")? != "problem" {
        return Err(ctx.syntax(head.pos(), "expected `(problem NAME)`"));
    }

    let mut model = LiftedModel {
        domain: domain.clone(),
        problem_name: sym(&ctx, &head_items[1], "problem name")?.to_owned(),
        objects: BTreeMap::new(),
        init: Default::default(),
        goal: Default::default(),
    };

    for section in &items[2..] {
        let parts = list(&ctx, section, "a problem section")?;
        let tag_pos = section.pos();
        let tag = match parts.first() {
            Some(e) => sym(&ctx, e, "a section keyword")?,
            None => return Err(ctx.syntax(tag_pos, "empty problem section")),
        };
        match tag {
            ":domain" => {
                let name = match parts.get(1) {
                    Some(e) => sym(&ctx, e, "a domain name")?,
                    None => return Err(ctx.syntax(tag_pos, "`:domain` without a name")),
                };
                if name != domain.name {
                    return Err(ctx.semantic(
                        tag_pos,
                        format!("problem requires domain `{name}`, parsed domain is `{}`", domain.name),
                    ));
                }
            }
            ":objects" => {
                for (name, ty, pos) in typed_list(&ctx, &parts[1..])? {
                    if !domain.types.contains(&ty) {
                        return Err(ctx.semantic(pos, format!("undeclared type `{ty}`")));
                    }
                    if domain.constants.contains_key(&name) {
                        return Err(ctx.semantic(pos, format!("object `{name}` already declared as a constant")));
                    }
                    if model.objects.insert(name.clone(), ty).is_some() {
                        return Err(ctx.semantic(pos, format!("object `{name}` declared twice")));
                    }
                }
            }
            ":init" => {
                for entry in &parts[1..] {
                    if is_total_cost_init(&ctx, entry) {
                        continue;
                    }
                    let atom = parse_ground_atom(&ctx, &model, entry)?;
                    model.init.insert(atom);
                }
            }
            ":goal" => {
                let body = parts
                    .get(1)
                    .ok_or_else(|| ctx.syntax(tag_pos, "`:goal` without a formula"))?;
                for lit in parse_conjunction(&ctx, body, false)? {
                    match lit {
                        Literal::Pos(a, pos) => {
                            let ga = atom_to_ground(&ctx, &a, pos)?;
                            check_problem_atom(&ctx, &model, &ga, pos)?;
                            model.goal.insert(ga);
                        }
                        Literal::Neg(_, pos) => return Err(ctx.unsupported(pos, "negative goal")),
                        Literal::Increase(_, pos) => return Err(ctx.syntax(pos, "(increase ...) in a goal")),
                    }
                }
            }
            ":metric" => {
                // Only `minimize (total-cost)` fits the subset; accept and ignore.
                let ok = parts.len() == 3
                    && sym(&ctx, &parts[1], "minimize")? == "minimize"
                    && matches!(list(&ctx, &parts[2], "(total-cost)"), Ok(l)
                        if l.len() == 1 && matches!(&l[0], Sexp::Sym(s, _) if s == "total-cost"));
                if !ok {
                    return Err(ctx.unsupported(tag_pos, "metric other than `minimize (total-cost)`"));
                }
            }
            other => return Err(ctx.unsupported(tag_pos, format!("problem section `{other}`"))),
        }
    }
    Ok(model)
}

fn is_total_cost_init(ctx: &Ctx, e: &Sexp) -> bool {
    // `(= (total-cost) 0)` in :init is part of the cost idiom; skip it.
    let Ok(items) = list(ctx, e, "") else { return false };
    matches!(items.first(), Some(Sexp::Sym(s, _)) if s == "=")
        && items.len() == 3
        && matches!(&items[1], Sexp::List(l, _)
            if l.len() == 1 && matches!(&l[0], Sexp::Sym(s, _) if s == "total-cost"))
}

fn atom_to_ground(ctx: &Ctx, atom: &Atom, pos: Pos) -> Result<GroundAtom, PddlError> {
    let mut args = Vec::new();
    for t in &atom.args {
        match t {
            Term::Obj(o) => args.push(o.clone()),
            Term::Var(v) => {
                return Err(ctx.syntax(pos, format!("variable `{v}` in a ground atom")));
            }
        }
    }
    Ok(GroundAtom::new(atom.pred.clone(), args))
}

fn parse_ground_atom(ctx: &Ctx, model: &LiftedModel, e: &Sexp) -> Result<GroundAtom, PddlError> {
    let pos = e.pos();
    match parse_literal(ctx, e, false)? {
        Literal::Pos(a, _) => {
            let ga = atom_to_ground(ctx, &a, pos)?;
            check_problem_atom(ctx, model, &ga, pos)?;
            Ok(ga)
        }
        Literal::Neg(_, p) => Err(ctx.unsupported(p, "negated init atom")),
        Literal::Increase(_, p) => Err(ctx.syntax(p, "(increase ...) in :init")),
    }
}

fn check_problem_atom(ctx: &Ctx, model: &LiftedModel, atom: &GroundAtom, pos: Pos) -> Result<(), PddlError> {
    let params = model
        .domain
        .predicates
        .get(&atom.pred)
        .ok_or_else(|| ctx.semantic(pos, format!("undeclared predicate `{}`", atom.pred)))?;
    if params.len() != atom.args.len() {
        return Err(ctx.semantic(
            pos,
            format!("predicate `{}` takes {} arguments, got {}", atom.pred, params.len(), atom.args.len()),
        ));
    }
    for (arg, param) in atom.args.iter().zip(params) {
        let ty = model.object_type(arg).ok_or_else(|| {
            ctx.err(ErrorKind::UndeclaredObject, pos, format!("object `{arg}` is not declared"))
        })?;
        if !model.domain.types.is_subtype(ty, &param.ty) {
            return Err(ctx.semantic(pos, format!("object `{arg}` of type `{ty}` cannot fill `{}`", param.ty)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::ErrorKind;
    use super::*;

    #[test]
    fn fetch_move_tuck_crouch_snippet() {
        let text = "(define (domain fetch-snippet)
          (:requirements :strips :typing)
          (:types location)
          (:predicates (robot-at ?l - location) (hand-tucked) (crouched))
          (:action move
            :parameters     (?from ?to - location)
            :precondition   (and (robot-at ?from)
                                 (hand-tucked) (crouched))
            :effect         (and (robot-at ?to)
                                 (not (robot-at ?from))))
          (:action tuck
            :parameters     ()
            :precondition   ()
            :effect         (and (hand-tucked)
                                 (crouched)))
          (:action crouch
            :parameters     ()
            :precondition   ()
            :effect         (and (crouched))))";
        let dom = parse_domain(text, "snippet.pddl").unwrap();
        assert_eq!(dom.schemas.len(), 3);
        let pre: Vec<String> = dom.schemas["move"].pre.iter().map(|a| a.to_string()).collect();
        assert_eq!(pre, vec!["(crouched)", "(hand-tucked)", "(robot-at ?from)"]);
    }

    #[test]
    fn empty_domain_parses() {
        let dom = parse_domain("(define (domain d))", "t.pddl").unwrap();
        assert_eq!(dom.name, "d");
        assert!(dom.schemas.is_empty());
        assert!(dom.predicates.is_empty());
    }

    #[test]
    fn add_del_overlap_is_semantic_error() {
        let text = "(define (domain d) (:predicates (p))
                     (:action a :parameters () :effect (and (p) (not (p)))))";
        let err = parse_domain(text, "t.pddl").unwrap_err();
        assert_eq!(err.kind, ErrorKind::Semantic);
        assert!(err.msg.contains("added and deleted"), "{}", err.msg);
    }

    #[test]
    fn negative_precondition_rejected() {
        let text = "(define (domain d) (:predicates (p))
                     (:action a :parameters () :precondition (not (p)) :effect (p)))";
        let err = parse_domain(text, "t.pddl").unwrap_err();
        assert_eq!(err.kind, ErrorKind::UnsupportedFeature);
    }

    #[test]
    fn conditional_effect_rejected_with_position() {
        let text = "(define (domain d) (:predicates (p) (q))
                     (:action a :parameters () :effect (when (p) (q))))";
        let err = parse_domain(text, "in.pddl").unwrap_err();
        assert_eq!(err.kind, ErrorKind::UnsupportedFeature);
        assert_eq!(err.file, "in.pddl");
        assert_eq!(err.line, 2);
        assert!(err.msg.contains("when"));
    }

    #[test]
    fn undeclared_predicate_in_action() {
        let text = "(define (domain d) (:action a :parameters () :effect (p)))";
        let err = parse_domain(text, "t.pddl").unwrap_err();
        assert_eq!(err.kind, ErrorKind::Semantic);
        assert!(err.msg.contains("undeclared predicate"));
    }

    #[test]
    fn goal_over_undeclared_object() {
        let dom = parse_domain(
            "(define (domain d) (:predicates (p ?x - object)))",
            "d.pddl",
        )
        .unwrap();
        let err = parse_problem(
            "(define (problem t) (:domain d) (:goal (p ghost)))",
            "p.pddl",
            &dom,
        )
        .unwrap_err();
        assert_eq!(err.kind, ErrorKind::UndeclaredObject);
    }

    #[test]
    fn empty_goal_is_valid() {
        let dom = parse_domain("(define (domain d))", "d.pddl").unwrap();
        let model = parse_problem("(define (problem t) (:domain d) (:goal (and)))", "p.pddl", &dom).unwrap();
        assert!(model.goal.is_empty());
    }

    #[test]
    fn action_costs_parsed() {
        let text = "(define (domain d) (:requirements :strips :action-costs)
                     (:functions (total-cost))
                     (:predicates (p))
                     (:action a :parameters () :effect (and (p) (increase (total-cost) 3)))
                     (:action b :parameters () :effect (p)))";
        let dom = parse_domain(text, "t.pddl").unwrap();
        assert!(dom.uses_costs);
        assert_eq!(dom.schemas["a"].cost, 3);
        assert_eq!(dom.schemas["b"].cost, 0);
    }

    #[test]
    fn unit_cost_default_without_cost_feature() {
        let text = "(define (domain d) (:predicates (p)) (:action a :parameters () :effect (p)))";
        let dom = parse_domain(text, "t.pddl").unwrap();
        assert!(!dom.uses_costs);
        assert_eq!(dom.schemas["a"].cost, 1);
    }
}
