//! Canonical PDDL writer. Output is normalized (lower case, sorted sets),
//! so `parse(emit(parse(t)))` is structurally identical to `parse(t)`.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{ActionSchema, Domain, Ident, LiftedModel, Parameter};

fn write_typed_names<'a>(out: &mut String, pairs: impl Iterator<Item = (&'a Ident, &'a Ident)>) {
    // Group consecutive equal types: `a b - t c - s`.
    let mut by_type: BTreeMap<&Ident, Vec<&Ident>> = BTreeMap::new();
    for (name, ty) in pairs {
        by_type.entry(ty).or_default().push(name);
    }
    let mut first = true;
    for (ty, names) in by_type {
        for n in names {
            if !first {
                out.push(' ');
            }
            out.push_str(n);
            first = false;
        }
        write!(out, " - {ty}").unwrap();
    }
}

fn write_params(out: &mut String, params: &[Parameter]) {
    out.push('(');
    let mut first = true;
    for p in params {
        if !first {
            out.push(' ');
        }
        write!(out, "{} - {}", p.name, p.ty).unwrap();
        first = false;
    }
    out.push(')');
}

fn write_action(out: &mut String, schema: &ActionSchema, with_cost: bool) {
    writeln!(out, "  (:action {}", schema.name).unwrap();
    out.push_str("    :parameters ");
    write_params(out, &schema.params);
    out.push('\n');
    out.push_str("    :precondition (and");
    for a in &schema.pre {
        write!(out, " {a}").unwrap();
    }
    out.push_str(")\n");
    out.push_str("    :effect (and");
    for a in &schema.add {
        write!(out, " {a}").unwrap();
    }
    for a in &schema.del {
        write!(out, " (not {a})").unwrap();
    }
    if with_cost {
        write!(out, " (increase (total-cost) {})", schema.cost).unwrap();
    }
    out.push_str("))\n");
}

pub fn emit_domain(dom: &Domain) -> String {
    let mut out = String::new();
    writeln!(out, "(define (domain {})", dom.name).unwrap();
    out.push_str("  (:requirements :strips :typing");
    if dom.uses_costs {
        out.push_str(" :action-costs");
    }
    out.push_str(")\n");
    if !dom.types.is_empty() {
        out.push_str("  (:types ");
        write_typed_names(&mut out, dom.types.iter());
        out.push_str(")\n");
    }
    if !dom.constants.is_empty() {
        out.push_str("  (:constants ");
        write_typed_names(&mut out, dom.constants.iter());
        out.push_str(")\n");
    }
    if !dom.predicates.is_empty() {
        out.push_str("  (:predicates\n");
        for (name, params) in &dom.predicates {
            write!(out, "    ({name}").unwrap();
            for p in params {
                write!(out, " {} - {}", p.name, p.ty).unwrap();
            }
            out.push_str(")\n");
        }
        out.push_str("  )\n");
    }
    if dom.uses_costs {
        out.push_str("  (:functions (total-cost))\n");
    }
    for schema in dom.schemas.values() {
        write_action(&mut out, schema, dom.uses_costs);
    }
    out.push_str(")\n");
    out
}

pub fn emit_problem(model: &LiftedModel) -> String {
    let mut out = String::new();
    writeln!(out, "(define (problem {})", model.problem_name).unwrap();
    writeln!(out, "  (:domain {})", model.domain.name).unwrap();
    if !model.objects.is_empty() {
        out.push_str("  (:objects ");
        write_typed_names(&mut out, model.objects.iter());
        out.push_str(")\n");
    }
    out.push_str("  (:init");
    for a in &model.init {
        write!(out, " {a}").unwrap();
    }
    if model.domain.uses_costs {
        out.push_str(" (= (total-cost) 0)");
    }
    out.push_str(")\n");
    out.push_str("  (:goal (and");
    for a in &model.goal {
        write!(out, " {a}").unwrap();
    }
    out.push_str("))\n");
    if model.domain.uses_costs {
        out.push_str("  (:metric minimize (total-cost))\n");
    }
    out.push_str(")\n");
    out
}

/// Domain and problem text for a complete model, in one pair.
pub fn emit_pddl(model: &LiftedModel) -> (String, String) {
    (emit_domain(&model.domain), emit_problem(model))
}

#[cfg(test)]
mod tests {
    use super::super::{parse_domain, parse_problem};
    use super::*;

    #[test]
    fn minimal_model_round_trips() {
        let dom = parse_domain("(define (domain d))", "d.pddl").unwrap();
        let model = parse_problem("(define (problem t) (:domain d) (:goal (and)))", "p.pddl", &dom).unwrap();
        let (dt, pt) = emit_pddl(&model);
        let dom2 = parse_domain(&dt, "d2.pddl").unwrap();
        let model2 = parse_problem(&pt, "p2.pddl", &dom2).unwrap();
        assert_eq!(model, model2);
    }
}
