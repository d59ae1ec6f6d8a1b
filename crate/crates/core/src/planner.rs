//! Cost-optimal planning over a [`GroundTask`]: A* over fluent-set states
//! with the admissible h_max heuristic, plus a blind (uniform-cost) mode
//! for oracle cross-checks.
//!
//! The optimality test exploits the known candidate cost: A* runs with an
//! upper bound equal to the plan's cost and prunes any node with `f` above
//! it. All expansion order is canonical, so results are deterministic for
//! a fixed task.

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::time::{Duration, Instant};

use crate::ground::{Cost, FluentSet, GroundTask, Plan};

/// Per-call resource limits. `BudgetExceeded` is a distinct outcome and is
/// never silently treated as unsolvable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_expansions: u64,
    pub time_limit: Duration,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_expansions: 1_000_000, time_limit: Duration::from_secs(60) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heuristic {
    HMax,
    Blind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Solved { plan: Plan, cost: u64 },
    /// Search space exhausted without reaching the goal. Under a cost
    /// bound this means no plan within the bound exists.
    Unsolvable,
    BudgetExceeded,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub outcome: Outcome,
    pub expansions: u64,
    pub elapsed: Duration,
}

impl PlanResult {
    pub fn cost(&self) -> Option<u64> {
        match &self.outcome {
            Outcome::Solved { cost, .. } => Some(*cost),
            _ => None,
        }
    }
}

/// h_max: fixpoint of `h(f) = min over achievers a of cost(a) + max over
/// pre(a) of h(p)`, zero on fluents already true. Admissible.
pub fn hmax(task: &GroundTask, state: &FluentSet) -> Cost {
    let n = task.fluents.len();
    let mut cost = vec![u64::MAX; n];
    for f in state.iter() {
        cost[f as usize] = 0;
    }
    loop {
        let mut changed = false;
        for a in &task.actions {
            let mut pre_max = 0u64;
            let mut reachable = true;
            for p in a.pre.iter() {
                let c = cost[p as usize];
                if c == u64::MAX {
                    reachable = false;
                    break;
                }
                pre_max = pre_max.max(c);
            }
            if !reachable {
                continue;
            }
            let through = pre_max.saturating_add(a.cost);
            for f in a.add.iter() {
                if through < cost[f as usize] {
                    cost[f as usize] = through;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut h = 0u64;
    for g in task.goal.iter() {
        match cost[g as usize] {
            u64::MAX => return Cost::Infinite,
            c => h = h.max(c),
        }
    }
    Cost::Finite(h)
}

struct QueueEntry {
    f: u64,
    h: u64,
    seq: u64,
    state: u32,
    g: u64,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        (self.f, self.h, self.seq) == (other.f, other.h, other.seq)
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.f, self.h, self.seq).cmp(&(other.f, other.h, other.seq))
    }
}

/// A* with optional upper bound on plan cost (nodes with `f > bound` are
/// pruned; sound because the bound is always witnessed by a known plan).
pub fn search(task: &GroundTask, budget: &Budget, heuristic: Heuristic, bound: Option<u64>) -> PlanResult {
    let start = Instant::now();
    let mut expansions = 0u64;

    let eval = |s: &FluentSet| -> Cost {
        match heuristic {
            Heuristic::HMax => hmax(task, s),
            Heuristic::Blind => Cost::Finite(0),
        }
    };

    let mut states: Vec<FluentSet> = vec![task.init.clone()];
    let mut ids: HashMap<FluentSet, u32> = HashMap::from([(task.init.clone(), 0u32)]);
    let mut best_g: Vec<u64> = vec![0];
    let mut parent: Vec<Option<(u32, usize)>> = vec![None];

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    match eval(&task.init) {
        Cost::Infinite => {
            return PlanResult { outcome: Outcome::Unsolvable, expansions, elapsed: start.elapsed() }
        }
        Cost::Finite(h0) => {
            if bound.is_none_or(|b| h0 <= b) {
                heap.push(Reverse(QueueEntry { f: h0, h: h0, seq, state: 0, g: 0 }));
            }
        }
    }

    while let Some(Reverse(entry)) = heap.pop() {
        if entry.g > best_g[entry.state as usize] {
            continue; // stale
        }
        expansions += 1;
        if expansions > budget.max_expansions
            || (expansions % 256 == 0 && start.elapsed() > budget.time_limit)
        {
            return PlanResult { outcome: Outcome::BudgetExceeded, expansions, elapsed: start.elapsed() };
        }

        let state = states[entry.state as usize].clone();
        if task.goal_satisfied(&state) {
            let mut steps = Vec::new();
            let mut cur = entry.state;
            while let Some((prev, act)) = parent[cur as usize] {
                steps.push(task.actions[act].to_step());
                cur = prev;
            }
            steps.reverse();
            return PlanResult {
                outcome: Outcome::Solved { plan: Plan { steps }, cost: entry.g },
                expansions,
                elapsed: start.elapsed(),
            };
        }

        for (ai, action) in task.actions.iter().enumerate() {
            let Some(next) = task.progress(&state, ai) else { continue };
            let g = entry.g + action.cost;
            let next_id = match ids.entry(next.clone()) {
                Entry::Occupied(e) => {
                    let id = *e.get();
                    if g >= best_g[id as usize] {
                        continue;
                    }
                    best_g[id as usize] = g;
                    parent[id as usize] = Some((entry.state, ai));
                    id
                }
                Entry::Vacant(e) => {
                    let id = states.len() as u32;
                    e.insert(id);
                    states.push(next.clone());
                    best_g.push(g);
                    parent.push(Some((entry.state, ai)));
                    id
                }
            };
            let h = match eval(&next) {
                Cost::Finite(h) => h,
                Cost::Infinite => continue, // dead end
            };
            let f = g.saturating_add(h);
            if bound.is_some_and(|b| f > b) {
                continue;
            }
            seq += 1;
            heap.push(Reverse(QueueEntry { f, h, seq, state: next_id, g }));
        }
    }

    PlanResult { outcome: Outcome::Unsolvable, expansions, elapsed: start.elapsed() }
}

/// Provably optimal plan, or unsolvable, or budget exceeded.
pub fn optimal_plan(task: &GroundTask, budget: &Budget) -> PlanResult {
    search(task, budget, Heuristic::HMax, None)
}

/// `C*` without caring about the plan; `∞` for unsolvable tasks.
pub fn optimal_cost(task: &GroundTask, budget: &Budget) -> Result<Cost, BudgetExceeded> {
    let r = optimal_plan(task, budget);
    match r.outcome {
        Outcome::Solved { cost, .. } => Ok(Cost::Finite(cost)),
        Outcome::Unsolvable => Ok(Cost::Infinite),
        Outcome::BudgetExceeded => Err(BudgetExceeded),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("planner budget exceeded")]
pub struct BudgetExceeded;

/// True iff the plan is feasible and no strictly cheaper plan exists.
///
/// An infeasible plan is never reported optimal, even when the task itself
/// is unsolvable: completeness of an explanation requires the plan to
/// actually execute in the hypothesis model.
pub fn is_plan_optimal(task: &GroundTask, plan: &Plan, budget: &Budget) -> Result<bool, BudgetExceeded> {
    match task.plan_cost(plan) {
        Cost::Infinite => Ok(false),
        Cost::Finite(c) => {
            let r = search(task, budget, Heuristic::HMax, Some(c));
            match r.outcome {
                Outcome::Solved { cost, .. } => Ok(cost == c),
                // The plan itself witnesses a solution with cost ≤ bound.
                Outcome::Unsolvable => unreachable!("bound witnessed by the candidate plan"),
                Outcome::BudgetExceeded => Err(BudgetExceeded),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fetch_pair, BUILTIN};
    use crate::ground::ground;

    #[test]
    fn fetch_robot_optimal_cost_is_four() {
        let (robot, _) = fetch_pair();
        let task = ground(&robot);
        let r = optimal_plan(&task, &Budget::default());
        match r.outcome {
            Outcome::Solved { plan, cost } => {
                assert_eq!(cost, 4);
                assert_eq!(task.plan_cost(&plan), Cost::Finite(4));
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn fetch_human_optimal_cost_is_three() {
        let (_, human) = fetch_pair();
        let task = ground(&human);
        assert_eq!(optimal_cost(&task, &Budget::default()).unwrap(), Cost::Finite(3));
    }

    #[test]
    fn trivial_goal_solved_with_empty_plan() {
        let dom = crate::pddl::parse_domain("(define (domain d) (:predicates (p)))", "t.pddl").unwrap();
        let model = crate::pddl::parse_problem(
            "(define (problem t) (:domain d) (:init (p)) (:goal (p)))",
            "t.pddl",
            &dom,
        )
        .unwrap();
        let r = optimal_plan(&ground(&model), &Budget::default());
        match r.outcome {
            Outcome::Solved { plan, cost } => {
                assert_eq!(cost, 0);
                assert!(plan.is_empty());
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn unsolvable_when_goal_fluent_unachievable() {
        let dom = crate::pddl::parse_domain("(define (domain d) (:predicates (p) (g)))", "t.pddl").unwrap();
        let model = crate::pddl::parse_problem(
            "(define (problem t) (:domain d) (:init (p)) (:goal (g)))",
            "t.pddl",
            &dom,
        )
        .unwrap();
        assert_eq!(optimal_cost(&ground(&model), &Budget::default()).unwrap(), Cost::Infinite);
    }

    #[test]
    fn blocksworld_stack_reversal_costs_six() {
        let f = BUILTIN.iter().find(|f| f.domain == "blocksworld" && f.problem == "p01").unwrap();
        let task = ground(&f.model().unwrap());
        assert_eq!(optimal_cost(&task, &Budget::default()).unwrap(), Cost::Finite(6));
        // Blind uniform-cost search agrees.
        let blind = search(&task, &Budget::default(), Heuristic::Blind, None);
        assert_eq!(blind.cost(), Some(6));
    }

    #[test]
    fn hmax_admissible_on_every_reachable_state() {
        // h(s) must never exceed the true remaining cost, checked against
        // blind-search distances over the whole reachable space of the
        // small fixtures.
        for name in ["fetch", "blocksworld"] {
            let f = BUILTIN.iter().find(|f| f.domain == name && f.problem == "p01").unwrap();
            let task = ground(&f.model().unwrap());

            let mut seen = vec![task.init.clone()];
            let mut queue = vec![task.init.clone()];
            while let Some(state) = queue.pop() {
                for ai in 0..task.actions.len() {
                    if let Some(next) = task.progress(&state, ai) {
                        if !seen.contains(&next) {
                            seen.push(next.clone());
                            queue.push(next);
                        }
                    }
                }
            }
            assert!(seen.len() > 1);

            for state in seen {
                let mut from_here = task.clone();
                from_here.init = state.clone();
                let truth = match search(&from_here, &Budget::default(), Heuristic::Blind, None).outcome {
                    Outcome::Solved { cost, .. } => Cost::Finite(cost),
                    Outcome::Unsolvable => Cost::Infinite,
                    Outcome::BudgetExceeded => panic!("budget on tiny task"),
                };
                match (hmax(&task, &state), truth) {
                    (Cost::Finite(h), Cost::Finite(d)) => {
                        assert!(h <= d, "{name}: h={h} > d={d} at {state:?}")
                    }
                    (Cost::Infinite, Cost::Finite(_)) => {
                        panic!("{name}: hmax says unreachable but distance is finite")
                    }
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn optimality_test_matches_costs() {
        let (robot, human) = fetch_pair();
        let rt = ground(&robot);
        let ht = ground(&human);
        let plan = match optimal_plan(&rt, &Budget::default()).outcome {
            Outcome::Solved { plan, .. } => plan,
            _ => unreachable!(),
        };
        assert!(is_plan_optimal(&rt, &plan, &Budget::default()).unwrap());
        // Cost 4 in the human model, where C* = 3.
        assert!(!is_plan_optimal(&ht, &plan, &Budget::default()).unwrap());
    }

    #[test]
    fn budget_exceeded_is_distinct() {
        let f = BUILTIN.iter().find(|f| f.domain == "blocksworld" && f.problem == "p04").unwrap();
        let task = ground(&f.model().unwrap());
        let r = optimal_plan(&task, &Budget { max_expansions: 2, time_limit: Duration::from_secs(60) });
        assert_eq!(r.outcome, Outcome::BudgetExceeded);
    }
}
