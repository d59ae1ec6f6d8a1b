//! The five explanation generators over a reconciliation instance
//! ⟨π*, ⟨M^R, M^H⟩⟩: model patch (MPE), plan patch (PPE), minimally
//! complete explanation (exact and approximate MCE), and minimally
//! monotonic explanation (MME).
//!
//! MCE is uniform-cost search over feature states starting from Γ(M^H),
//! goal-testing plan optimality in the reconstructed model; the optional
//! relevance preference expands edits touching actions of π* or of the
//! current model's optimal plan first. MME searches from Γ(M^R) toward
//! Γ(M^H) for the largest edit set all of whose subsets keep π* optimal,
//! pruning supersets of known-failed change sets, and returns the
//! complement.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::ground::{ground, Cost, GroundTask, Plan};
use crate::pddl::LiftedModel;
use crate::planner::{self, Budget, Heuristic, Outcome};
use crate::space::{
    apply_edits, at_granularity, gamma, gamma_inverse, model_delta, Edit, Granularity, ModelFeature,
    ModelState, Sign, SpaceError, Template,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ExplanationClass {
    #[serde(rename = "mpe")]
    Mpe,
    #[serde(rename = "ppe")]
    Ppe,
    #[serde(rename = "mce")]
    Mce,
    #[serde(rename = "mce-approx")]
    MceApprox,
    #[serde(rename = "mme")]
    Mme,
}

impl fmt::Display for ExplanationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExplanationClass::Mpe => "mpe",
            ExplanationClass::Ppe => "ppe",
            ExplanationClass::Mce => "mce",
            ExplanationClass::MceApprox => "mce-approx",
            ExplanationClass::Mme => "mme",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExplainStats {
    /// Model-space nodes whose successors were generated.
    pub expansions: u64,
    /// Planner (A*) invocations, i.e. distinct models evaluated for cost.
    pub planner_calls: u64,
    pub elapsed_ms: u64,
}

/// A set of signed model edits, with search metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Explanation {
    pub class: ExplanationClass,
    pub edits: BTreeSet<Edit>,
    /// R1 status when known (by construction or explicitly checked).
    pub complete: Option<bool>,
    /// R3 status when known.
    pub monotonic: Option<bool>,
    pub stats: ExplainStats,
    pub note: Option<String>,
}

impl Explanation {
    pub fn size(&self) -> usize {
        self.edits.len()
    }

    /// Paper-style rendering, one `X-has-Y-Z` line per edit.
    pub fn lines(&self) -> Vec<String> {
        self.edits.iter().map(|e| e.to_string()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "class": self.class,
            "edits": self.edits.iter().map(|e| json!({
                "sign": e.sign,
                "feature": e.feature,
            })).collect::<Vec<_>>(),
            "size": self.size(),
            "complete": self.complete,
            "monotonic": self.monotonic,
            "expansions": self.stats.expansions,
            "planner_calls": self.stats.planner_calls,
            "elapsed_ms": self.stats.elapsed_ms,
        });
        if let Some(note) = &self.note {
            v["note"] = json!(note);
        }
        v
    }
}

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("search budget exceeded after {} expansions / {} planner calls", stats.expansions, stats.planner_calls)]
    BudgetExceeded { stats: ExplainStats },
    #[error("no explanation exists: even the full model difference fails the goal test")]
    NoExplanation,
    #[error("model difference has {size} edits, above the exact-MME cap of {cap}; try MCE instead")]
    DeltaTooLarge { size: usize, cap: usize },
    #[error("plan is not optimal in the robot model (plan cost {plan_cost}, optimal {optimal})")]
    PlanNotOptimal { plan_cost: Cost, optimal: Cost },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A model reconciliation instance: the two models (already at the chosen
/// granularity), the plan being explained, and the encoded endpoints.
#[derive(Debug, Clone)]
pub struct MrpInstance {
    robot: LiftedModel,
    human: LiftedModel,
    plan: Plan,
    granularity: Granularity,
    template: Template,
    human_state: ModelState,
    delta: Vec<Edit>,
    planner_budget: Budget,
    plan_cost_in_human: Cost,
    human_optimal_cost: Cost,
    human_optimal_plan: Option<Plan>,
    /// Action name -> predicates it mentions, across both models; used by
    /// the relevance preference for init/goal features.
    action_preds: BTreeMap<String, BTreeSet<String>>,
}

impl MrpInstance {
    /// Builds an instance, verifying that the plan is optimal in the robot
    /// model. In grounded granularity both models are flattened first.
    pub fn new(
        robot: &LiftedModel,
        human: &LiftedModel,
        plan: Plan,
        granularity: Granularity,
        planner_budget: Budget,
    ) -> Result<MrpInstance, ExplainError> {
        let robot = at_granularity(robot, granularity);
        let human = at_granularity(human, granularity);

        let robot_task = ground(&robot);
        let plan_cost = robot_task.plan_cost(&plan);
        let optimal = planner::optimal_cost(&robot_task, &planner_budget)
            .map_err(|_| ExplainError::BudgetExceeded { stats: ExplainStats::default() })?;
        if !plan_cost.is_finite() || plan_cost != optimal {
            return Err(ExplainError::PlanNotOptimal { plan_cost, optimal });
        }

        let human_task = ground(&human);
        let plan_cost_in_human = human_task.plan_cost(&plan);
        let (human_optimal_cost, human_optimal_plan) =
            match planner::optimal_plan(&human_task, &planner_budget).outcome {
                Outcome::Solved { plan, cost } => (Cost::Finite(cost), Some(plan)),
                Outcome::Unsolvable => (Cost::Infinite, None),
                Outcome::BudgetExceeded => {
                    return Err(ExplainError::BudgetExceeded { stats: ExplainStats::default() })
                }
            };

        let robot_state = gamma(&robot);
        let human_state = gamma(&human);
        let template = Template::merge(&Template::of(&robot), &Template::of(&human))?;
        let delta: Vec<Edit> = model_delta(&human_state, &robot_state).into_iter().collect();

        let mut action_preds: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for model in [&robot, &human] {
            for schema in model.domain.schemas.values() {
                let entry = action_preds.entry(schema.name.clone()).or_default();
                for atom in schema.atoms() {
                    entry.insert(atom.pred.clone());
                }
            }
        }

        Ok(MrpInstance {
            robot,
            human,
            plan,
            granularity,
            template,
            human_state,
            delta,
            planner_budget,
            plan_cost_in_human,
            human_optimal_cost,
            human_optimal_plan,
            action_preds,
        })
    }

    /// The full model difference, oriented M^H -> M^R, in canonical order.
    pub fn delta(&self) -> &[Edit] {
        &self.delta
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn robot_model(&self) -> &LiftedModel {
        &self.robot
    }

    pub fn human_model(&self) -> &LiftedModel {
        &self.human
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn planner_budget(&self) -> Budget {
        self.planner_budget
    }

    /// Action identifiers of the plan steps as they appear in features:
    /// schema names in lifted mode, canonical ground ids in grounded mode.
    fn plan_action_names(&self) -> BTreeSet<String> {
        self.plan_names_of(&self.plan)
    }

    fn plan_names_of(&self, plan: &Plan) -> BTreeSet<String> {
        match self.granularity {
            Granularity::Lifted => plan.action_names().map(str::to_owned).collect(),
            Granularity::Grounded => plan.steps.iter().map(|s| s.id()).collect(),
        }
    }

    /// The model at `human_state + edits`.
    pub fn model_at<'a>(&self, edits: impl IntoIterator<Item = &'a Edit>) -> Result<LiftedModel, ExplainError> {
        let state = apply_edits(&self.human_state, edits)?;
        Ok(gamma_inverse(&state, &self.template)?.model)
    }
}

/// For each edit, the delta index that must already be applied before it
/// becomes legal as a unit step (one cost feature per action, no add/del
/// contradiction). `None` means always legal.
fn compute_prereqs(base: &ModelState, edits: &[Edit]) -> Vec<Option<u16>> {
    edits
        .iter()
        .map(|e| {
            if e.sign != Sign::Add {
                return None;
            }
            let blocker: Option<ModelFeature> = match &e.feature {
                ModelFeature::Cost { action, .. } => base.features.iter().find_map(|f| match f {
                    ModelFeature::Cost { action: a, .. } if a == action => Some(f.clone()),
                    _ => None,
                }),
                ModelFeature::AddEffect { action, atom } => {
                    let twin = ModelFeature::DelEffect { action: action.clone(), atom: atom.clone() };
                    base.features.contains(&twin).then_some(twin)
                }
                ModelFeature::DelEffect { action, atom } => {
                    let twin = ModelFeature::AddEffect { action: action.clone(), atom: atom.clone() };
                    base.features.contains(&twin).then_some(twin)
                }
                _ => None,
            };
            blocker.and_then(|b| {
                edits
                    .iter()
                    .position(|o| o.sign == Sign::Remove && o.feature == b)
                    .map(|i| i as u16)
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
struct EvalEntry {
    plan_cost: Cost,
    /// `None` when π* is infeasible in the model: optimality is already
    /// decided and the search is skipped.
    optimal_cost: Option<Cost>,
    optimal_plan: Option<Plan>,
}

impl EvalEntry {
    fn is_optimal(&self) -> bool {
        self.plan_cost.is_finite() && Some(self.plan_cost) == self.optimal_cost
    }
}

/// Memoized model evaluation, keyed by the applied subset of the delta.
/// Each search owns its evaluator, so memoization needs no locking.
struct Evaluator<'a> {
    inst: &'a MrpInstance,
    budget: Budget,
    cache: HashMap<Vec<u16>, EvalEntry>,
    planner_calls: u64,
}

impl<'a> Evaluator<'a> {
    fn new(inst: &'a MrpInstance, budget: Budget) -> Self {
        Evaluator { inst, budget, cache: HashMap::new(), planner_calls: 0 }
    }

    fn task_at(&self, key: &[u16]) -> Result<GroundTask, ExplainError> {
        let edits = key.iter().map(|&i| &self.inst.delta[i as usize]);
        let model = self.inst.model_at(edits)?;
        Ok(ground(&model))
    }

    fn evaluate(&mut self, key: &[u16], stats: &ExplainStats) -> Result<EvalEntry, ExplainError> {
        if let Some(e) = self.cache.get(key) {
            return Ok(e.clone());
        }
        let task = self.task_at(key)?;
        let plan_cost = task.plan_cost(&self.inst.plan);
        let entry = match plan_cost.finite() {
            // Infeasible plans are never optimal; no search needed.
            None => EvalEntry { plan_cost, optimal_cost: None, optimal_plan: None },
            Some(bound) => {
                self.planner_calls += 1;
                let result = planner::search(&task, &self.budget, Heuristic::HMax, Some(bound));
                match result.outcome {
                    Outcome::Solved { plan, cost } => EvalEntry {
                        plan_cost,
                        optimal_cost: Some(Cost::Finite(cost)),
                        optimal_plan: Some(plan),
                    },
                    // The plan itself witnesses a solution within the bound.
                    Outcome::Unsolvable => unreachable!("bound witnessed by the candidate plan"),
                    Outcome::BudgetExceeded => {
                        let mut s = *stats;
                        s.planner_calls = self.planner_calls;
                        return Err(ExplainError::BudgetExceeded { stats: s });
                    }
                }
            }
        };
        self.cache.insert(key.to_vec(), entry.clone());
        Ok(entry)
    }
}

/// Model patch explanation: the entire model difference. Complete and
/// monotonic by construction.
pub fn mpe(inst: &MrpInstance) -> Explanation {
    Explanation {
        class: ExplanationClass::Mpe,
        edits: inst.delta.iter().cloned().collect(),
        complete: Some(true),
        monotonic: Some(true),
        stats: ExplainStats::default(),
        note: None,
    }
}

/// Plan patch explanation: the difference restricted to actions occurring
/// in the plan, plus init/goal differences whose predicates those actions
/// mention. Not guaranteed complete.
pub fn ppe(inst: &MrpInstance) -> Explanation {
    let plan_actions = inst.plan_action_names();
    let relevant_preds: BTreeSet<&str> = plan_actions
        .iter()
        .filter_map(|a| inst.action_preds.get(a))
        .flatten()
        .map(String::as_str)
        .collect();
    let mut touched_init_goal = false;
    let edits: BTreeSet<Edit> = inst
        .delta
        .iter()
        .filter(|e| match e.feature.action() {
            Some(a) => plan_actions.contains(a),
            None => {
                let hit = e.feature.predicate().is_some_and(|p| relevant_preds.contains(p));
                touched_init_goal |= hit;
                hit
            }
        })
        .cloned()
        .collect();
    Explanation {
        class: ExplanationClass::Ppe,
        edits,
        complete: None,
        monotonic: None,
        stats: ExplainStats::default(),
        note: touched_init_goal
            .then(|| "includes init/goal differences touching plan actions".to_owned()),
    }
}

fn insert_sorted(key: &[u16], i: u16) -> Vec<u16> {
    let mut out = Vec::with_capacity(key.len() + 1);
    let pos = key.partition_point(|&x| x < i);
    out.extend_from_slice(&key[..pos]);
    out.push(i);
    out.extend_from_slice(&key[pos..]);
    out
}

fn contains_sorted(key: &[u16], i: u16) -> bool {
    key.binary_search(&i).is_ok()
}

fn is_subset_sorted(sub: &[u16], sup: &[u16]) -> bool {
    let mut it = sup.iter();
    'outer: for x in sub {
        for y in it.by_ref() {
            if y == x {
                continue 'outer;
            }
            if y > x {
                return false;
            }
        }
        return false;
    }
    true
}

struct MceNode {
    cost: u32,
    pref: u8,
    rand: u32,
    seq: u64,
    key: Vec<u16>,
}

impl PartialEq for MceNode {
    fn eq(&self, other: &Self) -> bool {
        (self.cost, self.pref, self.rand, self.seq) == (other.cost, other.pref, other.rand, other.seq)
    }
}
impl Eq for MceNode {}
impl PartialOrd for MceNode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for MceNode {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.cost, self.pref, self.rand, self.seq).cmp(&(other.cost, other.pref, other.rand, other.seq))
    }
}

#[derive(Debug, Clone, Copy)]
struct MceOptions {
    use_heuristic: bool,
    approx: bool,
    seed: Option<u64>,
}

/// Exact minimally complete explanation via Algorithm-1-style uniform-cost
/// search; with `use_heuristic`, expansion prefers edits relevant to π* or
/// to the current model's optimal plan (equal sizes, fewer expansions).
pub fn mce_exact(inst: &MrpInstance, use_heuristic: bool, budget: &Budget) -> Result<Explanation, ExplainError> {
    mce_search(inst, budget, MceOptions { use_heuristic, approx: false, seed: None })
}

/// Exact MCE with uniform-random tie-breaking among equally preferred
/// candidates, reproducible under the seed.
pub fn mce_exact_seeded(
    inst: &MrpInstance,
    use_heuristic: bool,
    budget: &Budget,
    seed: u64,
) -> Result<Explanation, ExplainError> {
    mce_search(inst, budget, MceOptions { use_heuristic, approx: false, seed: Some(seed) })
}

/// Approximate MCE: same search, optimality test replaced by validity of
/// π*, refutation of the human's expected plan (or a cost improvement),
/// and causal-link coverage. May be incomplete, never larger than exact.
pub fn mce_approx(inst: &MrpInstance, budget: &Budget) -> Result<Explanation, ExplainError> {
    mce_search(inst, budget, MceOptions { use_heuristic: true, approx: true, seed: None })
}

fn mce_search(inst: &MrpInstance, budget: &Budget, opts: MceOptions) -> Result<Explanation, ExplainError> {
    let start = Instant::now();
    let mut stats = ExplainStats::default();
    let mut evaluator = Evaluator::new(inst, inst.planner_budget);
    let mut rng = opts.seed.map(ChaCha8Rng::seed_from_u64);

    let n = inst.delta.len() as u16;
    let prereqs = compute_prereqs(&inst.human_state, &inst.delta);
    let plan_actions = inst.plan_action_names();

    let mut heap: BinaryHeap<Reverse<MceNode>> = BinaryHeap::new();
    let mut closed: HashSet<Vec<u16>> = HashSet::new();
    let mut seq = 0u64;
    heap.push(Reverse(MceNode { cost: 0, pref: 0, rand: 0, seq, key: Vec::new() }));

    while let Some(Reverse(node)) = heap.pop() {
        if closed.contains(&node.key) {
            continue;
        }
        closed.insert(node.key.clone());

        if stats.expansions >= budget.max_expansions || start.elapsed() > budget.time_limit {
            stats.planner_calls = evaluator.planner_calls;
            return Err(ExplainError::BudgetExceeded { stats });
        }

        let (is_goal, entry) = if opts.approx {
            (approx_goal(inst, &mut evaluator, &node.key)?, None)
        } else {
            let entry = evaluator.evaluate(&node.key, &stats)?;
            (entry.is_optimal(), Some(entry))
        };
        if is_goal {
            stats.planner_calls = evaluator.planner_calls;
            stats.elapsed_ms = start.elapsed().as_millis() as u64;
            return Ok(Explanation {
                class: if opts.approx { ExplanationClass::MceApprox } else { ExplanationClass::Mce },
                edits: node.key.iter().map(|&i| inst.delta[i as usize].clone()).collect(),
                complete: if opts.approx { None } else { Some(true) },
                monotonic: None,
                stats,
                note: None,
            });
        }

        stats.expansions += 1;

        // Relevance set for successor preference: actions of π* plus the
        // current model's optimal plan (free from the goal test; the
        // approximate mode falls back to the human's original plan).
        let relevant: Option<(BTreeSet<String>, BTreeSet<&str>)> = if opts.use_heuristic {
            let mut actions = plan_actions.clone();
            let pi_h = match &entry {
                Some(e) => e.optimal_plan.as_ref(),
                None => inst.human_optimal_plan.as_ref(),
            };
            if let Some(p) = pi_h {
                actions.extend(inst.plan_names_of(p));
            }
            let preds: BTreeSet<&str> = actions
                .iter()
                .filter_map(|a| inst.action_preds.get(a))
                .flatten()
                .map(String::as_str)
                .collect();
            Some((actions, preds))
        } else {
            None
        };

        for i in 0..n {
            if contains_sorted(&node.key, i) {
                continue;
            }
            if let Some(p) = prereqs[i as usize] {
                if !contains_sorted(&node.key, p) {
                    continue;
                }
            }
            let child = insert_sorted(&node.key, i);
            if closed.contains(&child) {
                continue;
            }
            let pref = match &relevant {
                None => 0,
                Some((actions, preds)) => {
                    let f = &inst.delta[i as usize].feature;
                    let hit = match f.action() {
                        Some(a) => actions.contains(a),
                        None => f.predicate().is_some_and(|p| preds.contains(p)),
                    };
                    u8::from(!hit)
                }
            };
            seq += 1;
            let rand = rng.as_mut().map_or(0, |r| r.next_u32());
            heap.push(Reverse(MceNode { cost: node.cost + 1, pref, rand, seq, key: child }));
        }
    }

    // The full delta reaches Γ(M^R), where π* is optimal by the instance
    // invariant, so the search cannot exhaust without a goal.
    Err(ExplainError::NoExplanation)
}

/// Approximate optimality test (no planner call):
/// 1. π* is valid in the hypothesis model,
/// 2. the human's expected plan is refuted there, or π* got cheaper, and
/// 3. every plan action contributes a causal link.
fn approx_goal(inst: &MrpInstance, evaluator: &mut Evaluator, key: &[u16]) -> Result<bool, ExplainError> {
    if key.is_empty() {
        // At Γ(M^H) itself the instance already knows the exact optimum:
        // nothing to explain when the plan is optimal there as-is.
        return Ok(inst.plan_cost_in_human.is_finite()
            && inst.plan_cost_in_human == inst.human_optimal_cost);
    }
    let task = evaluator.task_at(key)?;
    let plan_cost = task.plan_cost(&inst.plan);
    if !plan_cost.is_finite() {
        return Ok(false);
    }
    let refuted = match &inst.human_optimal_plan {
        Some(pi_h) => !task.plan_cost(pi_h).is_finite(),
        None => true,
    };
    if !refuted && plan_cost >= inst.plan_cost_in_human {
        return Ok(false);
    }
    Ok(causal_link_coverage(&task, &inst.plan))
}

/// Criterion: each action supplies at least one effect atom consumed as a
/// precondition downstream (or by the goal) with no intervening deletion.
/// A necessary condition for plan optimality under positive action costs.
pub fn causal_link_coverage(task: &GroundTask, plan: &Plan) -> bool {
    let Some(indices) = plan
        .steps
        .iter()
        .map(|s| task.resolve(s))
        .collect::<Option<Vec<_>>>()
    else {
        return false;
    };
    'steps: for (i, &ai) in indices.iter().enumerate() {
        let add = &task.actions[ai].add;
        'atoms: for p in add.iter() {
            for &ak in indices.iter().skip(i + 1) {
                if task.actions[ak].pre.contains(p) {
                    continue 'steps; // link (i -> k) found
                }
                if task.actions[ak].del.contains(p) {
                    continue 'atoms; // deleted before any consumer
                }
            }
            if task.goal.contains(p) {
                continue 'steps; // link (i -> goal)
            }
        }
        return false;
    }
    true
}

/// R1 check: apply the explanation to M^H and test optimality of π*.
pub fn check_completeness(inst: &MrpInstance, expl: &Explanation) -> Result<bool, ExplainError> {
    let model = inst.model_at(&expl.edits)?;
    let task = ground(&model);
    planner::is_plan_optimal(&task, &inst.plan, &inst.planner_budget)
        .map_err(|_| ExplainError::BudgetExceeded { stats: ExplainStats::default() })
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub monotonic: bool,
    /// All supersets enumerated (vs sampled for large remainders).
    pub exhaustive: bool,
    pub checked: u64,
    /// A remaining-delta subset whose application breaks completeness.
    pub witness: Option<BTreeSet<Edit>>,
}

const MONOTONICITY_EXHAUSTIVE_CAP: usize = 20;
const MONOTONICITY_SAMPLES: u64 = 1024;

/// R3 check: completeness must survive every further reconciliation
/// toward M^R. Exhaustive over remaining-delta subsets up to 2^20,
/// seeded sampling beyond that.
pub fn check_monotonicity(
    inst: &MrpInstance,
    expl: &Explanation,
    budget: &Budget,
) -> Result<MonotonicityReport, ExplainError> {
    let start = Instant::now();
    let base: Vec<u16> = inst
        .delta
        .iter()
        .enumerate()
        .filter(|(_, e)| expl.edits.contains(e))
        .map(|(i, _)| i as u16)
        .collect();
    let remaining: Vec<u16> = (0..inst.delta.len() as u16)
        .filter(|i| !contains_sorted(&base, *i))
        .collect();

    let mut evaluator = Evaluator::new(inst, inst.planner_budget);
    let stats = ExplainStats::default();
    let mut checked = 0u64;

    let test_mask = |mask: u64, evaluator: &mut Evaluator| -> Result<Option<BTreeSet<Edit>>, ExplainError> {
        let mut key = base.clone();
        for (bit, &idx) in remaining.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                key = insert_sorted(&key, idx);
            }
        }
        let entry = evaluator.evaluate(&key, &stats)?;
        if entry.is_optimal() {
            Ok(None)
        } else {
            let witness = remaining
                .iter()
                .enumerate()
                .filter(|(bit, _)| mask & (1 << bit) != 0)
                .map(|(_, &idx)| inst.delta[idx as usize].clone())
                .collect();
            Ok(Some(witness))
        }
    };

    if remaining.len() <= MONOTONICITY_EXHAUSTIVE_CAP {
        for mask in 0..(1u64 << remaining.len()) {
            checked += 1;
            if checked % 64 == 0 && start.elapsed() > budget.time_limit {
                return Err(ExplainError::BudgetExceeded { stats });
            }
            if let Some(witness) = test_mask(mask, &mut evaluator)? {
                return Ok(MonotonicityReport { monotonic: false, exhaustive: true, checked, witness: Some(witness) });
            }
        }
        Ok(MonotonicityReport { monotonic: true, exhaustive: true, checked, witness: None })
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..MONOTONICITY_SAMPLES {
            checked += 1;
            if checked % 64 == 0 && start.elapsed() > budget.time_limit {
                return Err(ExplainError::BudgetExceeded { stats });
            }
            let mask = (u64::from(rng.next_u32()) << 32 | u64::from(rng.next_u32()))
                & ((1u64 << remaining.len().min(63)) - 1);
            if let Some(witness) = test_mask(mask, &mut evaluator)? {
                return Ok(MonotonicityReport { monotonic: false, exhaustive: false, checked, witness: Some(witness) });
            }
        }
        Ok(MonotonicityReport { monotonic: true, exhaustive: false, checked, witness: None })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MmeOptions {
    /// Skip supersets of failed change sets (Proposition-3 pruning).
    pub prune: bool,
    /// Refuse instances whose delta exceeds this many edits.
    pub cap: usize,
}

impl Default for MmeOptions {
    fn default() -> Self {
        MmeOptions { prune: true, cap: 16 }
    }
}

/// Minimally monotonic explanation. Searches from Γ(M^R) toward Γ(M^H)
/// for the largest change set all of whose subsets keep π* optimal; the
/// explanation is the rest of the difference, oriented M^H -> M^R.
pub fn mme(inst: &MrpInstance, budget: &Budget) -> Result<Explanation, ExplainError> {
    Ok(mme_all(inst, budget, MmeOptions::default())?.remove(0))
}

/// Every minimum-cardinality monotonic explanation (they are not unique
/// when several differences support the same causal links).
pub fn mme_enumerate(inst: &MrpInstance, budget: &Budget) -> Result<Vec<Explanation>, ExplainError> {
    mme_all(inst, budget, MmeOptions::default())
}

/// MME with explicit options; the first returned explanation is the
/// canonical (lexicographically least) one.
pub fn mme_all(inst: &MrpInstance, budget: &Budget, opts: MmeOptions) -> Result<Vec<Explanation>, ExplainError> {
    let start = Instant::now();
    let mut stats = ExplainStats::default();
    let n = inst.delta.len();
    if n > opts.cap {
        return Err(ExplainError::DeltaTooLarge { size: n, cap: opts.cap });
    }
    let mut evaluator = Evaluator::new(inst, inst.planner_budget);

    // Edits from the robot model toward the human's, with their own
    // unit-step legality (mirrored from the forward direction).
    let robot_state = apply_edits(&inst.human_state, inst.delta.iter())?;
    let inverse: Vec<Edit> = inst.delta.iter().map(Edit::inverse).collect();
    let prereqs = compute_prereqs(&robot_state, &inverse);

    let complement = |key: &[u16]| -> Vec<u16> {
        (0..n as u16).filter(|i| !contains_sorted(key, *i)).collect()
    };

    let mut heap: BinaryHeap<Reverse<(u32, u64, Vec<u16>)>> = BinaryHeap::new();
    let mut closed: HashSet<Vec<u16>> = HashSet::new();
    let mut failed: Vec<Vec<u16>> = Vec::new();
    let mut good: Vec<Vec<u16>> = Vec::new();
    let mut seq = 0u64;
    heap.push(Reverse((0, seq, Vec::new())));

    while let Some(Reverse((size, _, key))) = heap.pop() {
        if closed.contains(&key) {
            continue;
        }
        closed.insert(key.clone());
        if stats.expansions >= budget.max_expansions || start.elapsed() > budget.time_limit {
            stats.planner_calls = evaluator.planner_calls;
            return Err(ExplainError::BudgetExceeded { stats });
        }
        // A change set with a known-failed subset cannot appear in any
        // all-subsets-good candidate; with pruning on, drop it before the
        // planner is consulted.
        if opts.prune && failed.iter().any(|f| is_subset_sorted(f, &key)) {
            continue;
        }

        let entry = evaluator.evaluate(&complement(&key), &stats)?;
        if !entry.is_optimal() {
            failed.push(key);
            continue;
        }
        good.push(key.clone());
        stats.expansions += 1;

        for i in 0..n as u16 {
            if contains_sorted(&key, i) {
                continue;
            }
            if let Some(p) = prereqs[i as usize] {
                if !contains_sorted(&key, p) {
                    continue;
                }
            }
            let child = insert_sorted(&key, i);
            if closed.contains(&child) {
                continue;
            }
            if opts.prune && failed.iter().any(|f| is_subset_sorted(f, &child)) {
                continue;
            }
            seq += 1;
            heap.push(Reverse((size + 1, seq, child)));
        }
    }

    // Without pruning, states with failed subsets were still evaluated;
    // filter them out so both modes agree on the answer.
    good.retain(|g| !failed.iter().any(|f| is_subset_sorted(f, g)));
    let max = good.iter().map(Vec::len).max().expect("the empty change set is always good");
    stats.planner_calls = evaluator.planner_calls;
    stats.elapsed_ms = start.elapsed().as_millis() as u64;

    let mut explanations: Vec<Explanation> = good
        .iter()
        .filter(|g| g.len() == max)
        .map(|g| Explanation {
            class: ExplanationClass::Mme,
            edits: complement(g).iter().map(|&i| inst.delta[i as usize].clone()).collect(),
            complete: Some(true),
            monotonic: Some(true),
            stats,
            note: None,
        })
        .collect();
    explanations.sort_by(|a, b| a.edits.cmp(&b.edits));
    Ok(explanations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fetch_pair;
    use crate::pddl::Term;

    fn robot_plan(robot: &LiftedModel) -> Plan {
        match planner::optimal_plan(&ground(robot), &Budget::default()).outcome {
            Outcome::Solved { plan, .. } => plan,
            _ => unreachable!(),
        }
    }

    fn fetch_instance(granularity: Granularity) -> MrpInstance {
        let (robot, human) = fetch_pair();
        let plan = robot_plan(&robot);
        MrpInstance::new(&robot, &human, plan, granularity, Budget::default()).unwrap()
    }

    #[test]
    fn mrp_invariant_rejects_suboptimal_plan() {
        let (robot, human) = fetch_pair();
        let plan =
            Plan::parse("(crouch)\n(pick-up b1 loc1)\n(tuck)\n(move loc1 loc2)\n(put-down b1 loc2)").unwrap();
        let err = MrpInstance::new(&robot, &human, plan, Granularity::Lifted, Budget::default());
        assert!(matches!(err, Err(ExplainError::PlanNotOptimal { .. })));
    }

    #[test]
    fn fetch_mpe_has_three_edits() {
        let inst = fetch_instance(Granularity::Lifted);
        let e = mpe(&inst);
        assert_eq!(e.size(), 3);
        assert_eq!(e.complete, Some(true));
        assert!(check_completeness(&inst, &e).unwrap());
    }

    #[test]
    fn identical_models_give_empty_explanations() {
        let (robot, _) = fetch_pair();
        let plan = robot_plan(&robot);
        let inst = MrpInstance::new(&robot, &robot, plan, Granularity::Lifted, Budget::default()).unwrap();
        assert!(mpe(&inst).edits.is_empty());
        assert!(ppe(&inst).edits.is_empty());
        let mce = mce_exact(&inst, true, &Budget::default()).unwrap();
        assert!(mce.edits.is_empty());
        assert_eq!(mce.stats.expansions, 0);
        assert!(mme(&inst, &Budget::default()).unwrap().edits.is_empty());
        assert!(mce_approx(&inst, &Budget::default()).unwrap().edits.is_empty());
    }

    #[test]
    fn fetch_ppe_keeps_all_three_differences() {
        // Both divergent actions (move, tuck) occur in the plan.
        let inst = fetch_instance(Granularity::Lifted);
        assert_eq!(ppe(&inst).size(), 3);
    }

    #[test]
    fn ppe_empty_when_plan_avoids_divergent_actions() {
        // The only divergence is on `crouch`, which no optimal plan uses.
        let (robot, _) = fetch_pair();
        let mut human = robot.clone();
        human
            .domain
            .schemas
            .get_mut("crouch")
            .unwrap()
            .pre
            .insert(crate::pddl::Atom::new("hand-empty", vec![]));
        let plan = robot_plan(&robot);
        assert!(!plan.action_names().any(|a| a == "crouch"));
        let inst = MrpInstance::new(&robot, &human, plan, Granularity::Lifted, Budget::default()).unwrap();
        assert!(!mpe(&inst).edits.is_empty());
        assert!(ppe(&inst).edits.is_empty());
    }

    #[test]
    fn fetch_mce_lifted_is_the_hand_tucked_precondition() {
        let inst = fetch_instance(Granularity::Lifted);
        let e = mce_exact(&inst, true, &Budget::default()).unwrap();
        assert_eq!(e.size(), 1);
        assert_eq!(e.lines(), vec!["move-has-precondition-hand-tucked"]);
        assert!(check_completeness(&inst, &e).unwrap());
    }

    #[test]
    fn fetch_mce_grounded_matches_paper_string() {
        let inst = fetch_instance(Granularity::Grounded);
        let e = mce_exact(&inst, true, &Budget::default()).unwrap();
        assert_eq!(e.size(), 1);
        assert_eq!(e.lines(), vec!["move_loc1_loc2-has-precondition-hand-tucked"]);
    }

    #[test]
    fn fetch_mce_heuristic_does_not_change_size() {
        let inst = fetch_instance(Granularity::Lifted);
        let with = mce_exact(&inst, true, &Budget::default()).unwrap();
        let without = mce_exact(&inst, false, &Budget::default()).unwrap();
        assert_eq!(with.size(), without.size());
        assert!(with.stats.expansions <= without.stats.expansions);
    }

    #[test]
    fn fetch_mce_is_not_monotonic() {
        let inst = fetch_instance(Granularity::Lifted);
        let e = mce_exact(&inst, true, &Budget::default()).unwrap();
        let report = check_monotonicity(&inst, &e, &Budget::default()).unwrap();
        assert!(!report.monotonic);
        assert!(report.exhaustive);
        // Witnessed by the crouched precondition arriving alone.
        let witness = report.witness.unwrap();
        assert!(witness.iter().any(|e| e.to_string() == "move-has-precondition-crouched"));
    }

    #[test]
    fn fetch_mme_matches_paper() {
        let inst = fetch_instance(Granularity::Lifted);
        let e = mme(&inst, &Budget::default()).unwrap();
        assert_eq!(e.size(), 2);
        assert_eq!(e.lines(), vec!["move-has-precondition-crouched", "tuck-has-add-effect-crouched"]);
        assert!(check_completeness(&inst, &e).unwrap());
        let report = check_monotonicity(&inst, &e, &Budget::default()).unwrap();
        assert!(report.monotonic && report.exhaustive);
    }

    #[test]
    fn fetch_mme_not_unique() {
        let inst = fetch_instance(Granularity::Lifted);
        let all = mme_enumerate(&inst, &Budget::default()).unwrap();
        assert!(all.len() >= 2, "expected multiple MMEs, got {}", all.len());
        for e in &all {
            assert_eq!(e.size(), 2);
            assert!(check_completeness(&inst, e).unwrap());
            assert!(check_monotonicity(&inst, e, &Budget::default()).unwrap().monotonic);
        }
    }

    #[test]
    fn fetch_approx_equals_exact() {
        let inst = fetch_instance(Granularity::Lifted);
        let exact = mce_exact(&inst, true, &Budget::default()).unwrap();
        let approx = mce_approx(&inst, &Budget::default()).unwrap();
        assert_eq!(approx.size(), exact.size());
        assert!(approx.stats.planner_calls <= exact.stats.planner_calls);
    }

    #[test]
    fn fetch_size_chain() {
        let inst = fetch_instance(Granularity::Lifted);
        let approx = mce_approx(&inst, &Budget::default()).unwrap().size();
        let exact = mce_exact(&inst, true, &Budget::default()).unwrap().size();
        let mme_size = mme(&inst, &Budget::default()).unwrap().size();
        let mpe_size = mpe(&inst).size();
        assert!(approx <= exact && exact <= mme_size && mme_size <= mpe_size);
    }

    #[test]
    fn schema_missing_from_human_model() {
        // The human does not know `crouch` exists at all. The difference
        // is the schema's whole feature set, but the plan never uses it,
        // so the minimal explanations stay empty while the full patch
        // recreates the action.
        let (robot, _) = fetch_pair();
        let mut human = robot.clone();
        human.domain.schemas.remove("crouch");
        let plan = robot_plan(&robot);
        let inst = MrpInstance::new(&robot, &human, plan, Granularity::Lifted, Budget::default()).unwrap();
        assert_eq!(inst.delta().len(), 2); // crouch add-effect + cost
        assert!(mce_exact(&inst, true, &Budget::default()).unwrap().edits.is_empty());
        assert!(mme(&inst, &Budget::default()).unwrap().edits.is_empty());
        let full = inst.model_at(&mpe(&inst).edits).unwrap();
        assert_eq!(full, robot);
    }

    #[test]
    fn extra_schema_in_human_model_is_removed_by_mce() {
        // The human imagines a teleport action the robot does not have;
        // the explanation must remove a feature of it (the plan is only
        // optimal once teleporting stops looking possible).
        let (robot, _) = fetch_pair();
        let mut human = robot.clone();
        let mut teleport = crate::pddl::ActionSchema::new("teleport");
        teleport.params = vec![
            crate::pddl::Parameter::new("?from", "location"),
            crate::pddl::Parameter::new("?to", "location"),
        ];
        teleport.pre.insert(crate::pddl::Atom::new("robot-at", vec![Term::Var("?from".into())]));
        teleport.add.insert(crate::pddl::Atom::new("robot-at", vec![Term::Var("?to".into())]));
        teleport.del.insert(crate::pddl::Atom::new("robot-at", vec![Term::Var("?from".into())]));
        human.domain.schemas.insert("teleport".into(), teleport);
        human.validate().unwrap();

        let plan = robot_plan(&robot);
        let inst = MrpInstance::new(&robot, &human, plan, Granularity::Lifted, Budget::default()).unwrap();
        assert!(inst.delta().iter().all(|e| e.sign == Sign::Remove));

        // Human expects pick-up, teleport, put-down (cost 3).
        let human_task = ground(&human);
        assert_eq!(planner::optimal_cost(&human_task, &Budget::default()).unwrap(), Cost::Finite(3));

        let e = mce_exact(&inst, true, &Budget::default()).unwrap();
        assert_eq!(e.size(), 1);
        assert_eq!(e.lines(), vec!["remove-teleport-has-add-effect-robot-at_?to"]);
        assert!(check_completeness(&inst, &e).unwrap());
    }

    #[test]
    fn approx_can_be_strictly_smaller_and_incomplete() {
        // Two de-preconditioned shortcuts both undercut the plan. The
        // approximate goal accepts once the human's expected shortcut is
        // refuted; the exact search must also refute the second one.
        let dom = crate::pddl::parse_domain(
            "(define (domain twoshort) (:requirements :strips :typing :action-costs)
              (:predicates (p) (m) (g))
              (:functions (total-cost))
              (:action mk-p :parameters () :effect (and (p) (increase (total-cost) 1)))
              (:action finish :parameters () :precondition (p) :effect (and (g) (increase (total-cost) 2)))
              (:action short-a :parameters () :precondition (and (m)) :effect (and (g) (increase (total-cost) 1)))
              (:action short-b :parameters () :precondition (and (m)) :effect (and (g) (increase (total-cost) 1))))",
            "t.pddl",
        )
        .unwrap();
        let robot = crate::pddl::parse_problem(
            "(define (problem t) (:domain twoshort) (:init (= (total-cost) 0)) (:goal (g)))",
            "t.pddl",
            &dom,
        )
        .unwrap();
        let mut human = robot.clone();
        let m = crate::pddl::Atom::new("m", vec![]);
        human.domain.schemas.get_mut("short-a").unwrap().pre.remove(&m);
        human.domain.schemas.get_mut("short-b").unwrap().pre.remove(&m);

        let plan = robot_plan(&robot);
        assert_eq!(ground(&robot).plan_cost(&plan), Cost::Finite(3));
        let inst = MrpInstance::new(&robot, &human, plan, Granularity::Lifted, Budget::default()).unwrap();
        assert_eq!(inst.delta().len(), 2);

        let exact = mce_exact(&inst, true, &Budget::default()).unwrap();
        let approx = mce_approx(&inst, &Budget::default()).unwrap();
        assert_eq!(exact.size(), 2);
        assert_eq!(approx.size(), 1);
        assert!(!check_completeness(&inst, &approx).unwrap());
        assert!(check_completeness(&inst, &exact).unwrap());
    }

    #[test]
    fn causal_links_hold_for_optimal_plans() {
        let (robot, _) = fetch_pair();
        let task = ground(&robot);
        let plan = robot_plan(&robot);
        assert!(causal_link_coverage(&task, &plan));
    }

    #[test]
    fn mme_refuses_oversized_delta() {
        let inst = fetch_instance(Granularity::Lifted);
        let err = mme_all(&inst, &Budget::default(), MmeOptions { prune: true, cap: 2 });
        assert!(matches!(err, Err(ExplainError::DeltaTooLarge { size: 3, cap: 2 })));
    }

    #[test]
    fn mme_pruning_does_not_change_answer() {
        let inst = fetch_instance(Granularity::Lifted);
        let pruned = mme_all(&inst, &Budget::default(), MmeOptions { prune: true, cap: 16 }).unwrap();
        let full = mme_all(&inst, &Budget::default(), MmeOptions { prune: false, cap: 16 }).unwrap();
        assert_eq!(pruned.len(), full.len());
        for (a, b) in pruned.iter().zip(&full) {
            assert_eq!(a.edits, b.edits);
        }
        assert!(pruned[0].stats.planner_calls <= full[0].stats.planner_calls);
    }

    #[test]
    fn seeded_mce_is_reproducible_and_minimal() {
        let inst = fetch_instance(Granularity::Lifted);
        let a = mce_exact_seeded(&inst, true, &Budget::default(), 7).unwrap();
        let b = mce_exact_seeded(&inst, true, &Budget::default(), 7).unwrap();
        assert_eq!(a.edits, b.edits);
        assert_eq!(a.size(), 1);
    }

    #[test]
    fn explanation_json_shape() {
        let inst = fetch_instance(Granularity::Lifted);
        let e = mce_exact(&inst, true, &Budget::default()).unwrap();
        let v = e.to_json();
        assert_eq!(v["class"], "mce");
        assert_eq!(v["size"], 1);
        assert_eq!(v["complete"], true);
        assert!(v["monotonic"].is_null());
        assert_eq!(v["edits"][0]["sign"], "add");
        assert_eq!(v["edits"][0]["feature"], "move-has-precondition-hand-tucked");
        assert!(v["expansions"].is_u64() && v["planner_calls"].is_u64() && v["elapsed_ms"].is_u64());
    }
}
