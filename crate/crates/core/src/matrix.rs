//! Experiment matrix: for each (problem, fault spec, explainer) triple,
//! inject a divergent human model, compute the explanation, and record
//! size, timing, and search counters. Rows never abort the matrix;
//! failures are recorded in the row status.
//!
//! Instances are independent, so the matrix fans out across a thread pool
//! when the `parallel` feature is on (`jobs != 1`); output order is
//! canonical regardless of completion order.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde_json::json;

use crate::explain::{
    self, ExplainError, Explanation, ExplanationClass, MrpInstance,
};
use crate::ground::Plan;
use crate::pddl::LiftedModel;
use crate::perturb::{inject, FaultSpec};
use crate::planner::{self, Budget, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplainerKind {
    Mpe,
    Ppe,
    Mce,
    MceNoHeuristic,
    MceApprox,
    Mme,
}

impl ExplainerKind {
    pub const ALL: [ExplainerKind; 6] = [
        ExplainerKind::Mpe,
        ExplainerKind::Ppe,
        ExplainerKind::Mce,
        ExplainerKind::MceNoHeuristic,
        ExplainerKind::MceApprox,
        ExplainerKind::Mme,
    ];

    pub fn class(&self) -> ExplanationClass {
        match self {
            ExplainerKind::Mpe => ExplanationClass::Mpe,
            ExplainerKind::Ppe => ExplanationClass::Ppe,
            ExplainerKind::Mce | ExplainerKind::MceNoHeuristic => ExplanationClass::Mce,
            ExplainerKind::MceApprox => ExplanationClass::MceApprox,
            ExplainerKind::Mme => ExplanationClass::Mme,
        }
    }

    pub fn run(&self, inst: &MrpInstance, budget: &Budget) -> Result<Explanation, ExplainError> {
        match self {
            ExplainerKind::Mpe => Ok(explain::mpe(inst)),
            ExplainerKind::Ppe => Ok(explain::ppe(inst)),
            ExplainerKind::Mce => explain::mce_exact(inst, true, budget),
            ExplainerKind::MceNoHeuristic => explain::mce_exact(inst, false, budget),
            ExplainerKind::MceApprox => explain::mce_approx(inst, budget),
            ExplainerKind::Mme => explain::mme(inst, budget),
        }
    }
}

impl fmt::Display for ExplainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExplainerKind::Mpe => "mpe",
            ExplainerKind::Ppe => "ppe",
            ExplainerKind::Mce => "mce",
            ExplainerKind::MceNoHeuristic => "mce-noheuristic",
            ExplainerKind::MceApprox => "mce-approx",
            ExplainerKind::Mme => "mme",
        };
        write!(f, "{s}")
    }
}

impl FromStr for ExplainerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mpe" => Ok(ExplainerKind::Mpe),
            "ppe" => Ok(ExplainerKind::Ppe),
            "mce" => Ok(ExplainerKind::Mce),
            "mce-noheuristic" => Ok(ExplainerKind::MceNoHeuristic),
            "mce-approx" => Ok(ExplainerKind::MceApprox),
            "mme" => Ok(ExplainerKind::Mme),
            other => Err(format!("unknown explainer class `{other}`")),
        }
    }
}

/// One experiment result. `size` is present only when status is `ok`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRow {
    pub domain: String,
    pub problem: String,
    pub explainer: String,
    pub size: Option<usize>,
    pub time_ms: Option<u64>,
    pub expansions: u64,
    pub planner_calls: u64,
    pub status: String,
}

pub const CSV_HEADER: &str = "domain,problem,explainer,size,time_ms,expansions,planner_calls,status";

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.domain,
            self.problem,
            self.explainer,
            self.size.map(|s| s.to_string()).unwrap_or_default(),
            self.time_ms.map(|t| t.to_string()).unwrap_or_default(),
            self.expansions,
            self.planner_calls,
            self.status
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "domain": self.domain,
            "problem": self.problem,
            "explainer": self.explainer,
            "size": self.size,
            "time_ms": self.time_ms,
            "expansions": self.expansions,
            "planner_calls": self.planner_calls,
            "status": self.status,
        })
    }
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct MatrixProblem {
    pub domain: String,
    pub problem: String,
    pub model: LiftedModel,
}

#[derive(Debug, Clone)]
pub struct MatrixConfig {
    pub specs: Vec<FaultSpec>,
    pub explainers: Vec<ExplainerKind>,
    pub budget: Budget,
    /// Worker threads for the matrix: 1 = serial, 0 = pool default.
    pub jobs: usize,
    /// Timing repeats per explainer call; the median is reported.
    pub repeats: usize,
    /// Report time_ms as 0 for byte-reproducible output.
    pub stable: bool,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig {
            specs: vec![FaultSpec::removals(1, 3)],
            explainers: ExplainerKind::ALL.to_vec(),
            budget: Budget::default(),
            jobs: 1,
            repeats: 3,
            stable: false,
        }
    }
}

fn spec_tag(spec: &FaultSpec) -> String {
    format!("f{}-s{}", spec.n_faults, spec.seed)
}

fn error_rows(problem: &MatrixProblem, spec: &FaultSpec, config: &MatrixConfig, msg: &str) -> Vec<BenchRow> {
    config
        .explainers
        .iter()
        .map(|kind| BenchRow {
            domain: problem.domain.clone(),
            problem: format!("{}-{}", problem.problem, spec_tag(spec)),
            explainer: kind.to_string(),
            size: None,
            time_ms: None,
            expansions: 0,
            planner_calls: 0,
            status: msg.to_owned(),
        })
        .collect()
}

fn run_cell(problem: &MatrixProblem, spec: &FaultSpec, config: &MatrixConfig) -> Vec<BenchRow> {
    let human = match inject(&problem.model, spec) {
        Ok(m) => m,
        Err(e) => return error_rows(problem, spec, config, &format!("inject: {e}")),
    };
    let task = crate::ground::ground(&crate::space::at_granularity(&problem.model, spec.granularity));
    let plan: Plan = match planner::optimal_plan(&task, &config.budget).outcome {
        Outcome::Solved { plan, .. } => plan,
        Outcome::Unsolvable => return error_rows(problem, spec, config, "unsolvable"),
        Outcome::BudgetExceeded => return error_rows(problem, spec, config, "budget"),
    };
    let inst = match MrpInstance::new(&problem.model, &human, plan, spec.granularity, config.budget) {
        Ok(i) => i,
        Err(e) => return error_rows(problem, spec, config, &format!("instance: {e}")),
    };

    config
        .explainers
        .iter()
        .map(|kind| {
            let mut times = Vec::with_capacity(config.repeats.max(1));
            let mut last: Option<Result<Explanation, ExplainError>> = None;
            for _ in 0..config.repeats.max(1) {
                let t0 = Instant::now();
                let r = kind.run(&inst, &config.budget);
                times.push(t0.elapsed().as_millis() as u64);
                last = Some(r);
            }
            times.sort_unstable();
            let median = times[times.len() / 2];
            let problem_id = format!("{}-{}", problem.problem, spec_tag(spec));
            match last.unwrap() {
                Ok(expl) => BenchRow {
                    domain: problem.domain.clone(),
                    problem: problem_id,
                    explainer: kind.to_string(),
                    size: Some(expl.size()),
                    time_ms: Some(if config.stable { 0 } else { median }),
                    expansions: expl.stats.expansions,
                    planner_calls: expl.stats.planner_calls,
                    status: "ok".to_owned(),
                },
                Err(e) => {
                    let status = match e {
                        ExplainError::BudgetExceeded { .. } => "budget".to_owned(),
                        other => format!("error: {other}"),
                    };
                    BenchRow {
                        domain: problem.domain.clone(),
                        problem: problem_id,
                        explainer: kind.to_string(),
                        size: None,
                        time_ms: None,
                        expansions: 0,
                        planner_calls: 0,
                        status,
                    }
                }
            }
        })
        .collect()
}

/// Runs the full matrix. Row order is (problem, spec, explainer) in the
/// given order, independent of scheduling.
pub fn run_matrix(problems: &[MatrixProblem], config: &MatrixConfig) -> Vec<BenchRow> {
    let cells: Vec<(&MatrixProblem, &FaultSpec)> = problems
        .iter()
        .flat_map(|p| config.specs.iter().map(move |s| (p, s)))
        .collect();
    run_cells(&cells, config).into_iter().flatten().collect()
}

#[cfg(feature = "parallel")]
fn run_cells(cells: &[(&MatrixProblem, &FaultSpec)], config: &MatrixConfig) -> Vec<Vec<BenchRow>> {
    if config.jobs == 1 {
        return run_cells_serial(cells, config);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .expect("thread pool");
    pool.install(|| cells.par_iter().map(|(p, s)| run_cell(p, s, config)).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_cells(cells: &[(&MatrixProblem, &FaultSpec)], config: &MatrixConfig) -> Vec<Vec<BenchRow>> {
    run_cells_serial(cells, config)
}

fn run_cells_serial(cells: &[(&MatrixProblem, &FaultSpec)], config: &MatrixConfig) -> Vec<Vec<BenchRow>> {
    cells.iter().map(|(p, s)| run_cell(p, s, config)).collect()
}

/// The bundled fixture set as matrix problems, optionally filtered by
/// domain name.
pub fn builtin_problems(domains: Option<&[String]>) -> Vec<MatrixProblem> {
    crate::fixtures::BUILTIN
        .iter()
        .filter(|f| domains.is_none_or(|ds| ds.iter().any(|d| d == f.domain)))
        .map(|f| MatrixProblem {
            domain: f.domain.to_owned(),
            problem: f.problem.to_owned(),
            model: f.model().expect("bundled fixtures parse"),
        })
        .collect()
}
