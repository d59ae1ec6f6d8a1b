//! `reconcile`: compute optimal plans, validate them, and explain them as
//! minimal model updates against a divergent observer model.
//!
//! Exit codes: 0 success, 1 input error, 2 unsolvable, 3 budget or search
//! cap exceeded.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use reconcile_core::explain::{self, ExplainError, Explanation, MrpInstance};
use reconcile_core::fixtures;
use reconcile_core::ground::{ground, Plan};
use reconcile_core::matrix::{self, ExplainerKind, MatrixConfig, MatrixProblem};
use reconcile_core::pddl::{parse_domain, parse_problem, LiftedModel};
use reconcile_core::perturb::{FaultKind, FaultSpec};
use reconcile_core::planner::{self, Budget, Outcome};
use reconcile_core::space::Granularity;

#[derive(Parser)]
#[command(name = "reconcile", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a cost-optimal plan for the robot model.
    Plan(PlanArgs),
    /// Explain the robot's plan as a minimal update to the human model.
    Explain(ExplainArgs),
    /// Check a plan against a model, VAL-style.
    Validate(ValidateArgs),
    /// Run the fault-injection benchmark matrix and emit CSV or JSON.
    Bench(BenchArgs),
}

#[derive(Args)]
struct BudgetArgs {
    /// Planner / search node limit per call.
    #[arg(long, default_value_t = 1_000_000)]
    max_expansions: u64,
    /// Time limit in seconds per call.
    #[arg(long, default_value_t = 60)]
    time_limit: u64,
}

impl BudgetArgs {
    fn budget(&self) -> Budget {
        Budget {
            max_expansions: self.max_expansions,
            time_limit: Duration::from_secs(self.time_limit),
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    robot_domain: PathBuf,
    #[arg(long)]
    robot_problem: PathBuf,
    /// Write the plan here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Mpe,
    Ppe,
    Mce,
    #[value(name = "mce-approx")]
    MceApprox,
    Mme,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Lifted,
    Grounded,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Self {
        match g {
            GranularityArg::Lifted => Granularity::Lifted,
            GranularityArg::Grounded => Granularity::Grounded,
        }
    }
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    robot_domain: PathBuf,
    #[arg(long)]
    robot_problem: PathBuf,
    #[arg(long)]
    human_domain: PathBuf,
    #[arg(long)]
    human_problem: PathBuf,
    /// Plan to explain; computed (and printed) when absent.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, value_enum)]
    class: ClassArg,
    /// Disable the relevance-preferred expansion order for MCE.
    #[arg(long)]
    no_heuristic: bool,
    #[arg(long, value_enum, default_value = "lifted")]
    granularity: GranularityArg,
    /// Random tie-breaking seed for MCE (deterministic order when absent).
    #[arg(long)]
    seed: Option<u64>,
    /// List every minimum-size MME instead of the canonical one.
    #[arg(long)]
    enumerate: bool,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    robot_domain: PathBuf,
    #[arg(long)]
    robot_problem: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of `<domain>/domain.pddl` + problems; bundled fixtures
    /// when absent.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Comma-separated domain filter.
    #[arg(long, value_delimiter = ',')]
    domains: Option<Vec<String>>,
    /// Fault counts to inject.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    faults: Vec<usize>,
    /// Base seed; instance i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seeded instances per fault count.
    #[arg(long, default_value_t = 1)]
    instances: u64,
    /// Explainers to run.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "lifted")]
    granularity: GranularityArg,
    /// Inject additions as well as removals.
    #[arg(long)]
    allow_additions: bool,
    /// Also drop init/goal atoms, not just action parts.
    #[arg(long)]
    state_faults: bool,
    /// Worker threads for the matrix (0 = all cores).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Timing repeats per cell (median reported).
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Zero the time column for byte-reproducible output.
    #[arg(long)]
    stable: bool,
    /// Write output here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long)]
    json: bool,
}

enum CliError {
    Input(String),
    Unsolvable(String),
    Budget(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Unsolvable(_) => 2,
            CliError::Budget(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Unsolvable(m) | CliError::Budget(m) => m,
        }
    }
}

impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::BudgetExceeded { .. } | ExplainError::DeltaTooLarge { .. } => {
                CliError::Budget(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and succeed.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Explain(args) => cmd_explain(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("reconcile: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_model(domain: &Path, problem: &Path) -> Result<LiftedModel, CliError> {
    let dom_text = read(domain)?;
    let dom = parse_domain(&dom_text, &domain.display().to_string())
        .map_err(|e| CliError::Input(e.to_string()))?;
    let prob_text = read(problem)?;
    parse_problem(&prob_text, &problem.display().to_string(), &dom)
        .map_err(|e| CliError::Input(e.to_string()))
}

fn cmd_plan(args: PlanArgs) -> Result<(), CliError> {
    let model = load_model(&args.robot_domain, &args.robot_problem)?;
    let task = ground(&model);
    let result = planner::optimal_plan(&task, &args.budget.budget());
    match result.outcome {
        Outcome::Solved { plan, cost } => {
            let text = plan.to_string();
            if args.json {
                let v = serde_json::json!({
                    "cost": cost,
                    "steps": plan.steps.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                    "expansions": result.expansions,
                });
                emit(&args.output, &format!("{v:#}\n"))?;
            } else {
                emit(&args.output, &text)?;
                eprintln!("; cost = {cost} ({} expansions)", result.expansions);
            }
            Ok(())
        }
        Outcome::Unsolvable => Err(CliError::Unsolvable("unsolvable".into())),
        Outcome::BudgetExceeded => Err(CliError::Budget(format!(
            "budget exceeded after {} expansions",
            result.expansions
        ))),
    }
}

fn emit(target: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match target {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_explain(args: ExplainArgs) -> Result<(), CliError> {
    let robot = load_model(&args.robot_domain, &args.robot_problem)?;
    let human = load_model(&args.human_domain, &args.human_problem)?;
    let budget = args.budget.budget();
    let granularity: Granularity = args.granularity.into();

    let (plan, computed) = match &args.plan {
        Some(path) => {
            let text = read(path)?;
            (Plan::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?, false)
        }
        None => {
            let task = ground(&robot);
            match planner::optimal_plan(&task, &budget).outcome {
                Outcome::Solved { plan, .. } => (plan, true),
                Outcome::Unsolvable => return Err(CliError::Unsolvable("robot task is unsolvable".into())),
                Outcome::BudgetExceeded => {
                    return Err(CliError::Budget("budget exceeded while planning".into()))
                }
            }
        }
    };

    let inst = MrpInstance::new(&robot, &human, plan, granularity, budget)?;

    let explanations: Vec<Explanation> = match args.class {
        ClassArg::Mpe => vec![explain::mpe(&inst)],
        ClassArg::Ppe => {
            let mut e = explain::ppe(&inst);
            e.complete = Some(explain::check_completeness(&inst, &e)?);
            vec![e]
        }
        ClassArg::Mce => {
            let mut e = match args.seed {
                Some(seed) => explain::mce_exact_seeded(&inst, !args.no_heuristic, &budget, seed)?,
                None => explain::mce_exact(&inst, !args.no_heuristic, &budget)?,
            };
            e.complete = Some(true);
            vec![e]
        }
        ClassArg::MceApprox => {
            let mut e = explain::mce_approx(&inst, &budget)?;
            e.complete = Some(explain::check_completeness(&inst, &e)?);
            vec![e]
        }
        ClassArg::Mme => {
            if args.enumerate {
                explain::mme_enumerate(&inst, &budget)?
            } else {
                vec![explain::mme(&inst, &budget)?]
            }
        }
    };

    if args.json {
        let mut values: Vec<serde_json::Value> = Vec::new();
        for e in &explanations {
            let mut v = e.to_json();
            if computed {
                v["plan"] = serde_json::json!(inst
                    .plan()
                    .steps
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>());
            }
            values.push(v);
        }
        if values.len() == 1 {
            println!("{:#}", values[0]);
        } else {
            println!("{:#}", serde_json::Value::Array(values));
        }
    } else {
        if computed {
            print!("{}", inst.plan());
        }
        for e in &explanations {
            print_explanation(e);
        }
    }
    Ok(())
}

fn print_explanation(e: &Explanation) {
    if e.edits.is_empty() {
        return;
    }
    let lines = e.lines();
    if lines.len() == 1 {
        println!("Explanation >> {}", lines[0]);
    } else {
        println!("Explanation >>");
        for line in lines {
            println!("{line}");
        }
    }
    if let Some(note) = &e.note {
        eprintln!("; note: {note}");
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let model = load_model(&args.robot_domain, &args.robot_problem)?;
    let task = ground(&model);
    let text = read(&args.plan)?;
    let plan = Plan::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", args.plan.display())))?;
    let verdict = task.validate(&plan);
    if args.json {
        let v = serde_json::json!({
            "valid": verdict.valid,
            "failing_step": verdict.failing_step,
            "unknown_action": verdict.unknown_action,
            "missing_preconditions": verdict.missing_preconditions.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            "goal_gap": verdict.goal_gap.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
        });
        println!("{v:#}");
    } else if verdict.valid {
        println!("valid");
    } else if let Some(step) = verdict.failing_step {
        let step_text = plan.steps[step].to_string();
        if verdict.unknown_action {
            println!("invalid at step {} {}: unknown action", step + 1, step_text);
        } else {
            let missing: Vec<String> =
                verdict.missing_preconditions.iter().map(|a| a.to_string()).collect();
            println!(
                "invalid at step {} {}: missing preconditions: {}",
                step + 1,
                step_text,
                missing.join(" ")
            );
        }
    } else {
        let gap: Vec<String> = verdict.goal_gap.iter().map(|a| a.to_string()).collect();
        println!("invalid: goal not satisfied, missing: {}", gap.join(" "));
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let problems: Vec<MatrixProblem> = match &args.fixtures {
        Some(dir) => fixtures::load_dir(dir)
            .map_err(|e| CliError::Input(e.to_string()))?
            .into_iter()
            .filter(|p| args.domains.as_ref().is_none_or(|ds| ds.contains(&p.domain)))
            .map(|p| MatrixProblem { domain: p.domain, problem: p.problem, model: p.model })
            .collect(),
        None => matrix::builtin_problems(args.domains.as_deref()),
    };
    if problems.is_empty() {
        return Err(CliError::Input("no problems matched the fixture selection".into()));
    }

    let kinds = if args.state_faults { FaultKind::all() } else { FaultKind::action_model() };
    let mut specs = Vec::new();
    for &n in &args.faults {
        for i in 0..args.instances {
            specs.push(FaultSpec {
                seed: args.seed + i,
                n_faults: n,
                kinds: kinds.clone(),
                granularity: args.granularity.into(),
                allow_additions: args.allow_additions,
            });
        }
    }

    let explainers: Vec<ExplainerKind> = match &args.classes {
        None => ExplainerKind::ALL.to_vec(),
        Some(names) => {
            let mut out = Vec::new();
            for n in names {
                out.push(n.parse::<ExplainerKind>().map_err(CliError::Input)?);
            }
            out
        }
    };

    let config = MatrixConfig {
        specs,
        explainers,
        budget: args.budget.budget(),
        jobs: args.jobs,
        repeats: args.repeats,
        stable: args.stable,
    };
    let rows = matrix::run_matrix(&problems, &config);

    let text = if args.json {
        let v: Vec<serde_json::Value> = rows.iter().map(|r| r.to_json()).collect();
        format!("{:#}\n", serde_json::Value::Array(v))
    } else {
        matrix::to_csv(&rows)
    };
    emit(&args.out, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses_spec_flags() {
        Cli::try_parse_from([
            "reconcile",
            "explain",
            "--robot-domain", "rd.pddl",
            "--robot-problem", "rp.pddl",
            "--human-domain", "hd.pddl",
            "--human-problem", "hp.pddl",
            "--class", "mce",
            "--no-heuristic",
            "--granularity", "grounded",
            "--max-expansions", "1000",
            "--time-limit", "5",
            "--seed", "7",
            "--json",
        ])
        .unwrap();
        Cli::try_parse_from(["reconcile", "bench", "--faults", "3,5", "--jobs", "4", "--stable"]).unwrap();
    }
}
