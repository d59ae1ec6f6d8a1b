//! Model reconciliation for cost-optimal planning.
//!
//! Given a planner's PDDL model, a human observer's divergent model of the
//! same task, and a plan that is optimal in the planner's model, this crate
//! computes explanations as minimal model updates: the model patch (MPE),
//! the plan patch (PPE), minimally complete explanations (exact and
//! approximate MCE), and minimally monotonic explanations (MME), via search
//! in the space of models.
//!
//! The pipeline is: [`pddl`] parses the typed STRIPS subset into
//! [`pddl::LiftedModel`]s, [`ground`] instantiates them into executable
//! tasks, [`planner`] provides the cost-optimal oracle, [`space`] encodes
//! models as feature sets with unit edits, [`explain`] runs the explanation
//! searches, and [`perturb`]/[`matrix`] generate faulted human models and
//! drive the benchmark harness.

pub mod explain;
pub mod fixtures;
pub mod ground;
pub mod matrix;
pub mod pddl;
pub mod perturb;
pub mod planner;
pub mod space;
