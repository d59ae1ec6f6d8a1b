//! Bundled benchmark fixtures: BlocksWorld, Logistics, Rover, and the
//! Fetch example, authored to the standard IPC formulations at small scale.

use std::fs;
use std::io;
use std::path::Path;

use crate::pddl::{parse_domain, parse_problem, LiftedModel, PddlError};

#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub domain: &'static str,
    pub problem: &'static str,
    pub domain_text: &'static str,
    pub problem_text: &'static str,
}

pub const FETCH_DOMAIN: &str = include_str!("../fixtures/fetch/domain.pddl");
pub const FETCH_HUMAN_DOMAIN: &str = include_str!("../fixtures/fetch/domain-human.pddl");
pub const FETCH_P01: &str = include_str!("../fixtures/fetch/p01.pddl");

const BW_DOMAIN: &str = include_str!("../fixtures/blocksworld/domain.pddl");
const LOG_DOMAIN: &str = include_str!("../fixtures/logistics/domain.pddl");
const ROVER_DOMAIN: &str = include_str!("../fixtures/rover/domain.pddl");

pub const BUILTIN: &[Fixture] = &[
    Fixture {
        domain: "blocksworld",
        problem: "p01",
        domain_text: BW_DOMAIN,
        problem_text: include_str!("../fixtures/blocksworld/p01.pddl"),
    },
    Fixture {
        domain: "blocksworld",
        problem: "p02",
        domain_text: BW_DOMAIN,
        problem_text: include_str!("../fixtures/blocksworld/p02.pddl"),
    },
    Fixture {
        domain: "blocksworld",
        problem: "p03",
        domain_text: BW_DOMAIN,
        problem_text: include_str!("../fixtures/blocksworld/p03.pddl"),
    },
    Fixture {
        domain: "blocksworld",
        problem: "p04",
        domain_text: BW_DOMAIN,
        problem_text: include_str!("../fixtures/blocksworld/p04.pddl"),
    },
    Fixture {
        domain: "logistics",
        problem: "p01",
        domain_text: LOG_DOMAIN,
        problem_text: include_str!("../fixtures/logistics/p01.pddl"),
    },
    Fixture {
        domain: "logistics",
        problem: "p02",
        domain_text: LOG_DOMAIN,
        problem_text: include_str!("../fixtures/logistics/p02.pddl"),
    },
    Fixture {
        domain: "logistics",
        problem: "p03",
        domain_text: LOG_DOMAIN,
        problem_text: include_str!("../fixtures/logistics/p03.pddl"),
    },
    Fixture {
        domain: "logistics",
        problem: "p04",
        domain_text: LOG_DOMAIN,
        problem_text: include_str!("../fixtures/logistics/p04.pddl"),
    },
    Fixture {
        domain: "rover",
        problem: "p01",
        domain_text: ROVER_DOMAIN,
        problem_text: include_str!("../fixtures/rover/p01.pddl"),
    },
    Fixture {
        domain: "rover",
        problem: "p02",
        domain_text: ROVER_DOMAIN,
        problem_text: include_str!("../fixtures/rover/p02.pddl"),
    },
    Fixture {
        domain: "fetch",
        problem: "p01",
        domain_text: FETCH_DOMAIN,
        problem_text: FETCH_P01,
    },
];

impl Fixture {
    pub fn model(&self) -> Result<LiftedModel, PddlError> {
        let dom = parse_domain(self.domain_text, &format!("{}/domain.pddl", self.domain))?;
        parse_problem(
            self.problem_text,
            &format!("{}/{}.pddl", self.domain, self.problem),
            &dom,
        )
    }
}

/// The paper's Fetch instance: robot model and the observer's weaker model.
pub fn fetch_pair() -> (LiftedModel, LiftedModel) {
    let robot_dom = parse_domain(FETCH_DOMAIN, "fetch/domain.pddl").expect("bundled fixture");
    let human_dom = parse_domain(FETCH_HUMAN_DOMAIN, "fetch/domain-human.pddl").expect("bundled fixture");
    let robot = parse_problem(FETCH_P01, "fetch/p01.pddl", &robot_dom).expect("bundled fixture");
    let human = parse_problem(FETCH_P01, "fetch/p01.pddl", &human_dom).expect("bundled fixture");
    (robot, human)
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error("no domain.pddl under {0}")]
    NoDomain(String),
}

/// A problem parsed from a fixture directory on disk.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub domain: String,
    pub problem: String,
    pub model: LiftedModel,
}

/// Loads `<dir>/<domain>/domain.pddl` plus every sibling `*.pddl` problem.
pub fn load_dir(dir: &Path) -> Result<Vec<LoadedProblem>, LoadError> {
    let mut out = Vec::new();
    let mut domains: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .collect();
    domains.sort_by_key(|e| e.file_name());
    for entry in domains {
        let dom_dir = entry.path();
        let dom_name = entry.file_name().to_string_lossy().into_owned();
        let dom_path = dom_dir.join("domain.pddl");
        if !dom_path.exists() {
            return Err(LoadError::NoDomain(dom_dir.display().to_string()));
        }
        let dom_text = fs::read_to_string(&dom_path)?;
        let dom = parse_domain(&dom_text, &dom_path.display().to_string())?;
        let mut problems: Vec<_> = fs::read_dir(&dom_dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.extension().is_some_and(|e| e == "pddl")
                    && p.file_name().is_some_and(|n| {
                        let n = n.to_string_lossy();
                        n != "domain.pddl" && !n.starts_with("domain-")
                    })
            })
            .collect();
        problems.sort();
        for path in problems {
            let text = fs::read_to_string(&path)?;
            let model = parse_problem(&text, &path.display().to_string(), &dom)?;
            out.push(LoadedProblem {
                domain: dom_name.clone(),
                problem: path.file_stem().unwrap().to_string_lossy().into_owned(),
                model,
            });
        }
    }
    Ok(out)
}
