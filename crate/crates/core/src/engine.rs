//! Uniform entry point over the three solvers.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::baselines::{brute_force, type1_solver, BaselineError};
use crate::dp::{solve, SolveError};
use crate::io::SolutionDocument;
use crate::model::{ClassParams, Instance, Solution};
use crate::repfam::RepConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    Brute,
    Fpt,
    Type1,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::Brute, Engine::Fpt, Engine::Type1];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Brute => "brute",
            Engine::Fpt => "fpt",
            Engine::Type1 => "type1",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown engine `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    /// Required by the fpt engine.
    pub params: Option<ClassParams>,
    pub repfam: RepConfig,
    pub threads: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            params: None,
            repfam: RepConfig::default(),
            threads: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    /// The engine does not accept this input; another engine may.
    #[error("{0}")]
    Refused(String),
    #[error("{0}")]
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineRun {
    pub solution: Option<Solution>,
    pub wall_ms: u64,
    pub leaves: usize,
    pub table_cells: usize,
}

impl EngineRun {
    pub fn document(&self, inst: &Instance, engine: Engine) -> SolutionDocument {
        SolutionDocument::new(inst, self.solution.as_ref(), engine.name(), self.wall_ms)
    }
}

pub fn run_engine(
    inst: &Instance,
    engine: Engine,
    opts: &EngineOptions,
) -> Result<EngineRun, EngineError> {
    let start = Instant::now();
    let (solution, leaves, table_cells) = match engine {
        Engine::Brute => (brute_force(inst).map_err(baseline_error)?, 0, 0),
        Engine::Type1 => (type1_solver(inst).map_err(baseline_error)?.solution, 0, 0),
        Engine::Fpt => {
            let params = opts.params.ok_or_else(|| {
                EngineError::Refused("the fpt engine needs alpha and beta".into())
            })?;
            let out = solve(inst, &params, &opts.repfam, opts.threads).map_err(|e| match e {
                SolveError::ClassViolation(_) | SolveError::Reduce(_) => {
                    EngineError::Refused(e.to_string())
                }
                other => EngineError::Failed(other.to_string()),
            })?;
            (out.solution, out.leaves, out.table_cells)
        }
    };
    Ok(EngineRun {
        solution,
        wall_ms: start.elapsed().as_millis() as u64,
        leaves,
        table_cells,
    })
}

fn baseline_error(e: BaselineError) -> EngineError {
    match e {
        BaselineError::Reduce(_) => EngineError::Failed(e.to_string()),
        _ => EngineError::Refused(e.to_string()),
    }
}
