//! Exact solvers for the user authorization query problem: finding at most `kr` roles whose
//! combined permissions cover a required set, stay inside an allowed set, add at most `kp`
//! extra permissions, and respect separation-of-duty constraints.
//!
//! The main solver ([`dp::solve`]) handles instances whose role-permission graph has no
//! `K_{alpha,beta}` and whose constraints are narrow and pairwise disjoint. It reduces the
//! instance, branches a bounded number of times, and runs a representative-family dynamic
//! program over the matroid defined by the constraints. [`baselines`] holds the exhaustive
//! reference solvers and [`generators`] the instance factories.

pub mod baselines;
pub mod dp;
pub mod engine;
pub mod generators;
pub mod io;
pub mod matroid;
pub mod model;
pub mod reduce;
pub mod repfam;

pub use engine::{run_engine, Engine, EngineError, EngineOptions, EngineRun};
pub use model::{
    ClassParams, Instance, InstanceBuilder, ModelError, PermId, RoleId, Solution, Verdict,
    Violation,
};
pub use repfam::{RepConfig, RepMode};
