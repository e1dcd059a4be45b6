//! QUBO solvers: a built-in simulated annealer, a client for remote
//! annealing services, and a worker pool that runs solves under a
//! dependency graph.

use std::sync::Arc;

use thiserror::Error;

use crate::qubo::QuboProblem;

pub mod pool;
pub mod remote;
pub mod sa;

pub use pool::{pool_solve, PoolError, PoolReport, PoolTask};
pub use remote::RemoteSolver;
pub use sa::{calibrate_work_rate, SaSolver};

#[derive(Debug, Clone)]
pub struct SolveRequest {
    pub qubo: Arc<QuboProblem>,
    pub timeout_ms: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub bits: Vec<u8>,
    /// Recomputed locally from `bits`.
    pub energy: f64,
    pub elapsed_ms: u64,
    pub solver_id: String,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("solver timed out after {0} ms")]
    Timeout(u64),
}

pub trait Solver: Send + Sync {
    fn solve(&self, req: &SolveRequest) -> Result<SolveResult, SolverError>;
    fn id(&self) -> String;
}

/// Mixes a base seed with a stream index (splitmix64 finaliser).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
