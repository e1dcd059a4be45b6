//! Qubit routing by per-chunk placement QUBOs, annealing and circuit synthesis.

#![allow(clippy::needless_range_loop)]

pub mod baseline;
pub mod circuit;
pub mod device;
pub mod model;
pub mod partition;
pub mod perm;
pub mod pipeline;
pub mod qubo;
pub mod schedule;
pub mod solver;
pub mod synthesis;
pub mod token_swap;
