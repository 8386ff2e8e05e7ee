//! Discrete-time simulation library for online preemptive single-machine
//! flow-time scheduling where job sizes are revealed operation by operation.
//!
//! The crate provides the instance model and chunk decomposition (`core`),
//! a deterministic simulation engine enforcing the information model
//! (`sim`), the schedulers plus a brute-force optimal oracle (`policies`),
//! trace analytics including the dual-fitting competitiveness certificate
//! (`analysis`), and seeded instance families plus adversarial lower-bound
//! constructions (`generators`).

pub mod analysis;
pub mod core;
pub mod generators;
pub mod policies;
pub mod sim;

pub use crate::core::{
    class_of, decompose_chunks, instance_params, Chunk, ChunkDecomposition, ChunkId, Instance,
    InstanceParams, Job, JobId, Size, Time,
};
pub use crate::sim::{simulate, SimSource, Trace};
