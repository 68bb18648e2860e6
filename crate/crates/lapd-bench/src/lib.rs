//! Benchmark harness for the prior-diffusion Langevin sampler: experiment
//! configs, synthetic and file-backed datasets, the five experiments, and
//! commented config templates. The binary in `main.rs` is a thin CLI over
//! these modules.

pub mod config;
pub mod data;
pub mod experiments;
pub mod template;
