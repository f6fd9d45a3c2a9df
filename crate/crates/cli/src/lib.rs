//! Harness front-end: experiment configuration, seeded multi-run training,
//! benchmark solving, figure emission, and hyperparameter sweeps.

pub mod config;
pub mod metrics;
pub mod plot;
pub mod runner;
