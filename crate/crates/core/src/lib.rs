//! Desk-scale workbench for RIS-aided multi-VSP spectrum sharing: a
//! physical-layer model with economic utilities, an MDP environment with
//! deterministic feasibility projection, DDPG and SAC learners built on a
//! small exact-gradient network stack, and an exhaustive-search-plus-SCA
//! benchmark.

pub mod agents;
pub mod benchmark;
pub mod channel;
pub mod env;
pub mod nn;
pub mod phy;
pub mod rng;
pub mod topology;
