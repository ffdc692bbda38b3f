//! Goal recognition for grid navigation.
//!
//! Infers the destination of an observed agent from a prefix of its
//! trajectory. Two families of recognizers are provided:
//!
//! * purely symbolic cost-difference recognizers ([`symbolic`]) backed by
//!   optimal planners and precomputed cost fields ([`planning`]), and
//! * learned recognizers ([`learned`]) fed with plan-cost features
//!   ([`features`]) — per-goal cost gradients (GC) or heuristic deviations
//!   (SD) — on top of a small self-contained neural stack ([`neuralnet`]).
//!
//! The [`harness`] module generates labeled datasets, ingests real
//! trajectory CSVs, and runs the accuracy-vs-observability and
//! model-corruption experiments behind the `goalrec` CLI.

pub mod features;
pub mod gridworld;
pub mod harness;
pub mod learned;
pub mod neuralnet;
pub mod planning;
pub mod seeding;
pub mod symbolic;
