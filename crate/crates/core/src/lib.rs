//! Fault localization for annotated mini-language programs.
//!
//! The pipeline: parse and typecheck a `.mj` source file, build its control
//! flow graph, unfold loops to a bound `b`, rename into dynamic single
//! assignment form, then explore counterexample-driven path deviations to
//! report Minimal Correction Deviations (suspicious conditionals) and, per
//! erroneous path, Minimal Correction Subsets (suspicious assignments) of a
//! finite-domain constraint system.

pub mod bmc;
pub mod cfg;
pub mod constraints;
pub mod engine;
pub mod frontend;
pub mod mcs;
pub mod solver;
