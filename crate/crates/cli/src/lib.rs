//! Driver library behind the `locfaults` binary: pipeline assembly,
//! report rendering, sidecar handling and the benchmark harness.

pub mod bench;
pub mod render;
pub mod run;
pub mod sidecar;

pub use bench::{run_bench, BenchRow};
pub use render::{render_json, render_text};
pub use run::{run_locate, ExitStatus, RunConfig, RunOutcome};
pub use sidecar::Sidecar;
