//! Benchmark harness: run every fixture in a suite directory over its bound
//! schedule and emit one CSV row per (program, b) with the pretreatment
//! time, the localization time for each deviation budget 0..3, and the
//! number of explored deviated paths at the largest budget.

use std::path::Path;

use anyhow::Result;
use locfaults_core::bmc::Counterexample;

use crate::run::{run_locate, RunConfig};
use crate::sidecar::{fixtures_in, Sidecar};

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub program: String,
    pub b: u32,
    pub pretreatment_secs: f64,
    /// Localization seconds per deviation budget 0..=3.
    pub l_secs: [f64; 4],
    /// Completed deviated-path propagations at budget 3, plus the
    /// counterexample path itself.
    pub explored_paths: usize,
    pub status: String,
}

pub const CSV_HEADER: &str = "program,b,p_secs,l0_secs,l1_secs,l2_secs,l3_secs,paths,status";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{},{}",
            self.program,
            self.b,
            self.pretreatment_secs,
            self.l_secs[0],
            self.l_secs[1],
            self.l_secs[2],
            self.l_secs[3],
            self.explored_paths,
            self.status
        )
    }
}

/// Run the whole suite. Rows for schedule entries with `b > max_b` are
/// skipped; per-row failures are recorded and the run continues.
pub fn run_bench(suite: &Path, max_b: u32) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for source in fixtures_in(suite)? {
        let name = source
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let sidecar = match Sidecar::for_source(&source) {
            Ok(s) => s,
            Err(e) => {
                rows.push(BenchRow {
                    program: name,
                    b: 0,
                    pretreatment_secs: 0.0,
                    l_secs: [0.0; 4],
                    explored_paths: 0,
                    status: format!("error: {e}"),
                });
                continue;
            }
        };
        let schedule = sidecar.bench.clone();
        for entry in schedule.into_iter().filter(|e| e.b <= max_b) {
            let ce: Counterexample = match Counterexample::from_json(&entry.ce.to_string()) {
                Ok(ce) => ce,
                Err(e) => {
                    rows.push(BenchRow {
                        program: name.clone(),
                        b: entry.b,
                        pretreatment_secs: 0.0,
                        l_secs: [0.0; 4],
                        explored_paths: 0,
                        status: format!("error: {e}"),
                    });
                    continue;
                }
            };
            rows.push(bench_row(&name, &source, &sidecar, entry.b, ce));
        }
    }
    Ok(rows)
}

fn bench_row(
    name: &str,
    source: &Path,
    sidecar: &Sidecar,
    b: u32,
    ce: Counterexample,
) -> BenchRow {
    let mut row = BenchRow {
        program: name.to_string(),
        b,
        pretreatment_secs: 0.0,
        l_secs: [0.0; 4],
        explored_paths: 0,
        status: "ok".to_string(),
    };
    for b_mcd in 0..=3u32 {
        let mut config = RunConfig::new(source);
        config.b = b;
        config.b_mcd = b_mcd;
        config.b_mcs = sidecar.b_mcs;
        config.ce = Some(ce.clone());
        match run_locate(&config) {
            Ok(out) => {
                row.pretreatment_secs = out.report.pretreatment_secs;
                row.l_secs[b_mcd as usize] = out.report.localization_secs;
                if b_mcd == 3 {
                    row.explored_paths = out.report.explored_deviations + 1;
                }
            }
            Err((status, msg)) => {
                row.status = format!("error({}): {msg}", status.code());
                break;
            }
        }
    }
    row
}

/// CSV rendering, header included.
pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}
