//! One localization run: parse → unfold → DSA → counterexample → locate.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use locfaults_core::bmc::{self, Counterexample};
use locfaults_core::cfg::{build_cfg, to_dsa, unfold_with, Cfg, UnfoldConfig};
use locfaults_core::engine::{self, EngineConfig, EngineError, LocalizationReport};
use locfaults_core::frontend::{parse, typecheck, TypedProgram};
use locfaults_core::solver::{Domain, Limits};

/// Exit statuses of the `locate` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok,
    /// Parse or type error.
    FrontendError,
    /// The input passed, or no counterexample could be found.
    NoCounterexample,
    /// A solver or unfolding budget was exhausted.
    ResourceLimit,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Ok => 0,
            ExitStatus::FrontendError => 1,
            ExitStatus::NoCounterexample => 2,
            ExitStatus::ResourceLimit => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: PathBuf,
    /// Loop unfolding bound.
    pub b: u32,
    pub b_mcd: u32,
    pub b_mcs: u32,
    pub marking: bool,
    /// Explicit counterexample; searched for when absent.
    pub ce: Option<Counterexample>,
    pub domain: Domain,
    pub limits: Limits,
}

impl RunConfig {
    pub fn new(source: impl Into<PathBuf>) -> Self {
        RunConfig {
            source: source.into(),
            b: 10,
            b_mcd: 3,
            b_mcs: 4,
            marking: true,
            ce: None,
            domain: Domain::default(),
            limits: Limits::default(),
        }
    }
}

/// Everything a rendering needs.
pub struct RunOutcome {
    pub program_name: String,
    pub source: PathBuf,
    pub ce: Counterexample,
    pub b: u32,
    pub b_mcd: u32,
    pub b_mcs: u32,
    pub marking: bool,
    pub report: LocalizationReport,
}

/// Parse and typecheck a source file.
pub fn load_program(source: &Path) -> Result<TypedProgram, String> {
    let text = match std::fs::read_to_string(source) {
        Ok(t) => t,
        Err(e) => return Err(format!("cannot read {}: {e}", source.display())),
    };
    let parsed = parse(&text).map_err(|e| format!("{}: {e}", source.display()))?;
    typecheck(parsed).map_err(|e| format!("{}: {e}", source.display()))
}

/// Build the unfolded DSA graph for a typed program.
pub fn build_graph(program: &TypedProgram, b: u32) -> Result<Cfg> {
    let raw = build_cfg(program);
    let unfolded = unfold_with(&raw, &UnfoldConfig::new(b))?;
    Ok(to_dsa(&unfolded)?)
}

/// Run the full pipeline. On success the report carries both timing
/// figures (pretreatment = parse, graph construction and counterexample
/// acquisition; localization = exploration and MCS calculation).
pub fn run_locate(config: &RunConfig) -> Result<RunOutcome, (ExitStatus, String)> {
    let pre_start = Instant::now();
    let program =
        load_program(&config.source).map_err(|e| (ExitStatus::FrontendError, e))?;
    let graph = build_graph(&program, config.b)
        .map_err(|e| (ExitStatus::ResourceLimit, e.to_string()))?;

    let ce = match &config.ce {
        Some(ce) => {
            if !bmc::validates(&program, ce) {
                return Err((
                    ExitStatus::NoCounterexample,
                    format!(
                        "{} is not a counterexample: the program satisfies its contract on it",
                        ce.render()
                    ),
                ));
            }
            ce.clone()
        }
        None => {
            let search = bmc::CeSearchConfig {
                input_domain: Domain::new(-100, 100),
                limits: config.limits,
            };
            match bmc::find_counterexample(&graph, &program, &search) {
                Ok(Some(ce)) => ce,
                Ok(None) => {
                    return Err((
                        ExitStatus::NoCounterexample,
                        "no counterexample found within the unfolding bound and input domain"
                            .to_string(),
                    ))
                }
                Err(e) => return Err((ExitStatus::ResourceLimit, e.to_string())),
            }
        }
    };
    let pretreatment_secs = pre_start.elapsed().as_secs_f64();

    let engine_config = EngineConfig {
        b_mcd: config.b_mcd,
        b_mcs: config.b_mcs,
        marking: config.marking,
        domain: config.domain,
        limits: config.limits,
    };
    let mut report = match engine::locate(&graph, &ce, &engine_config) {
        Ok(r) => r,
        Err(EngineError::NotACounterexample(m)) => {
            return Err((ExitStatus::NoCounterexample, m))
        }
        Err(EngineError::Solver(e)) => return Err((ExitStatus::ResourceLimit, e.to_string())),
        Err(e) => return Err((ExitStatus::ResourceLimit, e.to_string())),
    };
    report.pretreatment_secs = pretreatment_secs;

    Ok(RunOutcome {
        program_name: program.program().name.clone(),
        source: config.source.clone(),
        ce,
        b: config.b,
        b_mcd: config.b_mcd,
        b_mcs: config.b_mcs,
        marking: config.marking,
        report,
    })
}

/// Graph dump for `locfaults cfg <file>`; DOT format with `--dot`, a plain
/// canonical listing otherwise.
pub fn dump_graph(source: &Path, b: u32, dot: bool) -> Result<String> {
    let program = load_program(source).map_err(|e| anyhow!(e))?;
    let graph = build_graph(&program, b).context("building the graph")?;
    Ok(if dot { graph.to_dot() } else { graph.canonical_dump() })
}
