//! `locfaults` — constraint-based fault localization for `.mj` programs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use locfaults_cli::bench;
use locfaults_cli::run::{run_locate, RunConfig};
use locfaults_cli::{render_json, render_text};
use locfaults_core::bmc::Counterexample;
use locfaults_core::solver::{Domain, Limits};

#[derive(Parser)]
#[command(name = "locfaults", about = "Fault localization from counterexample-driven CFG paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Localize faults in one annotated program.
    Locate {
        /// Path to the `.mj` source file.
        file: PathBuf,
        /// Loop unfolding bound.
        #[arg(long, default_value_t = 10)]
        b: u32,
        /// Bound on deviated conditions.
        #[arg(long = "bmcd", default_value_t = 3)]
        b_mcd: u32,
        /// Bound on correction-subset size.
        #[arg(long = "bmcs", default_value_t = 4)]
        b_mcs: u32,
        /// Disable condition-node marking.
        #[arg(long = "no-marking")]
        no_marking: bool,
        /// Explicit counterexample as a JSON object, e.g. '{"i":0,"j":1}'.
        #[arg(long)]
        ce: Option<String>,
        /// Emit the machine-readable report.
        #[arg(long)]
        json: bool,
        /// Analysis interval for variables, as `lo:hi`.
        #[arg(long)]
        domain: Option<String>,
        /// Solver node budget.
        #[arg(long = "max-nodes")]
        max_nodes: Option<u64>,
        /// Solver time budget per call, milliseconds.
        #[arg(long = "max-millis")]
        max_millis: Option<u64>,
    },
    /// Run a benchmark suite directory, emitting CSV scaling rows.
    Bench {
        /// Directory of `.mj` fixtures with sidecar schedules.
        suite: PathBuf,
        /// Skip schedule entries above this unfolding bound.
        #[arg(long = "max-b", default_value_t = u32::MAX)]
        max_b: u32,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Dump the unfolded DSA control flow graph.
    Cfg {
        file: PathBuf,
        #[arg(long, default_value_t = 10)]
        b: u32,
        /// DOT format on stdout.
        #[arg(long)]
        dot: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Locate {
            file,
            b,
            b_mcd,
            b_mcs,
            no_marking,
            ce,
            json,
            domain,
            max_nodes,
            max_millis,
        } => {
            let mut config = RunConfig::new(file);
            config.b = b;
            config.b_mcd = b_mcd;
            config.b_mcs = b_mcs;
            config.marking = !no_marking;
            if let Some(text) = ce {
                match Counterexample::from_json(&text) {
                    Ok(parsed) => config.ce = Some(parsed),
                    Err(e) => {
                        eprintln!("invalid --ce: {e}");
                        return ExitCode::from(1);
                    }
                }
            }
            if let Some(spec) = domain {
                match parse_domain(&spec) {
                    Ok(d) => config.domain = d,
                    Err(e) => {
                        eprintln!("invalid --domain: {e}");
                        return ExitCode::from(1);
                    }
                }
            }
            let mut limits = Limits::default();
            if let Some(n) = max_nodes {
                limits.max_nodes = n;
            }
            if let Some(ms) = max_millis {
                limits.max_millis = ms;
            }
            config.limits = limits;

            match run_locate(&config) {
                Ok(outcome) => {
                    if json {
                        println!("{}", serde_json::to_string_pretty(&render_json(&outcome)).unwrap());
                    } else {
                        print!("{}", render_text(&outcome));
                    }
                    ExitCode::SUCCESS
                }
                Err((status, message)) => {
                    eprintln!("{message}");
                    ExitCode::from(status.code() as u8)
                }
            }
        }
        Command::Bench { suite, max_b, csv } => match bench::run_bench(&suite, max_b) {
            Ok(rows) => {
                let text = bench::to_csv(&rows);
                match csv {
                    Some(path) => {
                        if let Err(e) = std::fs::write(&path, text) {
                            eprintln!("cannot write {}: {e}", path.display());
                            return ExitCode::from(1);
                        }
                        println!("wrote {} rows to {}", rows.len(), path.display());
                    }
                    None => print!("{text}"),
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(1)
            }
        },
        Command::Cfg { file, b, dot } => match locfaults_cli::run::dump_graph(&file, b, dot) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(1)
            }
        },
    }
}

fn parse_domain(spec: &str) -> Result<Domain, String> {
    let (lo, hi) = spec
        .split_once(':')
        .ok_or_else(|| "expected lo:hi".to_string())?;
    let lo: i64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: i64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo > hi {
        return Err("empty interval".to_string());
    }
    Ok(Domain::new(lo, hi))
}
