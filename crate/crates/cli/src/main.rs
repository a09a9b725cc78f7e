use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddebif_cli::plan::RunPlan;
use ddebif_cli::run::{exit_code_of, run, RunOptions};
use ddebif_cli::systems::{builtin_system, SYSTEM_IDS};

#[derive(Parser)]
#[command(name = "ddebif", version, about = "Bifurcation analysis of delay differential equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a TOML run plan.
    Run {
        plan: PathBuf,
        /// Output directory (overrides the plan).
        #[arg(long)]
        out: Option<PathBuf>,
        /// 0 quiet, 1 stage summaries, 2 per-step events.
        #[arg(long, default_value_t = 1)]
        verbose: u8,
        /// Newton acceptance threshold for seeds and converted points.
        #[arg(long)]
        seed_tolerance: Option<f64>,
    },
    /// List the built-in systems.
    ListSystems,
    /// Show dimensions and parameter names of a system.
    Describe { system: String },
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {}", msg);
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListSystems => {
            for id in SYSTEM_IDS {
                let s = builtin_system(id).expect("registered system");
                println!("{:<12} {}", id, s.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Describe { system } => match builtin_system(&system) {
            Ok(s) => {
                println!("{}: {}", s.id, s.summary);
                println!("states: {}", s.dim());
                println!("delays: {}", s.problem.delay_count());
                for (i, n) in s.parameter_names.iter().enumerate() {
                    println!("  {:>2} {}", i + 1, n);
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(2, e),
        },
        Command::Run { plan, out, verbose, seed_tolerance } => {
            let text = match std::fs::read_to_string(&plan) {
                Ok(t) => t,
                Err(e) => return fail(2, format!("{}: {}", plan.display(), e)),
            };
            let plan = match RunPlan::parse(&text) {
                Ok(p) => p,
                Err(e) => return fail(exit_code_of(&e), e),
            };
            let opts = RunOptions { out, verbose: Some(verbose), seed_tolerance };
            match run(&plan, &opts) {
                Ok(report) => match &report.failure {
                    None => ExitCode::SUCCESS,
                    Some(f) => fail(f.exit_code(), format!("stage '{}': {}", f.stage, f.error)),
                },
                Err(e) => fail(exit_code_of(&e), e),
            }
        }
    }
}
