//! `refinery` — plan checklists, refine images against prompts, run batch
//! simulator experiments, and inspect run traces.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use refinery_cli::commands::{cmd_plan, cmd_refine, cmd_report, cmd_simulate, PlannerChoice, RefineArgs};
use refinery_cli::sim::SimulateParams;

#[derive(Parser)]
#[command(name = "refinery", version, about = "Closed-loop prompt-alignment refinement")]
struct Cli {
    /// Emit machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,

    /// Config file path (overrides REFINERY_CONFIG and ./refinery.json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a prompt into its checklist of atomic constraints.
    Plan {
        prompt: String,
        #[arg(long, value_enum, default_value_t = PlannerChoice::Rule)]
        planner: PlannerChoice,
    },
    /// Run the closed refinement loop on one image.
    Refine {
        #[arg(long)]
        prompt: String,
        #[arg(long)]
        image: PathBuf,
        /// Trace file destination (default: {run_id}.trace.jsonl beside the image).
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Generate, corrupt, and refine a synthetic corpus; print statistics.
    Simulate {
        #[arg(long, default_value_t = 200)]
        corpus_size: usize,
        /// Upper bound on seeded violations per run (1..=3).
        #[arg(long, default_value_t = 3)]
        violations: u32,
        /// Per-primitive editor failure probability.
        #[arg(long, default_value_t = 0.0)]
        p_fail: f64,
        /// Edit/verify attempts per constraint per round.
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 5)]
        max_rounds: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Validate a trace file and print its per-round narrative.
    Report { trace: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan { ref prompt, planner } => {
            cmd_plan(prompt, planner, cli.config.as_deref(), cli.json)
        }
        Command::Refine { prompt, image, trace_out } => cmd_refine(&RefineArgs {
            prompt,
            image,
            config: cli.config.clone(),
            trace_out,
            json: cli.json,
        }),
        Command::Simulate { corpus_size, violations, p_fail, k, max_rounds, seed } => {
            let params = SimulateParams { corpus_size, violations, p_fail, k, max_rounds, seed };
            cmd_simulate(&params, cli.json)
        }
        Command::Report { trace } => cmd_report(&trace, cli.json),
    };

    match result {
        Ok(body) => {
            print!("{body}");
            if !body.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
