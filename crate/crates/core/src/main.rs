use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pqlab::harness::{emit_csv, run_pipeline, write_csv, ExperimentConfig, Pipeline, Stage};
use pqlab::solve::compute_example_iv_k;

#[derive(Parser)]
#[command(name = "pqlab", version, about = "Audit, approximate and minimize integral functionals with (p,q)-growth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure the structural constants of the configured density.
    Audit(RunArgs),
    /// Frozen-coefficient approximation diagnostics and diagonal selection.
    Approx(RunArgs),
    /// Solve ladder and interior-gradient diagnostics.
    Solve(RunArgs),
    /// Every stage.
    Run(RunArgs),
    /// Print the constant K of the two-phase example for given p, q, M.
    #[command(name = "example-iv-k")]
    ExampleIvK {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        m: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// CSV destination; defaults to the config's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run ladder entries concurrently.
    #[arg(long)]
    parallel: bool,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

fn run(args: &RunArgs, which: Pipeline) -> ExitCode {
    let mut cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_STAGE });
        }
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.parallel |= args.parallel;
    let rows = run_pipeline(&cfg, which);
    let written = match args.out.as_ref().or(cfg.output.as_ref()) {
        Some(path) => emit_csv(&rows, path),
        None => write_csv(&rows, std::io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_STAGE);
    }
    let failures: Vec<_> = rows.iter().filter(|r| r.stage == Stage::Error).collect();
    for r in &failures {
        eprintln!("stage {} failed: {}", r.key, r.notes);
    }
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_STAGE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Audit(a) => run(a, Pipeline::Audit),
        Command::Approx(a) => run(a, Pipeline::Approx),
        Command::Solve(a) => run(a, Pipeline::Solve),
        Command::Run(a) => run(a, Pipeline::Full),
        Command::ExampleIvK { p, q, m } => match compute_example_iv_k(*p, *q, *m) {
            Ok(k) => {
                println!("{k}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_STAGE })
            }
        },
    }
}
