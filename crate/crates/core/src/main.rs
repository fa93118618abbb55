use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use proxy_hedge::cli::{self, Outcome};

#[derive(Parser)]
#[command(
    name = "proxy-hedge",
    version,
    about = "Indifference pricing with proxy hedges"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (TOML with [market], [solver], [fd], [run]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Progress and warnings on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    /// Worker threads; 1 gives bit-reproducible output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the report or CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Price the claim, optimizing the static hedge unless disabled.
    Price,
    /// Show the simultaneous diagonalization and its verification.
    Factorize,
    /// Timing and accuracy matrix as CSV.
    Benchmark,
    /// Risk aversion that reproduces an observed price.
    ImpliedGamma,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Price => "price",
            Command::Factorize => "factorize",
            Command::Benchmark => "benchmark",
            Command::ImpliedGamma => "implied-gamma",
        }
    }
}

fn run(args: &Args) -> Outcome {
    let name = args.command.name();
    let Some(path) = &args.config else {
        return Outcome {
            code: cli::EXIT_CONFIG,
            output: format!("# proxy-hedge {name}\nstatus = \"failed\"\nstage = \"config\"\nerror = \"--config PATH is required\"\n"),
        };
    };
    let parsed = match cli::load_config(path, name) {
        Ok(p) => p,
        Err(outcome) => return outcome,
    };
    let verbose = args.verbose;
    if verbose {
        for w in &parsed.warnings {
            eprintln!("warning: {w}");
        }
    }
    let progress = |msg: &str| {
        if verbose {
            eprintln!("{msg}");
        }
    };
    match args.command {
        Command::Price => cli::run_price(&parsed, progress),
        Command::Factorize => cli::run_factorize(&parsed),
        Command::ImpliedGamma => cli::run_implied_gamma(&parsed),
        Command::Benchmark => Outcome {
            code: cli::EXIT_OK,
            output: cli::run_benchmark(&parsed.config, progress),
        },
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(k) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(cli::EXIT_CONFIG as u8);
        }
    }
    let outcome = run(&args);
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &outcome.output) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(cli::EXIT_CONFIG as u8);
            }
        }
        None => print!("{}", outcome.output),
    }
    if outcome.code != cli::EXIT_OK {
        for line in outcome.output.lines().filter(|l| l.starts_with("error")) {
            eprintln!("{line}");
        }
    }
    ExitCode::from(outcome.code as u8)
}
