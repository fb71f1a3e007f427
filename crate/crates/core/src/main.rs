use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adam_abc::cli::{self, exit_code, parse_config_with};
use adam_abc::exec::{Execution, THREADS_ENV};

/// Adam without bias correction under ABC-type noise: trajectory
/// verification, seed sweeps and trace export.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Config file, or inline `key=value` text (`;` separates entries).
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output directory. Without it the main artifact goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seeds, overriding the config: `a..b` or a comma list.
    #[arg(long, global = true)]
    seeds: Option<String>,
    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Checkpoints, overriding the config: `pow2`, `geom:k` or a list.
    /// For `trace`, rows are emitted only at these steps.
    #[arg(long, global = true)]
    checkpoints: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the invariant suite; exit 0 iff every check passes.
    Verify,
    /// Run the enabled probes and write a report.
    Experiment,
    /// Write the per-step diagnostic CSV for one seed.
    Trace,
    /// List the suite problems and their certificates.
    ListProblems,
}

fn run(cli: Cli) -> adam_abc::Result<cli::CommandOutput> {
    let text = cli::load_config_text(cli.config.as_deref())?;
    let mut overrides = Vec::new();
    if let Some(s) = cli.seeds {
        overrides.push(("seeds", s));
    }
    if let Some(c) = cli.checkpoints {
        overrides.push(("checkpoints", c));
        if matches!(cli.command, Command::Trace) {
            overrides.push(("trace_at_checkpoints", "true".into()));
        }
    }
    let cfg = parse_config_with(&text, &overrides)?;
    let exec = Execution::from_threads(cli.threads);
    let out = cli.out.as_deref();
    match cli.command {
        Command::Verify => cli::cmd_verify(&cfg, out, exec),
        Command::Experiment => cli::cmd_experiment(&cfg, out, exec),
        Command::Trace => cli::cmd_trace(&cfg, out),
        Command::ListProblems => cli::cmd_list_problems(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(o) => {
            print!("{}", o.stdout);
            for m in &o.messages {
                eprintln!("{m}");
            }
            ExitCode::from(o.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
