use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use levy_mkv::config::RunConfig;
use levy_mkv::{run, Experiment};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Constants,
    Contraction,
    Chaos,
    Moments,
    Fidelity,
}

#[derive(Debug, Parser)]
#[command(
    name = "levy-mkv",
    version,
    about = "Coupling experiments for Levy-driven mean-field Langevin dynamics"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// overrides the seed in the config
    #[arg(long)]
    seed: Option<u64>,
    /// overrides output.directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// exit with code 5 when an acceptance check fails
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(k) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("warning: could not size the worker pool: {e}");
        }
    }
    let out = cli
        .out
        .unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    let exp = match cli.command {
        Command::Constants => Experiment::Constants,
        Command::Contraction => Experiment::Contraction,
        Command::Chaos => Experiment::Chaos,
        Command::Moments => Experiment::Moments,
        Command::Fidelity => Experiment::Fidelity,
    };
    if let Ok(r) = cfg.resolve() {
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
    }
    match run(exp, &cfg, &out, cli.check) {
        Ok(r) => {
            print!("{}", r.output.text);
            for c in &r.output.checks {
                println!(
                    "[{}] {}: {}",
                    if c.pass { "pass" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            for f in &r.files {
                println!("wrote {}", f.display());
            }
            println!("wall clock {:.1} s", r.provenance.wall_clock_seconds);
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn fail(e: levy_mkv::error::HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
