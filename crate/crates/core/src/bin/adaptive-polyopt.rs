use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adaptive_polyopt::acceptance::{self, Status};
use adaptive_polyopt::harness::{self, RunConfig, RunnerOptions};

#[derive(Parser)]
#[command(name = "adaptive-polyopt", version, about = "Run, check and post-process online policy optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Replace the config's seed list.
    #[arg(long, global = true, value_delimiter = ',')]
    seed_override: Option<Vec<u64>>,

    /// Output root; defaults to $ADAPTIVE_POLYOPT_OUT, then ./runs.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Number of cells run in parallel.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Suppress per-cell lines.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a config.
    Run { config: PathBuf },
    /// Verify a run directory against re-simulation and fill zeta_norm.
    Postprocess { run_dir: PathBuf },
    /// Validate a config without running it.
    Check { config: PathBuf },
    /// Run the acceptance suite.
    Accept,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let opts = RunnerOptions {
        out_dir: cli.out_dir,
        seed_override: cli.seed_override,
        jobs: cli.jobs,
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::Run { config } => RunConfig::from_path(&config)
            .and_then(|cfg| harness::run_config(&cfg, &opts))
            .map(|out| {
                if !opts.quiet {
                    println!("{}", out.run_dir.display());
                }
                0
            }),
        Command::Postprocess { run_dir } => harness::postprocess(&run_dir, &opts).map(|_| 0),
        Command::Check { config } => harness::check(&config).map(|cfg| {
            println!(
                "ok: {} cells -> {}",
                cfg.cells().len(),
                opts.out_root().join(cfg.run_dir_name()).display()
            );
            0
        }),
        Command::Accept => {
            let outcomes = acceptance::run_all();
            for o in &outcomes {
                println!("{o}");
            }
            Ok(if outcomes.iter().any(|o| o.status == Status::Fail) { 1 } else { 0 })
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            match &e {
                adaptive_polyopt::Error::InvalidConfig(msgs) => {
                    eprintln!("error: invalid config");
                    for m in msgs {
                        eprintln!("  {m}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
