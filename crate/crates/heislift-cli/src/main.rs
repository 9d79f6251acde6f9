use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use heislift_cli::{exit_code_for, pipeline, RunConfig};

#[derive(Parser)]
#[command(name = "heislift", version, about = "Lipschitz-to-Sobolev extension builder and certifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the decomposition, complex, and field, run the enabled
    /// checks, and write the artifact bundle.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the analysis seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores; env HEISLIFT_JOBS).
        #[arg(long)]
        jobs: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a configuration without building.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

fn configure_jobs(jobs: Option<usize>) {
    let jobs = jobs.or_else(|| {
        std::env::var("HEISLIFT_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    #[cfg(feature = "parallel")]
    if let Some(jobs) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            jobs,
            out,
        } => {
            configure_jobs(jobs);
            let mut cfg = match RunConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit_code_for(&e) as u8);
                }
            };
            if let Some(seed) = seed {
                cfg.analysis.seed = seed;
            }
            match pipeline::run(&cfg, &config, out.as_deref()) {
                Ok(summary) => {
                    for check in &summary.checks {
                        let mark = if check.pass { "PASS" } else { "FAIL" };
                        println!("[{mark}] {}: {}", check.name, check.detail);
                    }
                    if summary.all_pass {
                        println!("all checks passed");
                        ExitCode::SUCCESS
                    } else {
                        println!("some checks failed");
                        ExitCode::from(5)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code_for(&e) as u8)
                }
            }
        }
        Command::Check { config } => {
            let cfg = match RunConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit_code_for(&e) as u8);
                }
            };
            match pipeline::validate(&cfg, &config) {
                Ok(report) => {
                    for w in &report.warnings {
                        println!("warning: {w}");
                    }
                    if report.ok {
                        println!("ok: {} sites", report.site_count);
                        ExitCode::SUCCESS
                    } else {
                        for v in &report.violations {
                            println!("violation: {v}");
                        }
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code_for(&e) as u8)
                }
            }
        }
    }
}
