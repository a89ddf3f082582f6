use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use decon_core::experiment::{self, ExperimentConfig};
use decon_core::solvers::Algorithm;
use decon_core::tolerances::TOLERANCE_ENV;

#[derive(Debug, Parser)]
#[command(
    name = "decon-opt",
    version,
    about = "Run decentralized consensus optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Check the contraction inequality every round (exit 2 on violation).
        #[arg(long)]
        verify: bool,
        /// Run two algorithms side by side, e.g. `dadmm,pextra`.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        compare: Option<Vec<Algorithm>>,
        /// Scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    // usage errors exit with 1; 2 is reserved for contraction violations
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match cli.command {
        Command::Run {
            config,
            verify,
            compare,
            seed,
            out,
        } => {
            let fail = |msg: String| {
                eprintln!("decon-opt: {}: {msg}", config.display());
                ExitCode::from(1)
            };
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e.to_string()),
            };
            cfg.analysis.verify |= verify;
            if compare.is_some() {
                cfg.solver.compare = compare;
            }
            if let Some(seed) = seed {
                cfg.scenario.seed = seed;
            }
            if let Some(out) = out {
                cfg.output.dir = out;
            }
            let env = std::env::var(TOLERANCE_ENV).ok();
            match experiment::run(cfg, env.as_deref()) {
                Ok(summary) => {
                    for f in &summary.files {
                        println!("wrote {}", f.display());
                    }
                    if let Some(dx) = summary.max_abs_dx {
                        println!("max |dx| = {dx:e}");
                    }
                    for run in &summary.runs {
                        if let Some(v) = run.verification.as_ref().and_then(|r| r.first_violation())
                        {
                            eprintln!(
                                "decon-opt: {}: {} violates the contraction bound at k = {} (ratio {})",
                                config.display(),
                                run.algorithm,
                                v.k,
                                v.ratio
                            );
                        }
                    }
                    ExitCode::from(summary.exit_code() as u8)
                }
                Err(e) => {
                    let code = e.exit_code() as u8;
                    eprintln!("decon-opt: {}: {e}", config.display());
                    ExitCode::from(code)
                }
            }
        }
    }
}
