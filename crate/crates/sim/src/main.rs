use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jmgt_core::CheckReport;
use jmgt_sim::output::{write_verdict, Verdict};
use jmgt_sim::scenario::kernel_checks;
use jmgt_sim::{parse_config, run_scenario, RunConfig, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "jmgt-sim", version, about = "Run JMGT memory-damping scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario of a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and the environment).
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
        /// Write every N-th step to energies.csv.
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Only the kernel monotonicity and positivity checks.
    CheckKernel {
        config: PathBuf,
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn report(checks: &[CheckReport]) {
    for c in checks {
        if c.passed {
            println!("PASS {}", c.name);
        } else {
            let why = c.failures.first().map(String::as_str).unwrap_or("");
            println!("FAIL {}: {why}", c.name);
        }
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run {
            config,
            out,
            stride,
            seed,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = stride {
                if s == 0 {
                    return Err("--stride must be at least 1".into());
                }
                cfg.output.stride = s;
            }
            if let Some(s) = seed {
                cfg.output.seed = s;
            }
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let verdict = run_scenario(&cfg, &dir).map_err(|e| e.to_string())?;
            report(&verdict.checks);
            println!("{} -> {}", verdict.scenario, dir.display());
            Ok(verdict.passed)
        }
        Command::CheckKernel { config, out } => {
            let cfg = load(&config)?;
            if cfg.kernel.is_dirac() {
                return Err("the dirac kernel has no pointwise values to check".into());
            }
            let checks = kernel_checks(&cfg.kernel, &cfg.positivity, cfg.output.seed).map_err(|e| e.to_string())?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let verdict = Verdict::new("check_kernel", cfg.output.seed, Vec::new(), checks);
            write_verdict(&dir.join("checks.json"), &verdict).map_err(|e| e.to_string())?;
            report(&verdict.checks);
            Ok(verdict.passed)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
