use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ddft::io::load_config;
use ddft::run::{resume, run, sweep, RunOptions, RunSummary};
use ddft::verify::{criterion, verify, VerifyReport};
use ddft::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(version, about = "Dissipative density-functional dynamics in one dimension")]
struct Cli {
    /// Output directory; overrides DDFT_OUT_DIR and the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    quiet: bool,
    /// Snapshot cadence in the config's time units.
    #[arg(long, global = true)]
    snapshot_every: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the engine described by a config file.
    Run { config: PathBuf },
    /// Run the acceptance suite.
    Verify {
        /// Only these criteria (comma separated ids).
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
    /// One run per value of a dotted config key, e.g. `params.friction`.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<String>,
    },
    /// Continue a run from a snapshot or checkpoint.
    Resume {
        snapshot: PathBuf,
        /// Use this config instead of the embedded one.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Accept a config whose hash differs from the snapshot's.
        #[arg(long)]
        force: bool,
    },
}

fn error_code(e: &Error) -> u8 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(error_code(e))
}

fn print_summary(s: &RunSummary, quiet: bool) {
    if !quiet {
        println!(
            "done: t = {:.6e}, {} observations, mass drift {:.2e}, energy {:.10e}, output in {}",
            s.t_final,
            s.observations,
            s.mass_drift,
            s.energy_final,
            s.out_dir.display()
        );
    }
}

fn print_verify(report: &VerifyReport, quiet: bool) {
    if quiet {
        for c in &report.criteria {
            println!("{}", c.summary_line());
        }
    } else {
        print!("{}", report.to_text());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let options = RunOptions {
        out_dir: cli.out_dir.clone(),
        quiet: cli.quiet,
        snapshot_every: cli.snapshot_every,
        seed: cli.seed,
    };
    match cli.command {
        Command::Run { config } => match load_config(&config).and_then(|c| run(&c, &options)) {
            Ok(s) => {
                print_summary(&s, cli.quiet);
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Resume {
            snapshot,
            config,
            force,
        } => {
            let config = match config.map(|p| load_config(&p)).transpose() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match resume(&snapshot, config.as_ref(), force, &options) {
                Ok(s) => {
                    print_summary(&s, cli.quiet);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Sweep { config, param, values } => {
            let base = match load_config(&config).and_then(|c| c.to_value()) {
                Ok(v) => v,
                Err(e) => return fail(&e),
            };
            let values: Vec<String> = values.into_iter().map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            match sweep(&base, &param, &values, &options) {
                Ok(report) => {
                    let mut code = 0;
                    for e in &report.entries {
                        match &e.outcome {
                            Ok(s) if !cli.quiet => println!("{param} = {}: ok, energy {:.10e}", e.value, s.energy_final),
                            Ok(_) => {}
                            Err(f) => {
                                eprintln!("{param} = {}: failed: {}", e.value, f.message);
                                code = code.max(if f.numerical { EXIT_NUMERICAL } else { EXIT_CONFIG });
                            }
                        }
                    }
                    ExitCode::from(code)
                }
                Err(e) => fail(&e),
            }
        }
        Command::Verify { only } => {
            let report = if only.is_empty() {
                verify()
            } else {
                let start = std::time::Instant::now();
                let criteria: Option<Vec<_>> = only.iter().map(|&id| criterion(id)).collect();
                let Some(criteria) = criteria else {
                    eprintln!("error: criterion ids run from 1 to {}", ddft::verify::CRITERIA);
                    return ExitCode::from(EXIT_CONFIG);
                };
                VerifyReport {
                    version: env!("CARGO_PKG_VERSION"),
                    os: std::env::consts::OS,
                    arch: std::env::consts::ARCH,
                    criteria,
                    elapsed: start.elapsed(),
                }
            };
            print_verify(&report, cli.quiet);
            if let Some(dir) = &cli.out_dir {
                let written = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("verify_report.txt"), report.to_text()));
                if let Err(e) = written {
                    return fail(&Error::Io(e));
                }
            }
            let all_ok = report.criteria.iter().all(|c| c.passed()) && !report.criteria.is_empty();
            if all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFY)
            }
        }
    }
}
