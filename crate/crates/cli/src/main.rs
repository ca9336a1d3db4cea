use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rsma_satcom::harness::{self, Mode, SweepAxis, SweepPlan};
use rsma_satcom::optimizer::write_trace;
use rsma_satcom::Scenario;

/// Energy-efficient RSMA beamforming sweeps for a multibeam GEO satellite.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Profile {
    /// 3 beams, 2 users per beam, 20 realizations
    Desk,
    /// 7 beams, 2 users per beam, 500 realizations
    #[value(name = "paper")]
    Full,
}

impl Profile {
    fn scenario(self) -> Scenario {
        match self {
            Profile::Desk => Scenario::desk(),
            Profile::Full => Scenario::full_scale(),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a parameter sweep and write sweep.csv and runs.csv into --out.
    Run {
        /// TOML file; keys it sets override the profile.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        sweep: SweepAxis,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        values: Vec<f64>,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "rsma-ee,sdma-ee,rsma-wsr,sdma-wsr"
        )]
        modes: Vec<Mode>,
        /// Defaults to the scenario's `mc_realizations`.
        #[arg(long)]
        realizations: Option<usize>,
        /// Defaults to the scenario's `rng_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Profile::Desk)]
        profile: Profile,
        /// Reuse one user drop for every realization.
        #[arg(long)]
        fixed_geometry: bool,
    },
    /// Check a scenario file and list every violated constraint.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Profile::Desk)]
        profile: Profile,
    },
    /// Solve one channel draw and print the per-solve convergence trace.
    Trace {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Profile::Desk)]
        profile: Profile,
        /// Write the trace here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const INVALID: u8 = 1;
const RUNS_FAILED: u8 = 2;

fn load(path: Option<&Path>, profile: Profile) -> Result<Scenario, ExitCode> {
    let base = profile.scenario();
    let s = match path {
        Some(p) => Scenario::load(p, &base).map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(INVALID)
        })?,
        None => base,
    };
    if let Err(violations) = s.validate() {
        for v in violations {
            eprintln!("invalid: {v}");
        }
        return Err(ExitCode::from(INVALID));
    }
    Ok(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExitCode> {
    std::fs::write(path, bytes).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(INVALID)
    })
}

fn run(cli: Cli) -> Result<ExitCode, ExitCode> {
    match cli.command {
        Command::Run {
            scenario,
            sweep,
            values,
            modes,
            realizations,
            seed,
            out,
            profile,
            fixed_geometry,
        } => {
            let base = load(scenario.as_deref(), profile)?;
            let plan = SweepPlan {
                axis: sweep,
                values,
                modes,
                realizations: realizations.unwrap_or(base.mc_realizations),
                seed: seed.unwrap_or(base.rng_seed),
                base,
                fixed_geometry,
            };
            let result = harness::run_sweep(&plan).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(INVALID)
            })?;
            std::fs::create_dir_all(&out).map_err(|e| {
                eprintln!("error: {}: {e}", out.display());
                ExitCode::from(INVALID)
            })?;
            harness::emit_csv(&result, &out.join("sweep.csv")).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(INVALID)
            })?;
            let mut runs = Vec::new();
            harness::write_runs_csv(&result, &plan.values, &mut runs).expect("writing to memory");
            write_file(&out.join("runs.csv"), &runs)?;

            let failed = result.n_failed();
            eprintln!(
                "{} runs, {failed} failed, results in {}",
                result.runs.len(),
                out.display()
            );
            Ok(if failed > 0 {
                ExitCode::from(RUNS_FAILED)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Validate { scenario, profile } => {
            load(Some(&scenario), profile)?;
            println!("{}: ok", scenario.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Trace {
            scenario,
            seed,
            profile,
            out,
        } => {
            let s = load(scenario.as_deref(), profile)?;
            let sol = harness::single_run(&s, seed.unwrap_or(s.rng_seed)).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(RUNS_FAILED)
            })?;
            let mut buf = Vec::new();
            write_trace(&sol.state, &mut buf).expect("writing to memory");
            match out {
                Some(path) => write_file(&path, &buf)?,
                None => print!("{}", String::from_utf8_lossy(&buf)),
            }
            eprintln!(
                "{} after {} iterations: ee {:.6}, rate {:.4}, power {:.4}",
                if sol.converged {
                    "converged"
                } else {
                    "stopped"
                },
                sol.state.iter,
                sol.report.ee,
                sol.report.total_rate,
                sol.report.total_power
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    run(cli).unwrap_or_else(|code| code)
}
