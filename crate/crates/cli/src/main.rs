//! Command-line interface: run a scenario, run a batch, validate inputs, or
//! export the LP without solving.
//!
//! Exit codes: 0 optimal, 2 infeasible, 3 unbounded, 4 configuration or
//! input error, 5 solver failure or limit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gridplan_core::compose::{ModuleCatalog, Options};
use gridplan_core::scenario::{
    export_lp, read_scenario_file, run_batch, run_scenario, validate_scenario, ScenarioConfig,
    SOLVER_CMD_ENV,
};
use gridplan_core::solver::SolveStatus;
use gridplan_core::Error;

#[derive(Parser)]
#[command(
    name = "gridplan",
    about = "Capacity-expansion and production-cost modeling for power systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Directory holding the input tables
    #[arg(long)]
    inputs: PathBuf,
    /// Module list file (default: `<inputs>/modules.txt`)
    #[arg(long)]
    modules: Option<PathBuf>,
    /// Option overrides, KEY=VALUE (repeatable)
    #[arg(long = "opt", value_name = "KEY=VALUE")]
    options: Vec<String>,
    /// Solver backend: "internal", or "external" to use the command template
    /// in GRIDPLAN_SOLVER_CMD
    #[arg(long, default_value = "internal")]
    solver: String,
}

impl ScenarioArgs {
    fn to_config(&self, name: &str, outputs: &std::path::Path) -> Result<ScenarioConfig, Error> {
        let mut config = ScenarioConfig::new(name, &self.inputs, outputs);
        if let Some(m) = &self.modules {
            config.module_list_path = m.clone();
        }
        let mut options = Options::new();
        for raw in &self.options {
            let Some((k, v)) = raw.split_once('=') else {
                return Err(Error::ConfigError(format!(
                    "--opt expects KEY=VALUE, got `{raw}`"
                )));
            };
            options.set(k, v);
        }
        config.options = options;
        config.external_solver = match self.solver.as_str() {
            "internal" => None,
            "external" => Some(std::env::var(SOLVER_CMD_ENV).map_err(|_| {
                Error::ConfigError(format!(
                    "--solver external requires the {SOLVER_CMD_ENV} environment variable"
                ))
            })?),
            other => {
                return Err(Error::ConfigError(format!(
                    "unknown solver backend `{other}`"
                )))
            }
        };
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build, solve, and report a single scenario
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output directory for result tables
        #[arg(long, default_value = "outputs")]
        outputs: PathBuf,
        /// Scenario name used in reports
        #[arg(long, default_value = "scenario")]
        name: String,
        /// Exit 0 even when the solve status is not optimal
        #[arg(long)]
        allow_non_optimal: bool,
    },
    /// Run every scenario in a scenario list file
    Batch {
        /// Scenario list file (one `name [flags]` per line)
        #[arg(long)]
        scenarios: PathBuf,
        /// Default inputs directory for scenarios without --inputs
        #[arg(long)]
        inputs: PathBuf,
        /// Base outputs directory (each scenario gets a subdirectory)
        #[arg(long, default_value = "outputs")]
        outputs: PathBuf,
        /// Worker threads
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
    },
    /// Load and validate inputs without solving
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Write the assembled model as an LP file without solving
    ExportLp {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// LP file path to write
        #[arg(long)]
        output: PathBuf,
    },
}

fn status_exit(status: SolveStatus, allow_non_optimal: bool) -> ExitCode {
    if allow_non_optimal {
        return ExitCode::SUCCESS;
    }
    match status {
        SolveStatus::Optimal => ExitCode::SUCCESS,
        SolveStatus::Infeasible => ExitCode::from(2),
        SolveStatus::Unbounded => ExitCode::from(3),
        SolveStatus::GapLimit => ExitCode::from(5),
    }
}

fn error_exit(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::SolverProcessFailure(_)
        | Error::IterationLimit(_)
        | Error::NodeLimit(_)
        | Error::ParseError { .. } => ExitCode::from(5),
        _ => ExitCode::from(4),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let catalog = ModuleCatalog::builtin();
    match cli.command {
        Command::Run {
            scenario,
            outputs,
            name,
            allow_non_optimal,
        } => {
            let config = match scenario.to_config(&name, &outputs) {
                Ok(c) => c,
                Err(e) => return error_exit(&e),
            };
            match run_scenario(&catalog, &config) {
                Ok(report) => {
                    println!("scenario {}: {}", report.name, report.status);
                    if report.status == SolveStatus::Optimal
                        || report.status == SolveStatus::GapLimit
                    {
                        println!("objective_npv {}", report.objective);
                    }
                    for (stage, secs) in &report.timings {
                        println!("time.{stage} {secs:.3}s");
                    }
                    for path in &report.outputs {
                        println!("wrote {}", path.display());
                    }
                    status_exit(report.status, allow_non_optimal)
                }
                Err(e) => error_exit(&e),
            }
        }
        Command::Batch {
            scenarios,
            inputs,
            outputs,
            parallelism,
        } => {
            let configs = match read_scenario_file(&scenarios, &inputs, &outputs) {
                Ok(c) => c,
                Err(e) => return error_exit(&e),
            };
            let results = match run_batch(ModuleCatalog::builtin, &configs, parallelism, &outputs) {
                Ok(r) => r,
                Err(e) => return error_exit(&e),
            };
            let mut failures = 0;
            for (config, result) in configs.iter().zip(&results) {
                match result {
                    Ok(report) => {
                        println!(
                            "{}: {} objective_npv {}",
                            report.name, report.status, report.objective
                        );
                        if report.status != SolveStatus::Optimal {
                            failures += 1;
                        }
                    }
                    Err(e) => {
                        println!("{}: error {e}", config.name);
                        failures += 1;
                    }
                }
            }
            println!("wrote {}", outputs.join("batch_summary.csv").display());
            if failures == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Command::Validate { scenario } => {
            let config = match scenario.to_config("validate", std::path::Path::new(".")) {
                Ok(c) => c,
                Err(e) => return error_exit(&e),
            };
            match validate_scenario(&catalog, &config) {
                Ok(report) => {
                    println!(
                        "inputs valid: {} variables, {} constraints",
                        report.variables, report.constraints
                    );
                    if let Some(ts) = &report.timescales {
                        for p in &ts.periods {
                            println!(
                                "period {}: {} of {} hours represented \
                                 (deviation {:.5}, {})",
                                p.period,
                                p.represented_hours,
                                p.target_hours,
                                p.relative_deviation,
                                if p.pass { "ok" } else { "UNDERSAMPLED" }
                            );
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => error_exit(&e),
            }
        }
        Command::ExportLp { scenario, output } => {
            let config = match scenario.to_config("export", std::path::Path::new(".")) {
                Ok(c) => c,
                Err(e) => return error_exit(&e),
            };
            match export_lp(&catalog, &config, &output) {
                Ok(()) => {
                    println!("wrote {}", output.display());
                    ExitCode::SUCCESS
                }
                Err(e) => error_exit(&e),
            }
        }
    }
}
