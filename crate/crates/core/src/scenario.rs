//! Scenario configuration, module-list parsing, run orchestration, and the
//! concurrent batch runner.
//!
//! A scenario names a module list file, an inputs directory holding the CSV
//! tables the active modules declare, an outputs directory, and option
//! overrides. Scenarios are independent: batch runs execute them on worker
//! threads with no shared mutable state, so results match sequential runs.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use crate::compose::{build_model, declared_tables, run_post_solve, ModuleCatalog, Options};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::solver::{
    solve_standard_form, to_standard_form, write_lp_string, Backend, SolveStatus, SolverOptions,
};

/// Environment variable holding the external solver command template
/// (whitespace-split; `{input}` and `{output}` are substituted).
pub const SOLVER_CMD_ENV: &str = "GRIDPLAN_SOLVER_CMD";

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub module_list_path: PathBuf,
    pub inputs_dir: PathBuf,
    pub outputs_dir: PathBuf,
    pub options: Options,
    /// None selects the internal backend; Some holds an external command
    /// template.
    pub external_solver: Option<String>,
}

impl ScenarioConfig {
    pub fn new(name: &str, inputs_dir: &Path, outputs_dir: &Path) -> ScenarioConfig {
        ScenarioConfig {
            name: name.to_string(),
            module_list_path: inputs_dir.join("modules.txt"),
            inputs_dir: inputs_dir.to_path_buf(),
            outputs_dir: outputs_dir.to_path_buf(),
            options: Options::new(),
            external_solver: None,
        }
    }

    /// Solver options assembled from `solver.*` option overrides.
    pub fn solver_options(&self) -> Result<SolverOptions> {
        let mut opts = SolverOptions::default();
        opts.feasibility_tol = self
            .options
            .get_f64("solver.feasibility_tol", opts.feasibility_tol)?;
        opts.integrality_tol = self
            .options
            .get_f64("solver.integrality_tol", opts.integrality_tol)?;
        opts.relative_mip_gap = self
            .options
            .get_f64("solver.relative_mip_gap", opts.relative_mip_gap)?;
        opts.max_iterations =
            self.options
                .get_f64("solver.max_iterations", opts.max_iterations as f64)? as u64;
        opts.max_nodes = self
            .options
            .get_f64("solver.max_nodes", opts.max_nodes as f64)? as u64;
        for (label, tol) in [
            ("solver.feasibility_tol", opts.feasibility_tol),
            ("solver.integrality_tol", opts.integrality_tol),
            ("solver.relative_mip_gap", opts.relative_mip_gap),
        ] {
            let tol_ok = tol > 0.0; // also rejects NaN
            if !tol_ok {
                return Err(Error::ConfigError(format!("{label} must be positive")));
            }
        }
        if let Some(template) = &self.external_solver {
            opts.backend = Backend::External(template.clone());
        }
        Ok(opts)
    }
}

/// Outcome of one scenario run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub status: SolveStatus,
    pub objective: f64,
    pub mip_gap: f64,
    /// (stage, seconds) in execution order.
    pub timings: Vec<(String, f64)>,
    /// Files actually written.
    pub outputs: Vec<PathBuf>,
}

/// Reads a module list file: one module per line, blank lines and `#`
/// comments ignored, order preserved.
pub fn read_module_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_module_list(&text))
}

pub fn parse_module_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|line| !line.is_empty())
        .map(|line| line.to_string())
        .collect()
}

/// Reads the tables declared by the active modules from an inputs directory.
pub fn load_inputs(
    dir: &Path,
    catalog: &ModuleCatalog,
    module_names: &[String],
) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(Error::ConfigError(format!(
            "inputs directory `{}` does not exist",
            dir.display()
        )));
    }
    let tables = declared_tables(catalog, module_names)?;
    Dataset::from_dir(dir, &tables)
}

/// Builds, solves, and reports one scenario. Output tables and the solution
/// file are written to the configured outputs directory.
pub fn run_scenario(catalog: &ModuleCatalog, config: &ScenarioConfig) -> Result<RunReport> {
    let mut timings = Vec::new();
    let t0 = Instant::now();
    let module_names = read_module_list(&config.module_list_path)?;
    let data = load_inputs(&config.inputs_dir, catalog, &module_names)?;
    timings.push(("load".to_string(), t0.elapsed().as_secs_f64()));

    let t1 = Instant::now();
    let (model, ctx) = build_model(catalog, &module_names, &data, &config.options)?;
    timings.push(("build".to_string(), t1.elapsed().as_secs_f64()));

    let t2 = Instant::now();
    let lp = to_standard_form(&model);
    let solver_opts = config.solver_options()?;
    let solution = solve_standard_form(&lp, &solver_opts)?;
    timings.push(("solve".to_string(), t2.elapsed().as_secs_f64()));

    if solution.status == SolveStatus::Optimal || solution.status == SolveStatus::GapLimit {
        // reported solutions must satisfy every row; a violation here means
        // a broken solver (or a bad external solution file), not bad inputs
        let x: Vec<f64> = lp.var_names.iter().map(|n| solution.value(n)).collect();
        let violation = lp.max_violation(&x);
        if violation > solver_opts.feasibility_tol.max(1e-7) {
            return Err(Error::SolverProcessFailure(format!(
                "solution violates constraints by {violation:e}"
            )));
        }
    }

    std::fs::create_dir_all(&config.outputs_dir)?;
    let mut outputs = Vec::new();
    if solution.status == SolveStatus::Optimal || solution.status == SolveStatus::GapLimit {
        let t3 = Instant::now();
        let run_outputs = run_post_solve(catalog, &ctx, &model, &solution)?;
        for (name, headers, rows) in run_outputs.tables() {
            let path = config.outputs_dir.join(format!("{name}.csv"));
            let mut text = String::new();
            text.push_str(&headers.join(","));
            text.push('\n');
            for row in rows {
                text.push_str(&row.join(","));
                text.push('\n');
            }
            std::fs::write(&path, text)?;
            outputs.push(path);
        }
        let sol_path = config.outputs_dir.join("solution.txt");
        std::fs::write(
            &sol_path,
            crate::solver::solution_file_contents(&solution, &lp),
        )?;
        outputs.push(sol_path);
        timings.push(("report".to_string(), t3.elapsed().as_secs_f64()));
    } else {
        let path = config.outputs_dir.join("summary.csv");
        std::fs::write(&path, format!("key,value\nstatus,{}\n", solution.status))?;
        outputs.push(path);
    }

    Ok(RunReport {
        name: config.name.clone(),
        status: solution.status,
        objective: solution.objective,
        mip_gap: solution.mip_gap,
        timings,
        outputs,
    })
}

/// Builds a scenario's model and writes the LP file without solving.
pub fn export_lp(catalog: &ModuleCatalog, config: &ScenarioConfig, path: &Path) -> Result<()> {
    let module_names = read_module_list(&config.module_list_path)?;
    let data = load_inputs(&config.inputs_dir, catalog, &module_names)?;
    let (model, _ctx) = build_model(catalog, &module_names, &data, &config.options)?;
    let lp = to_standard_form(&model);
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, write_lp_string(&lp))?;
    Ok(())
}

#[derive(Debug)]
pub struct ValidationReport {
    pub variables: usize,
    pub constraints: usize,
    pub timescales: Option<crate::timescales::TimescaleReport>,
}

/// Validates a scenario's inputs (module list, tables, referential
/// integrity, model assembly, timescale coverage) without solving.
pub fn validate_scenario(
    catalog: &ModuleCatalog,
    config: &ScenarioConfig,
) -> Result<ValidationReport> {
    let module_names = read_module_list(&config.module_list_path)?;
    let data = load_inputs(&config.inputs_dir, catalog, &module_names)?;
    let (model, ctx) = build_model(catalog, &module_names, &data, &config.options)?;
    let tolerance = config.options.get_f64("timescale_tolerance", 0.005)?;
    if tolerance <= 0.0 {
        return Err(Error::ConfigError(
            "timescale_tolerance must be positive".into(),
        ));
    }
    Ok(ValidationReport {
        variables: model.num_variables(),
        constraints: model.num_constraints(),
        timescales: ctx.timescales.as_ref().map(|ts| ts.validate(tolerance)),
    })
}

/// One line of a scenario list file:
/// `name [--modules PATH] [--inputs DIR] [--outputs DIR] [--opt KEY=VALUE]...`
/// Relative paths resolve against the scenario file's directory; outputs
/// default to `<base_outputs>/<name>`.
pub fn parse_scenario_line(
    line: &str,
    base_dir: &Path,
    default_inputs: &Path,
    base_outputs: &Path,
) -> Result<ScenarioConfig> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(Error::ConfigError("empty scenario line".into()));
    }
    let name = tokens[0].to_string();
    let mut config = ScenarioConfig::new(&name, default_inputs, &base_outputs.join(&name));
    config.module_list_path = default_inputs.join("modules.txt");
    let mut i = 1;
    let resolve = |p: &str| -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            base_dir.join(path)
        }
    };
    while i < tokens.len() {
        let flag = tokens[i];
        let value = tokens.get(i + 1).ok_or_else(|| {
            Error::ConfigError(format!("scenario `{name}`: flag `{flag}` needs a value"))
        })?;
        match flag {
            "--modules" => config.module_list_path = resolve(value),
            "--inputs" => {
                config.inputs_dir = resolve(value);
                config.module_list_path = config.inputs_dir.join("modules.txt");
            }
            "--outputs" => config.outputs_dir = resolve(value),
            "--opt" => {
                let (k, v) = value.split_once('=').ok_or_else(|| {
                    Error::ConfigError(format!(
                        "scenario `{name}`: expected KEY=VALUE, got `{value}`"
                    ))
                })?;
                config.options.set(k, v);
            }
            other => {
                return Err(Error::ConfigError(format!(
                    "scenario `{name}`: unknown flag `{other}`"
                )))
            }
        }
        i += 2;
    }
    Ok(config)
}

/// Parses a scenario list file (one scenario per line; `#` comments).
pub fn read_scenario_file(
    path: &Path,
    default_inputs: &Path,
    base_outputs: &Path,
) -> Result<Vec<ScenarioConfig>> {
    let text = std::fs::read_to_string(path)?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    let mut configs = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        configs.push(parse_scenario_line(
            line,
            base_dir,
            default_inputs,
            base_outputs,
        )?);
    }
    let mut names: Vec<&str> = configs.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    if names.len() != configs.len() {
        return Err(Error::ConfigError(
            "duplicate scenario names in batch".into(),
        ));
    }
    Ok(configs)
}

/// Runs scenarios independently on up to `parallelism` worker threads.
/// Results are returned in input order; one failing scenario does not stop
/// the batch. A `batch_summary.csv` comparing objectives is written to
/// `base_outputs`.
pub fn run_batch(
    catalog_factory: impl Fn() -> ModuleCatalog + Sync,
    configs: &[ScenarioConfig],
    parallelism: usize,
    base_outputs: &Path,
) -> Result<Vec<Result<RunReport>>> {
    let workers = parallelism.max(1).min(configs.len().max(1));
    let next: Mutex<usize> = Mutex::new(0);
    let results: Vec<Mutex<Option<Result<RunReport>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = {
                    let mut guard = next.lock().unwrap();
                    let i = *guard;
                    if i >= configs.len() {
                        return;
                    }
                    *guard += 1;
                    i
                };
                let catalog = catalog_factory();
                let report = run_scenario(&catalog, &configs[i]);
                *results[i].lock().unwrap() = Some(report);
            });
        }
    });

    let results: Vec<Result<RunReport>> = results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled every slot"))
        .collect();

    std::fs::create_dir_all(base_outputs)?;
    let mut summary = String::from("scenario,status,objective_npv\n");
    for (config, result) in configs.iter().zip(&results) {
        match result {
            Ok(report) => {
                summary.push_str(&format!(
                    "{},{},{}\n",
                    report.name, report.status, report.objective
                ));
            }
            Err(err) => {
                summary.push_str(&format!("{},error,{}\n", config.name, err));
            }
        }
    }
    std::fs::write(base_outputs.join("batch_summary.csv"), summary)?;
    Ok(results)
}
