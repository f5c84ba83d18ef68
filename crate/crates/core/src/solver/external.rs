//! External-solver invocation and the plain-text solution interchange format.
//!
//! The configured command template is whitespace-split (no shell) and run
//! with `{input}` / `{output}` substituted by the LP file path and the
//! expected solution file path. The solution format is:
//!
//! ```text
//! # comments and blank lines ignored
//! objective 1234.5
//! status optimal
//! BuildGen(g1,2025) 100
//! ```
//!
//! One `<lp-name> <value>` pair per line. Variables absent from the file get
//! value 0 with a warning; the objective is recomputed from parsed values
//! rather than trusted.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use crate::error::{Error, Result};
use crate::solver::standard_form::StandardFormLP;
use crate::solver::{lp_file, Solution, SolveStatus};

/// Serializes a solution in the interchange format, with variables in column
/// order.
pub fn solution_file_contents(solution: &Solution, lp: &StandardFormLP) -> String {
    let mut out = String::new();
    out.push_str(&format!("objective {}\n", solution.objective));
    out.push_str(&format!("status {}\n", solution.status));
    for (j, name) in lp.var_names.iter().enumerate() {
        let value = solution.values.get(name).copied().unwrap_or(0.0);
        out.push_str(&format!("{} {}\n", lp.lp_names[j], value));
    }
    out
}

/// Parses interchange-format text against the LP it solves.
pub fn parse_solution(text: &str, lp: &StandardFormLP) -> Result<(Solution, Vec<String>)> {
    let mut x = vec![0.0; lp.num_vars()];
    let mut seen = vec![false; lp.num_vars()];
    let mut warnings = Vec::new();
    let mut status = SolveStatus::Optimal;
    let mut header_objective: Option<f64> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::ParseError {
                line: line_no,
                message: format!("expected `name value`, got `{line}`"),
            });
        }
        match tokens[0] {
            "objective" => {
                header_objective = Some(parse_value(tokens[1], line_no)?);
            }
            "status" => {
                status = SolveStatus::parse(tokens[1]).ok_or_else(|| Error::ParseError {
                    line: line_no,
                    message: format!("unknown status `{}`", tokens[1]),
                })?;
            }
            name => {
                let col = lp.column_by_lp_name(name).or_else(|| lp.column(name));
                match col {
                    Some(j) => {
                        x[j] = parse_value(tokens[1], line_no)?;
                        seen[j] = true;
                    }
                    None => warnings.push(format!(
                        "solution line {line_no}: unknown variable `{name}` ignored"
                    )),
                }
            }
        }
    }

    for (j, &was_seen) in seen.iter().enumerate() {
        if !was_seen {
            warnings.push(format!(
                "variable `{}` missing from solution; assuming 0",
                lp.var_names[j]
            ));
        }
    }

    let objective = lp.objective_value(&x);
    if let Some(h) = header_objective {
        if (h - objective).abs() > 1e-6 * objective.abs().max(1.0) {
            warnings.push(format!(
                "solution header objective {h} differs from recomputed {objective}"
            ));
        }
    }

    let mut values = BTreeMap::new();
    for (j, name) in lp.var_names.iter().enumerate() {
        values.insert(name.clone(), x[j]);
    }
    Ok((
        Solution {
            status,
            values,
            objective,
            duals: BTreeMap::new(),
            mip_gap: 0.0,
            nodes: 0,
            iterations: 0,
        },
        warnings,
    ))
}

fn parse_value(token: &str, line: usize) -> Result<f64> {
    token.parse::<f64>().map_err(|_| Error::ParseError {
        line,
        message: format!("malformed number `{token}`"),
    })
}

/// Writes the LP, runs the external command, and parses the solution file.
///
/// `workdir` defaults to a fresh temporary directory under the system temp
/// path when not given.
pub fn invoke_external(
    lp: &StandardFormLP,
    command_template: &str,
    workdir: Option<&Path>,
) -> Result<(Solution, Vec<String>)> {
    let owned;
    let dir = match workdir {
        Some(d) => d,
        None => {
            owned = std::env::temp_dir().join(format!("gridplan-solve-{}", std::process::id()));
            std::fs::create_dir_all(&owned)?;
            &owned
        }
    };
    let input = dir.join("model.lp");
    let output = dir.join("model.sol");
    std::fs::write(&input, lp_file::write_lp_string(lp))?;
    let _ = std::fs::remove_file(&output);

    let tokens: Vec<String> = command_template
        .split_whitespace()
        .map(|t| {
            t.replace("{input}", &input.to_string_lossy())
                .replace("{output}", &output.to_string_lossy())
        })
        .collect();
    if tokens.is_empty() {
        return Err(Error::SolverProcessFailure(
            "empty solver command template".to_string(),
        ));
    }
    let result = Command::new(&tokens[0])
        .args(&tokens[1..])
        .output()
        .map_err(|e| {
            Error::SolverProcessFailure(format!("failed to spawn `{}`: {e}", tokens[0]))
        })?;
    if !result.status.success() {
        return Err(Error::SolverProcessFailure(format!(
            "`{}` exited with {}: {}",
            tokens[0],
            result.status,
            String::from_utf8_lossy(&result.stderr).trim()
        )));
    }
    let text = std::fs::read_to_string(&output).map_err(|e| {
        Error::SolverProcessFailure(format!(
            "solver produced no solution file at {}: {e}",
            output.display()
        ))
    })?;
    parse_solution(&text, lp)
}
