//! Standard-form conversion, the reference two-phase simplex, branch-and-bound
//! for integer variables, deterministic LP-file export, and external-solver
//! interchange.

mod branch_bound;
mod external;
mod lp_file;
mod simplex;
mod standard_form;

pub use branch_bound::{branch_and_bound, MipOutcome};
pub use external::{invoke_external, parse_solution, solution_file_contents};
pub use lp_file::{write_lp_file, write_lp_string};
pub use simplex::{simplex_solve, LpOutcome};
pub use standard_form::{to_standard_form, SparseRow, StandardFormLP};

use std::collections::BTreeMap;

use crate::error::Result;
use crate::model::ModelGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    GapLimit,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::GapLimit => "gap-limit",
        };
        write!(f, "{s}")
    }
}

impl SolveStatus {
    pub fn parse(s: &str) -> Option<SolveStatus> {
        match s {
            "optimal" => Some(SolveStatus::Optimal),
            "infeasible" => Some(SolveStatus::Infeasible),
            "unbounded" => Some(SolveStatus::Unbounded),
            "gap-limit" => Some(SolveStatus::GapLimit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Internal,
    /// Command template with `{input}` and `{output}` placeholders.
    External(String),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub relative_mip_gap: f64,
    pub max_iterations: u64,
    pub max_nodes: u64,
    pub backend: Backend,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            relative_mip_gap: 1e-6,
            max_iterations: 200_000,
            max_nodes: 100_000,
            backend: Backend::Internal,
        }
    }
}

/// Name-keyed solution of one solve, as reported to callers and output files.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub values: BTreeMap<String, f64>,
    pub objective: f64,
    /// Shadow prices (dObjective/dRhs) per constraint. LP solves only.
    pub duals: BTreeMap<String, f64>,
    pub mip_gap: f64,
    pub nodes: u64,
    pub iterations: u64,
}

impl Solution {
    pub fn value(&self, name: &str) -> f64 {
        self.values.get(name).copied().unwrap_or(0.0)
    }

    pub fn dual(&self, name: &str) -> f64 {
        self.duals.get(name).copied().unwrap_or(0.0)
    }

    /// Dense value vector aligned with the model's variable ids.
    pub fn dense_values(&self, model: &ModelGraph) -> Vec<f64> {
        model
            .variables()
            .iter()
            .map(|v| self.value(&v.name))
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        lp: &StandardFormLP,
        status: SolveStatus,
        x: &[f64],
        objective: f64,
        row_duals: &[f64],
        mip_gap: f64,
        nodes: u64,
        iterations: u64,
    ) -> Solution {
        let mut values = BTreeMap::new();
        for (j, name) in lp.var_names.iter().enumerate() {
            values.insert(name.clone(), x.get(j).copied().unwrap_or(0.0));
        }
        let mut duals = BTreeMap::new();
        for (i, row) in lp.rows.iter().enumerate() {
            duals.insert(row.name.clone(), row_duals.get(i).copied().unwrap_or(0.0));
        }
        Solution {
            status,
            values,
            objective,
            duals,
            mip_gap,
            nodes,
            iterations,
        }
    }
}

/// Solves a standard-form problem with the configured backend, dispatching to
/// branch-and-bound when integer variables are present.
pub fn solve_standard_form(lp: &StandardFormLP, opts: &SolverOptions) -> Result<Solution> {
    match &opts.backend {
        Backend::External(template) => {
            let (solution, warnings) = invoke_external(lp, template, None)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            Ok(solution)
        }
        Backend::Internal => {
            if lp.has_integers() {
                let out = branch_and_bound(lp, opts)?;
                Ok(Solution::from_parts(
                    lp,
                    out.status,
                    &out.x,
                    out.objective,
                    &[],
                    out.mip_gap,
                    out.nodes,
                    out.iterations,
                ))
            } else {
                let out = simplex_solve(lp, opts)?;
                Ok(Solution::from_parts(
                    lp,
                    out.status,
                    &out.x,
                    out.objective,
                    &out.duals,
                    0.0,
                    0,
                    out.iterations,
                ))
            }
        }
    }
}

/// Converts and solves an assembled model.
pub fn solve_model(model: &ModelGraph, opts: &SolverOptions) -> Result<Solution> {
    let lp = to_standard_form(model);
    solve_standard_form(&lp, opts)
}
