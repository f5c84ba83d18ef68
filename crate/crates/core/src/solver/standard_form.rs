//! Loss-free conversion of a [`ModelGraph`] into a column-oriented standard
//! form with deterministic column and row order.

use std::collections::BTreeMap;

use crate::expr::VarId;
use crate::model::{Integrality, ModelGraph, Sense};

/// One constraint row in sparse form. Term column indices are strictly
/// increasing.
#[derive(Debug, Clone)]
pub struct SparseRow {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Column-oriented LP/MILP. Column order is variable-id order (module
/// registration order, then lexicographic index order within a component);
/// repeated conversions of the same model are identical.
#[derive(Debug, Clone)]
pub struct StandardFormLP {
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub rows: Vec<SparseRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub var_names: Vec<String>,
    /// LP-file-safe names, deterministic and collision-free.
    pub lp_names: Vec<String>,
    col_by_name: BTreeMap<String, usize>,
    col_by_lp_name: BTreeMap<String, usize>,
}

impl StandardFormLP {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.terms.len()).sum()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.col_by_name.get(name).copied()
    }

    pub fn column_by_lp_name(&self, lp_name: &str) -> Option<usize> {
        self.col_by_lp_name.get(lp_name).copied()
    }

    pub fn has_integers(&self) -> bool {
        self.integer.iter().any(|&b| b)
    }

    /// Largest primal violation of `x` over rows and bounds.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(j, c)| c * x[j]).sum();
            let v = match row.sense {
                Sense::Le => (lhs - row.rhs).max(0.0),
                Sense::Ge => (row.rhs - lhs).max(0.0),
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - xj).max(xj - self.upper[j]);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }
}

/// Sanitizes a model name into the LP-file character set
/// `[A-Za-z0-9_()%,.]`. Brackets map to parentheses; anything else illegal
/// maps to `_`; a leading digit or `.` gains a `_` prefix. Collisions get a
/// deterministic numeric suffix.
fn sanitize(name: &str, taken: &mut BTreeMap<String, usize>) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars() {
        let mapped = match ch {
            '[' => '(',
            ']' => ')',
            c if c.is_ascii_alphanumeric() => c,
            '_' | '(' | ')' | '%' | ',' | '.' => ch,
            _ => '_',
        };
        out.push(mapped);
    }
    if out.is_empty() {
        out.push('_');
    }
    let first = out.chars().next().unwrap();
    if first.is_ascii_digit() || first == '.' {
        out.insert(0, '_');
    }
    match taken.get_mut(&out) {
        None => {
            taken.insert(out.clone(), 1);
            out
        }
        Some(count) => {
            *count += 1;
            let suffixed = format!("{out}_{count}");
            taken.insert(suffixed.clone(), 1);
            suffixed
        }
    }
}

pub fn to_standard_form(model: &ModelGraph) -> StandardFormLP {
    let n = model.num_variables();
    let mut objective = vec![0.0; n];
    for &(var, coef) in model.objective().terms() {
        objective[var.index()] = coef;
    }

    let mut taken = BTreeMap::new();
    let mut var_names = Vec::with_capacity(n);
    let mut lp_names = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut integer = Vec::with_capacity(n);
    let mut col_by_name = BTreeMap::new();
    let mut col_by_lp_name = BTreeMap::new();
    for v in model.variables() {
        let j = v.id.index();
        var_names.push(v.name.clone());
        let lp = sanitize(&v.name, &mut taken);
        col_by_name.insert(v.name.clone(), j);
        col_by_lp_name.insert(lp.clone(), j);
        lp_names.push(lp);
        lower.push(v.lower);
        upper.push(v.upper);
        integer.push(v.integrality == Integrality::Integer);
    }

    let rows = model
        .constraints()
        .iter()
        .map(|c| SparseRow {
            name: c.name.clone(),
            terms: c
                .expr
                .terms()
                .iter()
                .map(|&(VarId(j), coef)| (j, coef))
                .collect(),
            sense: c.sense,
            // expression constants fold into the right-hand side
            rhs: c.rhs - c.expr.constant_part(),
        })
        .collect();

    StandardFormLP {
        objective,
        objective_constant: model.objective().constant_part(),
        rows,
        lower,
        upper,
        integer,
        var_names,
        lp_names,
        col_by_name,
        col_by_lp_name,
    }
}
