//! Two-phase primal simplex on a dense tableau.
//!
//! Entering variables follow Dantzig's rule (most negative reduced cost,
//! lowest column index on ties). After `3 * (rows + cols)` consecutive
//! degenerate pivots the solver permanently switches to Bland's rule, which
//! guarantees termination. Pivot order is fully deterministic, so identical
//! inputs produce identical pivot sequences and solutions.
//!
//! General variable bounds are handled by shifting each variable to a
//! nonnegative range (splitting free variables); finite two-sided ranges add
//! an internal upper-bound row. Row duals are reported as shadow prices
//! (dObjective/dRhs of the original row) for the original constraints only.

// dense kernels walk several parallel arrays by index
#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::model::Sense;
use crate::solver::standard_form::StandardFormLP;
use crate::solver::{SolveStatus, SolverOptions};

const PIVOT_TOL: f64 = 1e-9;
const REDUCED_COST_TOL: f64 = 1e-9;
const DEGENERATE_TOL: f64 = 1e-12;

/// Raw result of one LP solve, in the original column space.
#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Shadow price per original row, aligned with `lp.rows`.
    pub duals: Vec<f64>,
    pub iterations: u64,
}

/// How an original column maps into the transformed nonnegative space.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = lower + x'
    Shifted { col: usize, lower: f64 },
    /// x = upper - x'
    Flipped { col: usize, upper: f64 },
    /// x = x+ - x-
    Split { pos: usize, neg: usize },
    /// presolved out: x = value
    Fixed { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

/// Row in the transformed nonnegative-variable space:
/// (terms, sense, rhs, index of the original row it came from).
type TransformedRow = (Vec<(usize, f64)>, Sense, f64, Option<usize>);

/// Presolved row: (terms over live columns, adjusted rhs, original index).
type LiveRow = (Vec<(usize, f64)>, f64, usize);

struct Tableau {
    /// rows[i] has length num_cols + 1; the last cell is the rhs.
    rows: Vec<Vec<f64>>,
    kind: Vec<ColKind>,
    basis: Vec<usize>,
    /// Column that carries the unit vector of each row (slack or artificial).
    unit_col: Vec<usize>,
    num_cols: usize,
}

pub fn simplex_solve(lp: &StandardFormLP, opts: &SolverOptions) -> Result<LpOutcome> {
    let n = lp.num_vars();

    // ---- presolve: fixed variables and empty rows ----
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for j in 0..n {
        if lp.lower[j] == lp.upper[j] {
            fixed[j] = Some(lp.lower[j]);
        }
    }

    let mut live_rows: Vec<LiveRow> = Vec::new();
    let mut row_dual_sign = vec![1.0; lp.num_rows()];
    for (i, row) in lp.rows.iter().enumerate() {
        let mut rhs = row.rhs;
        let mut terms = Vec::with_capacity(row.terms.len());
        for &(j, coef) in &row.terms {
            match fixed[j] {
                Some(v) => rhs -= coef * v,
                None => terms.push((j, coef)),
            }
        }
        if terms.is_empty() {
            let ok = match row.sense {
                Sense::Le => rhs >= -opts.feasibility_tol,
                Sense::Ge => rhs <= opts.feasibility_tol,
                Sense::Eq => rhs.abs() <= opts.feasibility_tol,
            };
            if !ok {
                return Ok(infeasible_outcome(lp));
            }
            continue; // dual stays 0
        }
        live_rows.push((terms, rhs, i));
    }

    // ---- variable transform to nonnegative space ----
    let mut var_map = vec![VarMap::Fixed { value: 0.0 }; n];
    let mut next_col = 0usize;
    let mut obj_constant = lp.objective_constant;
    // (transformed col, range) internal upper-bound rows
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        if let Some(v) = fixed[j] {
            var_map[j] = VarMap::Fixed { value: v };
            obj_constant += lp.objective[j] * v;
            continue;
        }
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l.is_finite() {
            var_map[j] = VarMap::Shifted {
                col: next_col,
                lower: l,
            };
            obj_constant += lp.objective[j] * l;
            if u.is_finite() {
                bound_rows.push((next_col, u - l));
            }
            next_col += 1;
        } else if u.is_finite() {
            var_map[j] = VarMap::Flipped {
                col: next_col,
                upper: u,
            };
            obj_constant += lp.objective[j] * u;
            next_col += 1;
        } else {
            var_map[j] = VarMap::Split {
                pos: next_col,
                neg: next_col + 1,
            };
            next_col += 2;
        }
    }
    let num_structural = next_col;

    let mut trows: Vec<TransformedRow> = Vec::new();
    for (terms, mut rhs, orig) in live_rows {
        let mut tterms: Vec<(usize, f64)> = Vec::new();
        for (j, coef) in terms {
            match var_map[j] {
                VarMap::Shifted { col, lower } => {
                    rhs -= coef * lower;
                    tterms.push((col, coef));
                }
                VarMap::Flipped { col, upper } => {
                    rhs -= coef * upper;
                    tterms.push((col, -coef));
                }
                VarMap::Split { pos, neg } => {
                    tterms.push((pos, coef));
                    tterms.push((neg, -coef));
                }
                VarMap::Fixed { .. } => unreachable!("fixed columns were substituted"),
            }
        }
        trows.push((tterms, lp.rows[orig].sense, rhs, Some(orig)));
    }
    for &(col, range) in &bound_rows {
        trows.push((vec![(col, 1.0)], Sense::Le, range, None));
    }

    // normalize rhs >= 0
    for (terms, sense, rhs, orig) in trows.iter_mut() {
        if *rhs < 0.0 {
            for t in terms.iter_mut() {
                t.1 = -t.1;
            }
            *rhs = -*rhs;
            *sense = match *sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
            if let Some(i) = *orig {
                row_dual_sign[i] = -1.0;
            }
        }
    }

    // transformed objective
    let mut tobj = vec![0.0; num_structural];
    for j in 0..n {
        let c = lp.objective[j];
        if c == 0.0 {
            continue;
        }
        match var_map[j] {
            VarMap::Shifted { col, .. } => tobj[col] += c,
            VarMap::Flipped { col, .. } => tobj[col] -= c,
            VarMap::Split { pos, neg } => {
                tobj[pos] += c;
                tobj[neg] -= c;
            }
            VarMap::Fixed { .. } => {}
        }
    }

    // ---- build tableau with slack and artificial columns ----
    let m = trows.len();
    let mut kind = vec![ColKind::Structural; num_structural];
    let mut col_count = num_structural;
    let mut slack_col = vec![usize::MAX; m];
    let mut art_col = vec![usize::MAX; m];
    for (i, (_, sense, _, _)) in trows.iter().enumerate() {
        match sense {
            Sense::Le => {
                slack_col[i] = col_count;
                kind.push(ColKind::Slack);
                col_count += 1;
            }
            Sense::Ge => {
                slack_col[i] = col_count;
                kind.push(ColKind::Slack);
                col_count += 1;
                art_col[i] = col_count;
                kind.push(ColKind::Artificial);
                col_count += 1;
            }
            Sense::Eq => {
                art_col[i] = col_count;
                kind.push(ColKind::Artificial);
                col_count += 1;
            }
        }
    }

    let mut tab = Tableau {
        rows: vec![vec![0.0; col_count + 1]; m],
        kind,
        basis: vec![0; m],
        unit_col: vec![0; m],
        num_cols: col_count,
    };
    for (i, (terms, sense, rhs, _)) in trows.iter().enumerate() {
        for &(j, coef) in terms {
            tab.rows[i][j] += coef;
        }
        tab.rows[i][col_count] = *rhs;
        match sense {
            Sense::Le => {
                tab.rows[i][slack_col[i]] = 1.0;
                tab.basis[i] = slack_col[i];
                tab.unit_col[i] = slack_col[i];
            }
            Sense::Ge => {
                tab.rows[i][slack_col[i]] = -1.0;
                tab.rows[i][art_col[i]] = 1.0;
                tab.basis[i] = art_col[i];
                tab.unit_col[i] = art_col[i];
            }
            Sense::Eq => {
                tab.rows[i][art_col[i]] = 1.0;
                tab.basis[i] = art_col[i];
                tab.unit_col[i] = art_col[i];
            }
        }
    }

    let mut iterations = 0u64;
    let has_artificials = tab
        .basis
        .iter()
        .any(|&b| tab.kind[b] == ColKind::Artificial);

    // ---- phase 1 ----
    if has_artificials {
        let phase1_cost: Vec<f64> = tab
            .kind
            .iter()
            .map(|k| if *k == ColKind::Artificial { 1.0 } else { 0.0 })
            .collect();
        let status = run_phase(&mut tab, &phase1_cost, true, opts, &mut iterations)?;
        if status == PhaseStatus::Unbounded {
            // a sum of nonnegative artificials cannot be unbounded below
            return Ok(infeasible_outcome(lp));
        }
        let phase1_obj: f64 = (0..m)
            .filter(|&i| tab.kind[tab.basis[i]] == ColKind::Artificial)
            .map(|i| tab.rows[i][tab.num_cols])
            .sum();
        if phase1_obj > opts.feasibility_tol {
            return Ok(infeasible_outcome(lp));
        }
        drive_out_artificials(&mut tab);
    }

    // ---- phase 2 ----
    let mut phase2_cost = vec![0.0; tab.num_cols];
    phase2_cost[..num_structural].copy_from_slice(&tobj);
    let status = run_phase(&mut tab, &phase2_cost, false, opts, &mut iterations)?;
    if status == PhaseStatus::Unbounded {
        return Ok(LpOutcome {
            status: SolveStatus::Unbounded,
            x: vec![0.0; n],
            objective: f64::NEG_INFINITY,
            duals: vec![0.0; lp.num_rows()],
            iterations,
        });
    }

    // ---- extract primal values ----
    let mut tx = vec![0.0; tab.num_cols];
    for i in 0..m {
        tx[tab.basis[i]] = tab.rows[i][tab.num_cols].max(0.0);
    }
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = match var_map[j] {
            VarMap::Fixed { value } => value,
            VarMap::Shifted { col, lower } => lower + tx[col],
            VarMap::Flipped { col, upper } => upper - tx[col],
            VarMap::Split { pos, neg } => tx[pos] - tx[neg],
        };
    }
    let objective = lp.objective_value(&x);
    let _ = obj_constant; // folded into objective_value via original data

    // ---- duals: y_i = -(reduced cost of the row's unit column) ----
    let reduced = reduced_costs(&tab, &phase2_cost);
    let mut duals = vec![0.0; lp.num_rows()];
    for (i, (_, _, _, orig)) in trows.iter().enumerate() {
        if let Some(oi) = *orig {
            let d = reduced[tab.unit_col[i]];
            duals[oi] = -d * row_dual_sign[oi];
        }
    }

    Ok(LpOutcome {
        status: SolveStatus::Optimal,
        x,
        objective,
        duals,
        iterations,
    })
}

fn infeasible_outcome(lp: &StandardFormLP) -> LpOutcome {
    LpOutcome {
        status: SolveStatus::Infeasible,
        x: vec![0.0; lp.num_vars()],
        objective: f64::INFINITY,
        duals: vec![0.0; lp.num_rows()],
        iterations: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PhaseStatus {
    Optimal,
    Unbounded,
}

fn reduced_costs(tab: &Tableau, cost: &[f64]) -> Vec<f64> {
    let m = tab.rows.len();
    let mut d = cost.to_vec();
    for i in 0..m {
        let cb = cost[tab.basis[i]];
        if cb == 0.0 {
            continue;
        }
        let row = &tab.rows[i];
        for (j, dj) in d.iter_mut().enumerate() {
            *dj -= cb * row[j];
        }
    }
    d
}

/// Runs simplex iterations to optimality or unboundedness for one phase.
fn run_phase(
    tab: &mut Tableau,
    cost: &[f64],
    phase_one: bool,
    opts: &SolverOptions,
    iterations: &mut u64,
) -> Result<PhaseStatus> {
    let m = tab.rows.len();
    let rhs_col = tab.num_cols;
    let mut d = reduced_costs(tab, cost);
    let stall_limit = 3 * (m + tab.num_cols);
    let mut degenerate_run = 0usize;
    let mut bland = false;

    loop {
        // entering column
        let mut entering: Option<usize> = None;
        if bland {
            for j in 0..tab.num_cols {
                if tab.kind[j] == ColKind::Artificial && !phase_one {
                    continue;
                }
                if d[j] < -REDUCED_COST_TOL {
                    entering = Some(j);
                    break;
                }
            }
        } else {
            let mut best = -REDUCED_COST_TOL;
            for j in 0..tab.num_cols {
                if tab.kind[j] == ColKind::Artificial && !phase_one {
                    continue;
                }
                if d[j] < best {
                    best = d[j];
                    entering = Some(j);
                }
            }
        }
        let Some(c) = entering else {
            return Ok(PhaseStatus::Optimal);
        };

        // ratio test; ties go to the smallest basic-variable index
        let mut leaving: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let a = tab.rows[i][c];
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = (tab.rows[i][rhs_col] / a).max(0.0);
            let better = match leaving {
                None => true,
                Some(r) => {
                    ratio < best_ratio - DEGENERATE_TOL
                        || (ratio <= best_ratio + DEGENERATE_TOL && tab.basis[i] < tab.basis[r])
                }
            };
            if better {
                best_ratio = ratio.min(best_ratio);
                leaving = Some(i);
            }
        }
        let Some(r) = leaving else {
            return Ok(PhaseStatus::Unbounded);
        };

        if best_ratio <= DEGENERATE_TOL {
            degenerate_run += 1;
            if degenerate_run > stall_limit {
                bland = true;
            }
        } else {
            degenerate_run = 0;
        }

        pivot(tab, r, c, &mut d);
        *iterations += 1;
        if *iterations > opts.max_iterations {
            return Err(Error::IterationLimit(opts.max_iterations));
        }
    }
}

fn pivot(tab: &mut Tableau, r: usize, c: usize, d: &mut [f64]) {
    let rhs_col = tab.num_cols;
    let piv = tab.rows[r][c];
    let inv = 1.0 / piv;
    for v in tab.rows[r].iter_mut() {
        *v *= inv;
    }
    tab.rows[r][c] = 1.0;

    let pivot_row = std::mem::take(&mut tab.rows[r]);
    for (i, row) in tab.rows.iter_mut().enumerate() {
        if i == r {
            continue;
        }
        let factor = row[c];
        if factor != 0.0 {
            for (v, pv) in row.iter_mut().zip(pivot_row.iter()) {
                *v -= factor * pv;
            }
            row[c] = 0.0;
        }
    }
    let factor = d[c];
    if factor != 0.0 {
        for (v, pv) in d.iter_mut().zip(pivot_row.iter().take(rhs_col)) {
            *v -= factor * pv;
        }
        d[c] = 0.0;
    }
    tab.rows[r] = pivot_row;
    tab.basis[r] = c;
}

/// Pivots basic artificial variables (value 0 after a successful phase 1) out
/// of the basis where possible. Rows where no structural or slack pivot
/// exists are redundant; their artificial stays basic at zero and is excluded
/// from entering, so it stays at zero through phase 2.
fn drive_out_artificials(tab: &mut Tableau) {
    let m = tab.rows.len();
    for r in 0..m {
        if tab.kind[tab.basis[r]] != ColKind::Artificial {
            continue;
        }
        let mut target: Option<usize> = None;
        for j in 0..tab.num_cols {
            if tab.kind[j] == ColKind::Artificial {
                continue;
            }
            if tab.rows[r][j].abs() > PIVOT_TOL {
                target = Some(j);
                break;
            }
        }
        if let Some(c) = target {
            let mut dummy = vec![0.0; tab.num_cols];
            pivot(tab, r, c, &mut dummy);
        }
    }
}
