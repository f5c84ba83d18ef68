//! Best-first branch-and-bound over LP relaxations.
//!
//! Nodes are explored in order of their relaxation bound (ties broken by
//! creation order), branching on the most-fractional integer variable with
//! ties broken by lowest column index, so the search is deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::solver::simplex::simplex_solve;
use crate::solver::standard_form::StandardFormLP;
use crate::solver::{SolveStatus, SolverOptions};

#[derive(Debug, Clone)]
pub struct MipOutcome {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub mip_gap: f64,
    /// Number of branched (explored) nodes; 0 when the root relaxation is
    /// already integral.
    pub nodes: u64,
    pub iterations: u64,
}

struct Node {
    bound: f64,
    id: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse for lowest-bound-first,
        // then lowest id first.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn most_fractional(x: &[f64], integer: &[bool], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&xi, &is_int)) in x.iter().zip(integer).enumerate() {
        if !is_int {
            continue;
        }
        let frac = xi - xi.floor();
        let dist = frac.min(1.0 - frac);
        if dist <= tol {
            continue;
        }
        match best {
            Some((_, d)) if dist <= d => {}
            _ => best = Some((j, dist)),
        }
    }
    best.map(|(j, _)| j)
}

pub fn branch_and_bound(lp: &StandardFormLP, opts: &SolverOptions) -> Result<MipOutcome> {
    let mut iterations = 0u64;
    let mut scratch = lp.clone();

    let mut solve_with_bounds = |lower: &[f64],
                                 upper: &[f64],
                                 iterations: &mut u64|
     -> Result<(SolveStatus, Vec<f64>, f64)> {
        scratch.lower.copy_from_slice(lower);
        scratch.upper.copy_from_slice(upper);
        let out = simplex_solve(&scratch, opts)?;
        *iterations += out.iterations;
        Ok((out.status, out.x, out.objective))
    };

    let (status, x, bound) = solve_with_bounds(&lp.lower, &lp.upper, &mut iterations)?;
    match status {
        SolveStatus::Infeasible => {
            return Ok(MipOutcome {
                status: SolveStatus::Infeasible,
                x,
                objective: f64::INFINITY,
                mip_gap: 0.0,
                nodes: 0,
                iterations,
            })
        }
        SolveStatus::Unbounded => {
            return Ok(MipOutcome {
                status: SolveStatus::Unbounded,
                x,
                objective: f64::NEG_INFINITY,
                mip_gap: 0.0,
                nodes: 0,
                iterations,
            })
        }
        _ => {}
    }

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut next_id = 0u64;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut nodes_explored = 0u64;

    if most_fractional(&x, &lp.integer, opts.integrality_tol).is_none() {
        return Ok(MipOutcome {
            status: SolveStatus::Optimal,
            x,
            objective: bound,
            mip_gap: 0.0,
            nodes: 0,
            iterations,
        });
    }
    heap.push(Node {
        bound,
        id: next_id,
        lower: lp.lower.clone(),
        upper: lp.upper.clone(),
        x,
    });
    next_id += 1;

    let gap_of = |inc: f64, bound: f64| ((inc - bound) / inc.abs().max(1.0)).max(0.0);
    let mut best_open_bound: Option<f64> = None;

    while let Some(node) = heap.pop() {
        if let Some((_, inc_obj)) = &incumbent {
            if gap_of(*inc_obj, node.bound) <= opts.relative_mip_gap {
                // best-first order: every remaining node is at least as weak
                best_open_bound = Some(node.bound);
                break;
            }
        }
        nodes_explored += 1;
        if nodes_explored > opts.max_nodes {
            return match incumbent {
                Some((x, obj)) => Ok(MipOutcome {
                    status: SolveStatus::GapLimit,
                    mip_gap: gap_of(obj, node.bound),
                    x,
                    objective: obj,
                    nodes: nodes_explored,
                    iterations,
                }),
                None => Err(Error::NodeLimit(opts.max_nodes)),
            };
        }

        let branch_col = most_fractional(&node.x, &lp.integer, opts.integrality_tol)
            .expect("only fractional nodes are queued");
        let pivot_val = node.x[branch_col];
        let children = [
            (node.lower[branch_col], pivot_val.floor()),
            (pivot_val.floor() + 1.0, node.upper[branch_col]),
        ];
        for (lo, hi) in children {
            if lo > hi {
                continue;
            }
            let mut lower = node.lower.clone();
            let mut upper = node.upper.clone();
            lower[branch_col] = lo;
            upper[branch_col] = hi;
            let (status, cx, cbound) = solve_with_bounds(&lower, &upper, &mut iterations)?;
            if status != SolveStatus::Optimal {
                continue;
            }
            if let Some((_, inc_obj)) = &incumbent {
                if gap_of(*inc_obj, cbound) <= opts.relative_mip_gap {
                    continue;
                }
            }
            if most_fractional(&cx, &lp.integer, opts.integrality_tol).is_none() {
                let replace = match &incumbent {
                    Some((_, inc_obj)) => cbound < *inc_obj,
                    None => true,
                };
                if replace {
                    incumbent = Some((cx, cbound));
                }
            } else {
                heap.push(Node {
                    bound: cbound,
                    id: next_id,
                    lower,
                    upper,
                    x: cx,
                });
                next_id += 1;
            }
        }
    }

    match incumbent {
        Some((x, obj)) => {
            let best_open = best_open_bound
                .or_else(|| heap.peek().map(|n| n.bound))
                .unwrap_or(obj);
            Ok(MipOutcome {
                status: SolveStatus::Optimal,
                mip_gap: gap_of(obj, best_open.min(obj)),
                x,
                objective: obj,
                nodes: nodes_explored,
                iterations,
            })
        }
        None => Ok(MipOutcome {
            status: SolveStatus::Infeasible,
            x: vec![0.0; lp.num_vars()],
            objective: f64::INFINITY,
            mip_gap: 0.0,
            nodes: nodes_explored,
            iterations,
        }),
    }
}
