//! Independent oracles shared between the verification suites and the
//! acceptance gate: textbook LPs with hand-derived optima, random MILPs with
//! exhaustive lattice enumeration, and the unit-commitment pattern search
//! with an analytic inner dispatch.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use gridplan_core::compose::Options;
use gridplan_core::data::Dataset;
use gridplan_core::expr::{LinearExpression, VarId};
use gridplan_core::model::{Integrality, ModelBuilder, Sense, INF, NEG_INF};
use gridplan_core::solver::{
    simplex_solve, to_standard_form, SolveStatus, SolverOptions, StandardFormLP,
};

use super::ToySystem;

// ---------------------------------------------------------------------------
// textbook LPs
// ---------------------------------------------------------------------------

pub struct TextbookLp {
    pub name: &'static str,
    pub objective: &'static [f64],
    pub bounds: &'static [(f64, f64)],
    pub rows: &'static [(&'static [f64], Sense, f64)],
    pub expected: Expected,
}

pub enum Expected {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

pub fn build_lp(tb: &TextbookLp) -> StandardFormLP {
    let mut b = ModelBuilder::new();
    let vars: Vec<VarId> = tb
        .bounds
        .iter()
        .enumerate()
        .map(|(j, &(l, u))| {
            b.add_variable(&format!("x{j}"), &[], l, u, Integrality::Continuous)
                .unwrap()
        })
        .collect();
    for (i, (coefs, sense, rhs)) in tb.rows.iter().enumerate() {
        let mut expr = LinearExpression::zero();
        for (j, &c) in coefs.iter().enumerate() {
            expr = expr.plus_term(vars[j], c);
        }
        b.add_constraint(&format!("r{i}"), &[], expr, *sense, *rhs)
            .unwrap();
    }
    let mut obj = LinearExpression::zero();
    for (j, &c) in tb.objective.iter().enumerate() {
        obj = obj.plus_term(vars[j], c);
    }
    b.set_objective(obj);
    to_standard_form(&b.finish())
}

const P: f64 = INF;
const N: f64 = NEG_INF;

/// Twenty-plus textbook problems; each optimum is recorded next to its
/// derivation (vertex enumeration or direct reasoning).
pub fn textbook_lps() -> Vec<TextbookLp> {
    vec![
        // max 3x+2y: x+y<=4, x<=2 -> (2,2): 10
        TextbookLp {
            name: "two_var_vertex",
            objective: &[-3.0, -2.0],
            bounds: &[(0.0, P), (0.0, P)],
            rows: &[(&[1.0, 1.0], Sense::Le, 4.0), (&[1.0, 0.0], Sense::Le, 2.0)],
            expected: Expected::Optimal(-10.0),
        },
        // min x: x>=3
        TextbookLp {
            name: "single_floor",
            objective: &[1.0],
            bounds: &[(0.0, P)],
            rows: &[(&[1.0], Sense::Ge, 3.0)],
            expected: Expected::Optimal(3.0),
        },
        // max 5x+4y: 6x+4y<=24, x+2y<=6 -> (3, 1.5): 21
        TextbookLp {
            name: "classic_production",
            objective: &[-5.0, -4.0],
            bounds: &[(0.0, P), (0.0, P)],
            rows: &[
                (&[6.0, 4.0], Sense::Le, 24.0),
                (&[1.0, 2.0], Sense::Le, 6.0),
            ],
            expected: Expected::Optimal(-21.0),
        },
        // min 4x+3y: 2x+y>=8, x+y>=6 -> (2,4): 20
        TextbookLp {
            name: "covering_pair",
            objective: &[4.0, 3.0],
            bounds: &[(0.0, P), (0.0, P)],
            rows: &[(&[2.0, 1.0], Sense::Ge, 8.0), (&[1.0, 1.0], Sense::Ge, 6.0)],
            expected: Expected::Optimal(20.0),
        },
        // 2x2 transportation: supplies 20/30, demands 25/25, costs 8,6,10,4 -> 310
        TextbookLp {
            name: "transportation_2x2",
            objective: &[8.0, 6.0, 10.0, 4.0],
            bounds: &[(0.0, P); 4],
            rows: &[
                (&[1.0, 1.0, 0.0, 0.0], Sense::Le, 20.0),
                (&[0.0, 0.0, 1.0, 1.0], Sense::Le, 30.0),
                (&[1.0, 0.0, 1.0, 0.0], Sense::Ge, 25.0),
                (&[0.0, 1.0, 0.0, 1.0], Sense::Ge, 25.0),
            ],
            expected: Expected::Optimal(310.0),
        },
        // pinched equality: x+y>=1 and x+y<=1, min x+y
        TextbookLp {
            name: "pinched",
            objective: &[1.0, 1.0],
            bounds: &[(0.0, P), (0.0, P)],
            rows: &[(&[1.0, 1.0], Sense::Ge, 1.0), (&[1.0, 1.0], Sense::Le, 1.0)],
            expected: Expected::Optimal(1.0),
        },
        // free variable pushed to a row bound: min x: x >= -5
        TextbookLp {
            name: "free_floor",
            objective: &[1.0],
            bounds: &[(N, P)],
            rows: &[(&[1.0], Sense::Ge, -5.0)],
            expected: Expected::Optimal(-5.0),
        },
        // pure bounds: max x+y with x<=2, y<=3, x+y<=4
        TextbookLp {
            name: "bounded_sum",
            objective: &[-1.0, -1.0],
            bounds: &[(0.0, 2.0), (0.0, 3.0)],
            rows: &[(&[1.0, 1.0], Sense::Le, 4.0)],
            expected: Expected::Optimal(-4.0),
        },
        // diet-style: min 0.6a+0.35b: 5a+7b>=8, 4a+2b>=15 -> a=3.75: 2.25
        TextbookLp {
            name: "diet",
            objective: &[0.6, 0.35],
            bounds: &[(0.0, P), (0.0, P)],
            rows: &[
                (&[5.0, 7.0], Sense::Ge, 8.0),
                (&[4.0, 2.0], Sense::Ge, 15.0),
            ],
            expected: Expected::Optimal(2.25),
        },
        // equality system: min 2x+3y: x+y=10, x-y=2 -> (6,4): 24
        TextbookLp {
            name: "equality_pair",
            objective: &[2.0, 3.0],
            bounds: &[(0.0, P), (0.0, P)],
            rows: &[
                (&[1.0, 1.0], Sense::Eq, 10.0),
                (&[1.0, -1.0], Sense::Eq, 2.0),
            ],
            expected: Expected::Optimal(24.0),
        },
        // min -x-2y: x+y<=3, -x+y<=1 -> (1,2): -5
        TextbookLp {
            name: "negative_profit",
            objective: &[-1.0, -2.0],
            bounds: &[(0.0, P), (0.0, P)],
            rows: &[
                (&[1.0, 1.0], Sense::Le, 3.0),
                (&[-1.0, 1.0], Sense::Le, 1.0),
            ],
            expected: Expected::Optimal(-5.0),
        },
        // blend: min 3x+2y+4z: x+y+z=10, x>=2 (bound), z<=3 (bound) -> (2,8,0): 22
        TextbookLp {
            name: "blend",
            objective: &[3.0, 2.0, 4.0],
            bounds: &[(2.0, P), (0.0, P), (0.0, 3.0)],
            rows: &[(&[1.0, 1.0, 1.0], Sense::Eq, 10.0)],
            expected: Expected::Optimal(22.0),
        },
        // triple-redundant floor: min x with x>=1 three times
        TextbookLp {
            name: "redundant_floor",
            objective: &[1.0],
            bounds: &[(0.0, P)],
            rows: &[
                (&[1.0], Sense::Ge, 1.0),
                (&[1.0], Sense::Ge, 1.0),
                (&[1.0], Sense::Ge, 1.0),
            ],
            expected: Expected::Optimal(1.0),
        },
        // scale spread: min y: y >= 1e-6 x, x >= 1000 -> y = 1e-3
        TextbookLp {
            name: "scale_spread",
            objective: &[0.0, 1.0],
            bounds: &[(0.0, P), (0.0, P)],
            rows: &[
                (&[-1e-6, 1.0], Sense::Ge, 0.0),
                (&[1.0, 0.0], Sense::Ge, 1000.0),
            ],
            expected: Expected::Optimal(1e-3),
        },
        // Klee-Minty 3D: max 100x1+10x2+x3 -> 10000
        TextbookLp {
            name: "klee_minty_3",
            objective: &[-100.0, -10.0, -1.0],
            bounds: &[(0.0, P); 3],
            rows: &[
                (&[1.0, 0.0, 0.0], Sense::Le, 1.0),
                (&[20.0, 1.0, 0.0], Sense::Le, 100.0),
                (&[200.0, 20.0, 1.0], Sense::Le, 10000.0),
            ],
            expected: Expected::Optimal(-10000.0),
        },
        // free equality pair: min x+y: x+2y=4, 3x+y=7 -> (2,1): 3
        TextbookLp {
            name: "free_equalities",
            objective: &[1.0, 1.0],
            bounds: &[(N, P), (N, P)],
            rows: &[(&[1.0, 2.0], Sense::Eq, 4.0), (&[3.0, 1.0], Sense::Eq, 7.0)],
            expected: Expected::Optimal(3.0),
        },
        // zero objective over a nonempty polytope
        TextbookLp {
            name: "zero_objective",
            objective: &[0.0, 0.0],
            bounds: &[(0.0, P), (0.0, P)],
            rows: &[(&[1.0, 1.0], Sense::Ge, 1.0), (&[1.0, 1.0], Sense::Le, 5.0)],
            expected: Expected::Optimal(0.0),
        },
        // negative rhs normalization: min x: -x <= -3
        TextbookLp {
            name: "negated_row",
            objective: &[1.0],
            bounds: &[(0.0, P)],
            rows: &[(&[-1.0], Sense::Le, -3.0)],
            expected: Expected::Optimal(3.0),
        },
        // negative box: min x on [-4, -1]
        TextbookLp {
            name: "negative_box",
            objective: &[1.0],
            bounds: &[(-4.0, -1.0)],
            rows: &[],
            expected: Expected::Optimal(-4.0),
        },
        // degenerate cone at the origin: max x+y with opposing half-planes
        TextbookLp {
            name: "degenerate_cone",
            objective: &[-1.0, -1.0],
            bounds: &[(0.0, P), (0.0, P)],
            rows: &[
                (&[1.0, 1.0], Sense::Le, 0.0),
                (&[2.0, 2.0], Sense::Le, 0.0),
                (&[1.0, 2.0], Sense::Le, 0.0),
                (&[2.0, 1.0], Sense::Le, 0.0),
            ],
            expected: Expected::Optimal(0.0),
        },
        // infeasible strip
        TextbookLp {
            name: "infeasible_strip",
            objective: &[1.0],
            bounds: &[(N, P)],
            rows: &[(&[1.0], Sense::Ge, 1.0), (&[1.0], Sense::Le, 0.0)],
            expected: Expected::Infeasible,
        },
        // unbounded ray
        TextbookLp {
            name: "unbounded_ray",
            objective: &[-1.0],
            bounds: &[(0.0, P)],
            rows: &[],
            expected: Expected::Unbounded,
        },
    ]
}

// ---------------------------------------------------------------------------
// random MILPs and lattice enumeration
// ---------------------------------------------------------------------------

pub struct RandomMilp {
    pub lp: StandardFormLP,
    pub int_ranges: Vec<(i64, i64)>,
}

/// Feasible-by-construction random MILP: bounded integers (lattice capped at
/// `max_lattice` points), bounded continuous variables, rows anchored at a
/// random interior point.
pub fn random_milp(rng: &mut ChaCha8Rng, max_lattice: usize, max_cont: usize) -> RandomMilp {
    let n_int = rng.gen_range(1..=8usize);
    let n_cont = rng.gen_range(0..=max_cont);
    let mut b = ModelBuilder::new();
    let mut vars = Vec::new();
    let mut int_ranges = Vec::new();
    let mut lattice = 1usize;
    for j in 0..n_int {
        let hi = if lattice * 4 <= max_lattice {
            rng.gen_range(1..=3i64)
        } else {
            1
        };
        lattice *= (hi + 1) as usize;
        if lattice > max_lattice {
            break;
        }
        int_ranges.push((0, hi));
        vars.push(
            b.add_variable(&format!("n{j}"), &[], 0.0, hi as f64, Integrality::Integer)
                .unwrap(),
        );
    }
    for j in 0..n_cont {
        vars.push(
            b.add_variable(&format!("x{j}"), &[], 0.0, 10.0, Integrality::Continuous)
                .unwrap(),
        );
    }
    // interior anchor point keeps every instance feasible
    let anchor: Vec<f64> = vars
        .iter()
        .enumerate()
        .map(|(k, _)| {
            if k < int_ranges.len() {
                rng.gen_range(0..=int_ranges[k].1) as f64
            } else {
                rng.gen_range(0.0..10.0)
            }
        })
        .collect();
    let m = rng.gen_range(2..=6usize);
    for i in 0..m {
        let mut expr = LinearExpression::zero();
        let mut lhs_at_anchor = 0.0;
        for (k, &v) in vars.iter().enumerate() {
            if rng.gen_bool(0.6) {
                let coef = rng.gen_range(-5.0..5.0);
                expr = expr.plus_term(v, coef);
                lhs_at_anchor += coef * anchor[k];
            }
        }
        let (sense, rhs) = match rng.gen_range(0..3) {
            0 => (Sense::Le, lhs_at_anchor + rng.gen_range(0.5..6.0)),
            1 => (Sense::Ge, lhs_at_anchor - rng.gen_range(0.5..6.0)),
            _ => (Sense::Le, lhs_at_anchor + rng.gen_range(0.0..2.0)),
        };
        b.add_constraint(&format!("r{i}"), &[], expr, sense, rhs)
            .unwrap();
    }
    let mut obj = LinearExpression::zero();
    for &v in &vars {
        obj = obj.plus_term(v, rng.gen_range(-10.0..10.0));
    }
    b.set_objective(obj);
    RandomMilp {
        lp: to_standard_form(&b.finish()),
        int_ranges,
    }
}

/// Exhaustive lattice enumeration with the simplex as inner dispatch: fixes
/// every integer combination via bounds and keeps the best LP value.
pub fn enumerate_milp(milp: &RandomMilp) -> Option<f64> {
    let mut best: Option<f64> = None;
    let k = milp.int_ranges.len();
    let mut assignment = vec![0i64; k];
    loop {
        let mut lp = milp.lp.clone();
        for (j, &v) in assignment.iter().enumerate() {
            lp.lower[j] = v as f64;
            lp.upper[j] = v as f64;
        }
        let out = simplex_solve(&lp, &SolverOptions::default()).unwrap();
        if out.status == SolveStatus::Optimal {
            best = Some(match best {
                Some(b) if b <= out.objective => b,
                _ => out.objective,
            });
        }
        let mut pos = 0;
        loop {
            if pos == k {
                return best;
            }
            assignment[pos] += 1;
            if assignment[pos] <= milp.int_ranges[pos].1 {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// unit-commitment pattern search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct OracleUnit {
    pub capacity: f64,
    pub min_load: f64,
    pub vom: f64,
    pub startup_per_mw: f64,
    /// Windows in whole timepoints (1 h timepoints in these instances).
    pub min_up: usize,
    pub min_down: usize,
}

/// Exhaustive search over all on/off patterns with an analytic inner
/// dispatch. Dispatch fills must-run minima first, then cheapest headroom;
/// shortfall is unserved at `penalty`. Windows and startup accounting use
/// the same circular semantics as the engine. Returns the optimal annual
/// cost (`scale` series occurrences per year).
pub fn brute_force_uc(units: &[OracleUnit], demand: &[f64], penalty: f64, scale: f64) -> f64 {
    let t = demand.len();
    let n = units.len();
    let mut best = f64::INFINITY;
    'pattern: for mask in 0u32..(1 << (n * t)) {
        let on = |i: usize, k: usize| mask >> (i * t + k) & 1 == 1;
        for i in 0..n {
            for k in 0..t {
                let started = on(i, k) && !on(i, (k + t - 1) % t);
                let stopped = !on(i, k) && on(i, (k + t - 1) % t);
                if started {
                    for step in 0..units[i].min_up.min(t) {
                        if !on(i, (k + step) % t) {
                            continue 'pattern;
                        }
                    }
                }
                if stopped {
                    for step in 0..units[i].min_down.min(t) {
                        if on(i, (k + step) % t) {
                            continue 'pattern;
                        }
                    }
                }
            }
        }
        let mut cost = 0.0;
        for k in 0..t {
            let base: f64 = (0..n)
                .filter(|&i| on(i, k))
                .map(|i| units[i].min_load * units[i].capacity)
                .sum();
            if base > demand[k] + 1e-9 {
                continue 'pattern; // no dump energy: surplus must-run is infeasible
            }
            let mut remaining = demand[k] - base;
            let mut hour_cost: f64 = (0..n)
                .filter(|&i| on(i, k))
                .map(|i| units[i].min_load * units[i].capacity * units[i].vom)
                .sum();
            let mut order: Vec<usize> = (0..n).filter(|&i| on(i, k)).collect();
            order.sort_by(|&a, &b| units[a].vom.total_cmp(&units[b].vom).then(a.cmp(&b)));
            for i in order {
                let headroom = units[i].capacity * (1.0 - units[i].min_load);
                let take = remaining.min(headroom);
                hour_cost += take * units[i].vom;
                remaining -= take;
            }
            hour_cost += remaining.max(0.0) * penalty;
            cost += hour_cost;
            for i in 0..n {
                if on(i, k) && !on(i, (k + t - 1) % t) {
                    cost += units[i].startup_per_mw * units[i].capacity;
                }
            }
        }
        best = best.min(cost);
    }
    best * scale
}

/// Engine twin of the oracle instance: one zone, 1 h timepoints, single-unit
/// projects with discrete commitment and an unserved-load slack.
pub fn uc_dataset(units: &[OracleUnit], demand: &[f64]) -> Dataset {
    let mut sys = ToySystem::new(demand.len(), 1.0).demand("z1", demand);
    for (i, u) in units.iter().enumerate() {
        let name = format!("u{i}");
        sys = sys
            .gen(&name, "z1", "flex", u.vom)
            .with("unit_size_mw", &u.capacity.to_string())
            .with("min_load_fraction", &u.min_load.to_string())
            .with("startup_cost_per_mw", &u.startup_per_mw.to_string())
            .with("min_uptime_h", &u.min_up.to_string())
            .with("min_downtime_h", &u.min_down.to_string())
            .with("commit", "true")
            .existing(&name, u.capacity);
    }
    sys.dataset()
}

pub const UC_MODULES: &[&str] = &[
    "timescales",
    "financials",
    "balancing.load_zones",
    "energy_sources.properties",
    "generators.core.build",
    "generators.core.dispatch",
    "generators.core.no_commit",
    "generators.core.commit.operate",
    "generators.core.commit.discrete",
    "balancing.unserved_load",
];

pub fn uc_options(penalty: f64) -> Options {
    let mut options = Options::new();
    options.set("unserved_penalty", &penalty.to_string());
    options
}
