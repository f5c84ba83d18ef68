//! Unit commitment: chain invariants, circular telescoping, the brute-force
//! pattern-search oracle, discrete build/commit behavior, and fuel-use
//! envelopes.

mod common;

use common::oracles::*;
use common::*;

use gridplan_core::compose::Options;
use gridplan_core::generators::fuel_envelope;

const COMMIT_MODULES: &[&str] = &[
    "timescales",
    "financials",
    "balancing.load_zones",
    "energy_sources.properties",
    "generators.core.build",
    "generators.core.dispatch",
    "generators.core.no_commit",
    "generators.core.commit.operate",
    "balancing.unserved_load",
];

const DISCRETE_COMMIT_MODULES: &[&str] = &[
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

fn solve_uc(units: &[OracleUnit], demand: &[f64], penalty: f64) -> f64 {
    let mut options = Options::new();
    options.set("unserved_penalty", &penalty.to_string());
    let (_, _, sol) = solve_expect_optimal(
        DISCRETE_COMMIT_MODULES,
        &uc_dataset(units, demand),
        &options,
    );
    sol.objective
}

#[test]
fn min_load_band_holds_at_the_optimum() {
    // committed 100 MW with min load 0.4 dispatches within [40, 100]
    let units = [OracleUnit {
        capacity: 100.0,
        min_load: 0.4,
        vom: 20.0,
        startup_per_mw: 0.0,
        min_up: 0,
        min_down: 0,
    }];
    let demand = [30.0, 80.0];
    let mut options = Options::new();
    options.set("unserved_penalty", "1000");
    let (model, _ctx, sol) = solve_expect_optimal(
        DISCRETE_COMMIT_MODULES,
        &uc_dataset(&units, &demand),
        &options,
    );
    // t0 demand 30 < min load 40: cheaper to shed 30 than to run at 40?
    // no: shedding costs 30*1000 = 30000 vs running 40*20 = 800 but balance
    // is an equality, so the unit cannot run at 40 against demand 30.
    // The optimum keeps the unit off at t0 and serves t1 fully.
    assert!(sol.value("Commit[u0,t0]").abs() < 1e-6);
    assert!(rel_close(sol.value("Commit[u0,t1]"), 100.0, 1e-6));
    let d1 = sol.value("DispatchGen[u0,t1]");
    assert!(d1 >= 40.0 - 1e-6 && d1 <= 100.0 + 1e-6);
    let _ = model;
}

#[test]
fn startups_and_shutdowns_telescope_around_the_series() {
    let units = [
        OracleUnit {
            capacity: 60.0,
            min_load: 0.3,
            vom: 15.0,
            startup_per_mw: 8.0,
            min_up: 2,
            min_down: 1,
        },
        OracleUnit {
            capacity: 80.0,
            min_load: 0.4,
            vom: 35.0,
            startup_per_mw: 4.0,
            min_up: 1,
            min_down: 2,
        },
    ];
    let demand = [35.0, 90.0, 120.0, 50.0];
    let mut options = Options::new();
    options.set("unserved_penalty", "900");
    let (model, ctx, sol) = solve_expect_optimal(
        DISCRETE_COMMIT_MODULES,
        &uc_dataset(&units, &demand),
        &options,
    );
    let ts = ctx.timescales.as_ref().unwrap();
    for project in ["u0", "u1"] {
        let net = gridplan_core::generators::commitment_cycle_residual(
            &model,
            ts,
            &sol,
            project,
            gridplan_core::timescales::SeriesId(0),
        );
        assert!(
            net.abs() < 1e-6,
            "telescoping violated for {project}: {net}"
        );
    }
    // chain: dispatch <= commit <= derated capacity
    let values = sol.dense_values(&model);
    for g in 0..2 {
        for tp in ts.timepoint_ids() {
            let d = values[ctx.gen.dispatch[&(g, tp.0)].index()];
            let c = values[ctx.gen.commit[&(g, tp.0)].index()];
            assert!(d <= c + 1e-6);
            assert!(c <= units[g].capacity + 1e-6);
        }
    }
}

#[test]
fn engine_matches_brute_force_on_two_by_four() {
    let units = [
        OracleUnit {
            capacity: 60.0,
            min_load: 0.4,
            vom: 18.0,
            startup_per_mw: 9.0,
            min_up: 2,
            min_down: 1,
        },
        OracleUnit {
            capacity: 80.0,
            min_load: 0.3,
            vom: 32.0,
            startup_per_mw: 3.0,
            min_up: 1,
            min_down: 2,
        },
    ];
    let demand = [45.0, 85.0, 130.0, 60.0];
    let penalty = 700.0;
    let scale = 8766.0 / 4.0;
    let engine = solve_uc(&units, &demand, penalty);
    let oracle = brute_force_uc(&units, &demand, penalty, scale);
    assert!(
        rel_close(engine, oracle, 1e-6),
        "engine {engine} vs brute force {oracle}"
    );
}

#[test]
fn reserve_requirement_forces_a_second_unit_online() {
    // energy alone needs one 60 MW unit (demand peaks at 55), but a 10 MW
    // spinning requirement cannot fit in its headroom at the peak
    let base = ToySystem::new(2, 1.0)
        .demand("z1", &[40.0, 55.0])
        .gen("u0", "z1", "flex", 20.0)
        .with("unit_size_mw", "60")
        .with("min_load_fraction", "0.3")
        .with("startup_cost_per_mw", "2")
        .with("commit", "true")
        .existing("u0", 60.0)
        .gen("u1", "z1", "flex", 45.0)
        .with("unit_size_mw", "60")
        .with("min_load_fraction", "0.3")
        .with("startup_cost_per_mw", "2")
        .with("commit", "true")
        .existing("u1", 60.0);
    let no_reserve = base.dataset();
    let with_reserve = ToySystem::new(2, 1.0)
        .demand("z1", &[40.0, 55.0])
        .gen("u0", "z1", "flex", 20.0)
        .with("unit_size_mw", "60")
        .with("min_load_fraction", "0.3")
        .with("startup_cost_per_mw", "2")
        .with("commit", "true")
        .existing("u0", 60.0)
        .gen("u1", "z1", "flex", 45.0)
        .with("unit_size_mw", "60")
        .with("min_load_fraction", "0.3")
        .with("startup_cost_per_mw", "2")
        .with("commit", "true")
        .existing("u1", 60.0)
        .table(
            "reserve_params",
            &["area", "load_fraction", "vre_fraction", "contingency_mw"],
            &[&["system", "0", "0", "10"]],
        )
        .dataset();

    let mut options = Options::new();
    options.set("unserved_penalty", "800");
    let (_, _, plain) = solve_expect_optimal(DISCRETE_COMMIT_MODULES, &no_reserve, &options);
    let reserve_modules: Vec<&str> = DISCRETE_COMMIT_MODULES
        .iter()
        .copied()
        .chain([
            "balancing.operating_reserves.areas",
            "balancing.operating_reserves.spinning_reserves_advanced",
        ])
        .collect();
    let (_, _, reserved) = solve_expect_optimal(&reserve_modules, &with_reserve, &options);
    // without reserves only u0 commits at the peak
    assert!(plain.value("Commit[u1,t1]").abs() < 1e-6);
    // the requirement brings the second unit online
    assert!(reserved.value("Commit[u1,t1]") >= 60.0 - 1e-6);
    assert!(reserved.objective > plain.objective);
}

#[test]
fn discrete_build_rounds_up_to_whole_units() {
    // 120 MW must-serve with 50 MW units: three units
    let data = ToySystem::new(1, 1.0)
        .demand("z1", &[120.0])
        .gen("gas", "z1", "flex", 10.0)
        .with("unit_size_mw", "50")
        .buildable("gas", 500000.0)
        .dataset();
    let modules: Vec<&str> = BASE_MODULES
        .iter()
        .copied()
        .chain(["generators.core.proj_discrete_build"])
        .collect();
    let (_, _, discrete) = solve_expect_optimal(&modules, &data, &Options::new());
    assert!(rel_close(discrete.value("BuildUnits[gas,2025]"), 3.0, 1e-6));
    assert!(rel_close(discrete.value("BuildGen[gas,2025]"), 150.0, 1e-6));

    // LP relaxation builds exactly 120 and can only be cheaper
    let (_, _, relaxed) = solve_expect_optimal(BASE_MODULES, &data, &Options::new());
    assert!(rel_close(relaxed.value("BuildGen[gas,2025]"), 120.0, 1e-6));
    assert!(relaxed.objective <= discrete.objective + 1e-6);
}

#[test]
fn discrete_commitment_floors_night_dispatch() {
    // a 50 MW unit with min load 0.4 must emit at least 20 MW while on; a
    // 10 MW night load cannot absorb it, so the surplus is infeasible
    // without slack and the unit prefers to shut down when windows allow
    let units = [OracleUnit {
        capacity: 50.0,
        min_load: 0.4,
        vom: 10.0,
        startup_per_mw: 1.0,
        min_up: 0,
        min_down: 0,
    }];
    let demand = [10.0, 45.0];
    let penalty = 2000.0;
    let engine = solve_uc(&units, &demand, penalty);
    let oracle = brute_force_uc(&units, &demand, penalty, 8766.0 / 2.0);
    assert!(rel_close(engine, oracle, 1e-6));
    // the oracle's optimum sheds the 10 MW night load rather than
    // violating the dispatch floor
    let per_day = engine / (8766.0 / 2.0);
    let expected = 10.0 * penalty + 45.0 * 10.0 + 50.0 * 1.0;
    assert!(rel_close(per_day, expected, 1e-6));
}

#[test]
fn lp_relaxation_never_exceeds_the_milp_optimum() {
    let units = [
        OracleUnit {
            capacity: 40.0,
            min_load: 0.5,
            vom: 12.0,
            startup_per_mw: 6.0,
            min_up: 1,
            min_down: 1,
        },
        OracleUnit {
            capacity: 70.0,
            min_load: 0.2,
            vom: 28.0,
            startup_per_mw: 2.0,
            min_up: 2,
            min_down: 1,
        },
    ];
    let demand = [30.0, 70.0, 95.0, 40.0];
    let mut options = Options::new();
    options.set("unserved_penalty", "600");
    let data = uc_dataset(&units, &demand);
    let (_, _, milp) = solve_expect_optimal(DISCRETE_COMMIT_MODULES, &data, &options);
    let (_, _, lp) = solve_expect_optimal(COMMIT_MODULES, &data, &options);
    assert!(lp.objective <= milp.objective + 1e-6 * milp.objective.abs());
}

const FUEL_MODULES: &[&str] = &[
    "timescales",
    "financials",
    "balancing.load_zones",
    "energy_sources.properties",
    "generators.core.build",
    "generators.core.dispatch",
    "generators.core.no_commit",
    "generators.core.commit.operate",
    "generators.core.commit.fuel_use",
    "generators.core.commit.discrete",
    "energy_sources.fuel_costs.simple",
    "balancing.unserved_load",
];

#[test]
fn fuel_use_sits_on_the_segment_envelope_at_the_optimum() {
    let segments = [(1.0, 7.0), (0.5, 8.0)];
    let data = ToySystem::new(4, 1.0)
        .demand("z1", &[35.0, 45.0, 60.0, 90.0])
        .gen("gas", "z1", "gas", 2.0)
        .with("unit_size_mw", "100")
        .with("min_load_fraction", "0.3")
        .with("commit", "true")
        .existing("gas", 100.0)
        .segments("gas", &segments)
        .table(
            "fuel_simple_costs",
            &["zone", "fuel", "period", "price_per_mmbtu"],
            &[&["z1", "gas", "2025", "5"]],
        )
        .dataset();
    let mut options = Options::new();
    options.set("unserved_penalty", "3000");
    let (model, ctx, sol) = solve_expect_optimal(FUEL_MODULES, &data, &options);
    let values = sol.dense_values(&model);
    let ts = ctx.timescales.as_ref().unwrap();
    for tp in ts.timepoint_ids() {
        let commit = values[ctx.gen.commit[&(0, tp.0)].index()];
        let dispatch = values[ctx.gen.dispatch[&(0, tp.0)].index()];
        let fuel = values[ctx.gen.fuel_use[&(0, tp.0, 1)].index()];
        let envelope = fuel_envelope(&segments, commit, dispatch);
        assert!(
            (fuel - envelope).abs() < 1e-6,
            "fuel {fuel} off envelope {envelope} at {}",
            ts.timepoint(tp).id
        );
    }
    // direct evaluation from the examples: slope-only segment at
    // commit 100 / dispatch 60 gives 530 MMBtu/h
    assert!((fuel_envelope(&[(0.5, 8.0)], 100.0, 60.0) - 530.0).abs() < 1e-12);
}

#[test]
fn dual_fuel_unit_exhausts_the_cheap_capped_fuel_first() {
    // fuel A: cheap but capped in a market; fuel B: flat-priced backup.
    // slope-only fuel need: 8 MMBtu/MWh * 100 MW * 1 h/yr-equivalent
    let data = ToySystem::new(1, 1.0)
        .source("fuel_a", true, 0.0, false)
        .source("fuel_b", true, 0.0, false)
        .demand("z1", &[100.0])
        .gen("dual", "z1", "fuel_a;fuel_b", 0.0)
        .existing("dual", 150.0)
        .segments("dual", &[(0.0, 8.0)])
        .table(
            "fuel_markets",
            &["market", "zone", "fuel"],
            &[&["mkt_a", "z1", "fuel_a"]],
        )
        .table(
            "fuel_supply_tiers",
            &[
                "market",
                "period",
                "tier",
                "price_per_mmbtu",
                "limit_mmbtu_per_year",
            ],
            &[&["mkt_a", "2025", "0", "3", "3000000"]],
        )
        .table(
            "fuel_simple_costs",
            &["zone", "fuel", "period", "price_per_mmbtu"],
            &[&["z1", "fuel_b", "2025", "6"]],
        )
        .dataset();
    let modules: Vec<&str> = BASE_MODULES
        .iter()
        .copied()
        .chain([
            "energy_sources.fuel_costs.simple",
            "energy_sources.fuel_costs.markets",
        ])
        .collect();
    let (model, ctx, sol) = solve_expect_optimal(&modules, &data, &Options::new());
    let values = sol.dense_values(&model);
    let ts = ctx.timescales.as_ref().unwrap();
    let sources = ctx.sources.as_ref().unwrap();
    let fa = sources.index("fuel_a").unwrap();
    let fb = sources.index("fuel_b").unwrap();
    // annualized total need: 8 * 100 MW * 8766 h = 7,012,800 MMBtu/yr;
    // fuel A covers its 3,000,000 cap, fuel B the rest
    let annual = |f: usize| -> f64 {
        ts.timepoint_ids()
            .map(|tp| values[ctx.gen.fuel_use[&(0, tp.0, f)].index()] * ts.weight(tp))
            .sum()
    };
    assert!(rel_close(annual(fa), 3_000_000.0, 1e-6));
    assert!(rel_close(annual(fb), 7_012_800.0 - 3_000_000.0, 1e-6));
}
