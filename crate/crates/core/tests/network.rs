//! Transport-model transmission and demand-side balancing behavior on
//! two-zone toys with closed-form optima.

mod common;

use common::*;

use gridplan_core::compose::Options;
use gridplan_core::expr::VarId;
use gridplan_core::financials::crf;

const YEAR: f64 = 8766.0;

const TX_MODULES: &[&str] = &[
    "timescales",
    "financials",
    "balancing.load_zones",
    "energy_sources.properties",
    "generators.core.build",
    "generators.core.dispatch",
    "generators.core.no_commit",
    "transmission.transport",
];

fn two_zone(existing_mw: f64, efficiency: f64, tx_cost: f64) -> gridplan_core::data::Dataset {
    ToySystem::new(1, 1.0)
        .zones(&["a", "b"])
        .demand("a", &[0.0])
        .demand("b", &[100.0])
        .gen("cheap_a", "a", "flex", 10.0)
        .existing("cheap_a", 500.0)
        .gen("local_b", "b", "flex", 200.0)
        .existing("local_b", 500.0)
        .table(
            "transmission_lines",
            &[
                "line",
                "zone_a",
                "zone_b",
                "existing_mw",
                "efficiency",
                "derate",
                "life_years",
            ],
            &[&[
                "ab",
                "a",
                "b",
                &existing_mw.to_string(),
                &efficiency.to_string(),
                "0",
                "40",
            ]],
        )
        .table(
            "tx_build_costs",
            &["line", "period", "cost_per_mw"],
            &[&["ab", "2025", &tx_cost.to_string()]],
        )
        .dataset()
}

#[test]
fn delivered_power_is_efficiency_times_sent() {
    // demand 100 in b served remotely: sent = 100 / 0.95
    let (model, _ctx, sol) =
        solve_expect_optimal(TX_MODULES, &two_zone(200.0, 0.95, 100.0), &Options::new());
    let sent = sol.value("DispatchTx[ab,fwd,t0]");
    assert!(rel_close(sent, 100.0 / 0.95, 1e-7));
    assert!(rel_close(sol.value("DispatchGen[cheap_a,t0]"), sent, 1e-7));
    let _ = model;
}

#[test]
fn line_builds_exactly_peak_sent_flow_when_remote_power_is_cheaper() {
    // zero existing capacity; building the line plus remote energy beats the
    // 200 $/MWh local unit. hand oracle for the build level:
    //   sent = 100 / 0.94, BuildTx = sent (binding at the single peak)
    let cost = 400_000.0;
    let (model, _ctx, sol) =
        solve_expect_optimal(TX_MODULES, &two_zone(0.0, 0.94, cost), &Options::new());
    let sent = 100.0 / 0.94;
    assert!(rel_close(sol.value("BuildTx[ab,2025]"), sent, 1e-6));
    assert!(rel_close(sol.value("DispatchTx[ab,fwd,t0]"), sent, 1e-6));
    // objective oracle: annualized line capital + remote energy
    let expected = crf(0.05, 40) * cost * sent + 10.0 * sent * YEAR;
    assert!(rel_close(sol.objective, expected, 1e-9));
    let _ = model;
}

#[test]
fn expensive_line_leaves_load_on_local_generation() {
    // line at 40 M$/MW can never pay for itself against the local unit
    let (_, _, sol) = solve_expect_optimal(
        TX_MODULES,
        &two_zone(0.0, 0.94, 40_000_000.0),
        &Options::new(),
    );
    assert!(sol.value("BuildTx[ab,2025]").abs() < 1e-6);
    assert!(rel_close(sol.value("DispatchGen[local_b,t0]"), 100.0, 1e-7));
}

#[test]
fn more_existing_capacity_never_raises_the_objective() {
    let (_, _, small) = solve_expect_optimal(
        TX_MODULES,
        &two_zone(20.0, 0.94, 400_000.0),
        &Options::new(),
    );
    let (_, _, large) = solve_expect_optimal(
        TX_MODULES,
        &two_zone(60.0, 0.94, 400_000.0),
        &Options::new(),
    );
    assert!(large.objective <= small.objective + 1e-6);
}

#[test]
fn lossless_unconstrained_line_reproduces_the_merged_zone_optimum() {
    let split = ToySystem::new(2, 1.0)
        .zones(&["a", "b"])
        .demand("a", &[30.0, 50.0])
        .demand("b", &[70.0, 90.0])
        .gen("gen_a", "a", "flex", 12.0)
        .existing("gen_a", 500.0)
        .gen("peak_b", "b", "flex", 60.0)
        .existing("peak_b", 500.0)
        .table(
            "transmission_lines",
            &[
                "line",
                "zone_a",
                "zone_b",
                "existing_mw",
                "efficiency",
                "derate",
                "life_years",
            ],
            &[&["ab", "a", "b", "1000000", "1.0", "0", "40"]],
        )
        .dataset();
    let merged = ToySystem::new(2, 1.0)
        .demand("z1", &[100.0, 140.0])
        .gen("gen_a", "z1", "flex", 12.0)
        .existing("gen_a", 500.0)
        .gen("peak_b", "z1", "flex", 60.0)
        .existing("peak_b", 500.0)
        .dataset();
    let (_, _, networked) = solve_expect_optimal(TX_MODULES, &split, &Options::new());
    let (_, _, copperplate) = solve_expect_optimal(BASE_MODULES, &merged, &Options::new());
    assert!(rel_close(networked.objective, copperplate.objective, 1e-6));
}

#[test]
fn balance_rows_carry_antisymmetric_transfer_coefficients() {
    let data = two_zone(50.0, 0.9, 100_000.0);
    let catalog = gridplan_core::compose::ModuleCatalog::builtin();
    let (model, _ctx) =
        gridplan_core::compose::build_model(&catalog, &names(TX_MODULES), &data, &Options::new())
            .unwrap();
    let flow: VarId = model.var_id("DispatchTx[ab,fwd,t0]").unwrap();
    let sending = model.constraint("Energy_Balance[a,t0]").unwrap();
    let receiving = model.constraint("Energy_Balance[b,t0]").unwrap();
    // withdrawal enters the sending row negated; delivery is scaled by
    // efficiency in the receiving row
    assert_eq!(sending.expr.coefficient(flow), -1.0);
    assert_eq!(receiving.expr.coefficient(flow), 0.9);
}

#[test]
fn opposed_flows_never_run_simultaneously_at_the_optimum() {
    // bidirectional price incentive: each zone is cheaper in one hour
    let data = ToySystem::new(2, 1.0)
        .zones(&["a", "b"])
        .demand("a", &[80.0, 80.0])
        .demand("b", &[80.0, 80.0])
        .gen("gen_a", "a", "flex", 10.0)
        .existing("gen_a", 90.0)
        .gen("gen_b", "b", "flex", 11.0)
        .existing("gen_b", 200.0)
        .table(
            "transmission_lines",
            &[
                "line",
                "zone_a",
                "zone_b",
                "existing_mw",
                "efficiency",
                "derate",
                "life_years",
            ],
            &[&["ab", "a", "b", "100", "0.92", "0", "40"]],
        )
        .dataset();
    let (_, _, sol) = solve_expect_optimal(TX_MODULES, &data, &Options::new());
    for t in 0..2 {
        let fwd = sol.value(&format!("DispatchTx[ab,fwd,t{t}]"));
        let rev = sol.value(&format!("DispatchTx[ab,rev,t{t}]"));
        assert!(
            fwd * rev < 1e-9,
            "wasteful round-trip flow at t{t}: fwd {fwd}, rev {rev}"
        );
    }
}

const SHIFT_MODULES: &[&str] = &[
    "timescales",
    "financials",
    "balancing.load_zones",
    "energy_sources.properties",
    "generators.core.build",
    "generators.core.dispatch",
    "generators.core.no_commit",
    "balancing.demand_response.shift",
];

fn shift_system(peak_vom: f64) -> gridplan_core::data::Dataset {
    ToySystem::new(2, 1.0)
        .demand("z1", &[100.0, 50.0])
        .gen("base", "z1", "flex", 20.0)
        .existing("base", 90.0)
        .gen("peak", "z1", "flex", peak_vom)
        .existing("peak", 200.0)
        .table(
            "demand_shift",
            &["shift_fraction", "cap_multiplier"],
            &[&["0.10", "1.8"]],
        )
        .dataset()
}

#[test]
fn flat_prices_leave_shifting_idle() {
    // both hours priced identically: the epsilon tiebreak selects zero shift
    let (_, ctx, sol) = solve_expect_optimal(SHIFT_MODULES, &shift_system(20.0), &Options::new());
    let model_values = |name: &str| sol.value(name);
    for t in 0..2 {
        assert!(model_values(&format!("ShiftUp[z1,t{t}]")).abs() < 1e-9);
        assert!(model_values(&format!("ShiftDown[z1,t{t}]")).abs() < 1e-9);
    }
    let _ = ctx;
}

#[test]
fn price_spread_shifts_load_to_the_cheap_hour_up_to_the_bound() {
    // t0 is expensive (base capacity 90 < demand 100): moving load to t1
    // saves peak_vom - base_vom per MWh, bounded by 10% of t0 demand
    let (_, _, shifted) = solve_expect_optimal(SHIFT_MODULES, &shift_system(95.0), &Options::new());
    assert!(rel_close(shifted.value("ShiftDown[z1,t0]"), 10.0, 1e-6));
    assert!(rel_close(shifted.value("ShiftUp[z1,t1]"), 10.0, 1e-6));
    // shifted demand stays within the 1.8x cap: 50 + 10 = 60 <= 90
    let (_, _, fixed) = solve_expect_optimal(BASE_MODULES, &shift_system(95.0), &Options::new());
    assert!(shifted.objective <= fixed.objective + 1e-6);
    // hand oracle: 10 MW moves from 95 to 20 $/MWh half the year
    let expected =
        fixed.objective - 10.0 * (95.0 - 20.0) * YEAR / 2.0 + 2.0 * 10.0 * 1e-6 * YEAR / 2.0; // epsilon tiebreak on up+down
    assert!(rel_close(shifted.objective, expected, 1e-9));
}

#[test]
fn shift_energy_is_neutral_within_each_series() {
    let (model, ctx, sol) =
        solve_expect_optimal(SHIFT_MODULES, &shift_system(95.0), &Options::new());
    let values = sol.dense_values(&model);
    let ts = ctx.timescales.as_ref().unwrap();
    let mut net = 0.0;
    for tp in ts.timepoint_ids() {
        let (up, down) = ctx.shift[&(0, tp.0)];
        net += (values[up.index()] - values[down.index()]) * ts.duration_hours(tp);
    }
    assert!(net.abs() < 1e-6, "shift energy not neutral: {net}");
}

#[test]
fn planning_reserve_margin_requires_firm_capacity_above_peak() {
    const PLANNING: &[&str] = &[
        "timescales",
        "financials",
        "balancing.load_zones",
        "energy_sources.properties",
        "generators.core.build",
        "generators.core.dispatch",
        "generators.core.no_commit",
        "balancing.planning_reserves",
    ];
    // peak 100, margin 15%: firm requirement 115; exactly-peak-firm system
    // with cheap expandable capacity builds 15 MW more than it dispatches
    let data = ToySystem::new(1, 1.0)
        .demand("z1", &[100.0])
        .gen("gas", "z1", "flex", 10.0)
        .existing("gas", 100.0)
        .buildable("gas", 100_000.0)
        .table(
            "planning_reserves",
            &["margin", "variable_gen_credit"],
            &[&["0.15", "0.25"]],
        )
        .dataset();
    let (_, _, sol) = solve_expect_optimal(PLANNING, &data, &Options::new());
    assert!(rel_close(sol.value("BuildGen[gas,2025]"), 15.0, 1e-6));

    // margin 0 with exactly-peak firm capacity is feasible and binding
    let data = ToySystem::new(1, 1.0)
        .demand("z1", &[100.0])
        .gen("gas", "z1", "flex", 10.0)
        .existing("gas", 100.0)
        .table(
            "planning_reserves",
            &["margin", "variable_gen_credit"],
            &[&["0", "0.25"]],
        )
        .dataset();
    let (_, _, sol) = solve_expect_optimal(PLANNING, &data, &Options::new());
    assert!(rel_close(sol.value("DispatchGen[gas,t0]"), 100.0, 1e-7));

    // low-credit wind forces overbuild relative to a credit-1.0 system
    let wind_system = |credit: f64| {
        ToySystem::new(1, 1.0)
            .demand("z1", &[100.0])
            .gen("wind", "z1", "wind", 0.0)
            .with("is_variable", "true")
            .capacity_factors("wind", &[1.0])
            .buildable("wind", 1_000_000.0)
            .table(
                "planning_reserves",
                &["margin", "variable_gen_credit"],
                &[&["0.15", &credit.to_string()]],
            )
            .dataset()
    };
    let (_, _, low_credit) = solve_expect_optimal(PLANNING, &wind_system(0.3), &Options::new());
    let (_, _, full_credit) = solve_expect_optimal(PLANNING, &wind_system(1.0), &Options::new());
    assert!(rel_close(
        low_credit.value("BuildGen[wind,2025]"),
        115.0 / 0.3,
        1e-6
    ));
    assert!(low_credit.objective >= full_credit.objective - 1e-6);
}

#[test]
fn spinning_reserves_without_any_provider_family_is_a_config_error() {
    // only a no-commit generator: no commitment headroom, no storage, no DR
    let data = ToySystem::new(1, 1.0)
        .demand("z1", &[100.0])
        .gen("gas", "z1", "flex", 10.0)
        .existing("gas", 200.0)
        .table(
            "reserve_params",
            &["area", "load_fraction", "vre_fraction", "contingency_mw"],
            &[&["system", "0.10", "0", "0"]],
        )
        .dataset();
    let modules: Vec<&str> = BASE_MODULES
        .iter()
        .copied()
        .chain([
            "balancing.operating_reserves.areas",
            "balancing.operating_reserves.spinning_reserves_advanced",
        ])
        .collect();
    let catalog = gridplan_core::compose::ModuleCatalog::builtin();
    let err =
        gridplan_core::compose::build_model(&catalog, &names(&modules), &data, &Options::new())
            .unwrap_err();
    assert!(matches!(err, gridplan_core::Error::ConfigError(msg) if msg.contains("provider")));
}

#[test]
fn spinning_requirement_arithmetic_matches_the_rule() {
    // load 100, load_fraction 0.10, no VRE, contingency 0: requirement 10
    let data = ToySystem::new(1, 1.0)
        .demand("z1", &[100.0])
        .gen("gas", "z1", "flex", 10.0)
        .with("commit", "true")
        .with("min_load_fraction", "0")
        .existing("gas", 200.0)
        .table(
            "reserve_params",
            &["area", "load_fraction", "vre_fraction", "contingency_mw"],
            &[&["system", "0.10", "0", "0"]],
        )
        .dataset();
    let modules: Vec<&str> = BASE_MODULES
        .iter()
        .copied()
        .chain([
            "generators.core.commit.operate",
            "balancing.operating_reserves.areas",
            "balancing.operating_reserves.spinning_reserves_advanced",
        ])
        .collect();
    let (model, _ctx, sol) = solve_expect_optimal(&modules, &data, &Options::new());
    let row = model.constraint("Spinning_Reserve[system,t0]").unwrap();
    assert_eq!(row.rhs, 10.0);
    // commitment covers dispatch plus the requirement
    assert!(sol.value("Commit[gas,t0]") >= 110.0 - 1e-6);
}
