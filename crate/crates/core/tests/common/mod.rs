//! Shared fixtures: compact in-memory datasets for toy systems, solve
//! helpers, and the LP duality checker used across suites.

#![allow(dead_code)]

pub mod oracles;

use std::collections::BTreeMap;
use std::path::PathBuf;

use gridplan_core::compose::{build_model, BuildContext, ModuleCatalog, Options};
use gridplan_core::data::{Dataset, Table};
use gridplan_core::model::{ModelGraph, Sense};
use gridplan_core::solver::{
    solve_standard_form, to_standard_form, LpOutcome, Solution, SolveStatus,
    SolverOptions, StandardFormLP,
};

pub fn rows(data: &[&[&str]]) -> Vec<Vec<String>> {
    data.iter()
        .map(|r| r.iter().map(|c| c.to_string()).collect())
        .collect()
}

pub fn mini_grid_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mini_grid")
}

/// Builder for small single- or two-zone systems with one period.
pub struct ToySystem {
    pub num_tps: usize,
    pub dur_h: f64,
    /// Series occurrences per period; weights sum to `num_tps*dur_h*scale`.
    pub scale: f64,
    pub zones: Vec<String>,
    demand: Vec<(String, Vec<f64>)>,
    project_rows: Vec<Vec<String>>,
    build_cost_rows: Vec<Vec<String>>,
    predetermined_rows: Vec<Vec<String>>,
    segment_rows: Vec<Vec<String>>,
    cf_rows: Vec<Vec<String>>,
    storage_rows: Vec<Vec<String>>,
    storage_cost_rows: Vec<Vec<String>>,
    storage_predetermined_rows: Vec<Vec<String>>,
    source_rows: Vec<Vec<String>>,
    extra_tables: Vec<Table>,
}

impl ToySystem {
    /// One period "2025" (1 year), one circular series of `num_tps`
    /// timepoints of `dur_h` hours; scale normalized so represented hours
    /// equal one year.
    pub fn new(num_tps: usize, dur_h: f64) -> ToySystem {
        ToySystem {
            num_tps,
            dur_h,
            scale: 8766.0 / (num_tps as f64 * dur_h),
            zones: vec!["z1".to_string()],
            demand: Vec::new(),
            project_rows: Vec::new(),
            build_cost_rows: Vec::new(),
            predetermined_rows: Vec::new(),
            segment_rows: Vec::new(),
            cf_rows: Vec::new(),
            storage_rows: Vec::new(),
            storage_cost_rows: Vec::new(),
            storage_predetermined_rows: Vec::new(),
            source_rows: vec![
                vec!["flex".into(), "false".into(), "0".into(), "false".into()],
                vec!["gas".into(), "true".into(), "0.053".into(), "false".into()],
                vec!["wind".into(), "false".into(), "0".into(), "true".into()],
                vec!["water".into(), "false".into(), "0".into(), "true".into()],
            ],
            extra_tables: Vec::new(),
        }
    }

    pub fn tp_id(&self, t: usize) -> String {
        format!("t{t}")
    }

    pub fn zones(mut self, zones: &[&str]) -> Self {
        self.zones = zones.iter().map(|z| z.to_string()).collect();
        self
    }

    pub fn demand(mut self, zone: &str, mw: &[f64]) -> Self {
        assert_eq!(mw.len(), self.num_tps);
        self.demand.push((zone.to_string(), mw.to_vec()));
        self
    }

    pub fn source(mut self, name: &str, is_fuel: bool, co2: f64, renewable: bool) -> Self {
        self.source_rows.push(vec![
            name.into(),
            is_fuel.to_string(),
            co2.to_string(),
            renewable.to_string(),
        ]);
        self
    }

    /// Thermal or variable generation project.
    #[allow(clippy::too_many_arguments)]
    pub fn gen(mut self, name: &str, zone: &str, source: &str, vom: f64) -> Self {
        self.project_rows.push(vec![
            name.into(),
            zone.into(),
            source.into(),
            "30".into(),     // max_age_years
            "0".into(),      // fixed_om
            vom.to_string(), // variable_om
            "false".into(),  // is_variable
            "0".into(),      // outage_derate
            "".into(),       // unit_size
            "0".into(),      // min_load_fraction
            "0".into(),      // startup_cost
            "0".into(),      // startup_fuel
            "0".into(),      // min_uptime
            "0".into(),      // min_downtime
            "false".into(),  // commit
            "false".into(),  // is_hydro_simple
        ]);
        self
    }

    /// Overrides a column of the most recently added project.
    pub fn with(mut self, column: &str, value: &str) -> Self {
        let idx = PROJECT_COLUMNS
            .iter()
            .position(|c| *c == column)
            .unwrap_or_else(|| panic!("unknown project column {column}"));
        self.project_rows.last_mut().expect("no project added yet")[idx] = value.to_string();
        self
    }

    pub fn existing(mut self, project: &str, mw: f64) -> Self {
        self.predetermined_rows
            .push(vec![project.into(), "2020".into(), mw.to_string()]);
        self
    }

    pub fn buildable(mut self, project: &str, cost_per_mw: f64) -> Self {
        self.build_cost_rows
            .push(vec![project.into(), "2025".into(), cost_per_mw.to_string()]);
        self
    }

    pub fn segments(mut self, project: &str, segments: &[(f64, f64)]) -> Self {
        for (i, (intercept, slope)) in segments.iter().enumerate() {
            self.segment_rows.push(vec![
                project.into(),
                i.to_string(),
                intercept.to_string(),
                slope.to_string(),
            ]);
        }
        self
    }

    pub fn capacity_factors(mut self, project: &str, cf: &[f64]) -> Self {
        assert_eq!(cf.len(), self.num_tps);
        for (t, v) in cf.iter().enumerate() {
            self.cf_rows
                .push(vec![project.into(), format!("t{t}"), v.to_string()]);
        }
        self
    }

    #[allow(clippy::too_many_arguments)]
    pub fn storage(
        mut self,
        name: &str,
        zone: &str,
        charge_eff: f64,
        discharge_eff: f64,
        vom: f64,
        max_cycles: Option<f64>,
        can_reserve: bool,
    ) -> Self {
        self.storage_rows.push(vec![
            name.into(),
            zone.into(),
            "15".into(),
            "0".into(),
            vom.to_string(),
            charge_eff.to_string(),
            discharge_eff.to_string(),
            "0".into(),
            max_cycles.map(|c| c.to_string()).unwrap_or_default(),
            can_reserve.to_string(),
        ]);
        self
    }

    pub fn storage_existing(mut self, project: &str, power_mw: f64, energy_mwh: f64) -> Self {
        self.storage_predetermined_rows.push(vec![
            project.into(),
            "2020".into(),
            power_mw.to_string(),
            energy_mwh.to_string(),
        ]);
        self
    }

    pub fn storage_buildable(mut self, project: &str, power_cost: f64, energy_cost: f64) -> Self {
        self.storage_cost_rows.push(vec![
            project.into(),
            "2025".into(),
            power_cost.to_string(),
            energy_cost.to_string(),
        ]);
        self
    }

    pub fn table(mut self, name: &str, headers: &[&str], data: &[&[&str]]) -> Self {
        self.extra_tables
            .push(Table::new(name, headers, rows(data)));
        self
    }

    pub fn dataset(&self) -> Dataset {
        let mut ds = Dataset::new();
        ds.insert(Table::new(
            "periods",
            &["period", "start_year", "length_years"],
            rows(&[&["2025", "2025", "1"]]),
        ));
        ds.insert(Table::new(
            "timeseries",
            &[
                "timeseries",
                "period",
                "num_timepoints",
                "tp_duration_hours",
                "scale_to_period",
            ],
            vec![vec![
                "day".into(),
                "2025".into(),
                self.num_tps.to_string(),
                self.dur_h.to_string(),
                self.scale.to_string(),
            ]],
        ));
        let mut tp_rows = Vec::new();
        for t in 0..self.num_tps {
            tp_rows.push(vec![
                format!("t{t}"),
                "day".into(),
                t.to_string(),
                String::new(),
            ]);
        }
        ds.insert(Table::new(
            "timepoints",
            &["timepoint", "timeseries", "position", "timestamp_label"],
            tp_rows,
        ));
        ds.insert(Table::new(
            "financials",
            &["base_financial_year", "discount_rate", "interest_rate"],
            rows(&[&["2025", "0", "0.05"]]),
        ));
        ds.insert(Table::new(
            "load_zones",
            &["zone"],
            self.zones.iter().map(|z| vec![z.clone()]).collect(),
        ));
        let mut demand_rows = Vec::new();
        for (zone, mw) in &self.demand {
            for (t, v) in mw.iter().enumerate() {
                demand_rows.push(vec![zone.clone(), format!("t{t}"), v.to_string()]);
            }
        }
        ds.insert(Table::new(
            "zone_demand",
            &["zone", "timepoint", "demand_mw"],
            demand_rows,
        ));
        ds.insert(Table::new(
            "energy_sources",
            &[
                "source",
                "is_fuel",
                "co2_intensity_t_per_mmbtu",
                "renewable",
            ],
            self.source_rows.clone(),
        ));
        ds.insert(Table::new(
            "projects",
            PROJECT_COLUMNS,
            self.project_rows.clone(),
        ));
        ds.insert(Table::new(
            "gen_build_costs",
            &["project", "period", "capital_cost_per_mw"],
            self.build_cost_rows.clone(),
        ));
        ds.insert(Table::new(
            "gen_predetermined",
            &["project", "build_year", "capacity_mw"],
            self.predetermined_rows.clone(),
        ));
        ds.insert(Table::new(
            "heat_rate_segments",
            &[
                "project",
                "segment",
                "intercept_mmbtu_per_mw_h",
                "slope_mmbtu_per_mwh",
            ],
            self.segment_rows.clone(),
        ));
        ds.insert(Table::new(
            "capacity_factors",
            &["project", "timepoint", "capacity_factor"],
            self.cf_rows.clone(),
        ));
        ds.insert(Table::new(
            "storage_projects",
            &[
                "project",
                "zone",
                "max_age_years",
                "fixed_om_per_mw_yr",
                "variable_om_per_mwh",
                "charge_efficiency",
                "discharge_efficiency",
                "outage_derate",
                "max_cycles_per_year",
                "can_provide_reserves",
            ],
            self.storage_rows.clone(),
        ));
        ds.insert(Table::new(
            "storage_build_costs",
            &[
                "project",
                "period",
                "power_cost_per_mw",
                "energy_cost_per_mwh",
            ],
            self.storage_cost_rows.clone(),
        ));
        ds.insert(Table::new(
            "storage_predetermined",
            &["project", "build_year", "power_mw", "energy_mwh"],
            self.storage_predetermined_rows.clone(),
        ));
        for t in &self.extra_tables {
            ds.insert(t.clone());
        }
        ds
    }
}

pub const PROJECT_COLUMNS: &[&str] = &[
    "project",
    "zone",
    "energy_sources",
    "max_age_years",
    "fixed_om_per_mw_yr",
    "variable_om_per_mwh",
    "is_variable",
    "outage_derate",
    "unit_size_mw",
    "min_load_fraction",
    "startup_cost_per_mw",
    "startup_fuel_mmbtu_per_mw",
    "min_uptime_h",
    "min_downtime_h",
    "commit",
    "is_hydro_simple",
];

pub const BASE_MODULES: &[&str] = &[
    "timescales",
    "financials",
    "balancing.load_zones",
    "energy_sources.properties",
    "generators.core.build",
    "generators.core.dispatch",
    "generators.core.no_commit",
];

pub fn names(modules: &[&str]) -> Vec<String> {
    modules.iter().map(|m| m.to_string()).collect()
}

/// Builds and solves with the internal backend; panics on builder errors.
pub fn build_and_solve(
    modules: &[&str],
    data: &Dataset,
    options: &Options,
) -> (ModelGraph, BuildContext, Solution) {
    let catalog = ModuleCatalog::builtin();
    let (model, ctx) =
        build_model(&catalog, &names(modules), data, options).expect("model should build");
    let lp = to_standard_form(&model);
    let solution = solve_standard_form(&lp, &SolverOptions::default()).expect("solve");
    (model, ctx, solution)
}

pub fn solve_expect_optimal(
    modules: &[&str],
    data: &Dataset,
    options: &Options,
) -> (ModelGraph, BuildContext, Solution) {
    let (model, ctx, solution) = build_and_solve(modules, data, options);
    assert_eq!(solution.status, SolveStatus::Optimal, "expected optimal");
    (model, ctx, solution)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Independent strong-duality check: recomputes reduced costs from the
/// returned row duals and verifies sign feasibility plus
/// `primal == y'b + sum(matched bound terms)`.
pub fn assert_strong_duality(lp: &StandardFormLP, out: &LpOutcome, tol: f64) {
    assert_eq!(out.status, SolveStatus::Optimal);
    let n = lp.num_vars();
    let mut reduced: Vec<f64> = lp.objective.clone();
    for (i, row) in lp.rows.iter().enumerate() {
        let y = out.duals[i];
        match row.sense {
            Sense::Ge => assert!(y >= -1e-6, "Ge row `{}` has negative dual {y}", row.name),
            Sense::Le => assert!(y <= 1e-6, "Le row `{}` has positive dual {y}", row.name),
            Sense::Eq => {}
        }
        for &(j, a) in &row.terms {
            reduced[j] -= y * a;
        }
    }
    let mut dual_obj = lp.objective_constant;
    for (i, row) in lp.rows.iter().enumerate() {
        dual_obj += out.duals[i] * row.rhs;
    }
    for j in 0..n {
        let d = reduced[j];
        if d > 1e-7 {
            assert!(
                lp.lower[j].is_finite(),
                "positive reduced cost on unbounded-below column {}",
                lp.var_names[j]
            );
            dual_obj += d * lp.lower[j];
        } else if d < -1e-7 {
            assert!(
                lp.upper[j].is_finite(),
                "negative reduced cost on unbounded-above column {}",
                lp.var_names[j]
            );
            dual_obj += d * lp.upper[j];
        }
    }
    assert!(
        rel_close(out.objective, dual_obj, tol),
        "strong duality violated: primal {} vs dual {}",
        out.objective,
        dual_obj
    );
}

/// Sum of npv column recomputed from a written costs table.
pub fn npv_from_costs_csv(path: &std::path::Path) -> f64 {
    let table = Table::from_csv_path("costs", path).expect("read costs.csv");
    let mut total = 0.0;
    for r in table.row_ids() {
        total += table.get_f64(r, "npv").expect("npv cell");
    }
    total
}

/// Reads `key,value` pairs from a written summary table.
pub fn summary_values(path: &std::path::Path) -> BTreeMap<String, String> {
    let table = Table::from_csv_path("summary", path).expect("read summary.csv");
    let mut map = BTreeMap::new();
    for r in table.row_ids() {
        map.insert(
            table.get(r, "key").unwrap().to_string(),
            table.get(r, "value").unwrap().to_string(),
        );
    }
    map
}
