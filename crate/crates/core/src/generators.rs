//! Generation projects: capacity vintages, dispatch limits, linearized and
//! discrete unit commitment, multi-segment fuel use, and hydro-simple energy
//! budgets.
//!
//! A project is handled by the commitment formulation when its `commit` flag
//! is set and `generators.core.commit.operate` is loaded; otherwise it must
//! be covered by `generators.core.no_commit`.
//!
//! Variable cardinality for G projects over T timepoints: core.build adds one
//! BuildGen per (project, buildable vintage); core.dispatch adds G*T
//! DispatchGen plus one FuelUse per (fueled project, timepoint, fuel);
//! commit.operate adds 3 * T variables per committed project (plus T reserve
//! variables each when spinning reserves are active); commit.discrete adds T
//! CommitUnits per unit-sized committed project; proj_discrete_build adds one
//! BuildUnits per unit-sized (project, buildable vintage).

use std::collections::BTreeMap;

use crate::compose::{BuildContext, Callback, EngineModule, ReserveProvision};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::expr::LinearExpression;
use crate::model::{BalanceSide, CostDomain, Integrality, ModelBuilder, ModelGraph, Sense, INF};
use crate::solver::Solution;
use crate::timescales::TimescaleSet;

#[derive(Debug, Clone)]
pub struct GenerationProject {
    pub name: String,
    pub zone: usize,
    pub max_age_years: i64,
    pub fixed_om: f64,
    pub variable_om: f64,
    /// Indices into the source catalog: several fuels, or one non-fuel source.
    pub sources: Vec<usize>,
    pub is_variable: bool,
    pub outage_derate: f64,
    pub unit_size_mw: Option<f64>,
    pub min_load_fraction: f64,
    pub startup_cost_per_mw: f64,
    pub startup_fuel_mmbtu_per_mw: f64,
    pub min_uptime_h: f64,
    pub min_downtime_h: f64,
    pub commit: bool,
    pub is_hydro_simple: bool,
    /// Overnight $/MW per buildable vintage period.
    pub capital_cost: BTreeMap<usize, f64>,
    /// Existing builds: (build year, MW).
    pub predetermined: Vec<(i64, f64)>,
    /// (intercept MMBtu/h per committed MW, slope MMBtu/MWh), sorted by slope.
    pub heat_rate_segments: Vec<(f64, f64)>,
    /// Capacity factor per timepoint (variable projects).
    pub capacity_factor: BTreeMap<usize, f64>,
    /// Average water availability in MW per timeseries (hydro projects).
    pub hydro_avg_flow: BTreeMap<usize, f64>,
}

impl GenerationProject {
    pub fn is_fueled(&self, sources: &crate::energy_sources::SourceSet) -> bool {
        self.sources.iter().any(|&f| sources.get(f).is_fuel)
    }
}

/// Generation projects, canonically sorted by name.
#[derive(Debug, Clone, Default)]
pub struct ProjectSet {
    projects: Vec<GenerationProject>,
}

impl ProjectSet {
    pub fn len(&self) -> usize {
        self.projects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty()
    }

    pub fn get(&self, g: usize) -> &GenerationProject {
        &self.projects[g]
    }

    pub fn get_mut(&mut self, g: usize) -> &mut GenerationProject {
        &mut self.projects[g]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.projects.iter().position(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &GenerationProject> {
        self.projects.iter()
    }
}

/// Whether a vintage built in `vintage_year` is still in service in a period
/// starting at `period_start`.
pub fn vintage_active(vintage_year: i64, max_age_years: i64, period_start: i64) -> bool {
    vintage_year <= period_start && period_start <= vintage_year + max_age_years
}

/// MW in service during period `p` for a set of decision and predetermined
/// builds; the decision-variable mirror of this arithmetic lives in
/// [`GenBuildModule`].
pub fn available_capacity(
    builds: &BTreeMap<i64, f64>,
    max_age_years: i64,
    period_start: i64,
) -> f64 {
    builds
        .iter()
        .filter(|&(&v, _)| vintage_active(v, max_age_years, period_start))
        .map(|(_, &mw)| mw)
        .sum()
}

fn commit_active(proj: &GenerationProject, ctx: &BuildContext) -> bool {
    proj.commit && ctx.has_module("generators.core.commit.operate")
}

/// Rounds a time window up to whole timepoints.
fn window_timepoints(window_hours: f64, tp_duration: f64) -> usize {
    if window_hours <= 0.0 {
        0
    } else {
        (window_hours / tp_duration).ceil() as usize
    }
}

// ---------------------------------------------------------------------------
// generators.core.build
// ---------------------------------------------------------------------------

/// Capacity vintages: BuildGen decisions, available-capacity expressions,
/// annualized capital and fixed O&M costs. Predetermined capacity is sunk
/// (no capital charge) but pays fixed O&M.
#[derive(Debug, Default)]
pub struct GenBuildModule;

impl EngineModule for GenBuildModule {
    fn name(&self) -> &'static str {
        "generators.core.build"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::LoadInputs, Callback::DefineComponents]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[
            ("projects", true),
            ("gen_build_costs", false),
            ("gen_predetermined", false),
            ("heat_rate_segments", false),
        ]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?;
        let zones = ctx.zones(self.name())?;
        let sources = ctx.sources(self.name())?;

        let table = data.require(self.name(), "projects")?;
        let mut projects = Vec::new();
        for r in table.row_ids() {
            let name = table.get(r, "project")?.to_string();
            let zone = table.get(r, "zone")?;
            let Some(z) = zones.index(zone) else {
                return Err(Error::IntegrityError(format!(
                    "projects row {} references unknown zone `{zone}`",
                    r + 1
                )));
            };
            let mut source_idx = Vec::new();
            for token in table.get(r, "energy_sources")?.split(';') {
                let token = token.trim();
                if token.is_empty() {
                    continue;
                }
                let Some(f) = sources.index(token) else {
                    return Err(Error::IntegrityError(format!(
                        "projects row {} references unknown energy source `{token}`",
                        r + 1
                    )));
                };
                source_idx.push(f);
            }
            if source_idx.is_empty() {
                return Err(Error::InputError {
                    table: "projects".into(),
                    row: r + 1,
                    message: "at least one energy source is required".into(),
                });
            }
            let non_fuel = source_idx
                .iter()
                .filter(|&&f| !sources.get(f).is_fuel)
                .count();
            if non_fuel > 0 && source_idx.len() > 1 {
                return Err(Error::InputError {
                    table: "projects".into(),
                    row: r + 1,
                    message: "multi-source projects must use fuels only".into(),
                });
            }
            let min_load = table.get_f64_or(r, "min_load_fraction", 0.0)?;
            if !(0.0..=1.0).contains(&min_load) {
                return Err(Error::InputError {
                    table: "projects".into(),
                    row: r + 1,
                    message: "min_load_fraction must be in [0,1]".into(),
                });
            }
            projects.push(GenerationProject {
                name,
                zone: z,
                max_age_years: table.get_i64(r, "max_age_years")?,
                fixed_om: table.get_f64_or(r, "fixed_om_per_mw_yr", 0.0)?,
                variable_om: table.get_f64_or(r, "variable_om_per_mwh", 0.0)?,
                sources: source_idx,
                is_variable: table.get_bool_or(r, "is_variable", false)?,
                outage_derate: table.get_f64_or(r, "outage_derate", 0.0)?,
                unit_size_mw: table.get_f64_opt(r, "unit_size_mw")?,
                min_load_fraction: min_load,
                startup_cost_per_mw: table.get_f64_or(r, "startup_cost_per_mw", 0.0)?,
                startup_fuel_mmbtu_per_mw: table.get_f64_or(r, "startup_fuel_mmbtu_per_mw", 0.0)?,
                min_uptime_h: table.get_f64_or(r, "min_uptime_h", 0.0)?,
                min_downtime_h: table.get_f64_or(r, "min_downtime_h", 0.0)?,
                commit: table.get_bool_or(r, "commit", false)?,
                is_hydro_simple: table.get_bool_or(r, "is_hydro_simple", false)?,
                capital_cost: BTreeMap::new(),
                predetermined: Vec::new(),
                heat_rate_segments: Vec::new(),
                capacity_factor: BTreeMap::new(),
                hydro_avg_flow: BTreeMap::new(),
            });
        }
        projects.sort_by(|a, b| a.name.cmp(&b.name));
        let mut set = ProjectSet { projects };

        if let Some(costs) = data.get("gen_build_costs") {
            for r in costs.row_ids() {
                let project = costs.get(r, "project")?;
                let period = costs.get(r, "period")?;
                let Some(g) = set.index(project) else {
                    return Err(Error::IntegrityError(format!(
                        "gen_build_costs row {} references project `{project}` \
                         absent from projects",
                        r + 1
                    )));
                };
                let Some(p) = timescales.period_by_label(period) else {
                    return Err(Error::IntegrityError(format!(
                        "gen_build_costs row {} references unknown period `{period}`",
                        r + 1
                    )));
                };
                set.get_mut(g)
                    .capital_cost
                    .insert(p.0, costs.get_f64(r, "capital_cost_per_mw")?);
            }
        }

        if let Some(pre) = data.get("gen_predetermined") {
            for r in pre.row_ids() {
                let project = pre.get(r, "project")?;
                let Some(g) = set.index(project) else {
                    return Err(Error::IntegrityError(format!(
                        "gen_predetermined row {} references project `{project}` \
                         absent from projects",
                        r + 1
                    )));
                };
                set.get_mut(g).predetermined.push((
                    pre.get_i64(r, "build_year")?,
                    pre.get_f64(r, "capacity_mw")?,
                ));
            }
        }

        if let Some(seg) = data.get("heat_rate_segments") {
            for r in seg.row_ids() {
                let project = seg.get(r, "project")?;
                let Some(g) = set.index(project) else {
                    return Err(Error::IntegrityError(format!(
                        "heat_rate_segments row {} references project `{project}` \
                         absent from projects",
                        r + 1
                    )));
                };
                set.get_mut(g).heat_rate_segments.push((
                    seg.get_f64(r, "intercept_mmbtu_per_mw_h")?,
                    seg.get_f64(r, "slope_mmbtu_per_mwh")?,
                ));
            }
        }

        for g in 0..set.len() {
            let fueled = set.get(g).is_fueled(sources);
            let proj = set.get_mut(g);
            if fueled && proj.heat_rate_segments.is_empty() {
                return Err(Error::IntegrityError(format!(
                    "fueled project `{}` has no heat-rate segments",
                    proj.name
                )));
            }
            proj.heat_rate_segments.sort_by(|a, b| a.1.total_cmp(&b.1));
            for pair in proj.heat_rate_segments.windows(2) {
                if pair[1].0 > pair[0].0 {
                    return Err(Error::IntegrityError(format!(
                        "project `{}`: heat-rate segments must have decreasing \
                         intercepts as slopes increase (convex lower envelope)",
                        proj.name
                    )));
                }
            }
        }
        ctx.projects = Some(set);
        Ok(())
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?.clone();
        let financials = *ctx.financials(self.name())?;
        let projects = ctx.projects(self.name())?.clone();
        b.register_cost_component("GenCapitalCost", CostDomain::Period)?;
        b.provide_cost_component("GenCapitalCost", CostDomain::Period);
        b.register_cost_component("GenFixedOMCost", CostDomain::Period)?;
        b.provide_cost_component("GenFixedOMCost", CostDomain::Period);

        for (g, proj) in projects.iter().enumerate() {
            for &v in proj.capital_cost.keys() {
                let vp = crate::timescales::PeriodId(v);
                let var = b.add_variable(
                    "BuildGen",
                    &[&proj.name, &timescales.period(vp).label],
                    0.0,
                    INF,
                    Integrality::Continuous,
                )?;
                ctx.gen.build.insert((g, v), var);
            }
            let annuity =
                crate::financials::crf(financials.interest_rate, proj.max_age_years.max(1) as u32);
            for p in timescales.period_ids() {
                let start = timescales.period(p).start_year;
                let mut capacity = LinearExpression::zero();
                let mut capital = LinearExpression::zero();
                for (&v, &cost) in &proj.capital_cost {
                    let vintage_year = timescales.period(crate::timescales::PeriodId(v)).start_year;
                    if vintage_active(vintage_year, proj.max_age_years, start) {
                        let var = ctx.gen.build[&(g, v)];
                        capacity = capacity.plus_term(var, 1.0);
                        capital = capital.plus_term(var, annuity * cost);
                    }
                }
                for &(year, mw) in &proj.predetermined {
                    if vintage_active(year, proj.max_age_years, start) {
                        capacity = capacity.plus_constant(mw);
                    }
                }
                b.add_cost_term("GenCapitalCost", p.0, &capital);
                b.add_cost_term("GenFixedOMCost", p.0, &capacity.scaled(proj.fixed_om));
                ctx.gen.capacity.insert((g, p.0), capacity);
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// generators.core.dispatch
// ---------------------------------------------------------------------------

/// DispatchGen and FuelUse variables, variable O&M costs, the injection
/// registration, and slope-only fuel for projects outside the commitment
/// fuel formulation.
#[derive(Debug, Default)]
pub struct GenDispatchModule;

impl EngineModule for GenDispatchModule {
    fn name(&self) -> &'static str {
        "generators.core.dispatch"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[
            Callback::LoadInputs,
            Callback::DefineComponents,
            Callback::DefineDynamicComponents,
        ]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("capacity_factors", false)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?.clone();
        let Some(projects) = ctx.projects.as_mut() else {
            return Err(Error::MissingInput {
                module: self.name().to_string(),
                table: "projects.csv".to_string(),
            });
        };
        if let Some(table) = data.get("capacity_factors") {
            for r in table.row_ids() {
                let project = table.get(r, "project")?;
                let tp = table.get(r, "timepoint")?;
                let Some(g) = projects.index(project) else {
                    return Err(Error::IntegrityError(format!(
                        "capacity_factors row {} references unknown project `{project}`",
                        r + 1
                    )));
                };
                let Some(t) = timescales.timepoint_by_id(tp) else {
                    return Err(Error::IntegrityError(format!(
                        "capacity_factors row {} references unknown timepoint `{tp}`",
                        r + 1
                    )));
                };
                projects
                    .get_mut(g)
                    .capacity_factor
                    .insert(t.0, table.get_f64(r, "capacity_factor")?);
            }
        }
        for g in 0..projects.len() {
            let proj = projects.get(g);
            if proj.is_variable {
                for tp in timescales.timepoint_ids() {
                    if !proj.capacity_factor.contains_key(&tp.0) {
                        return Err(Error::IntegrityError(format!(
                            "variable project `{}` has no capacity factor for \
                             timepoint `{}`",
                            proj.name,
                            timescales.timepoint(tp).id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?.clone();
        let _zones = ctx.zones(self.name())?.clone();
        let sources = ctx.sources(self.name())?.clone();
        let projects = ctx.projects(self.name())?.clone();

        b.register_balance_component("DispatchGen", BalanceSide::Injection)?;
        b.provide_balance_component("DispatchGen");
        b.register_cost_component("GenVariableOMCost", CostDomain::Timepoint)?;
        b.provide_cost_component("GenVariableOMCost", CostDomain::Timepoint);

        let segment_fuel = ctx.has_module("generators.core.commit.fuel_use");
        for (g, proj) in projects.iter().enumerate() {
            let fueled = proj.is_fueled(&sources);
            for tp in timescales.timepoint_ids() {
                let tp_id = timescales.timepoint(tp).id.clone();
                let dispatch = b.add_variable(
                    "DispatchGen",
                    &[&proj.name, &tp_id],
                    0.0,
                    INF,
                    Integrality::Continuous,
                )?;
                ctx.gen.dispatch.insert((g, tp.0), dispatch);
                b.add_balance_term(
                    "DispatchGen",
                    proj.zone,
                    tp.0,
                    &LinearExpression::variable(dispatch),
                );
                if proj.variable_om != 0.0 {
                    b.add_cost_term(
                        "GenVariableOMCost",
                        tp.0,
                        &LinearExpression::term(dispatch, proj.variable_om),
                    );
                }
                if fueled {
                    let mut total_fuel = LinearExpression::zero();
                    for &f in &proj.sources {
                        if !sources.get(f).is_fuel {
                            continue;
                        }
                        let fu = b.add_variable(
                            "FuelUse",
                            &[&proj.name, &tp_id, &sources.get(f).name],
                            0.0,
                            INF,
                            Integrality::Continuous,
                        )?;
                        ctx.gen.fuel_use.insert((g, tp.0, f), fu);
                        total_fuel = total_fuel.plus_term(fu, 1.0);
                    }
                    // commitment-based fuel constraints supersede slope-only
                    if !(commit_active(proj, ctx) && segment_fuel) {
                        let slope = proj.heat_rate_segments[0].1;
                        b.add_constraint(
                            "Fuel_Slope",
                            &[&proj.name, &tp_id],
                            total_fuel.plus_term(dispatch, -slope),
                            Sense::Ge,
                            0.0,
                        )?;
                    }
                }
            }
        }
        Ok(())
    }

    fn define_dynamic_components(
        &self,
        _b: &mut ModelBuilder,
        ctx: &mut BuildContext,
    ) -> Result<()> {
        // dispatch-limit coverage: every project needs exactly one limit family
        let projects = ctx.projects(self.name())?;
        let no_commit = ctx.has_module("generators.core.no_commit");
        for proj in projects.iter() {
            if !commit_active(proj, ctx) && !no_commit {
                return Err(Error::ConfigError(format!(
                    "project `{}` has no dispatch limits: load \
                     generators.core.no_commit or enable commitment",
                    proj.name
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// generators.core.no_commit
// ---------------------------------------------------------------------------

/// Simple economic dispatch limits for projects outside the commitment
/// formulation: variable projects dispatch up to `cf * capacity` (free
/// curtailment), others up to derated capacity.
#[derive(Debug, Default)]
pub struct NoCommitModule;

impl EngineModule for NoCommitModule {
    fn name(&self) -> &'static str {
        "generators.core.no_commit"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::DefineComponents]
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?.clone();
        let projects = ctx.projects(self.name())?.clone();
        for (g, proj) in projects.iter().enumerate() {
            if commit_active(proj, ctx) {
                continue;
            }
            for tp in timescales.timepoint_ids() {
                let p = timescales.period_of_timepoint(tp);
                let dispatch = ctx.gen.dispatch[&(g, tp.0)];
                let cap = ctx.gen.capacity[&(g, p.0)].clone();
                let factor = if proj.is_variable {
                    proj.capacity_factor[&tp.0]
                } else {
                    1.0 - proj.outage_derate
                };
                b.add_constraint(
                    "Dispatch_Upper",
                    &[&proj.name, &timescales.timepoint(tp).id],
                    LinearExpression::variable(dispatch).minus(&cap.scaled(factor)),
                    Sense::Le,
                    0.0,
                )?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// generators.core.commit.operate
// ---------------------------------------------------------------------------

/// Linearized unit commitment: Commit/Startup/Shutdown variables, min-load
/// band, circular startup linkage, min up/down windows (rounded up to whole
/// timepoints), startup costs, and committed-headroom spinning reserves.
#[derive(Debug, Default)]
pub struct CommitOperateModule;

impl EngineModule for CommitOperateModule {
    fn name(&self) -> &'static str {
        "generators.core.commit.operate"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::DefineComponents]
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?.clone();
        let projects = ctx.projects(self.name())?.clone();
        let spinning = ctx.has_module("balancing.operating_reserves.spinning_reserves_advanced");

        b.register_cost_component("GenStartupCost", CostDomain::Timepoint)?;
        b.provide_cost_component("GenStartupCost", CostDomain::Timepoint);

        let mut provision: BTreeMap<(usize, usize), LinearExpression> = BTreeMap::new();
        for (g, proj) in projects.iter().enumerate() {
            if !commit_active(proj, ctx) {
                continue;
            }
            if proj.is_variable {
                return Err(Error::ConfigError(format!(
                    "variable project `{}` cannot use unit commitment",
                    proj.name
                )));
            }
            for tp in timescales.timepoint_ids() {
                let tp_id = timescales.timepoint(tp).id.clone();
                let commit = b.add_variable(
                    "Commit",
                    &[&proj.name, &tp_id],
                    0.0,
                    INF,
                    Integrality::Continuous,
                )?;
                let startup = b.add_variable(
                    "Startup",
                    &[&proj.name, &tp_id],
                    0.0,
                    INF,
                    Integrality::Continuous,
                )?;
                let shutdown = b.add_variable(
                    "Shutdown",
                    &[&proj.name, &tp_id],
                    0.0,
                    INF,
                    Integrality::Continuous,
                )?;
                ctx.gen.commit.insert((g, tp.0), commit);
                ctx.gen.startup.insert((g, tp.0), startup);
                ctx.gen.shutdown.insert((g, tp.0), shutdown);
            }
            for tp in timescales.timepoint_ids() {
                let tp_id = timescales.timepoint(tp).id.clone();
                let p = timescales.period_of_timepoint(tp);
                let dispatch = ctx.gen.dispatch[&(g, tp.0)];
                let commit = ctx.gen.commit[&(g, tp.0)];
                let startup = ctx.gen.startup[&(g, tp.0)];
                let shutdown = ctx.gen.shutdown[&(g, tp.0)];
                let cap = ctx.gen.capacity[&(g, p.0)].clone();

                b.add_constraint(
                    "Commit_Upper",
                    &[&proj.name, &tp_id],
                    LinearExpression::variable(commit).minus(&cap.scaled(1.0 - proj.outage_derate)),
                    Sense::Le,
                    0.0,
                )?;
                b.add_constraint(
                    "Dispatch_Upper",
                    &[&proj.name, &tp_id],
                    LinearExpression::variable(dispatch).plus_term(commit, -1.0),
                    Sense::Le,
                    0.0,
                )?;
                if proj.min_load_fraction > 0.0 {
                    b.add_constraint(
                        "Dispatch_Lower",
                        &[&proj.name, &tp_id],
                        LinearExpression::variable(dispatch)
                            .plus_term(commit, -proj.min_load_fraction),
                        Sense::Ge,
                        0.0,
                    )?;
                }
                if let Some(prev) = timescales.previous(tp) {
                    let prev_commit = ctx.gen.commit[&(g, prev.0)];
                    b.add_constraint(
                        "Startup_Link",
                        &[&proj.name, &tp_id],
                        LinearExpression::variable(commit)
                            .plus_term(prev_commit, -1.0)
                            .plus_term(startup, -1.0)
                            .plus_term(shutdown, 1.0),
                        Sense::Eq,
                        0.0,
                    )?;
                }
                let dur = timescales.duration_hours(tp);
                let up_window = window_timepoints(proj.min_uptime_h, dur);
                if up_window >= 1 {
                    let mut starts = LinearExpression::variable(startup);
                    let mut cursor = tp;
                    for _ in 1..up_window {
                        match timescales.previous(cursor) {
                            Some(prev) if prev != tp => {
                                starts = starts.plus_term(ctx.gen.startup[&(g, prev.0)], 1.0);
                                cursor = prev;
                            }
                            _ => break,
                        }
                    }
                    b.add_constraint(
                        "Min_Uptime",
                        &[&proj.name, &tp_id],
                        LinearExpression::variable(commit).minus(&starts),
                        Sense::Ge,
                        0.0,
                    )?;
                }
                let down_window = window_timepoints(proj.min_downtime_h, dur);
                if down_window >= 1 {
                    let mut stops = LinearExpression::variable(shutdown);
                    let mut cursor = tp;
                    for _ in 1..down_window {
                        match timescales.previous(cursor) {
                            Some(prev) if prev != tp => {
                                stops = stops.plus_term(ctx.gen.shutdown[&(g, prev.0)], 1.0);
                                cursor = prev;
                            }
                            _ => break,
                        }
                    }
                    // offline capacity >= recent shutdowns
                    b.add_constraint(
                        "Min_Downtime",
                        &[&proj.name, &tp_id],
                        cap.scaled(1.0 - proj.outage_derate)
                            .plus_term(commit, -1.0)
                            .minus(&stops),
                        Sense::Ge,
                        0.0,
                    )?;
                }
                if proj.startup_cost_per_mw != 0.0 {
                    // event cost booked as a flow over the timepoint
                    b.add_cost_term(
                        "GenStartupCost",
                        tp.0,
                        &LinearExpression::term(startup, proj.startup_cost_per_mw / dur),
                    );
                }
                if spinning {
                    let reserve = b.add_variable(
                        "GenSpinningReserve",
                        &[&proj.name, &tp_id],
                        0.0,
                        INF,
                        Integrality::Continuous,
                    )?;
                    b.add_constraint(
                        "Gen_Reserve_Limit",
                        &[&proj.name, &tp_id],
                        LinearExpression::variable(reserve)
                            .plus_term(dispatch, 1.0)
                            .plus_term(commit, -1.0),
                        Sense::Le,
                        0.0,
                    )?;
                    let area = ctx.areas(self.name())?.area_of_zone(proj.zone);
                    let entry = provision
                        .entry((area, tp.0))
                        .or_insert_with(LinearExpression::zero);
                    *entry = entry.plus(&LinearExpression::variable(reserve));
                }
            }
        }
        if spinning && !provision.is_empty() {
            ctx.reserve_provisions.push(ReserveProvision {
                provider: "committed_generators".to_string(),
                by_area_tp: provision,
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// generators.core.commit.fuel_use
// ---------------------------------------------------------------------------

/// Multi-segment fuel use for committed projects: total fuel lies on or above
/// every heat-rate line, plus startup fuel booked over the timepoint.
#[derive(Debug, Default)]
pub struct CommitFuelUseModule;

impl EngineModule for CommitFuelUseModule {
    fn name(&self) -> &'static str {
        "generators.core.commit.fuel_use"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::DefineComponents]
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?.clone();
        let sources = ctx.sources(self.name())?.clone();
        let projects = ctx.projects(self.name())?.clone();
        for (g, proj) in projects.iter().enumerate() {
            if !commit_active(proj, ctx) || !proj.is_fueled(&sources) {
                continue;
            }
            for tp in timescales.timepoint_ids() {
                let tp_id = timescales.timepoint(tp).id.clone();
                let dur = timescales.duration_hours(tp);
                let mut total_fuel = LinearExpression::zero();
                for &f in &proj.sources {
                    if sources.get(f).is_fuel {
                        total_fuel = total_fuel.plus_term(ctx.gen.fuel_use[&(g, tp.0, f)], 1.0);
                    }
                }
                let commit = ctx.gen.commit[&(g, tp.0)];
                let dispatch = ctx.gen.dispatch[&(g, tp.0)];
                let startup = ctx.gen.startup[&(g, tp.0)];
                for (s, &(intercept, slope)) in proj.heat_rate_segments.iter().enumerate() {
                    let mut lhs = total_fuel
                        .clone()
                        .plus_term(commit, -intercept)
                        .plus_term(dispatch, -slope);
                    if proj.startup_fuel_mmbtu_per_mw != 0.0 {
                        lhs = lhs.plus_term(startup, -proj.startup_fuel_mmbtu_per_mw / dur);
                    }
                    b.add_constraint(
                        "Fuel_Segment",
                        &[&proj.name, &tp_id, &s.to_string()],
                        lhs,
                        Sense::Ge,
                        0.0,
                    )?;
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// generators.core.commit.discrete
// ---------------------------------------------------------------------------

/// Commitment in whole units: `Commit = unit_size * CommitUnits` with
/// integer CommitUnits bounded by built units.
#[derive(Debug, Default)]
pub struct CommitDiscreteModule;

impl EngineModule for CommitDiscreteModule {
    fn name(&self) -> &'static str {
        "generators.core.commit.discrete"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::DefineComponents]
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?.clone();
        let projects = ctx.projects(self.name())?.clone();
        for (g, proj) in projects.iter().enumerate() {
            let Some(unit) = proj.unit_size_mw else {
                continue;
            };
            if !commit_active(proj, ctx) {
                continue;
            }
            for tp in timescales.timepoint_ids() {
                let tp_id = timescales.timepoint(tp).id.clone();
                let p = timescales.period_of_timepoint(tp);
                let units = b.add_variable(
                    "CommitUnits",
                    &[&proj.name, &tp_id],
                    0.0,
                    INF,
                    Integrality::Integer,
                )?;
                let commit = ctx.gen.commit[&(g, tp.0)];
                b.add_constraint(
                    "Commit_Discrete",
                    &[&proj.name, &tp_id],
                    LinearExpression::variable(commit).plus_term(units, -unit),
                    Sense::Eq,
                    0.0,
                )?;
                let cap = ctx.gen.capacity[&(g, p.0)].clone();
                b.add_constraint(
                    "Commit_Units_Limit",
                    &[&proj.name, &tp_id],
                    LinearExpression::term(units, unit).minus(&cap),
                    Sense::Le,
                    0.0,
                )?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// generators.core.proj_discrete_build
// ---------------------------------------------------------------------------

/// Builds in whole units: `BuildGen = unit_size * BuildUnits` with integer
/// BuildUnits.
#[derive(Debug, Default)]
pub struct DiscreteBuildModule;

impl EngineModule for DiscreteBuildModule {
    fn name(&self) -> &'static str {
        "generators.core.proj_discrete_build"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::DefineComponents]
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?.clone();
        let projects = ctx.projects(self.name())?.clone();
        for (g, proj) in projects.iter().enumerate() {
            let Some(unit) = proj.unit_size_mw else {
                continue;
            };
            for &v in proj.capital_cost.keys() {
                let label = timescales
                    .period(crate::timescales::PeriodId(v))
                    .label
                    .clone();
                let units = b.add_variable(
                    "BuildUnits",
                    &[&proj.name, &label],
                    0.0,
                    INF,
                    Integrality::Integer,
                )?;
                let build = ctx.gen.build[&(g, v)];
                b.add_constraint(
                    "Build_Discrete",
                    &[&proj.name, &label],
                    LinearExpression::variable(build).plus_term(units, -unit),
                    Sense::Eq,
                    0.0,
                )?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// generators.extensions.hydro_simple
// ---------------------------------------------------------------------------

/// Average water availability per sampled timeseries:
/// `sum(dispatch * duration) <= avg_flow * series_hours`.
#[derive(Debug, Default)]
pub struct HydroSimpleModule;

impl EngineModule for HydroSimpleModule {
    fn name(&self) -> &'static str {
        "generators.extensions.hydro_simple"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::LoadInputs, Callback::DefineComponents]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("hydro_avg_flows", true)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?.clone();
        let table = data.require(self.name(), "hydro_avg_flows")?;
        let Some(projects) = ctx.projects.as_mut() else {
            return Err(Error::MissingInput {
                module: self.name().to_string(),
                table: "projects.csv".to_string(),
            });
        };
        for r in table.row_ids() {
            let project = table.get(r, "project")?;
            let series = table.get(r, "timeseries")?;
            let Some(g) = projects.index(project) else {
                return Err(Error::IntegrityError(format!(
                    "hydro_avg_flows row {} references unknown project `{project}`",
                    r + 1
                )));
            };
            let Some(s) = timescales.series_by_id(series) else {
                return Err(Error::IntegrityError(format!(
                    "hydro_avg_flows row {} references unknown timeseries `{series}`",
                    r + 1
                )));
            };
            projects
                .get_mut(g)
                .hydro_avg_flow
                .insert(s.0, table.get_f64(r, "avg_flow_mw")?);
        }
        for g in 0..projects.len() {
            let proj = projects.get(g);
            if !proj.is_hydro_simple {
                continue;
            }
            for s in timescales.series_ids() {
                if !proj.hydro_avg_flow.contains_key(&s.0) {
                    return Err(Error::IntegrityError(format!(
                        "hydro project `{}` has no average flow for timeseries `{}`",
                        proj.name,
                        timescales.series(s).id
                    )));
                }
            }
        }
        Ok(())
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?.clone();
        let projects = ctx.projects(self.name())?.clone();
        for (g, proj) in projects.iter().enumerate() {
            if !proj.is_hydro_simple {
                continue;
            }
            for s in timescales.series_ids() {
                let series = timescales.series(s);
                let hours = series.num_timepoints as f64 * series.tp_duration_hours;
                let mut energy = LinearExpression::zero();
                for &tp in timescales.timepoints_in_series(s) {
                    energy = energy
                        .plus_term(ctx.gen.dispatch[&(g, tp.0)], timescales.duration_hours(tp));
                }
                b.add_constraint(
                    "Hydro_Budget",
                    &[&proj.name, &series.id],
                    energy,
                    Sense::Le,
                    proj.hydro_avg_flow[&s.0] * hours,
                )?;
            }
        }
        Ok(())
    }
}

/// Commitment telescoping residual over one series (sum of startups minus
/// shutdowns); zero at any feasible point of a circular series.
pub fn commitment_cycle_residual(
    model: &ModelGraph,
    timescales: &TimescaleSet,
    solution: &Solution,
    project: &str,
    series: crate::timescales::SeriesId,
) -> f64 {
    let values = solution.dense_values(model);
    let mut net = 0.0;
    for &tp in timescales.timepoints_in_series(series) {
        let tp_id = &timescales.timepoint(tp).id;
        let s = model
            .var_id(&ModelBuilder::component_name("Startup", &[project, tp_id]))
            .map(|v| values[v.index()])
            .unwrap_or(0.0);
        let d = model
            .var_id(&ModelBuilder::component_name("Shutdown", &[project, tp_id]))
            .map(|v| values[v.index()])
            .unwrap_or(0.0);
        net += s - d;
    }
    net
}

/// Piecewise heat-rate envelope value at (commit, dispatch) MW.
pub fn fuel_envelope(segments: &[(f64, f64)], commit: f64, dispatch: f64) -> f64 {
    segments
        .iter()
        .map(|&(i, s)| i * commit + s * dispatch)
        .fold(0.0, f64::max)
}
