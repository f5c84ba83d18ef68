//! Load zones and the per-zone, per-timepoint energy balance, plus the
//! optional unserved-load slack, planning reserve margin, spinning reserves,
//! and simple demand shifting.
//!
//! Variable cardinality per module (for a dataset with Z zones, T timepoints):
//! unserved_load adds Z*T UnservedLoad variables; demand_response.shift adds
//! 2*Z*T shift variables (plus Z*T reserve variables when dr_reserves is on);
//! the other balancing modules add none of their own.

use std::collections::BTreeMap;

use crate::compose::{BuildContext, Callback, EngineModule, OptionSpec, ReserveProvision};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::expr::LinearExpression;
use crate::model::{BalanceSide, CostDomain, Integrality, ModelBuilder, Sense, INF};
use crate::timescales::TimepointId;

/// Epsilon cost ($/MWh) on gross shifting that selects the zero shift among
/// cost-equivalent schedules while keeping the program linear.
pub const SHIFT_TIEBREAK_COST: f64 = 1e-6;

/// Zones and their demand, canonically sorted by zone name.
#[derive(Debug, Clone)]
pub struct ZoneSet {
    names: Vec<String>,
    /// MW demand per (zone index, timepoint index); complete by construction.
    demand: BTreeMap<(usize, usize), f64>,
}

impl ZoneSet {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> {
        0..self.names.len()
    }

    pub fn name(&self, z: usize) -> &str {
        &self.names[z]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn demand(&self, z: usize, tp: TimepointId) -> f64 {
        self.demand[&(z, tp.0)]
    }

    /// Peak of summed zonal demand over the timepoints of one period.
    pub fn peak_total_demand(&self, tps: &[TimepointId]) -> f64 {
        tps.iter()
            .map(|&tp| self.ids().map(|z| self.demand(z, tp)).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Grouping of zones into reserve balancing areas. Defaults to one area
/// spanning all zones.
#[derive(Debug, Clone)]
pub struct AreaSet {
    names: Vec<String>,
    zone_area: Vec<usize>,
}

impl AreaSet {
    pub fn single(zones: &ZoneSet) -> AreaSet {
        AreaSet {
            names: vec!["system".to_string()],
            zone_area: vec![0; zones.len()],
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> {
        0..self.names.len()
    }

    pub fn name(&self, a: usize) -> &str {
        &self.names[a]
    }

    pub fn area_of_zone(&self, z: usize) -> usize {
        self.zone_area[z]
    }

    pub fn zones_in(&self, a: usize) -> Vec<usize> {
        self.zone_area
            .iter()
            .enumerate()
            .filter(|&(_, &area)| area == a)
            .map(|(z, _)| z)
            .collect()
    }
}

/// Coefficients of the upward spinning-reserve requirement of one area.
#[derive(Debug, Clone, Copy)]
pub struct ReserveParams {
    pub load_fraction: f64,
    pub vre_fraction: f64,
    pub contingency_mw: f64,
}

/// Planning reserve margin configuration.
#[derive(Debug, Clone)]
pub struct PlanningParams {
    pub margin: f64,
    /// Capacity credit applied to variable generators (firm generators and
    /// storage power default to 1).
    pub variable_gen_credit: f64,
    /// Per-asset credit overrides by name.
    pub credit_overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct DemandShiftParams {
    /// Largest fraction of an hour's demand that may be moved out of it.
    pub shift_fraction: f64,
    /// Shifted demand may not exceed this multiple of the hour's demand.
    pub cap_multiplier: f64,
}

// ---------------------------------------------------------------------------
// balancing.load_zones
// ---------------------------------------------------------------------------

/// Defines load zones and assembles `Energy_Balance[z,tp]` from every
/// registered injection and withdrawal after all modules have defined theirs.
#[derive(Debug, Default)]
pub struct LoadZonesModule;

impl EngineModule for LoadZonesModule {
    fn name(&self) -> &'static str {
        "balancing.load_zones"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::LoadInputs, Callback::DefineDynamicComponents]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("load_zones", true), ("zone_demand", true)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?;
        let zone_table = data.require(self.name(), "load_zones")?;
        let mut names: Vec<String> = Vec::new();
        for r in zone_table.row_ids() {
            let name = zone_table.get(r, "zone")?.to_string();
            if names.contains(&name) {
                return Err(Error::IntegrityError(format!("duplicate zone `{name}`")));
            }
            names.push(name);
        }
        names.sort();

        let demand_table = data.require(self.name(), "zone_demand")?;
        let mut demand = BTreeMap::new();
        for r in demand_table.row_ids() {
            let zone = demand_table.get(r, "zone")?;
            let tp = demand_table.get(r, "timepoint")?;
            let mw = demand_table.get_f64(r, "demand_mw")?;
            let Some(z) = names.iter().position(|n| n == zone) else {
                return Err(Error::IntegrityError(format!(
                    "zone_demand row {} references unknown zone `{zone}`",
                    r + 1
                )));
            };
            let Some(t) = timescales.timepoint_by_id(tp) else {
                return Err(Error::IntegrityError(format!(
                    "zone_demand row {} references unknown timepoint `{tp}`",
                    r + 1
                )));
            };
            if mw < 0.0 {
                return Err(Error::InputError {
                    table: "zone_demand".into(),
                    row: r + 1,
                    message: format!("negative demand {mw}"),
                });
            }
            demand.insert((z, t.0), mw);
        }
        for (z, name) in names.iter().enumerate() {
            for tp in timescales.timepoint_ids() {
                if !demand.contains_key(&(z, tp.0)) {
                    return Err(Error::IntegrityError(format!(
                        "zone `{name}` has no demand for timepoint `{}`",
                        timescales.timepoint(tp).id
                    )));
                }
            }
        }
        ctx.zones = Some(ZoneSet { names, demand });
        Ok(())
    }

    fn define_dynamic_components(
        &self,
        b: &mut ModelBuilder,
        ctx: &mut BuildContext,
    ) -> Result<()> {
        let timescales = ctx.timescales(self.name())?;
        let zones = ctx.zones(self.name())?;
        if b.registry().injections.is_empty() {
            return Err(Error::ConfigError(
                "no injection components registered; no module supplies power".to_string(),
            ));
        }
        for z in zones.ids() {
            for tp in timescales.timepoint_ids() {
                let net = b.net_balance_expr(z, tp.0)?;
                b.add_constraint(
                    "Energy_Balance",
                    &[zones.name(z), &timescales.timepoint(tp).id],
                    net,
                    Sense::Eq,
                    zones.demand(z, tp),
                )?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// balancing.unserved_load
// ---------------------------------------------------------------------------

/// Allows imbalances at a configurable penalty per MWh of unserved energy.
#[derive(Debug, Default)]
pub struct UnservedLoadModule;

impl EngineModule for UnservedLoadModule {
    fn name(&self) -> &'static str {
        "balancing.unserved_load"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::DefineArguments, Callback::DefineComponents]
    }

    fn option_specs(&self) -> &'static [OptionSpec] {
        &[OptionSpec {
            key: "unserved_penalty",
            default: "5000",
            help: "penalty in $/MWh for unserved energy",
        }]
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let penalty = ctx.options.get_f64("unserved_penalty", 5000.0)?;
        if penalty < 0.0 {
            return Err(Error::ConfigError("unserved_penalty must be >= 0".into()));
        }
        if penalty == 0.0 {
            eprintln!("warning: unserved_penalty is 0; shedding all load is optimal");
        }
        let timescales = ctx.timescales(self.name())?.clone();
        let zones = ctx.zones(self.name())?.clone();
        b.register_balance_component("UnservedLoad", BalanceSide::Injection)?;
        b.provide_balance_component("UnservedLoad");
        b.register_cost_component("UnservedLoadPenalty", CostDomain::Timepoint)?;
        b.provide_cost_component("UnservedLoadPenalty", CostDomain::Timepoint);
        for z in zones.ids() {
            for tp in timescales.timepoint_ids() {
                let v = b.add_variable(
                    "UnservedLoad",
                    &[zones.name(z), &timescales.timepoint(tp).id],
                    0.0,
                    INF,
                    Integrality::Continuous,
                )?;
                let expr = LinearExpression::variable(v);
                b.add_balance_term("UnservedLoad", z, tp.0, &expr);
                b.add_cost_term("UnservedLoadPenalty", tp.0, &expr.scaled(penalty));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// balancing.operating_reserves.areas
// ---------------------------------------------------------------------------

/// Groups zones into reserve balancing areas (single system-wide area when
/// the table is absent).
#[derive(Debug, Default)]
pub struct ReserveAreasModule;

impl EngineModule for ReserveAreasModule {
    fn name(&self) -> &'static str {
        "balancing.operating_reserves.areas"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::LoadInputs]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("balancing_areas", false)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let zones = ctx.zones(self.name())?;
        let set = match data.get("balancing_areas") {
            None => AreaSet::single(zones),
            Some(table) => {
                let mut names: Vec<String> = Vec::new();
                let mut mapping: BTreeMap<usize, usize> = BTreeMap::new();
                for r in table.row_ids() {
                    let zone = table.get(r, "zone")?;
                    let area = table.get(r, "area")?.to_string();
                    let Some(z) = zones.index(zone) else {
                        return Err(Error::IntegrityError(format!(
                            "balancing_areas row {} references unknown zone `{zone}`",
                            r + 1
                        )));
                    };
                    let a = match names.iter().position(|n| n == &area) {
                        Some(a) => a,
                        None => {
                            names.push(area);
                            names.len() - 1
                        }
                    };
                    mapping.insert(z, a);
                }
                let mut zone_area = Vec::with_capacity(zones.len());
                for z in zones.ids() {
                    let Some(&a) = mapping.get(&z) else {
                        return Err(Error::IntegrityError(format!(
                            "zone `{}` is not assigned to a balancing area",
                            zones.name(z)
                        )));
                    };
                    zone_area.push(a);
                }
                AreaSet { names, zone_area }
            }
        };
        ctx.areas = Some(set);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// balancing.operating_reserves.spinning_reserves_advanced
// ---------------------------------------------------------------------------

/// Builds the per-area upward spinning-reserve requirement and the provision
/// balance over every registered provider family.
#[derive(Debug, Default)]
pub struct SpinningReservesModule;

impl EngineModule for SpinningReservesModule {
    fn name(&self) -> &'static str {
        "balancing.operating_reserves.spinning_reserves_advanced"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::LoadInputs, Callback::DefineDynamicComponents]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("reserve_params", true)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let areas = ctx.areas(self.name())?;
        let table = data.require(self.name(), "reserve_params")?;
        let mut by_area: BTreeMap<usize, ReserveParams> = BTreeMap::new();
        for r in table.row_ids() {
            let area = table.get(r, "area")?;
            let Some(a) = areas.names().iter().position(|n| n == area) else {
                return Err(Error::IntegrityError(format!(
                    "reserve_params row {} references unknown area `{area}`",
                    r + 1
                )));
            };
            let params = ReserveParams {
                load_fraction: table.get_f64_or(r, "load_fraction", 0.0)?,
                vre_fraction: table.get_f64_or(r, "vre_fraction", 0.0)?,
                contingency_mw: table.get_f64_or(r, "contingency_mw", 0.0)?,
            };
            if params.load_fraction <= 0.0
                && params.vre_fraction <= 0.0
                && params.contingency_mw <= 0.0
            {
                return Err(Error::InputError {
                    table: "reserve_params".into(),
                    row: r + 1,
                    message: "at least one reserve coefficient must be positive".into(),
                });
            }
            by_area.insert(a, params);
        }
        let mut params = Vec::with_capacity(areas.names().len());
        for a in areas.ids() {
            let Some(&p) = by_area.get(&a) else {
                return Err(Error::IntegrityError(format!(
                    "area `{}` has no reserve_params row",
                    areas.name(a)
                )));
            };
            params.push(p);
        }
        ctx.reserve_params = Some(params);
        Ok(())
    }

    fn define_dynamic_components(
        &self,
        b: &mut ModelBuilder,
        ctx: &mut BuildContext,
    ) -> Result<()> {
        let timescales = ctx.timescales(self.name())?;
        let zones = ctx.zones(self.name())?;
        let areas = ctx.areas(self.name())?;
        let params = ctx.reserve_params.as_ref().expect("loaded by this module");
        if ctx.reserve_provisions.is_empty() {
            return Err(Error::ConfigError(
                "spinning reserves active but no provider family (commitment, storage, \
                 or demand response) is available"
                    .to_string(),
            ));
        }
        let projects = ctx.projects.as_ref();
        for a in areas.ids() {
            let p = params[a];
            let area_zones = areas.zones_in(a);
            for tp in timescales.timepoint_ids() {
                let load: f64 = area_zones.iter().map(|&z| zones.demand(z, tp)).sum();
                let requirement = p.load_fraction * load + p.contingency_mw;

                // provisions minus the VRE-following part of the requirement
                let mut lhs = LinearExpression::zero();
                for provider in &ctx.reserve_provisions {
                    if let Some(e) = provider.by_area_tp.get(&(a, tp.0)) {
                        lhs = lhs.plus(e);
                    }
                }
                if p.vre_fraction > 0.0 {
                    if let Some(projects) = projects {
                        for (g, proj) in projects.iter().enumerate() {
                            if proj.is_variable && area_zones.contains(&proj.zone) {
                                if let Some(&d) = ctx.gen.dispatch.get(&(g, tp.0)) {
                                    lhs = lhs.plus_term(d, -p.vre_fraction);
                                }
                            }
                        }
                    }
                }
                b.add_constraint(
                    "Spinning_Reserve",
                    &[areas.name(a), &timescales.timepoint(tp).id],
                    lhs,
                    Sense::Ge,
                    requirement,
                )?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// balancing.planning_reserves
// ---------------------------------------------------------------------------

/// Requires firm capacity above peak demand in every period:
/// `sum(credit * capacity) >= (1 + margin) * peak`.
#[derive(Debug, Default)]
pub struct PlanningReservesModule;

impl EngineModule for PlanningReservesModule {
    fn name(&self) -> &'static str {
        "balancing.planning_reserves"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::LoadInputs, Callback::DefineDynamicComponents]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("planning_reserves", true), ("capacity_credits", false)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let table = data.require(self.name(), "planning_reserves")?;
        if table.num_rows() != 1 {
            return Err(Error::InputError {
                table: "planning_reserves".into(),
                row: table.num_rows(),
                message: "expected exactly one parameter row".into(),
            });
        }
        let mut credit_overrides = BTreeMap::new();
        if let Some(credits) = data.get("capacity_credits") {
            for r in credits.row_ids() {
                credit_overrides.insert(
                    credits.get(r, "asset")?.to_string(),
                    credits.get_f64(r, "credit")?,
                );
            }
        }
        ctx.planning = Some(PlanningParams {
            margin: table.get_f64(0, "margin")?,
            variable_gen_credit: table.get_f64_or(0, "variable_gen_credit", 1.0)?,
            credit_overrides,
        });
        Ok(())
    }

    fn define_dynamic_components(
        &self,
        b: &mut ModelBuilder,
        ctx: &mut BuildContext,
    ) -> Result<()> {
        let timescales = ctx.timescales(self.name())?;
        let zones = ctx.zones(self.name())?;
        let planning = ctx.planning.as_ref().expect("loaded by this module");
        if planning.margin < 0.0 {
            return Err(Error::ConfigError("planning margin must be >= 0".into()));
        }
        for p in timescales.period_ids() {
            let mut firm = LinearExpression::zero();
            if let Some(projects) = ctx.projects.as_ref() {
                for (g, proj) in projects.iter().enumerate() {
                    let credit = planning
                        .credit_overrides
                        .get(&proj.name)
                        .copied()
                        .unwrap_or(if proj.is_variable {
                            planning.variable_gen_credit
                        } else {
                            1.0
                        });
                    if let Some(cap) = ctx.gen.capacity.get(&(g, p.0)) {
                        firm = firm.plus(&cap.scaled(credit));
                    }
                }
            }
            if let Some(storage) = ctx.storage_projects.as_ref() {
                for (s, proj) in storage.iter().enumerate() {
                    let credit = planning
                        .credit_overrides
                        .get(&proj.name)
                        .copied()
                        .unwrap_or(1.0);
                    if let Some(cap) = ctx.storage.power_capacity.get(&(s, p.0)) {
                        firm = firm.plus(&cap.scaled(credit));
                    }
                }
            }
            let peak = zones.peak_total_demand(timescales.timepoints_in_period(p));
            b.add_constraint(
                "Planning_Reserve",
                &[&timescales.period(p).label],
                firm,
                Sense::Ge,
                (1.0 + planning.margin) * peak,
            )?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// balancing.demand_response.shift
// ---------------------------------------------------------------------------

/// Energy-neutral demand shifting within each timeseries: up to
/// `shift_fraction` of each hour's demand may move to other hours, and no
/// hour's demand may exceed `cap_multiplier` times its base value. With
/// `dr_reserves=true` the unused downward band provides spinning reserves.
#[derive(Debug, Default)]
pub struct DemandShiftModule;

impl EngineModule for DemandShiftModule {
    fn name(&self) -> &'static str {
        "balancing.demand_response.shift"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[
            Callback::DefineArguments,
            Callback::LoadInputs,
            Callback::DefineComponents,
        ]
    }

    fn option_specs(&self) -> &'static [OptionSpec] {
        &[OptionSpec {
            key: "dr_reserves",
            default: "false",
            help: "demand response may provide spinning reserves",
        }]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("demand_shift", true)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let table = data.require(self.name(), "demand_shift")?;
        if table.num_rows() != 1 {
            return Err(Error::InputError {
                table: "demand_shift".into(),
                row: table.num_rows(),
                message: "expected exactly one parameter row".into(),
            });
        }
        let params = DemandShiftParams {
            shift_fraction: table.get_f64(0, "shift_fraction")?,
            cap_multiplier: table.get_f64(0, "cap_multiplier")?,
        };
        if !(0.0..=1.0).contains(&params.shift_fraction) {
            return Err(Error::InputError {
                table: "demand_shift".into(),
                row: 1,
                message: "shift_fraction must be in [0,1]".into(),
            });
        }
        if params.cap_multiplier < 1.0 {
            return Err(Error::InputError {
                table: "demand_shift".into(),
                row: 1,
                message: "cap_multiplier must be >= 1".into(),
            });
        }
        ctx.demand_shift = Some(params);
        Ok(())
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let params = *ctx.demand_shift.as_ref().expect("loaded by this module");
        let timescales = ctx.timescales(self.name())?.clone();
        let zones = ctx.zones(self.name())?.clone();
        let dr_reserves = ctx.options.get_bool("dr_reserves", false)?;
        let spinning = ctx.has_module("balancing.operating_reserves.spinning_reserves_advanced");

        b.register_balance_component("ShiftLoad", BalanceSide::Withdrawal)?;
        b.provide_balance_component("ShiftLoad");
        b.register_cost_component("DemandShiftTiebreak", CostDomain::Timepoint)?;
        b.provide_cost_component("DemandShiftTiebreak", CostDomain::Timepoint);

        let mut provision: BTreeMap<(usize, usize), LinearExpression> = BTreeMap::new();
        for z in zones.ids() {
            for s in timescales.series_ids() {
                let mut neutral = LinearExpression::zero();
                for &tp in timescales.timepoints_in_series(s) {
                    let demand = zones.demand(z, tp);
                    let tp_id = timescales.timepoint(tp).id.clone();
                    let up = b.add_variable(
                        "ShiftUp",
                        &[zones.name(z), &tp_id],
                        0.0,
                        INF,
                        Integrality::Continuous,
                    )?;
                    // the move-out limit is a plain variable bound
                    let down = b.add_variable(
                        "ShiftDown",
                        &[zones.name(z), &tp_id],
                        0.0,
                        params.shift_fraction * demand,
                        Integrality::Continuous,
                    )?;
                    ctx.shift.insert((z, tp.0), (up, down));
                    let net = LinearExpression::variable(up).plus_term(down, -1.0);
                    b.add_balance_term("ShiftLoad", z, tp.0, &net);
                    b.add_constraint(
                        "Shift_Cap",
                        &[zones.name(z), &tp_id],
                        net.clone(),
                        Sense::Le,
                        (params.cap_multiplier - 1.0) * demand,
                    )?;
                    let gross = LinearExpression::variable(up).plus_term(down, 1.0);
                    b.add_cost_term(
                        "DemandShiftTiebreak",
                        tp.0,
                        &gross.scaled(SHIFT_TIEBREAK_COST),
                    );
                    neutral = neutral.plus(&net.scaled(timescales.duration_hours(tp)));

                    if dr_reserves && spinning {
                        let reserve = b.add_variable(
                            "DrSpinningReserve",
                            &[zones.name(z), &tp_id],
                            0.0,
                            INF,
                            Integrality::Continuous,
                        )?;
                        // reserve <= scheduled load minus minimum allowed load
                        b.add_constraint(
                            "Dr_Reserve_Limit",
                            &[zones.name(z), &tp_id],
                            LinearExpression::variable(reserve).minus(&net),
                            Sense::Le,
                            params.shift_fraction * demand,
                        )?;
                        let area = ctx.areas(self.name())?.area_of_zone(z);
                        let entry = provision
                            .entry((area, tp.0))
                            .or_insert_with(LinearExpression::zero);
                        *entry = entry.plus(&LinearExpression::variable(reserve));
                    }
                }
                b.add_constraint(
                    "Shift_Balance",
                    &[zones.name(z), &timescales.series(s).id],
                    neutral,
                    Sense::Eq,
                    0.0,
                )?;
            }
        }
        if dr_reserves && spinning {
            ctx.reserve_provisions.push(ReserveProvision {
                provider: "demand_response".to_string(),
                by_area_tp: provision,
            });
        }
        Ok(())
    }
}
