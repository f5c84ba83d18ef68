//! Generic storage with independently sized power and energy, circular
//! state-of-charge tracking per timeseries, optional annual cycle limits, and
//! spinning-reserve participation.
//!
//! Losses are split: charging multiplies by charge efficiency, discharging
//! divides by discharge efficiency, so StateOfCharge stays in stored-energy
//! units. SOC links are circular within each series; a non-circular series
//! starts empty.
//!
//! Variable cardinality for S storage projects over T timepoints: 2 build
//! variables per (project, buildable vintage) plus 3*S*T operational
//! variables (plus S*T reserve variables when participating in reserves).

use std::collections::BTreeMap;

use crate::compose::{BuildContext, Callback, EngineModule, OptionSpec, ReserveProvision};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::expr::LinearExpression;
use crate::generators::vintage_active;
use crate::model::{BalanceSide, CostDomain, Integrality, ModelBuilder, Sense, INF};

#[derive(Debug, Clone)]
pub struct StorageProject {
    pub name: String,
    pub zone: usize,
    pub max_age_years: i64,
    pub fixed_om: f64,
    pub variable_om: f64,
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
    pub outage_derate: f64,
    pub max_cycles_per_year: Option<f64>,
    pub can_provide_reserves: bool,
    /// Overnight $/MW and $/MWh per buildable vintage period.
    pub power_cost: BTreeMap<usize, f64>,
    pub energy_cost: BTreeMap<usize, f64>,
    /// Existing builds: (build year, power MW, energy MWh).
    pub predetermined: Vec<(i64, f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct StorageSet {
    projects: Vec<StorageProject>,
}

impl StorageSet {
    pub fn len(&self) -> usize {
        self.projects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty()
    }

    pub fn get(&self, s: usize) -> &StorageProject {
        &self.projects[s]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.projects.iter().position(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StorageProject> {
        self.projects.iter()
    }
}

/// Storage module: builds, state of charge, cycle limits, reserve band.
#[derive(Debug, Default)]
pub struct StorageModule;

impl EngineModule for StorageModule {
    fn name(&self) -> &'static str {
        "generators.extensions.storage"
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
            key: "storage_reserve_fraction",
            default: "1.0",
            help: "fraction of storage power capacity eligible to provide spinning reserves",
        }]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[
            ("storage_projects", true),
            ("storage_build_costs", false),
            ("storage_predetermined", false),
        ]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?;
        let zones = ctx.zones(self.name())?;
        let table = data.require(self.name(), "storage_projects")?;
        let mut projects = Vec::new();
        for r in table.row_ids() {
            let name = table.get(r, "project")?.to_string();
            let zone = table.get(r, "zone")?;
            let Some(z) = zones.index(zone) else {
                return Err(Error::IntegrityError(format!(
                    "storage_projects row {} references unknown zone `{zone}`",
                    r + 1
                )));
            };
            let charge_eff = table.get_f64(r, "charge_efficiency")?;
            let discharge_eff = table.get_f64(r, "discharge_efficiency")?;
            for (label, eff) in [("charge", charge_eff), ("discharge", discharge_eff)] {
                if !(eff > 0.0 && eff <= 1.0) {
                    return Err(Error::InputError {
                        table: "storage_projects".into(),
                        row: r + 1,
                        message: format!("{label}_efficiency {eff} must be in (0,1]"),
                    });
                }
            }
            projects.push(StorageProject {
                name,
                zone: z,
                max_age_years: table.get_i64(r, "max_age_years")?,
                fixed_om: table.get_f64_or(r, "fixed_om_per_mw_yr", 0.0)?,
                variable_om: table.get_f64_or(r, "variable_om_per_mwh", 0.0)?,
                charge_efficiency: charge_eff,
                discharge_efficiency: discharge_eff,
                outage_derate: table.get_f64_or(r, "outage_derate", 0.0)?,
                max_cycles_per_year: table.get_f64_opt(r, "max_cycles_per_year")?,
                can_provide_reserves: table.get_bool_or(r, "can_provide_reserves", false)?,
                power_cost: BTreeMap::new(),
                energy_cost: BTreeMap::new(),
                predetermined: Vec::new(),
            });
        }
        projects.sort_by(|a, b| a.name.cmp(&b.name));
        let mut set = StorageSet { projects };

        if let Some(costs) = data.get("storage_build_costs") {
            for r in costs.row_ids() {
                let project = costs.get(r, "project")?;
                let period = costs.get(r, "period")?;
                let Some(s) = set.index(project) else {
                    return Err(Error::IntegrityError(format!(
                        "storage_build_costs row {} references project `{project}` \
                         absent from storage_projects",
                        r + 1
                    )));
                };
                let Some(p) = timescales.period_by_label(period) else {
                    return Err(Error::IntegrityError(format!(
                        "storage_build_costs row {} references unknown period `{period}`",
                        r + 1
                    )));
                };
                let power = costs.get_f64(r, "power_cost_per_mw")?;
                let Some(energy) = costs.get_f64_opt(r, "energy_cost_per_mwh")? else {
                    return Err(Error::MissingEnergyCost(project.to_string()));
                };
                set.projects[s].power_cost.insert(p.0, power);
                set.projects[s].energy_cost.insert(p.0, energy);
            }
        }

        if let Some(pre) = data.get("storage_predetermined") {
            for r in pre.row_ids() {
                let project = pre.get(r, "project")?;
                let Some(s) = set.index(project) else {
                    return Err(Error::IntegrityError(format!(
                        "storage_predetermined row {} references project `{project}` \
                         absent from storage_projects",
                        r + 1
                    )));
                };
                set.projects[s].predetermined.push((
                    pre.get_i64(r, "build_year")?,
                    pre.get_f64(r, "power_mw")?,
                    pre.get_f64(r, "energy_mwh")?,
                ));
            }
        }
        ctx.storage_projects = Some(set);
        Ok(())
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?.clone();
        let financials = *ctx.financials(self.name())?;
        let storage = ctx.storage_projects.clone().expect("loaded by this module");
        let reserve_fraction = ctx.options.get_f64("storage_reserve_fraction", 1.0)?;
        if !(0.0..=1.0).contains(&reserve_fraction) {
            return Err(Error::ConfigError(
                "storage_reserve_fraction must be in [0,1]".into(),
            ));
        }
        let spinning = ctx.has_module("balancing.operating_reserves.spinning_reserves_advanced");

        b.register_balance_component("DischargeStorage", BalanceSide::Injection)?;
        b.provide_balance_component("DischargeStorage");
        b.register_balance_component("ChargeStorage", BalanceSide::Withdrawal)?;
        b.provide_balance_component("ChargeStorage");
        b.register_cost_component("StorageCapitalCost", CostDomain::Period)?;
        b.provide_cost_component("StorageCapitalCost", CostDomain::Period);
        b.register_cost_component("StorageFixedOMCost", CostDomain::Period)?;
        b.provide_cost_component("StorageFixedOMCost", CostDomain::Period);
        b.register_cost_component("StorageVariableOMCost", CostDomain::Timepoint)?;
        b.provide_cost_component("StorageVariableOMCost", CostDomain::Timepoint);

        let mut provision: BTreeMap<(usize, usize), LinearExpression> = BTreeMap::new();
        for (s, proj) in storage.iter().enumerate() {
            let mut power_build = BTreeMap::new();
            let mut energy_build = BTreeMap::new();
            for &v in proj.power_cost.keys() {
                let label = timescales
                    .period(crate::timescales::PeriodId(v))
                    .label
                    .clone();
                power_build.insert(
                    v,
                    b.add_variable(
                        "BuildStoragePower",
                        &[&proj.name, &label],
                        0.0,
                        INF,
                        Integrality::Continuous,
                    )?,
                );
                energy_build.insert(
                    v,
                    b.add_variable(
                        "BuildStorageEnergy",
                        &[&proj.name, &label],
                        0.0,
                        INF,
                        Integrality::Continuous,
                    )?,
                );
            }
            let annuity =
                crate::financials::crf(financials.interest_rate, proj.max_age_years.max(1) as u32);
            for p in timescales.period_ids() {
                let start = timescales.period(p).start_year;
                let mut power = LinearExpression::zero();
                let mut energy = LinearExpression::zero();
                let mut capital = LinearExpression::zero();
                for (&v, &power_cost) in &proj.power_cost {
                    let vintage_year = timescales.period(crate::timescales::PeriodId(v)).start_year;
                    if vintage_active(vintage_year, proj.max_age_years, start) {
                        power = power.plus_term(power_build[&v], 1.0);
                        energy = energy.plus_term(energy_build[&v], 1.0);
                        capital = capital
                            .plus_term(power_build[&v], annuity * power_cost)
                            .plus_term(energy_build[&v], annuity * proj.energy_cost[&v]);
                    }
                }
                for &(year, power_mw, energy_mwh) in &proj.predetermined {
                    if vintage_active(year, proj.max_age_years, start) {
                        power = power.plus_constant(power_mw);
                        energy = energy.plus_constant(energy_mwh);
                    }
                }
                b.add_cost_term("StorageCapitalCost", p.0, &capital);
                b.add_cost_term("StorageFixedOMCost", p.0, &power.scaled(proj.fixed_om));
                ctx.storage.power_capacity.insert((s, p.0), power);
                ctx.storage.energy_capacity.insert((s, p.0), energy);
            }

            for tp in timescales.timepoint_ids() {
                let tp_id = timescales.timepoint(tp).id.clone();
                let charge = b.add_variable(
                    "ChargeStorage",
                    &[&proj.name, &tp_id],
                    0.0,
                    INF,
                    Integrality::Continuous,
                )?;
                let discharge = b.add_variable(
                    "DischargeStorage",
                    &[&proj.name, &tp_id],
                    0.0,
                    INF,
                    Integrality::Continuous,
                )?;
                let soc = b.add_variable(
                    "StateOfCharge",
                    &[&proj.name, &tp_id],
                    0.0,
                    INF,
                    Integrality::Continuous,
                )?;
                ctx.storage.charge.insert((s, tp.0), charge);
                ctx.storage.discharge.insert((s, tp.0), discharge);
                ctx.storage.soc.insert((s, tp.0), soc);
                b.add_balance_term(
                    "ChargeStorage",
                    proj.zone,
                    tp.0,
                    &LinearExpression::variable(charge),
                );
                b.add_balance_term(
                    "DischargeStorage",
                    proj.zone,
                    tp.0,
                    &LinearExpression::variable(discharge),
                );
                if proj.variable_om != 0.0 {
                    b.add_cost_term(
                        "StorageVariableOMCost",
                        tp.0,
                        &LinearExpression::term(discharge, proj.variable_om),
                    );
                }
            }

            for tp in timescales.timepoint_ids() {
                let tp_id = timescales.timepoint(tp).id.clone();
                let p = timescales.period_of_timepoint(tp);
                let dur = timescales.duration_hours(tp);
                let charge = ctx.storage.charge[&(s, tp.0)];
                let discharge = ctx.storage.discharge[&(s, tp.0)];
                let soc = ctx.storage.soc[&(s, tp.0)];
                let power = ctx.storage.power_capacity[&(s, p.0)].clone();
                let energy = ctx.storage.energy_capacity[&(s, p.0)].clone();
                let derated = power.scaled(1.0 - proj.outage_derate);

                b.add_constraint(
                    "Charge_Limit",
                    &[&proj.name, &tp_id],
                    LinearExpression::variable(charge).minus(&derated),
                    Sense::Le,
                    0.0,
                )?;
                b.add_constraint(
                    "Discharge_Limit",
                    &[&proj.name, &tp_id],
                    LinearExpression::variable(discharge).minus(&derated),
                    Sense::Le,
                    0.0,
                )?;
                b.add_constraint(
                    "SOC_Limit",
                    &[&proj.name, &tp_id],
                    LinearExpression::variable(soc).minus(&energy),
                    Sense::Le,
                    0.0,
                )?;

                // SOC[tp] - SOC[prev] = ceff*Charge*dur - Discharge*dur/deff
                let mut link = LinearExpression::variable(soc)
                    .plus_term(charge, -proj.charge_efficiency * dur)
                    .plus_term(discharge, dur / proj.discharge_efficiency);
                let series = timescales.timepoint(tp).series;
                let single_circular = timescales.timepoints_in_series(series).len() == 1
                    && timescales.series(series).circular;
                match timescales.previous(tp) {
                    Some(prev) => {
                        link = link.plus_term(ctx.storage.soc[&(s, prev.0)], -1.0);
                    }
                    None if single_circular => {
                        // degenerate one-timepoint loop: net flow must be zero
                        link = link.plus_term(soc, -1.0);
                    }
                    None => {} // non-circular series starts empty
                }
                b.add_constraint("SOC_Link", &[&proj.name, &tp_id], link, Sense::Eq, 0.0)?;

                if spinning && proj.can_provide_reserves && reserve_fraction > 0.0 {
                    let reserve = b.add_variable(
                        "StorageSpinningReserve",
                        &[&proj.name, &tp_id],
                        0.0,
                        INF,
                        Integrality::Continuous,
                    )?;
                    // headroom vs net discharge
                    b.add_constraint(
                        "Storage_Reserve_Power",
                        &[&proj.name, &tp_id],
                        LinearExpression::variable(reserve)
                            .plus_term(discharge, 1.0)
                            .plus_term(charge, -1.0)
                            .minus(&derated),
                        Sense::Le,
                        0.0,
                    )?;
                    // rights cap: the scenario knob that grants reserve rights
                    b.add_constraint(
                        "Storage_Reserve_Rights",
                        &[&proj.name, &tp_id],
                        LinearExpression::variable(reserve)
                            .minus(&derated.scaled(reserve_fraction)),
                        Sense::Le,
                        0.0,
                    )?;
                    // energy backing: sustained for the timepoint from start SOC
                    let mut backing = LinearExpression::term(reserve, dur);
                    match timescales.previous(tp) {
                        Some(prev) => {
                            backing = backing.plus_term(ctx.storage.soc[&(s, prev.0)], -1.0);
                        }
                        None if single_circular => {
                            backing = backing.plus_term(soc, -1.0);
                        }
                        None => {} // starts empty: no stored energy to back reserves
                    }
                    b.add_constraint(
                        "Storage_Reserve_Energy",
                        &[&proj.name, &tp_id],
                        backing,
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

            if let Some(cycles) = proj.max_cycles_per_year {
                for p in timescales.period_ids() {
                    let years = timescales.period(p).length_years;
                    let mut discharged = LinearExpression::zero();
                    for &tp in timescales.timepoints_in_period(p) {
                        discharged = discharged.plus_term(
                            ctx.storage.discharge[&(s, tp.0)],
                            timescales.weight(tp) / years,
                        );
                    }
                    let energy = ctx.storage.energy_capacity[&(s, p.0)].clone();
                    b.add_constraint(
                        "Cycle_Limit",
                        &[&proj.name, &timescales.period(p).label],
                        discharged.minus(&energy.scaled(cycles)),
                        Sense::Le,
                        0.0,
                    )?;
                }
            }
        }
        if spinning && !provision.is_empty() {
            ctx.reserve_provisions.push(ReserveProvision {
                provider: "storage".to_string(),
                by_area_tp: provision,
            });
        }
        Ok(())
    }
}
