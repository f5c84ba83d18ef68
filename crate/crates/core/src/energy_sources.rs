//! Fuel and non-fuel energy source definitions, flat fuel pricing, and
//! regional fuel markets with tiered supply curves.
//!
//! Simple and market pricing are mutually exclusive per fuel. Market tier
//! consumption is accounted annually: timepoint weights convert sampled hours
//! to a year.
//!
//! Variable cardinality: fuel_costs.markets adds one ConsumeTier variable per
//! (market, period, tier); the other modules add none.

use std::collections::{BTreeMap, BTreeSet};

use crate::compose::{BuildContext, Callback, EngineModule};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::expr::LinearExpression;
use crate::model::{CostDomain, Integrality, ModelBuilder, Sense, INF};
use crate::timescales::PeriodId;

#[derive(Debug, Clone)]
pub struct EnergySource {
    pub name: String,
    pub is_fuel: bool,
    /// tCO2 per MMBtu burned; zero for non-fuel sources.
    pub co2_intensity: f64,
    pub renewable: bool,
}

/// All energy sources, canonically sorted by name.
#[derive(Debug, Clone)]
pub struct SourceSet {
    sources: Vec<EnergySource>,
}

impl SourceSet {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn get(&self, i: usize) -> &EnergySource {
        &self.sources[i]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.sources.iter().position(|s| s.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EnergySource> {
        self.sources.iter()
    }
}

/// Flat $/MMBtu prices keyed by (zone, source, period).
#[derive(Debug, Clone, Default)]
pub struct SimplePrices {
    pub prices: BTreeMap<(usize, usize, usize), f64>,
    pub fuels: BTreeSet<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct SupplyTier {
    pub price: f64,
    /// MMBtu per year; infinite for an uncapped top tier.
    pub limit: f64,
}

/// Regional fuel markets: zone/fuel membership and per-period supply tiers.
#[derive(Debug, Clone, Default)]
pub struct FuelMarkets {
    pub markets: Vec<String>,
    /// (zone, source) -> market index.
    pub membership: BTreeMap<(usize, usize), usize>,
    /// (market, period) -> tiers with nondecreasing prices.
    pub tiers: BTreeMap<(usize, usize), Vec<SupplyTier>>,
    pub fuels: BTreeSet<usize>,
}

// ---------------------------------------------------------------------------
// energy_sources.properties
// ---------------------------------------------------------------------------

/// Loads the energy source catalog.
#[derive(Debug, Default)]
pub struct SourcePropertiesModule;

impl EngineModule for SourcePropertiesModule {
    fn name(&self) -> &'static str {
        "energy_sources.properties"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::LoadInputs]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("energy_sources", true)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let table = data.require(self.name(), "energy_sources")?;
        let mut sources = Vec::new();
        for r in table.row_ids() {
            let co2 = table.get_f64_or(r, "co2_intensity_t_per_mmbtu", 0.0)?;
            if !co2.is_finite() || co2 < 0.0 {
                return Err(Error::InputError {
                    table: "energy_sources".into(),
                    row: r + 1,
                    message: format!("invalid co2 intensity {co2}"),
                });
            }
            sources.push(EnergySource {
                name: table.get(r, "source")?.to_string(),
                is_fuel: table.get_bool_or(r, "is_fuel", false)?,
                co2_intensity: co2,
                renewable: table.get_bool_or(r, "renewable", false)?,
            });
        }
        sources.sort_by(|a, b| a.name.cmp(&b.name));
        sources.dedup_by(|a, b| a.name == b.name);
        ctx.sources = Some(SourceSet { sources });
        Ok(())
    }
}

/// Fuels consumed by at least one project, with the consuming zones.
fn consumed_fuels(ctx: &BuildContext) -> Vec<(usize, usize)> {
    let mut out = BTreeSet::new();
    if let Some(projects) = ctx.projects.as_ref() {
        if let Some(sources) = ctx.sources.as_ref() {
            for proj in projects.iter() {
                for &f in &proj.sources {
                    if sources.get(f).is_fuel {
                        out.insert((proj.zone, f));
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

// ---------------------------------------------------------------------------
// energy_sources.fuel_costs.simple
// ---------------------------------------------------------------------------

/// Flat fuel cost per (zone, fuel, period), booked as a timepoint cost flow.
#[derive(Debug, Default)]
pub struct SimpleFuelCostsModule;

impl EngineModule for SimpleFuelCostsModule {
    fn name(&self) -> &'static str {
        "energy_sources.fuel_costs.simple"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::LoadInputs, Callback::DefineComponents]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("fuel_simple_costs", true)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let zones = ctx.zones(self.name())?;
        let sources = ctx.sources(self.name())?;
        let timescales = ctx.timescales(self.name())?;
        let table = data.require(self.name(), "fuel_simple_costs")?;
        let mut prices = BTreeMap::new();
        let mut fuels = BTreeSet::new();
        for r in table.row_ids() {
            let zone = table.get(r, "zone")?;
            let fuel = table.get(r, "fuel")?;
            let period = table.get(r, "period")?;
            let Some(z) = zones.index(zone) else {
                return Err(Error::IntegrityError(format!(
                    "fuel_simple_costs row {} references unknown zone `{zone}`",
                    r + 1
                )));
            };
            let Some(f) = sources.index(fuel) else {
                return Err(Error::IntegrityError(format!(
                    "fuel_simple_costs row {} references unknown fuel `{fuel}`",
                    r + 1
                )));
            };
            let Some(p) = timescales.period_by_label(period) else {
                return Err(Error::IntegrityError(format!(
                    "fuel_simple_costs row {} references unknown period `{period}`",
                    r + 1
                )));
            };
            prices.insert((z, f, p.0), table.get_f64(r, "price_per_mmbtu")?);
            fuels.insert(f);
        }
        ctx.simple_prices = Some(SimplePrices { prices, fuels });
        Ok(())
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let prices = ctx.simple_prices.clone().expect("loaded by this module");
        if let Some(markets) = ctx.fuel_markets.as_ref() {
            if let Some(&f) = prices.fuels.intersection(&markets.fuels).next() {
                let name = ctx.sources(self.name())?.get(f).name.clone();
                return Err(Error::ConfigError(format!(
                    "fuel `{name}` is priced by both the simple and markets modules"
                )));
            }
        }
        let timescales = ctx.timescales(self.name())?.clone();
        let sources = ctx.sources(self.name())?.clone();
        let zones = ctx.zones(self.name())?.clone();
        b.register_cost_component("FuelSimpleCost", CostDomain::Timepoint)?;
        b.provide_cost_component("FuelSimpleCost", CostDomain::Timepoint);

        let market_fuels = ctx
            .fuel_markets
            .as_ref()
            .map(|m| m.fuels.clone())
            .unwrap_or_default();
        for (z, f) in consumed_fuels(ctx) {
            if market_fuels.contains(&f) {
                continue;
            }
            for p in timescales.period_ids() {
                if !prices.prices.contains_key(&(z, f, p.0)) {
                    return Err(Error::MissingInput {
                        module: self.name().to_string(),
                        table: format!(
                            "fuel_simple_costs.csv row for (zone `{}`, fuel `{}`, period `{}`)",
                            zones.name(z),
                            sources.get(f).name,
                            timescales.period(p).label
                        ),
                    });
                }
            }
        }

        let projects = ctx.projects(self.name())?;
        for (g, proj) in projects.iter().enumerate() {
            for &f in &proj.sources {
                if !sources.get(f).is_fuel || market_fuels.contains(&f) {
                    continue;
                }
                for tp in timescales.timepoint_ids() {
                    let p = timescales.period_of_timepoint(tp);
                    let price = prices.prices[&(proj.zone, f, p.0)];
                    if let Some(&fu) = ctx.gen.fuel_use.get(&(g, tp.0, f)) {
                        b.add_cost_term("FuelSimpleCost", tp.0, &LinearExpression::term(fu, price));
                    }
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// energy_sources.fuel_costs.markets
// ---------------------------------------------------------------------------

/// Regional fuel markets with tiered annual supply curves. Consumption is
/// balanced per (market, period): `sum(tiers) >= annualized fuel use`, so the
/// constraint's dual is the marginal fuel price.
#[derive(Debug, Default)]
pub struct FuelMarketsModule;

impl EngineModule for FuelMarketsModule {
    fn name(&self) -> &'static str {
        "energy_sources.fuel_costs.markets"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[
            Callback::LoadInputs,
            Callback::DefineComponents,
            Callback::DefineDynamicComponents,
        ]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("fuel_markets", true), ("fuel_supply_tiers", true)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let zones = ctx.zones(self.name())?;
        let sources = ctx.sources(self.name())?;
        let timescales = ctx.timescales(self.name())?;

        let membership_table = data.require(self.name(), "fuel_markets")?;
        let mut markets: Vec<String> = Vec::new();
        let mut membership = BTreeMap::new();
        let mut fuels = BTreeSet::new();
        for r in membership_table.row_ids() {
            let market = membership_table.get(r, "market")?.to_string();
            let zone = membership_table.get(r, "zone")?;
            let fuel = membership_table.get(r, "fuel")?;
            let Some(z) = zones.index(zone) else {
                return Err(Error::IntegrityError(format!(
                    "fuel_markets row {} references unknown zone `{zone}`",
                    r + 1
                )));
            };
            let Some(f) = sources.index(fuel) else {
                return Err(Error::IntegrityError(format!(
                    "fuel_markets row {} references unknown fuel `{fuel}`",
                    r + 1
                )));
            };
            let m = match markets.iter().position(|n| n == &market) {
                Some(m) => m,
                None => {
                    markets.push(market);
                    markets.len() - 1
                }
            };
            if membership.insert((z, f), m).is_some() {
                return Err(Error::IntegrityError(format!(
                    "zone `{zone}` / fuel `{fuel}` is mapped to more than one market"
                )));
            }
            fuels.insert(f);
        }

        let tier_table = data.require(self.name(), "fuel_supply_tiers")?;
        let mut tier_rows: BTreeMap<(usize, usize), Vec<(usize, SupplyTier)>> = BTreeMap::new();
        for r in tier_table.row_ids() {
            let market = tier_table.get(r, "market")?;
            let period = tier_table.get(r, "period")?;
            let Some(m) = markets.iter().position(|n| n == market) else {
                return Err(Error::IntegrityError(format!(
                    "fuel_supply_tiers row {} references unknown market `{market}`",
                    r + 1
                )));
            };
            let Some(p) = timescales.period_by_label(period) else {
                return Err(Error::IntegrityError(format!(
                    "fuel_supply_tiers row {} references unknown period `{period}`",
                    r + 1
                )));
            };
            let tier = tier_table.get_usize(r, "tier")?;
            let limit = tier_table
                .get_f64_opt(r, "limit_mmbtu_per_year")?
                .unwrap_or(INF);
            tier_rows.entry((m, p.0)).or_default().push((
                tier,
                SupplyTier {
                    price: tier_table.get_f64(r, "price_per_mmbtu")?,
                    limit,
                },
            ));
        }
        let mut tiers = BTreeMap::new();
        for ((m, p), mut rows) in tier_rows {
            rows.sort_by_key(|&(t, _)| t);
            let ordered: Vec<SupplyTier> = rows.into_iter().map(|(_, t)| t).collect();
            for pair in ordered.windows(2) {
                if pair[1].price < pair[0].price {
                    return Err(Error::InputError {
                        table: "fuel_supply_tiers".into(),
                        row: 0,
                        message: format!(
                            "market `{}` period `{}`: tier prices must be nondecreasing",
                            markets[m],
                            timescales.period(PeriodId(p)).label
                        ),
                    });
                }
            }
            tiers.insert((m, p), ordered);
        }

        ctx.fuel_markets = Some(FuelMarkets {
            markets,
            membership,
            tiers,
            fuels,
        });
        Ok(())
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let markets = ctx.fuel_markets.clone().expect("loaded by this module");
        if let Some(simple) = ctx.simple_prices.as_ref() {
            if let Some(&f) = markets.fuels.intersection(&simple.fuels).next() {
                let name = ctx.sources(self.name())?.get(f).name.clone();
                return Err(Error::ConfigError(format!(
                    "fuel `{name}` is priced by both the simple and markets modules"
                )));
            }
        }
        // every consumed market fuel must have a membership row
        let zones = ctx.zones(self.name())?.clone();
        let sources = ctx.sources(self.name())?.clone();
        for (z, f) in consumed_fuels(ctx) {
            let simple_covers = ctx
                .simple_prices
                .as_ref()
                .map(|s| s.fuels.contains(&f))
                .unwrap_or(false);
            if !simple_covers && !markets.membership.contains_key(&(z, f)) {
                return Err(Error::IntegrityError(format!(
                    "fuel `{}` consumed in zone `{}` has no market membership",
                    sources.get(f).name,
                    zones.name(z)
                )));
            }
        }

        let timescales = ctx.timescales(self.name())?.clone();
        b.register_cost_component("FuelMarketCost", CostDomain::Period)?;
        b.provide_cost_component("FuelMarketCost", CostDomain::Period);
        for (m, market) in markets.markets.iter().enumerate() {
            for p in timescales.period_ids() {
                let Some(tiers) = markets.tiers.get(&(m, p.0)) else {
                    continue;
                };
                for (t, tier) in tiers.iter().enumerate() {
                    let v = b.add_variable(
                        "ConsumeTier",
                        &[market, &timescales.period(p).label, &t.to_string()],
                        0.0,
                        tier.limit,
                        Integrality::Continuous,
                    )?;
                    b.add_cost_term(
                        "FuelMarketCost",
                        p.0,
                        &LinearExpression::term(v, tier.price),
                    );
                }
            }
        }
        Ok(())
    }

    fn define_dynamic_components(
        &self,
        b: &mut ModelBuilder,
        ctx: &mut BuildContext,
    ) -> Result<()> {
        let markets = ctx.fuel_markets.as_ref().expect("loaded by this module");
        let timescales = ctx.timescales(self.name())?;
        let projects = ctx.projects(self.name())?;
        for (m, market) in markets.markets.iter().enumerate() {
            for p in timescales.period_ids() {
                // annualized consumption for this market and period
                let mut consumption = LinearExpression::zero();
                let years = timescales.period(p).length_years;
                for (g, proj) in projects.iter().enumerate() {
                    for &f in &proj.sources {
                        if markets.membership.get(&(proj.zone, f)) != Some(&m) {
                            continue;
                        }
                        for &tp in timescales.timepoints_in_period(p) {
                            if let Some(&fu) = ctx.gen.fuel_use.get(&(g, tp.0, f)) {
                                consumption =
                                    consumption.plus_term(fu, timescales.weight(tp) / years);
                            }
                        }
                    }
                }
                let mut supply = LinearExpression::zero();
                let num_tiers = markets.tiers.get(&(m, p.0)).map(|t| t.len()).unwrap_or(0);
                for t in 0..num_tiers {
                    let name = ModelBuilder::component_name(
                        "ConsumeTier",
                        &[market, &timescales.period(p).label, &t.to_string()],
                    );
                    let v = b.var_id(&name).expect("tier variable defined above");
                    supply = supply.plus_term(v, 1.0);
                }
                if consumption.is_empty() && num_tiers == 0 {
                    continue;
                }
                b.add_constraint(
                    "Market_Balance",
                    &[market, &timescales.period(p).label],
                    supply.minus(&consumption),
                    Sense::Ge,
                    0.0,
                )?;
            }
        }
        Ok(())
    }
}

/// Annual emissions expression (tCO2/yr) per period from all fuel use.
pub fn emissions_by_period(ctx: &BuildContext) -> Result<BTreeMap<usize, LinearExpression>> {
    let timescales = ctx.timescales("energy_sources")?;
    let sources = ctx.sources("energy_sources")?;
    let mut out: BTreeMap<usize, LinearExpression> = BTreeMap::new();
    for p in timescales.period_ids() {
        out.insert(p.0, LinearExpression::zero());
    }
    if let Some(projects) = ctx.projects.as_ref() {
        for (g, proj) in projects.iter().enumerate() {
            for &f in &proj.sources {
                let intensity = sources.get(f).co2_intensity;
                if !sources.get(f).is_fuel || intensity == 0.0 {
                    continue;
                }
                for tp in timescales.timepoint_ids() {
                    if let Some(&fu) = ctx.gen.fuel_use.get(&(g, tp.0, f)) {
                        let p = timescales.period_of_timepoint(tp);
                        let years = timescales.period(p).length_years;
                        let e = out.get_mut(&p.0).unwrap();
                        *e = e.plus_term(fu, intensity * timescales.weight(tp) / years);
                    }
                }
            }
        }
    }
    Ok(out)
}
