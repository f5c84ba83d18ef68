//! Renewable portfolio standards, carbon caps, and carbon taxes.
//!
//! The RPS denominator is total zonal demand energy. A project counts as
//! renewable when every one of its energy sources is flagged renewable;
//! storage losses do not count against the target. These modules add no
//! decision variables.

use std::collections::BTreeMap;

use crate::compose::{BuildContext, Callback, EngineModule, OptionSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::expr::LinearExpression;
use crate::model::{CostDomain, ModelBuilder, Sense};

#[derive(Debug, Clone, Default)]
pub struct PolicyParams {
    /// Renewable share target per period index, between 0 and 1.
    pub rps_target: BTreeMap<usize, f64>,
    /// Annual tCO2 cap per period index; absent means uncapped.
    pub carbon_cap: BTreeMap<usize, f64>,
    /// $/tCO2 per period index.
    pub carbon_tax: BTreeMap<usize, f64>,
}

fn policies_mut(ctx: &mut BuildContext) -> &mut PolicyParams {
    ctx.policies.get_or_insert_with(PolicyParams::default)
}

// ---------------------------------------------------------------------------
// policies.rps
// ---------------------------------------------------------------------------

/// Simple RPS: weighted renewable dispatch must cover at least the target
/// fraction of weighted demand in each period.
#[derive(Debug, Default)]
pub struct RpsModule;

impl EngineModule for RpsModule {
    fn name(&self) -> &'static str {
        "policies.rps"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[
            Callback::DefineArguments,
            Callback::LoadInputs,
            Callback::DefineDynamicComponents,
        ]
    }

    fn option_specs(&self) -> &'static [OptionSpec] {
        &[OptionSpec {
            key: "rps_target",
            default: "",
            help: "override the RPS target fraction for every period",
        }]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("rps_targets", true)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?;
        let table = data.require(self.name(), "rps_targets")?;
        let mut targets = BTreeMap::new();
        for r in table.row_ids() {
            let period = table.get(r, "period")?;
            let Some(p) = timescales.period_by_label(period) else {
                return Err(Error::IntegrityError(format!(
                    "rps_targets row {} references unknown period `{period}`",
                    r + 1
                )));
            };
            let target = table.get_f64(r, "target")?;
            if !(0.0..=1.0).contains(&target) {
                return Err(Error::InputError {
                    table: "rps_targets".into(),
                    row: r + 1,
                    message: format!("target {target} must be in [0,1]"),
                });
            }
            targets.insert(p.0, target);
        }
        if let Some(raw) = ctx.options.get_str("rps_target") {
            let target: f64 = raw.parse().map_err(|_| {
                Error::ConfigError(format!("option `rps_target`: `{raw}` is not a number"))
            })?;
            for p in timescales.period_ids() {
                targets.insert(p.0, target);
            }
        }
        policies_mut(ctx).rps_target = targets;
        Ok(())
    }

    fn define_dynamic_components(
        &self,
        b: &mut ModelBuilder,
        ctx: &mut BuildContext,
    ) -> Result<()> {
        let timescales = ctx.timescales(self.name())?;
        let zones = ctx.zones(self.name())?;
        let sources = ctx.sources(self.name())?;
        let projects = ctx.projects(self.name())?;
        let targets = ctx
            .policies
            .as_ref()
            .map(|p| p.rps_target.clone())
            .unwrap_or_default();
        for p in timescales.period_ids() {
            let Some(&target) = targets.get(&p.0) else {
                continue;
            };
            if target == 0.0 {
                continue; // vacuous
            }
            let mut renewable = LinearExpression::zero();
            for (g, proj) in projects.iter().enumerate() {
                if !proj.sources.iter().all(|&f| sources.get(f).renewable) {
                    continue;
                }
                for &tp in timescales.timepoints_in_period(p) {
                    renewable =
                        renewable.plus_term(ctx.gen.dispatch[&(g, tp.0)], timescales.weight(tp));
                }
            }
            let demand_energy: f64 = timescales
                .timepoints_in_period(p)
                .iter()
                .map(|&tp| {
                    timescales.weight(tp) * zones.ids().map(|z| zones.demand(z, tp)).sum::<f64>()
                })
                .sum();
            b.add_constraint(
                "RPS",
                &[&timescales.period(p).label],
                renewable,
                Sense::Ge,
                target * demand_energy,
            )?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// policies.carbon
// ---------------------------------------------------------------------------

/// Carbon caps (annual tCO2 per period) and carbon taxes ($/tCO2).
#[derive(Debug, Default)]
pub struct CarbonPoliciesModule;

impl EngineModule for CarbonPoliciesModule {
    fn name(&self) -> &'static str {
        "policies.carbon"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[
            Callback::DefineArguments,
            Callback::LoadInputs,
            Callback::DefineComponents,
        ]
    }

    fn option_specs(&self) -> &'static [OptionSpec] {
        &[
            OptionSpec {
                key: "carbon_cap",
                default: "",
                help: "override the annual carbon cap (tCO2/yr) for every period",
            },
            OptionSpec {
                key: "carbon_tax",
                default: "",
                help: "override the carbon tax ($/tCO2) for every period",
            },
        ]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("carbon_policies", true)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?;
        let table = data.require(self.name(), "carbon_policies")?;
        let mut caps = BTreeMap::new();
        let mut taxes = BTreeMap::new();
        for r in table.row_ids() {
            let period = table.get(r, "period")?;
            let Some(p) = timescales.period_by_label(period) else {
                return Err(Error::IntegrityError(format!(
                    "carbon_policies row {} references unknown period `{period}`",
                    r + 1
                )));
            };
            if let Some(cap) = table.get_f64_opt(r, "cap_tco2_per_year")? {
                caps.insert(p.0, cap);
            }
            let tax = table.get_f64_or(r, "tax_per_tco2", 0.0)?;
            if tax < 0.0 {
                return Err(Error::InputError {
                    table: "carbon_policies".into(),
                    row: r + 1,
                    message: format!("negative carbon tax {tax}"),
                });
            }
            taxes.insert(p.0, tax);
        }
        let override_num = |ctx: &BuildContext, key: &str| -> Result<Option<f64>> {
            match ctx.options.get_str(key) {
                None => Ok(None),
                Some(raw) => raw.parse::<f64>().map(Some).map_err(|_| {
                    Error::ConfigError(format!("option `{key}`: `{raw}` is not a number"))
                }),
            }
        };
        if let Some(cap) = override_num(ctx, "carbon_cap")? {
            for p in timescales.period_ids() {
                caps.insert(p.0, cap);
            }
        }
        if let Some(tax) = override_num(ctx, "carbon_tax")? {
            for p in timescales.period_ids() {
                taxes.insert(p.0, tax);
            }
        }
        let policies = policies_mut(ctx);
        policies.carbon_cap = caps;
        policies.carbon_tax = taxes;
        Ok(())
    }

    /// Runs after the generator modules in any valid list, so every FuelUse
    /// variable already exists; the tax must be booked here (not in the
    /// dynamic phase) for the objective assembly to see it.
    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        b.register_cost_component("CarbonTaxCost", CostDomain::Period)?;
        b.provide_cost_component("CarbonTaxCost", CostDomain::Period);
        let emissions = crate::energy_sources::emissions_by_period(ctx)?;
        let timescales = ctx.timescales(self.name())?;
        let params = ctx.policies.clone().unwrap_or_default();
        for p in timescales.period_ids() {
            let expr = &emissions[&p.0];
            if let Some(&cap) = params.carbon_cap.get(&p.0) {
                if cap.is_finite() {
                    b.add_constraint(
                        "Carbon_Cap",
                        &[&timescales.period(p).label],
                        expr.clone(),
                        Sense::Le,
                        cap,
                    )?;
                }
            }
            if let Some(&tax) = params.carbon_tax.get(&p.0) {
                if tax > 0.0 {
                    b.add_cost_term("CarbonTaxCost", p.0, &expr.scaled(tax));
                }
            }
        }
        Ok(())
    }
}
