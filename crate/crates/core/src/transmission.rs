//! Transport-model transmission: lossy bidirectional flows over flowgates
//! with symmetric, permanent capacity expansion. Losses are charged at the
//! receiving end. Omitting this module leaves zones unconnected (the
//! single-zone copperplate formulation needs no transmission at all).
//!
//! Variable cardinality for L lines over T timepoints: one BuildTx per
//! (line, costed period) plus 2*L*T DispatchTx variables.

use std::collections::BTreeMap;

use crate::compose::{BuildContext, Callback, EngineModule};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::expr::LinearExpression;
use crate::model::{BalanceSide, CostDomain, Integrality, ModelBuilder, Sense, INF};

#[derive(Debug, Clone)]
pub struct TransmissionLine {
    pub id: String,
    pub zone_a: usize,
    pub zone_b: usize,
    pub existing_mw: f64,
    /// Delivered fraction of sent power.
    pub efficiency: f64,
    pub derate: f64,
    /// Annualization life for capital; lines never retire.
    pub life_years: i64,
    pub cost_per_mw: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, Default)]
pub struct LineSet {
    lines: Vec<TransmissionLine>,
}

impl LineSet {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TransmissionLine> {
        self.lines.iter()
    }

    pub fn get(&self, l: usize) -> &TransmissionLine {
        &self.lines[l]
    }
}

pub const DIRECTIONS: [&str; 2] = ["fwd", "rev"];

/// Transport model over configured lines.
#[derive(Debug, Default)]
pub struct TransportModule;

impl EngineModule for TransportModule {
    fn name(&self) -> &'static str {
        "transmission.transport"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::LoadInputs, Callback::DefineComponents]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("transmission_lines", true), ("tx_build_costs", false)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut BuildContext) -> Result<()> {
        let zones = ctx.zones(self.name())?;
        let timescales = ctx.timescales(self.name())?;
        if zones.len() < 2 {
            return Err(Error::ConfigError(
                "transmission.transport needs at least two zones".into(),
            ));
        }
        let table = data.require(self.name(), "transmission_lines")?;
        let mut lines = Vec::new();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for r in table.row_ids() {
            let id = table.get(r, "line")?.to_string();
            let zone_a = table.get(r, "zone_a")?;
            let zone_b = table.get(r, "zone_b")?;
            let Some(a) = zones.index(zone_a) else {
                return Err(Error::IntegrityError(format!(
                    "transmission_lines row {} references unknown zone `{zone_a}`",
                    r + 1
                )));
            };
            let Some(bz) = zones.index(zone_b) else {
                return Err(Error::IntegrityError(format!(
                    "transmission_lines row {} references unknown zone `{zone_b}`",
                    r + 1
                )));
            };
            if a == bz {
                return Err(Error::InputError {
                    table: "transmission_lines".into(),
                    row: r + 1,
                    message: format!("line `{id}` connects zone `{zone_a}` to itself"),
                });
            }
            let pair = (a.min(bz), a.max(bz));
            if pairs.contains(&pair) {
                return Err(Error::InputError {
                    table: "transmission_lines".into(),
                    row: r + 1,
                    message: format!(
                        "duplicate line between `{zone_a}` and `{zone_b}`; one line per zone pair"
                    ),
                });
            }
            pairs.push(pair);
            let efficiency = table.get_f64(r, "efficiency")?;
            if !(efficiency > 0.0 && efficiency <= 1.0) {
                return Err(Error::InputError {
                    table: "transmission_lines".into(),
                    row: r + 1,
                    message: format!("efficiency {efficiency} must be in (0,1]"),
                });
            }
            lines.push(TransmissionLine {
                id,
                zone_a: a,
                zone_b: bz,
                existing_mw: table.get_f64_or(r, "existing_mw", 0.0)?,
                efficiency,
                derate: table.get_f64_or(r, "derate", 0.0)?,
                life_years: table.get_i64(r, "life_years").unwrap_or(40),
                cost_per_mw: BTreeMap::new(),
            });
        }
        lines.sort_by(|a, b| a.id.cmp(&b.id));
        let mut set = LineSet { lines };

        if let Some(costs) = data.get("tx_build_costs") {
            for r in costs.row_ids() {
                let line = costs.get(r, "line")?;
                let period = costs.get(r, "period")?;
                let Some(l) = set.lines.iter().position(|x| x.id == line) else {
                    return Err(Error::IntegrityError(format!(
                        "tx_build_costs row {} references unknown line `{line}`",
                        r + 1
                    )));
                };
                let Some(p) = timescales.period_by_label(period) else {
                    return Err(Error::IntegrityError(format!(
                        "tx_build_costs row {} references unknown period `{period}`",
                        r + 1
                    )));
                };
                set.lines[l]
                    .cost_per_mw
                    .insert(p.0, costs.get_f64(r, "cost_per_mw")?);
            }
        }
        ctx.lines = Some(set);
        Ok(())
    }

    fn define_components(&self, b: &mut ModelBuilder, ctx: &mut BuildContext) -> Result<()> {
        let timescales = ctx.timescales(self.name())?.clone();
        let zones = ctx.zones(self.name())?.clone();
        let financials = *ctx.financials(self.name())?;
        let lines = ctx.lines.clone().expect("loaded by this module");

        b.register_balance_component("TxDelivered", BalanceSide::Injection)?;
        b.provide_balance_component("TxDelivered");
        b.register_balance_component("TxSent", BalanceSide::Withdrawal)?;
        b.provide_balance_component("TxSent");
        b.register_cost_component("TxCapitalCost", CostDomain::Period)?;
        b.provide_cost_component("TxCapitalCost", CostDomain::Period);

        for line in lines.iter() {
            let mut builds: BTreeMap<usize, crate::expr::VarId> = BTreeMap::new();
            for &v in line.cost_per_mw.keys() {
                let label = timescales
                    .period(crate::timescales::PeriodId(v))
                    .label
                    .clone();
                builds.insert(
                    v,
                    b.add_variable(
                        "BuildTx",
                        &[&line.id, &label],
                        0.0,
                        INF,
                        Integrality::Continuous,
                    )?,
                );
            }
            let annuity =
                crate::financials::crf(financials.interest_rate, line.life_years.max(1) as u32);

            // symmetric capacity: one build serves both directions, forever
            let mut capacity_by_period: BTreeMap<usize, LinearExpression> = BTreeMap::new();
            for p in timescales.period_ids() {
                let mut cap = LinearExpression::constant(line.existing_mw);
                let mut capital = LinearExpression::zero();
                for (&v, &cost) in &line.cost_per_mw {
                    if v <= p.0 {
                        cap = cap.plus_term(builds[&v], 1.0);
                        capital = capital.plus_term(builds[&v], annuity * cost);
                    }
                }
                b.add_cost_term("TxCapitalCost", p.0, &capital);
                capacity_by_period.insert(p.0, cap.scaled(1.0 - line.derate));
            }

            for (d, dir) in DIRECTIONS.iter().enumerate() {
                let (from, to) = if d == 0 {
                    (line.zone_a, line.zone_b)
                } else {
                    (line.zone_b, line.zone_a)
                };
                for tp in timescales.timepoint_ids() {
                    let tp_id = timescales.timepoint(tp).id.clone();
                    let p = timescales.period_of_timepoint(tp);
                    let flow = b.add_variable(
                        "DispatchTx",
                        &[&line.id, dir, &tp_id],
                        0.0,
                        INF,
                        Integrality::Continuous,
                    )?;
                    b.add_constraint(
                        "Tx_Limit",
                        &[&line.id, dir, &tp_id],
                        LinearExpression::variable(flow).minus(&capacity_by_period[&p.0]),
                        Sense::Le,
                        0.0,
                    )?;
                    b.add_balance_term("TxSent", from, tp.0, &LinearExpression::variable(flow));
                    b.add_balance_term(
                        "TxDelivered",
                        to,
                        tp.0,
                        &LinearExpression::term(flow, line.efficiency),
                    );
                }
            }
        }
        let _ = zones;
        Ok(())
    }
}
