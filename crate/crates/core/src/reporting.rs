//! Post-solve reporting: builds, dispatch, storage operation, transmission
//! flows, zonal balance, costs by component, emissions, and the objective
//! summary. Values are written with Rust's shortest round-trip float
//! rendering, so reloading a costs table reproduces the objective exactly.

use crate::compose::{BuildContext, Callback, EngineModule, RunOutputs};
use crate::error::Result;
use crate::financials::{annual_component_costs, period_discount_factor};
use crate::model::ModelGraph;
use crate::solver::Solution;

#[derive(Debug, Default)]
pub struct ReportingModule;

fn fmt(v: f64) -> String {
    // normalize negative zero so output files are stable across solvers
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

impl EngineModule for ReportingModule {
    fn name(&self) -> &'static str {
        "reporting"
    }

    fn callbacks(&self) -> &'static [Callback] {
        &[Callback::PostSolve]
    }

    fn post_solve(
        &self,
        model: &ModelGraph,
        ctx: &BuildContext,
        solution: &Solution,
        out: &mut RunOutputs,
    ) -> Result<()> {
        let timescales = ctx.timescales(self.name())?;
        let values = solution.dense_values(model);

        // -- builds --
        let rows = out.table(
            "builds",
            &["asset", "kind", "period", "build_mw", "build_mwh"],
        );
        if let Some(projects) = ctx.projects.as_ref() {
            for (g, proj) in projects.iter().enumerate() {
                for p in timescales.period_ids() {
                    if let Some(&v) = ctx.gen.build.get(&(g, p.0)) {
                        rows.push(vec![
                            proj.name.clone(),
                            "generator".into(),
                            timescales.period(p).label.clone(),
                            fmt(values[v.index()]),
                            String::new(),
                        ]);
                    }
                }
            }
        }
        if let Some(storage) = ctx.storage_projects.as_ref() {
            for proj in storage.iter() {
                for &v in proj.power_cost.keys() {
                    let p = crate::timescales::PeriodId(v);
                    let label = timescales.period(p).label.clone();
                    let power = model
                        .var_id(&format!("BuildStoragePower[{},{label}]", proj.name))
                        .map(|id| values[id.index()])
                        .unwrap_or(0.0);
                    let energy = model
                        .var_id(&format!("BuildStorageEnergy[{},{label}]", proj.name))
                        .map(|id| values[id.index()])
                        .unwrap_or(0.0);
                    rows.push(vec![
                        proj.name.clone(),
                        "storage".into(),
                        label,
                        fmt(power),
                        fmt(energy),
                    ]);
                }
            }
        }
        if let Some(lines) = ctx.lines.as_ref() {
            for line in lines.iter() {
                for &v in line.cost_per_mw.keys() {
                    let p = crate::timescales::PeriodId(v);
                    let label = timescales.period(p).label.clone();
                    let mw = model
                        .var_id(&format!("BuildTx[{},{label}]", line.id))
                        .map(|id| values[id.index()])
                        .unwrap_or(0.0);
                    rows.push(vec![
                        line.id.clone(),
                        "transmission".into(),
                        label,
                        fmt(mw),
                        String::new(),
                    ]);
                }
            }
        }

        // -- dispatch --
        let rows = out.table("dispatch", &["project", "timepoint", "dispatch_mw"]);
        if let Some(projects) = ctx.projects.as_ref() {
            for (g, proj) in projects.iter().enumerate() {
                for tp in timescales.timepoint_ids() {
                    if let Some(&v) = ctx.gen.dispatch.get(&(g, tp.0)) {
                        rows.push(vec![
                            proj.name.clone(),
                            timescales.timepoint(tp).id.clone(),
                            fmt(values[v.index()]),
                        ]);
                    }
                }
            }
        }

        // -- storage operation --
        if let Some(storage) = ctx.storage_projects.as_ref() {
            if !storage.is_empty() {
                let rows = out.table(
                    "storage",
                    &[
                        "project",
                        "timepoint",
                        "charge_mw",
                        "discharge_mw",
                        "soc_mwh",
                    ],
                );
                for (s, proj) in storage.iter().enumerate() {
                    for tp in timescales.timepoint_ids() {
                        rows.push(vec![
                            proj.name.clone(),
                            timescales.timepoint(tp).id.clone(),
                            fmt(values[ctx.storage.charge[&(s, tp.0)].index()]),
                            fmt(values[ctx.storage.discharge[&(s, tp.0)].index()]),
                            fmt(values[ctx.storage.soc[&(s, tp.0)].index()]),
                        ]);
                    }
                }
            }
        }

        // -- transmission flows --
        if let Some(lines) = ctx.lines.as_ref() {
            if !lines.is_empty() {
                let zones = ctx.zones(self.name())?;
                let rows = out.table(
                    "transmission",
                    &[
                        "line",
                        "timepoint",
                        "from_zone",
                        "to_zone",
                        "sent_mw",
                        "delivered_mw",
                    ],
                );
                for line in lines.iter() {
                    for (d, dir) in crate::transmission::DIRECTIONS.iter().enumerate() {
                        let (from, to) = if d == 0 {
                            (line.zone_a, line.zone_b)
                        } else {
                            (line.zone_b, line.zone_a)
                        };
                        for tp in timescales.timepoint_ids() {
                            let tp_id = &timescales.timepoint(tp).id;
                            let sent = model
                                .var_id(&format!("DispatchTx[{},{dir},{tp_id}]", line.id))
                                .map(|id| values[id.index()])
                                .unwrap_or(0.0);
                            rows.push(vec![
                                line.id.clone(),
                                tp_id.clone(),
                                zones.name(from).to_string(),
                                zones.name(to).to_string(),
                                fmt(sent),
                                fmt(sent * line.efficiency),
                            ]);
                        }
                    }
                }
            }
        }

        // -- zonal balance detail --
        if let Some(zones) = ctx.zones.as_ref() {
            let rows = out.table(
                "balance",
                &["zone", "timepoint", "demand_mw", "unserved_mw", "shift_mw"],
            );
            for z in zones.ids() {
                for tp in timescales.timepoint_ids() {
                    let unserved = model
                        .var_id(&format!(
                            "UnservedLoad[{},{}]",
                            zones.name(z),
                            timescales.timepoint(tp).id
                        ))
                        .map(|id| values[id.index()])
                        .unwrap_or(0.0);
                    let shift = ctx
                        .shift
                        .get(&(z, tp.0))
                        .map(|&(up, down)| values[up.index()] - values[down.index()])
                        .unwrap_or(0.0);
                    rows.push(vec![
                        zones.name(z).to_string(),
                        timescales.timepoint(tp).id.clone(),
                        fmt(zones.demand(z, tp)),
                        fmt(unserved),
                        fmt(shift),
                    ]);
                }
            }
        }

        // -- costs by component, with discount factors for reconciliation --
        if let Some(financials) = ctx.financials.as_ref() {
            let rows = out.table(
                "costs",
                &[
                    "component",
                    "period",
                    "annual_cost",
                    "discount_factor",
                    "npv",
                ],
            );
            for (name, _domain) in &model.registry().cost_components {
                let Some(exprs) = model.cost_component_exprs(name) else {
                    continue;
                };
                for (p, annual) in annual_component_costs(exprs, timescales, &values) {
                    let df = period_discount_factor(financials, timescales.period(p));
                    rows.push(vec![
                        name.clone(),
                        timescales.period(p).label.clone(),
                        fmt(annual),
                        fmt(df),
                        fmt(df * annual),
                    ]);
                }
            }
        }

        // -- emissions --
        if ctx.sources.is_some() && ctx.projects.is_some() {
            let emissions = crate::energy_sources::emissions_by_period(ctx)?;
            let rows = out.table("emissions", &["period", "tco2_per_year"]);
            for p in timescales.period_ids() {
                rows.push(vec![
                    timescales.period(p).label.clone(),
                    fmt(emissions[&p.0].eval(&values)),
                ]);
            }
        }

        // -- summary --
        let rows = out.table("summary", &["key", "value"]);
        rows.push(vec!["status".into(), solution.status.to_string()]);
        rows.push(vec!["objective_npv".into(), fmt(solution.objective)]);
        rows.push(vec!["mip_gap".into(), fmt(solution.mip_gap)]);
        rows.push(vec!["variables".into(), model.num_variables().to_string()]);
        rows.push(vec![
            "constraints".into(),
            model.num_constraints().to_string(),
        ]);
        Ok(())
    }
}
