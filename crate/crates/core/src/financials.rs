//! Discounting machinery and assembly of the net-present-value objective from
//! registered cost components.
//!
//! Period-indexed components are annual costs ($/yr) valued at the start of
//! each year in the period. Timepoint-indexed components are $/h flows: they
//! are multiplied by the timepoint weight in hours, spread uniformly across
//! the period's years, and then discounted.

use crate::data::Dataset;
use crate::error::Result;
use crate::expr::LinearExpression;
use crate::model::{CostExprs, ModelBuilder};
use crate::timescales::{Period, PeriodId, TimescaleSet};

#[derive(Debug, Clone, Copy)]
pub struct FinancialParams {
    pub base_financial_year: i64,
    /// Annual discount rate for valuing future costs, real terms.
    pub discount_rate: f64,
    /// Interest rate used to annualize overnight capital via the CRF.
    pub interest_rate: f64,
}

impl FinancialParams {
    pub fn from_dataset(data: &Dataset) -> Result<FinancialParams> {
        let t = data.require("financials", "financials")?;
        if t.num_rows() != 1 {
            return Err(crate::error::Error::InputError {
                table: "financials".into(),
                row: t.num_rows(),
                message: "expected exactly one parameter row".into(),
            });
        }
        let params = FinancialParams {
            base_financial_year: t.get_i64(0, "base_financial_year")?,
            discount_rate: t.get_f64(0, "discount_rate")?,
            interest_rate: t.get_f64(0, "interest_rate")?,
        };
        for (label, rate) in [
            ("discount_rate", params.discount_rate),
            ("interest_rate", params.interest_rate),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return Err(crate::error::Error::InputError {
                    table: "financials".into(),
                    row: 1,
                    message: format!("{label} {rate} must be in [0, 1)"),
                });
            }
        }
        Ok(params)
    }
}

/// Capital recovery factor `r (1+r)^n / ((1+r)^n - 1)`, the annualized cost
/// of one unit of overnight capital over `life_years`. `1/n` at zero rate.
pub fn crf(rate: f64, life_years: u32) -> f64 {
    assert!(life_years >= 1, "asset life must be at least one year");
    assert!(rate >= 0.0, "negative interest rates are not supported");
    let n = life_years as f64;
    if rate == 0.0 {
        return 1.0 / n;
    }
    let growth = (1.0 + rate).powf(n);
    rate * growth / (growth - 1.0)
}

/// Sum of start-of-year discount factors over the (possibly fractional) years
/// of a period: `sum_y (1+r)^-(y - base)`.
pub fn period_discount_factor(params: &FinancialParams, period: &Period) -> f64 {
    let mut total = 0.0;
    let mut remaining = period.length_years;
    let mut year = period.start_year;
    while remaining > 0.0 {
        let frac = remaining.min(1.0);
        let offset = (year - params.base_financial_year) as f64;
        total += frac * (1.0 + params.discount_rate).powf(-offset);
        remaining -= frac;
        year += 1;
    }
    total
}

/// Assembles the minimized NPV objective from every registered cost
/// component, in registration order.
pub fn build_objective(
    builder: &ModelBuilder,
    params: &FinancialParams,
    timescales: &TimescaleSet,
) -> Result<LinearExpression> {
    let mut parts: Vec<(f64, LinearExpression)> = Vec::new();
    let registered: Vec<(String, crate::model::CostDomain)> =
        builder.registry().cost_components.clone();
    for (name, _domain) in &registered {
        let exprs = builder.cost_component_exprs(name)?;
        match exprs {
            CostExprs::Period(map) => {
                for (&p, expr) in map {
                    let df = period_discount_factor(params, timescales.period(PeriodId(p)));
                    parts.push((df, expr.clone()));
                }
            }
            CostExprs::Timepoint(map) => {
                for (&t, expr) in map {
                    let tp = crate::timescales::TimepointId(t);
                    let p = timescales.period_of_timepoint(tp);
                    let df = period_discount_factor(params, timescales.period(p));
                    let years = timescales.period(p).length_years;
                    let factor = df * timescales.weight(tp) / years;
                    parts.push((factor, expr.clone()));
                }
            }
        }
    }
    let refs: Vec<(f64, &LinearExpression)> = parts.iter().map(|(f, e)| (*f, e)).collect();
    crate::expr::linear_combine(&refs)
}

/// Recomputes the discounted objective from per-component annual amounts, as
/// reported in the costs output table. Used for cost reconciliation.
pub fn npv_of_annual_costs(
    params: &FinancialParams,
    timescales: &TimescaleSet,
    annual_by_period: &[(PeriodId, f64)],
) -> f64 {
    annual_by_period
        .iter()
        .map(|&(p, amount)| period_discount_factor(params, timescales.period(p)) * amount)
        .sum()
}

/// Evaluates one cost component against a solved value vector, returning
/// annual $/yr per period. Timepoint flows are weighted and divided by the
/// period's years.
pub fn annual_component_costs(
    exprs: &CostExprs,
    timescales: &TimescaleSet,
    values: &[f64],
) -> Vec<(PeriodId, f64)> {
    let mut by_period: Vec<f64> = vec![0.0; timescales.periods().len()];
    match exprs {
        CostExprs::Period(map) => {
            for (&p, expr) in map {
                by_period[p] += expr.eval(values);
            }
        }
        CostExprs::Timepoint(map) => {
            for (&t, expr) in map {
                let tp = crate::timescales::TimepointId(t);
                let p = timescales.period_of_timepoint(tp);
                by_period[p.0] +=
                    expr.eval(values) * timescales.weight(tp) / timescales.period(p).length_years;
            }
        }
    }
    by_period
        .into_iter()
        .enumerate()
        .map(|(p, v)| (PeriodId(p), v))
        .collect()
}

/// Loads financial parameters and assembles the NPV objective after every
/// module has registered and defined its cost components.
#[derive(Debug, Default)]
pub struct FinancialsModule;

impl crate::compose::EngineModule for FinancialsModule {
    fn name(&self) -> &'static str {
        "financials"
    }

    fn callbacks(&self) -> &'static [crate::compose::Callback] {
        use crate::compose::Callback::*;
        &[LoadInputs, DefineDynamicComponents]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[("financials", true)]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut crate::compose::BuildContext) -> Result<()> {
        ctx.financials = Some(FinancialParams::from_dataset(data)?);
        Ok(())
    }

    fn define_dynamic_components(
        &self,
        b: &mut ModelBuilder,
        ctx: &mut crate::compose::BuildContext,
    ) -> Result<()> {
        let params = *ctx.financials("financials")?;
        let timescales = ctx.timescales("financials")?;
        let objective = build_objective(b, &params, timescales)?;
        b.set_objective(objective);
        Ok(())
    }
}
