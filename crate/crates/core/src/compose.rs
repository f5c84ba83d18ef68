//! Module composition: the engine-module trait, the built-in module catalog,
//! the shared build context, and the definition lifecycle that assembles a
//! [`ModelGraph`] from an ordered module list.
//!
//! Modules run through fixed stages in list order: define-arguments,
//! load-inputs, define-components, define-dynamic-components, and post-solve.
//! Shared cost and balance terms are registered during define-components and
//! assembled (objective, energy balances, reserve balances) only after all
//! registrations, during the dynamic stage.

use std::collections::BTreeMap;

use crate::balancing::{AreaSet, DemandShiftParams, PlanningParams, ReserveParams, ZoneSet};
use crate::data::Dataset;
use crate::energy_sources::{FuelMarkets, SimplePrices, SourceSet};
use crate::error::{Error, Result};
use crate::expr::{LinearExpression, VarId};
use crate::financials::FinancialParams;
use crate::generators::ProjectSet;
use crate::model::{ModelBuilder, ModelGraph};
use crate::policies::PolicyParams;
use crate::solver::Solution;
use crate::storage::StorageSet;
use crate::timescales::TimescaleSet;
use crate::transmission::LineSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Callback {
    DefineArguments,
    DefineComponents,
    DefineDynamicComponents,
    LoadInputs,
    PostSolve,
}

/// A named module and the callbacks it implements.
#[derive(Debug, Clone)]
pub struct ModuleDescriptor {
    pub name: String,
    pub callbacks: Vec<Callback>,
}

/// A scenario option a module accepts (set with `--opt key=value`).
#[derive(Debug, Clone, Copy)]
pub struct OptionSpec {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

/// String-keyed scenario option overrides with typed accessors.
#[derive(Debug, Clone, Default)]
pub struct Options {
    values: BTreeMap<String, String>,
}

impl Options {
    pub fn new() -> Options {
        Options::default()
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn from_pairs<'a, I: IntoIterator<Item = (&'a str, &'a str)>>(pairs: I) -> Options {
        let mut o = Options::new();
        for (k, v) in pairs {
            o.set(k, v);
        }
        o
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|k| k.as_str())
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse::<f64>().map_err(|_| {
                Error::ConfigError(format!("option `{key}`: `{raw}` is not a number"))
            }),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.values.get(key).map(|s| s.as_str()) {
            None => Ok(default),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(raw) => Err(Error::ConfigError(format!(
                "option `{key}`: `{raw}` is not a boolean"
            ))),
        }
    }
}

/// Variable handles and capacity expressions published by the generator
/// modules for use by later modules.
#[derive(Debug, Default)]
pub struct GenContext {
    /// BuildGen variable per (project, vintage period).
    pub build: BTreeMap<(usize, usize), VarId>,
    /// Available capacity in MW per (project, period), including
    /// predetermined builds (constant part).
    pub capacity: BTreeMap<(usize, usize), LinearExpression>,
    /// DispatchGen variable per (project, timepoint).
    pub dispatch: BTreeMap<(usize, usize), VarId>,
    /// FuelUse variable in MMBtu/h per (project, timepoint, source index).
    pub fuel_use: BTreeMap<(usize, usize, usize), VarId>,
    pub commit: BTreeMap<(usize, usize), VarId>,
    pub startup: BTreeMap<(usize, usize), VarId>,
    pub shutdown: BTreeMap<(usize, usize), VarId>,
}

/// Storage variable handles and capacity expressions.
#[derive(Debug, Default)]
pub struct StorageContext {
    pub power_capacity: BTreeMap<(usize, usize), LinearExpression>,
    pub energy_capacity: BTreeMap<(usize, usize), LinearExpression>,
    pub charge: BTreeMap<(usize, usize), VarId>,
    pub discharge: BTreeMap<(usize, usize), VarId>,
    pub soc: BTreeMap<(usize, usize), VarId>,
}

/// One provider family's registered upward spinning-reserve provision.
#[derive(Debug)]
pub struct ReserveProvision {
    pub provider: String,
    /// Provision expression per (area, timepoint).
    pub by_area_tp: BTreeMap<(usize, usize), LinearExpression>,
}

/// Shared state threaded through every composition stage.
#[derive(Debug, Default)]
pub struct BuildContext {
    pub options: Options,
    pub module_names: Vec<String>,

    pub timescales: Option<TimescaleSet>,
    pub financials: Option<FinancialParams>,
    pub zones: Option<ZoneSet>,
    pub sources: Option<SourceSet>,
    pub projects: Option<ProjectSet>,
    pub storage_projects: Option<StorageSet>,
    pub lines: Option<LineSet>,
    pub areas: Option<AreaSet>,
    pub reserve_params: Option<Vec<ReserveParams>>,
    pub planning: Option<PlanningParams>,
    pub demand_shift: Option<DemandShiftParams>,
    pub simple_prices: Option<SimplePrices>,
    pub fuel_markets: Option<FuelMarkets>,
    pub policies: Option<PolicyParams>,

    pub gen: GenContext,
    pub storage: StorageContext,
    /// (ShiftUp, ShiftDown) per (zone, timepoint).
    pub shift: BTreeMap<(usize, usize), (VarId, VarId)>,
    pub reserve_provisions: Vec<ReserveProvision>,
}

impl BuildContext {
    pub fn has_module(&self, name: &str) -> bool {
        self.module_names.iter().any(|m| m == name)
    }

    pub fn timescales(&self, module: &str) -> Result<&TimescaleSet> {
        self.timescales.as_ref().ok_or_else(|| Error::MissingInput {
            module: module.to_string(),
            table: "timepoints.csv".to_string(),
        })
    }

    pub fn financials(&self, module: &str) -> Result<&FinancialParams> {
        self.financials.as_ref().ok_or_else(|| Error::MissingInput {
            module: module.to_string(),
            table: "financials.csv".to_string(),
        })
    }

    pub fn zones(&self, module: &str) -> Result<&ZoneSet> {
        self.zones.as_ref().ok_or_else(|| Error::MissingInput {
            module: module.to_string(),
            table: "load_zones.csv".to_string(),
        })
    }

    pub fn sources(&self, module: &str) -> Result<&SourceSet> {
        self.sources.as_ref().ok_or_else(|| Error::MissingInput {
            module: module.to_string(),
            table: "energy_sources.csv".to_string(),
        })
    }

    pub fn projects(&self, module: &str) -> Result<&ProjectSet> {
        self.projects.as_ref().ok_or_else(|| Error::MissingInput {
            module: module.to_string(),
            table: "projects.csv".to_string(),
        })
    }

    pub fn areas(&self, module: &str) -> Result<&AreaSet> {
        self.areas.as_ref().ok_or_else(|| Error::MissingInput {
            module: module.to_string(),
            table: "balancing_areas.csv".to_string(),
        })
    }
}

/// Accumulated output tables of one run, flushed to the outputs directory by
/// the scenario runner. Insertion order is the manifest order.
#[derive(Debug, Default)]
pub struct RunOutputs {
    order: Vec<String>,
    tables: BTreeMap<String, (Vec<String>, Vec<Vec<String>>)>,
}

impl RunOutputs {
    pub fn table(&mut self, name: &str, headers: &[&str]) -> &mut Vec<Vec<String>> {
        if !self.tables.contains_key(name) {
            self.order.push(name.to_string());
            self.tables.insert(
                name.to_string(),
                (headers.iter().map(|h| h.to_string()).collect(), Vec::new()),
            );
        }
        &mut self.tables.get_mut(name).unwrap().1
    }

    pub fn tables(&self) -> impl Iterator<Item = (&str, &Vec<String>, &Vec<Vec<String>>)> {
        self.order.iter().map(|name| {
            let (headers, rows) = &self.tables[name];
            (name.as_str(), headers, rows)
        })
    }

    pub fn get(&self, name: &str) -> Option<(&Vec<String>, &Vec<Vec<String>>)> {
        self.tables.get(name).map(|(h, r)| (h, r))
    }
}

/// One composable engine module. Callbacks not implemented default to no-ops;
/// `callbacks()` declares which ones are meaningful.
pub trait EngineModule {
    fn name(&self) -> &'static str;
    fn callbacks(&self) -> &'static [Callback];

    fn option_specs(&self) -> &'static [OptionSpec] {
        &[]
    }

    /// Input tables this module reads: (table name, required).
    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[]
    }

    fn load_inputs(&self, _data: &Dataset, _ctx: &mut BuildContext) -> Result<()> {
        Ok(())
    }

    fn define_components(&self, _b: &mut ModelBuilder, _ctx: &mut BuildContext) -> Result<()> {
        Ok(())
    }

    fn define_dynamic_components(
        &self,
        _b: &mut ModelBuilder,
        _ctx: &mut BuildContext,
    ) -> Result<()> {
        Ok(())
    }

    fn post_solve(
        &self,
        _model: &ModelGraph,
        _ctx: &BuildContext,
        _solution: &Solution,
        _out: &mut RunOutputs,
    ) -> Result<()> {
        Ok(())
    }

    fn descriptor(&self) -> ModuleDescriptor {
        ModuleDescriptor {
            name: self.name().to_string(),
            callbacks: self.callbacks().to_vec(),
        }
    }
}

type ModuleFactory = Box<dyn Fn() -> Box<dyn EngineModule>>;

/// Resolves dotted module names to engine modules. Starts with the built-in
/// set; user-supplied modules may be added.
pub struct ModuleCatalog {
    factories: BTreeMap<String, ModuleFactory>,
}

impl ModuleCatalog {
    pub fn builtin() -> ModuleCatalog {
        let mut c = ModuleCatalog {
            factories: BTreeMap::new(),
        };
        macro_rules! add {
            ($name:expr, $ty:ty) => {
                c.factories.insert(
                    $name.to_string(),
                    Box::new(|| Box::new(<$ty>::default()) as Box<dyn EngineModule>),
                );
            };
        }
        add!("timescales", crate::timescales::TimescalesModule);
        add!("financials", crate::financials::FinancialsModule);
        add!("balancing.load_zones", crate::balancing::LoadZonesModule);
        add!(
            "balancing.unserved_load",
            crate::balancing::UnservedLoadModule
        );
        add!(
            "balancing.planning_reserves",
            crate::balancing::PlanningReservesModule
        );
        add!(
            "balancing.operating_reserves.areas",
            crate::balancing::ReserveAreasModule
        );
        add!(
            "balancing.operating_reserves.spinning_reserves_advanced",
            crate::balancing::SpinningReservesModule
        );
        add!(
            "balancing.demand_response.shift",
            crate::balancing::DemandShiftModule
        );
        add!(
            "energy_sources.properties",
            crate::energy_sources::SourcePropertiesModule
        );
        add!(
            "energy_sources.fuel_costs.simple",
            crate::energy_sources::SimpleFuelCostsModule
        );
        add!(
            "energy_sources.fuel_costs.markets",
            crate::energy_sources::FuelMarketsModule
        );
        add!("generators.core.build", crate::generators::GenBuildModule);
        add!(
            "generators.core.dispatch",
            crate::generators::GenDispatchModule
        );
        add!(
            "generators.core.no_commit",
            crate::generators::NoCommitModule
        );
        add!(
            "generators.core.commit.operate",
            crate::generators::CommitOperateModule
        );
        add!(
            "generators.core.commit.fuel_use",
            crate::generators::CommitFuelUseModule
        );
        add!(
            "generators.core.commit.discrete",
            crate::generators::CommitDiscreteModule
        );
        add!(
            "generators.core.proj_discrete_build",
            crate::generators::DiscreteBuildModule
        );
        add!(
            "generators.extensions.storage",
            crate::storage::StorageModule
        );
        add!(
            "generators.extensions.hydro_simple",
            crate::generators::HydroSimpleModule
        );
        add!(
            "transmission.transport",
            crate::transmission::TransportModule
        );
        add!("policies.rps", crate::policies::RpsModule);
        add!("policies.carbon", crate::policies::CarbonPoliciesModule);
        add!("reporting", crate::reporting::ReportingModule);
        c
    }

    pub fn register_factory<F>(&mut self, name: &str, factory: F)
    where
        F: Fn() -> Box<dyn EngineModule> + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(|k| k.as_str())
    }

    pub fn instantiate(&self, name: &str) -> Result<Box<dyn EngineModule>> {
        self.factories
            .get(name)
            .map(|f| f())
            .ok_or_else(|| Error::UnknownModule(name.to_string()))
    }
}

/// Appends a module to the load order. The order is the file order: core
/// modules first, specialized modules after.
pub fn register_module(
    descriptor: ModuleDescriptor,
    catalog: &ModuleCatalog,
    modules: &mut Vec<ModuleDescriptor>,
) -> Result<()> {
    if descriptor.callbacks.is_empty() {
        return Err(Error::ConfigError(format!(
            "module `{}` declares no callbacks",
            descriptor.name
        )));
    }
    if modules.iter().any(|m| m.name == descriptor.name) {
        return Err(Error::DuplicateModule(descriptor.name));
    }
    if !catalog.contains(&descriptor.name) {
        return Err(Error::UnknownModule(descriptor.name));
    }
    modules.push(descriptor);
    Ok(())
}

/// Union of the input tables declared by the named modules, in first-use
/// order.
pub fn declared_tables(
    catalog: &ModuleCatalog,
    module_names: &[String],
) -> Result<Vec<&'static str>> {
    let mut seen = Vec::new();
    for name in module_names {
        let module = catalog.instantiate(name)?;
        for &(table, _) in module.input_tables() {
            if !seen.contains(&table) {
                seen.push(table);
            }
        }
    }
    Ok(seen)
}

/// Runs the definition lifecycle over the named modules and returns the
/// assembled model plus the build context.
pub fn build_model(
    catalog: &ModuleCatalog,
    module_names: &[String],
    data: &Dataset,
    options: &Options,
) -> Result<(ModelGraph, BuildContext)> {
    if module_names.is_empty() {
        return Err(Error::ConfigError("empty module list".to_string()));
    }
    let mut registered: Vec<ModuleDescriptor> = Vec::new();
    let mut modules: Vec<Box<dyn EngineModule>> = Vec::new();
    for name in module_names {
        let module = catalog.instantiate(name)?;
        register_module(module.descriptor(), catalog, &mut registered)?;
        modules.push(module);
    }

    // define-arguments: validate provided options against declared specs
    let mut allowed: Vec<&'static str> = vec![
        "solver.feasibility_tol",
        "solver.integrality_tol",
        "solver.relative_mip_gap",
        "solver.max_iterations",
        "solver.max_nodes",
    ];
    for module in &modules {
        for spec in module.option_specs() {
            allowed.push(spec.key);
        }
    }
    for key in options.keys() {
        if !allowed.contains(&key) {
            return Err(Error::ConfigError(format!(
                "option `{key}` is not accepted by any active module"
            )));
        }
    }

    let mut ctx = BuildContext {
        options: options.clone(),
        module_names: module_names.to_vec(),
        ..BuildContext::default()
    };

    // load-inputs, in list order; required tables checked up front
    for module in &modules {
        for &(table, required) in module.input_tables() {
            if required && data.get(table).is_none() {
                return Err(Error::MissingInput {
                    module: module.name().to_string(),
                    table: format!("{table}.csv"),
                });
            }
        }
        module.load_inputs(data, &mut ctx)?;
    }

    let mut builder = ModelBuilder::new();
    for module in &modules {
        module.define_components(&mut builder, &mut ctx)?;
    }
    builder.begin_dynamic_phase();
    for module in &modules {
        module.define_dynamic_components(&mut builder, &mut ctx)?;
    }
    Ok((builder.finish(), ctx))
}

/// Runs every module's post-solve callback in list order.
pub fn run_post_solve(
    catalog: &ModuleCatalog,
    ctx: &BuildContext,
    model: &ModelGraph,
    solution: &Solution,
) -> Result<RunOutputs> {
    let mut out = RunOutputs::default();
    for name in &ctx.module_names {
        let module = catalog.instantiate(name)?;
        module.post_solve(model, ctx, solution, &mut out)?;
    }
    Ok(out)
}
