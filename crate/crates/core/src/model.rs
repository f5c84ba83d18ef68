//! Variable/constraint store, the shared cost and balance registries, and the
//! phase machine that orders module composition.
//!
//! A [`ModelBuilder`] is driven through five fixed phases. Variables,
//! constraints and component registrations may only happen in the phases that
//! allow them; registries freeze once the dynamic phase starts. The finished
//! [`ModelGraph`] is immutable and may be shared read-only across threads.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{LinearExpression, VarId};

pub const INF: f64 = f64::INFINITY;
pub const NEG_INF: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrality {
    Continuous,
    Integer,
}

/// A decision variable: bounds, integrality, and its rendered name.
#[derive(Debug, Clone)]
pub struct VariableRef {
    pub id: VarId,
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integrality: Integrality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl std::fmt::Display for Sense {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Eq => write!(f, "="),
            Sense::Ge => write!(f, ">="),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub expr: LinearExpression,
    pub sense: Sense,
    pub rhs: f64,
}

/// Index domain of a registered cost component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostDomain {
    /// Annual cost in $/yr, indexed by period.
    Period,
    /// Cost flow in $/h, indexed by timepoint; scaled by timepoint weight.
    Timepoint,
}

/// Which side of the energy balance a component contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceSide {
    Injection,
    Withdrawal,
}

/// Ordered lists of registered cost and balance component names.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    pub cost_components: Vec<(String, CostDomain)>,
    pub injections: Vec<String>,
    pub withdrawals: Vec<String>,
}

impl Registry {
    fn contains_cost(&self, name: &str) -> bool {
        self.cost_components.iter().any(|(n, _)| n == name)
    }
    fn contains_balance(&self, name: &str) -> bool {
        self.injections.iter().any(|n| n == name) || self.withdrawals.iter().any(|n| n == name)
    }
}

/// The five composition phases, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    DefineArguments,
    LoadInputs,
    DefineComponents,
    DefineDynamicComponents,
    PostSolve,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Phase::DefineArguments => "define-arguments",
            Phase::LoadInputs => "load-inputs",
            Phase::DefineComponents => "define-components",
            Phase::DefineDynamicComponents => "define-dynamic-components",
            Phase::PostSolve => "post-solve",
        };
        write!(f, "{s}")
    }
}

/// Expressions provided for one cost component.
#[derive(Debug, Clone)]
pub enum CostExprs {
    Period(BTreeMap<usize, LinearExpression>),
    Timepoint(BTreeMap<usize, LinearExpression>),
}

/// Mutable model under assembly.
#[derive(Debug)]
pub struct ModelBuilder {
    phase: Phase,
    variables: Vec<VariableRef>,
    var_index: BTreeMap<String, VarId>,
    constraints: Vec<Constraint>,
    cons_index: BTreeMap<String, usize>,
    registry: Registry,
    cost_exprs: BTreeMap<String, CostExprs>,
    // component -> (zone index, timepoint index) -> expression
    balance_exprs: BTreeMap<String, BTreeMap<(usize, usize), LinearExpression>>,
    objective: Option<LinearExpression>,
}

impl Default for ModelBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ModelBuilder {
    pub fn new() -> Self {
        ModelBuilder {
            phase: Phase::DefineComponents,
            variables: Vec::new(),
            var_index: BTreeMap::new(),
            constraints: Vec::new(),
            cons_index: BTreeMap::new(),
            registry: Registry::default(),
            cost_exprs: BTreeMap::new(),
            balance_exprs: BTreeMap::new(),
            objective: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Freezes the registries and moves to the dynamic phase.
    pub fn begin_dynamic_phase(&mut self) {
        self.phase = Phase::DefineDynamicComponents;
    }

    /// Renders `Component[index1,index2,...]`.
    pub fn component_name(component: &str, indices: &[&str]) -> String {
        if indices.is_empty() {
            component.to_string()
        } else {
            format!("{component}[{}]", indices.join(","))
        }
    }

    pub fn add_variable(
        &mut self,
        component: &str,
        indices: &[&str],
        lower: f64,
        upper: f64,
        integrality: Integrality,
    ) -> Result<VarId> {
        let name = Self::component_name(component, indices);
        let bounds_ok = lower <= upper; // also rejects NaN bounds
        if !bounds_ok {
            return Err(Error::InvalidBounds { name, lower, upper });
        }
        if self.var_index.contains_key(&name) {
            return Err(Error::DuplicateVariable(name));
        }
        let id = VarId(self.variables.len());
        self.var_index.insert(name.clone(), id);
        self.variables.push(VariableRef {
            id,
            name,
            lower,
            upper,
            integrality,
        });
        Ok(id)
    }

    pub fn add_constraint(
        &mut self,
        component: &str,
        indices: &[&str],
        expr: LinearExpression,
        sense: Sense,
        rhs: f64,
    ) -> Result<()> {
        let name = Self::component_name(component, indices);
        if self.cons_index.contains_key(&name) {
            return Err(Error::DuplicateConstraint(name));
        }
        if !rhs.is_finite() {
            return Err(Error::NonFiniteCoefficient(rhs));
        }
        for &(_, coef) in expr.terms() {
            if !coef.is_finite() {
                return Err(Error::NonFiniteCoefficient(coef));
            }
        }
        if !expr.constant_part().is_finite() {
            return Err(Error::NonFiniteCoefficient(expr.constant_part()));
        }
        self.cons_index.insert(name.clone(), self.constraints.len());
        self.constraints.push(Constraint {
            name,
            expr,
            sense,
            rhs,
        });
        Ok(())
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_index.get(name).copied()
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    fn check_registration_phase(&self, op: &str) -> Result<()> {
        if self.phase != Phase::DefineComponents {
            return Err(Error::PhaseViolation {
                op: op.to_string(),
                expected: Phase::DefineComponents.to_string(),
                actual: self.phase.to_string(),
            });
        }
        Ok(())
    }

    /// Registers a cost component name. Expressions are supplied separately
    /// via [`ModelBuilder::add_cost_term`] after a matching
    /// [`ModelBuilder::provide_cost_component`].
    pub fn register_cost_component(&mut self, name: &str, domain: CostDomain) -> Result<()> {
        self.check_registration_phase("register_cost_component")?;
        if self.registry.contains_cost(name) {
            return Err(Error::DuplicateComponent(name.to_string()));
        }
        self.registry
            .cost_components
            .push((name.to_string(), domain));
        Ok(())
    }

    /// Registers a balance component name on the injection or withdrawal side.
    pub fn register_balance_component(&mut self, name: &str, side: BalanceSide) -> Result<()> {
        self.check_registration_phase("register_balance_component")?;
        if self.registry.contains_balance(name) {
            return Err(Error::DuplicateComponent(name.to_string()));
        }
        match side {
            BalanceSide::Injection => self.registry.injections.push(name.to_string()),
            BalanceSide::Withdrawal => self.registry.withdrawals.push(name.to_string()),
        }
        Ok(())
    }

    /// Marks a registered cost component as defined (possibly with no terms).
    pub fn provide_cost_component(&mut self, name: &str, domain: CostDomain) {
        self.cost_exprs
            .entry(name.to_string())
            .or_insert(match domain {
                CostDomain::Period => CostExprs::Period(BTreeMap::new()),
                CostDomain::Timepoint => CostExprs::Timepoint(BTreeMap::new()),
            });
    }

    /// Accumulates `expr` into cost component `name` at period or timepoint
    /// index `key`.
    pub fn add_cost_term(&mut self, name: &str, key: usize, expr: &LinearExpression) {
        let slot = self
            .cost_exprs
            .get_mut(name)
            .unwrap_or_else(|| panic!("cost component `{name}` not provided before add_cost_term"));
        let map = match slot {
            CostExprs::Period(m) => m,
            CostExprs::Timepoint(m) => m,
        };
        let entry = map.entry(key).or_insert_with(LinearExpression::zero);
        *entry = entry.plus(expr);
    }

    /// Marks a registered balance component as defined (possibly empty).
    pub fn provide_balance_component(&mut self, name: &str) {
        self.balance_exprs.entry(name.to_string()).or_default();
    }

    /// Accumulates `expr` into balance component `name` at `(zone, timepoint)`.
    pub fn add_balance_term(
        &mut self,
        name: &str,
        zone: usize,
        timepoint: usize,
        expr: &LinearExpression,
    ) {
        let slot = self.balance_exprs.get_mut(name).unwrap_or_else(|| {
            panic!("balance component `{name}` not provided before add_balance_term")
        });
        let entry = slot
            .entry((zone, timepoint))
            .or_insert_with(LinearExpression::zero);
        *entry = entry.plus(expr);
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Resolved expressions of a registered cost component; assembly-time
    /// error if the component was registered but never defined.
    pub fn cost_component_exprs(&self, name: &str) -> Result<&CostExprs> {
        self.cost_exprs
            .get(name)
            .ok_or_else(|| Error::UnresolvedRegistryEntry(name.to_string()))
    }

    /// Resolved expressions of a registered balance component.
    pub fn balance_component_exprs(
        &self,
        name: &str,
    ) -> Result<&BTreeMap<(usize, usize), LinearExpression>> {
        self.balance_exprs
            .get(name)
            .ok_or_else(|| Error::UnresolvedRegistryEntry(name.to_string()))
    }

    /// Net registered balance (injections minus withdrawals) at `(zone, tp)`.
    pub fn net_balance_expr(&self, zone: usize, timepoint: usize) -> Result<LinearExpression> {
        let mut net = LinearExpression::zero();
        for name in &self.registry.injections {
            let exprs = self.balance_component_exprs(name)?;
            if let Some(e) = exprs.get(&(zone, timepoint)) {
                net = net.plus(e);
            }
        }
        for name in &self.registry.withdrawals {
            let exprs = self.balance_component_exprs(name)?;
            if let Some(e) = exprs.get(&(zone, timepoint)) {
                net = net.minus(e);
            }
        }
        Ok(net)
    }

    pub fn set_objective(&mut self, expr: LinearExpression) {
        self.objective = Some(expr);
    }

    pub fn finish(self) -> ModelGraph {
        ModelGraph {
            variables: self.variables,
            var_index: self.var_index,
            constraints: self.constraints,
            cons_index: self.cons_index,
            registry: self.registry,
            cost_exprs: self.cost_exprs,
            balance_exprs: self.balance_exprs,
            objective: self.objective.unwrap_or_else(LinearExpression::zero),
        }
    }
}

/// The assembled, immutable optimization model. Objective sense is always
/// minimization. Registered component expressions are retained for
/// post-solve reporting and reconciliation.
#[derive(Debug, Clone)]
pub struct ModelGraph {
    variables: Vec<VariableRef>,
    var_index: BTreeMap<String, VarId>,
    constraints: Vec<Constraint>,
    cons_index: BTreeMap<String, usize>,
    registry: Registry,
    cost_exprs: BTreeMap<String, CostExprs>,
    balance_exprs: BTreeMap<String, BTreeMap<(usize, usize), LinearExpression>>,
    objective: LinearExpression,
}

impl ModelGraph {
    pub fn variables(&self) -> &[VariableRef] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &LinearExpression {
        &self.objective
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_index.get(name).copied()
    }

    pub fn variable(&self, id: VarId) -> &VariableRef {
        &self.variables[id.index()]
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.cons_index.get(name).map(|&i| &self.constraints[i])
    }

    pub fn cost_component_exprs(&self, name: &str) -> Option<&CostExprs> {
        self.cost_exprs.get(name)
    }

    pub fn balance_component_exprs(
        &self,
        name: &str,
    ) -> Option<&BTreeMap<(usize, usize), LinearExpression>> {
        self.balance_exprs.get(name)
    }

    /// Largest absolute constraint violation of `values` over all rows and
    /// variable bounds.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            let lhs = c.expr.eval(values);
            let viol = match c.sense {
                Sense::Le => (lhs - c.rhs).max(0.0),
                Sense::Ge => (c.rhs - lhs).max(0.0),
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for v in &self.variables {
            let x = values[v.id.index()];
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        worst
    }
}
