//! Linear-expression algebra.
//!
//! Expressions are immutable values: every operation returns a new, normalized
//! expression (terms sorted by variable id, duplicates merged, zero terms
//! dropped). This keeps model assembly order-independent.

use crate::error::{Error, Result};

/// Dense integer handle for a decision variable within one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A sparse linear expression `sum(coef_i * x_i) + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearExpression {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

impl Default for LinearExpression {
    fn default() -> Self {
        Self::zero()
    }
}

impl LinearExpression {
    pub fn zero() -> Self {
        LinearExpression {
            terms: Vec::new(),
            constant: 0.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        LinearExpression {
            terms: Vec::new(),
            constant: value,
        }
    }

    /// Single-term expression `coef * var`.
    pub fn term(var: VarId, coef: f64) -> Self {
        if coef == 0.0 {
            Self::zero()
        } else {
            LinearExpression {
                terms: vec![(var, coef)],
                constant: 0.0,
            }
        }
    }

    pub fn variable(var: VarId) -> Self {
        Self::term(var, 1.0)
    }

    pub fn terms(&self) -> &[(VarId, f64)] {
        &self.terms
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Adds `coef * var` to this expression, returning the normalized result.
    pub fn plus_term(&self, var: VarId, coef: f64) -> Self {
        self.plus(&Self::term(var, coef))
    }

    pub fn plus_constant(&self, value: f64) -> Self {
        let mut out = self.clone();
        out.constant += value;
        out
    }

    pub fn plus(&self, other: &LinearExpression) -> Self {
        merge(&[(1.0, self), (1.0, other)])
    }

    pub fn minus(&self, other: &LinearExpression) -> Self {
        merge(&[(1.0, self), (-1.0, other)])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        merge(&[(factor, self)])
    }

    /// Evaluates the expression against a dense value vector indexed by
    /// variable id.
    pub fn eval(&self, values: &[f64]) -> f64 {
        let mut total = self.constant;
        for &(var, coef) in &self.terms {
            total += coef * values[var.index()];
        }
        total
    }

    pub fn coefficient(&self, var: VarId) -> f64 {
        match self.terms.binary_search_by_key(&var, |t| t.0) {
            Ok(i) => self.terms[i].1,
            Err(_) => 0.0,
        }
    }
}

/// Normalized linear combination `sum(coef_i * expr_i)`.
///
/// Rejects non-finite scale factors or term coefficients in the result.
pub fn linear_combine(parts: &[(f64, &LinearExpression)]) -> Result<LinearExpression> {
    for &(coef, expr) in parts {
        if !coef.is_finite() {
            return Err(Error::NonFiniteCoefficient(coef));
        }
        for &(_, c) in expr.terms() {
            let scaled = coef * c;
            if !scaled.is_finite() {
                return Err(Error::NonFiniteCoefficient(scaled));
            }
        }
    }
    Ok(merge(parts))
}

/// Sums weighted expressions into one normalized expression.
fn merge(parts: &[(f64, &LinearExpression)]) -> LinearExpression {
    let mut terms: Vec<(VarId, f64)> = Vec::new();
    let mut constant = 0.0;
    for &(w, expr) in parts {
        if w == 0.0 {
            continue;
        }
        constant += w * expr.constant;
        for &(var, coef) in expr.terms() {
            terms.push((var, w * coef));
        }
    }
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
    for (var, coef) in terms {
        match out.last_mut() {
            Some(last) if last.0 == var => last.1 += coef,
            _ => out.push((var, coef)),
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    LinearExpression {
        terms: out,
        constant,
    }
}

/// Sums a sequence of expressions.
pub fn sum<'a, I: IntoIterator<Item = &'a LinearExpression>>(exprs: I) -> LinearExpression {
    let parts: Vec<(f64, &LinearExpression)> = exprs.into_iter().map(|e| (1.0, e)).collect();
    merge(&parts)
}
