//! Problem definitions: linear operator terms, an optional nonlinear term
//! with its partial derivatives, data functions and exact solutions.

mod builtins;
mod custom;
pub mod expr;

pub use builtins::{builtin, list_problems, BUILTIN_NAMES};
pub use custom::{CustomAxis, CustomProblem, CustomTerm};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::deriv::{Deriv, DerivSet, Jet};
use crate::domain::{DomainSpec, PointKind, PointSet};
use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type JetFn = Arc<dyn Fn(&[f64]) -> Jet + Send + Sync>;
/// `(point, args)` where `args` follows `NonlinearTerm::depends_on`.
pub type NonlinearFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// Writes `∂N/∂arg_k` into the output slice.
pub type PartialsFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

pub fn scalar(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Field(ScalarFn),
}

impl Coefficient {
    pub fn at(&self, point: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Field(f) => f(point),
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "{c}"),
            Coefficient::Field(_) => write!(f, "c(x)"),
        }
    }
}

/// `coefficient(x) · ∂^derivative u`.
#[derive(Clone, Debug)]
pub struct LinearTerm {
    pub coefficient: Coefficient,
    pub derivative: Deriv,
}

impl LinearTerm {
    pub fn constant(c: f64, derivative: Deriv) -> Self {
        LinearTerm {
            coefficient: Coefficient::Constant(c),
            derivative,
        }
    }
}

#[derive(Clone)]
pub struct NonlinearTerm {
    /// Derivatives of `u` the term reads, in argument order.
    pub depends_on: Vec<Deriv>,
    pub value: NonlinearFn,
    pub partials: PartialsFn,
    pub description: String,
}

impl NonlinearTerm {
    pub fn args_from(&self, jet: &Jet) -> Result<Vec<f64>> {
        self.depends_on.iter().map(|&d| jet.require(d)).collect()
    }

    pub fn eval(&self, point: &[f64], jet: &Jet) -> Result<f64> {
        Ok((self.value)(point, &self.args_from(jet)?))
    }

    /// `∂N/∂(∂^d u)` for each entry of `depends_on`.
    pub fn eval_partials(&self, point: &[f64], jet: &Jet) -> Result<Vec<f64>> {
        let args = self.args_from(jet)?;
        let mut out = vec![0.0; args.len()];
        (self.partials)(point, &args, &mut out);
        Ok(out)
    }
}

impl fmt::Debug for NonlinearTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearTerm")
            .field("depends_on", &self.depends_on)
            .field("description", &self.description)
            .finish()
    }
}

#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarFn,
    /// Value and all derivatives up to second order.
    pub jet: Option<JetFn>,
    pub description: String,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub description: String,
    pub domain: DomainSpec,
    pub linear: Vec<LinearTerm>,
    pub nonlinear: Option<NonlinearTerm>,
    pub source: ScalarFn,
    pub boundary: ScalarFn,
    pub initial: Option<ScalarFn>,
    pub exact: Option<ExactSolution>,
    pub continuity: Option<Vec<usize>>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("linear", &self.linear)
            .field("nonlinear", &self.nonlinear)
            .finish_non_exhaustive()
    }
}

/// Per-point linear coefficients and source values at a fixed point set.
#[derive(Clone, Debug)]
pub struct InteriorData {
    pub coefficients: Vec<(Deriv, Vec<f64>)>,
    pub source: Vec<f64>,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn is_nonlinear(&self) -> bool {
        self.nonlinear.is_some()
    }

    pub fn linear_derivs(&self) -> DerivSet {
        DerivSet::new(self.linear.iter().map(|t| t.derivative))
    }

    /// Every derivative of `u` the operator reads.
    pub fn required_derivs(&self) -> DerivSet {
        let mut all = self.linear_derivs();
        if let Some(n) = &self.nonlinear {
            all = all.union(&DerivSet::new(n.depends_on.iter().copied()));
        }
        all
    }

    /// Per-axis continuity orders: the override when set, otherwise the
    /// highest derivative order along the axis minus one.
    pub fn continuity_orders(&self) -> Vec<usize> {
        if let Some(c) = &self.continuity {
            return c.clone();
        }
        let req = self.required_derivs();
        (0..self.dim())
            .map(|axis| {
                let order = req.iter().map(|d| d.order_along(axis)).max().unwrap_or(0);
                order.saturating_sub(1).min(2)
            })
            .collect()
    }

    pub fn linear_at(&self, jet: &Jet, point: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for t in &self.linear {
            acc += t.coefficient.at(point) * jet.require(t.derivative)?;
        }
        Ok(acc)
    }

    /// `L u + N(u) - f` at one point.
    pub fn residual_at(&self, jet: &Jet, point: &[f64]) -> Result<f64> {
        let mut r = self.linear_at(jet, point)? - (self.source)(point);
        if let Some(n) = &self.nonlinear {
            r += n.eval(point, jet)?;
        }
        Ok(r)
    }

    pub fn interior_data(&self, points: &[Vec<f64>]) -> InteriorData {
        InteriorData {
            coefficients: self
                .linear
                .iter()
                .map(|t| (t.derivative, points.iter().map(|p| t.coefficient.at(p)).collect()))
                .collect(),
            source: points.iter().map(|p| (self.source)(p)).collect(),
        }
    }

    /// Prescribed value at a boundary or initial point.
    pub fn data_at(&self, kind: PointKind, point: &[f64]) -> f64 {
        match (kind, &self.initial) {
            (PointKind::Initial, Some(h)) => h(point),
            _ => (self.boundary)(point),
        }
    }

    pub fn exact_value(&self, point: &[f64]) -> Option<f64> {
        self.exact.as_ref().map(|e| (e.value)(point))
    }

    /// Largest mismatch between the boundary/initial data and the exact
    /// solution over the given sets.
    pub fn data_mismatch<'a>(&self, sets: impl IntoIterator<Item = &'a PointSet>) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        let mut worst: f64 = 0.0;
        for set in sets {
            for p in &set.points {
                worst = worst.max((self.data_at(set.kind, p) - (exact.value)(p)).abs());
            }
        }
        Some(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    /// `sqrt(mean e²)`.
    pub l2_abs: f64,
    /// `sqrt(Σe² / Σu*²)`; absent when the exact solution vanishes on the grid.
    pub l2_rel: Option<f64>,
    pub linf: f64,
}

pub fn norms_from_values(numeric: &[f64], exact: &[f64]) -> Result<ErrorNorms> {
    if numeric.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if numeric.len() != exact.len() {
        return Err(Error::DimensionMismatch {
            context: "error norms",
            expected: exact.len(),
            found: numeric.len(),
        });
    }
    let mut sum_e2 = 0.0;
    let mut sum_u2 = 0.0;
    let mut linf: f64 = 0.0;
    for (&n, &u) in numeric.iter().zip(exact) {
        let e = n - u;
        sum_e2 += e * e;
        sum_u2 += u * u;
        linf = linf.max(e.abs());
    }
    Ok(ErrorNorms {
        l2_abs: (sum_e2 / numeric.len() as f64).sqrt(),
        l2_rel: (sum_u2 > 0.0).then(|| (sum_e2 / sum_u2).sqrt()),
        linf,
    })
}

pub fn error_norms(
    numeric: impl Fn(&[f64]) -> f64,
    exact: impl Fn(&[f64]) -> f64,
    grid: &PointSet,
) -> Result<ErrorNorms> {
    let n: Vec<f64> = grid.points.iter().map(|p| numeric(p)).collect();
    let u: Vec<f64> = grid.points.iter().map(|p| exact(p)).collect();
    norms_from_values(&n, &u)
}
