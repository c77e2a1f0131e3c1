use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::{Coefficient, ExactSolution, LinearTerm, NonlinearTerm, ProblemSpec, ScalarFn};
use crate::deriv::{Deriv, Jet};
use crate::domain::{Axis, AxisRole, DomainSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomAxis {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "spatial")]
    pub role: AxisRole,
}

fn spatial() -> AxisRole {
    AxisRole::Spatial
}

/// `coefficient · ∂^derivative u`; the coefficient is an expression in the
/// coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomTerm {
    pub coefficient: String,
    pub derivative: Vec<u32>,
}

/// A problem given as expressions.
///
/// Coordinates are referenced by axis name. The nonlinear term may also use
/// `u` and derivative names such as `u_x`, `u_t`, `u_xx`, `u_xt` (axis names
/// in axis order). When `source` is omitted it is manufactured from `exact`;
/// omitted boundary and initial data default to `exact`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    #[serde(default)]
    pub name: Option<String>,
    pub axes: Vec<CustomAxis>,
    pub linear: Vec<CustomTerm>,
    #[serde(default)]
    pub nonlinear: Option<String>,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub boundary: Option<String>,
    #[serde(default)]
    pub initial: Option<String>,
    #[serde(default)]
    pub exact: Option<String>,
    #[serde(default)]
    pub continuity: Option<Vec<usize>>,
}

/// Derivatives of `u` the nonlinear term may read, with their names.
fn jet_variables(names: &[String]) -> Vec<(Deriv, String)> {
    let dim = names.len();
    let mut out = vec![(Deriv::Value, "u".to_string())];
    for a in 0..dim {
        out.push((Deriv::First(a), format!("u_{}", names[a])));
    }
    for a in 0..dim {
        for b in a..dim {
            out.push((Deriv::Second(a, b), format!("u_{}{}", names[a], names[b])));
        }
    }
    out
}

fn field(expr: Expr) -> ScalarFn {
    Arc::new(move |p: &[f64]| expr.eval(p))
}

impl CustomProblem {
    pub fn build(&self) -> Result<ProblemSpec> {
        let names: Vec<String> = self.axes.iter().map(|a| a.name.clone()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) || n == "u" || n == "pi" || n.starts_with("u_") {
                return Err(Error::config(format!("problem.custom.axes[{i}].name"), format!("`{n}` is reserved or repeated")));
            }
        }
        let domain = DomainSpec::new(
            self.axes
                .iter()
                .map(|a| Axis {
                    lower: a.lower,
                    upper: a.upper,
                    role: a.role,
                })
                .collect(),
        )?;
        let dim = domain.dim();
        let coord_vars: Vec<&str> = names.iter().map(String::as_str).collect();
        let parse_at = |text: &str, path: String| {
            Expr::parse(text, &coord_vars).map_err(|e| Error::config(path, e.to_string()))
        };

        let mut linear = Vec::new();
        let mut linear_exprs = Vec::new();
        for (i, t) in self.linear.iter().enumerate() {
            if t.derivative.len() != dim {
                return Err(Error::config(
                    format!("problem.custom.linear[{i}].derivative"),
                    format!("expected {dim} entries"),
                ));
            }
            let derivative = Deriv::from_multi_index(&t.derivative)
                .map_err(|e| Error::config(format!("problem.custom.linear[{i}].derivative"), e.to_string()))?;
            let c = parse_at(&t.coefficient, format!("problem.custom.linear[{i}].coefficient"))?;
            linear_exprs.push((c.clone(), derivative));
            let coefficient = match c.as_const() {
                Some(v) => Coefficient::Constant(v),
                None => Coefficient::Field(field(c)),
            };
            linear.push(LinearTerm {
                coefficient,
                derivative,
            });
        }

        let jet_vars = jet_variables(&names);
        let nonlinear = match &self.nonlinear {
            None => None,
            Some(text) => {
                let mut all: Vec<&str> = coord_vars.clone();
                all.extend(jet_vars.iter().map(|(_, n)| n.as_str()));
                let e = Expr::parse(text, &all).map_err(|e| Error::config("problem.custom.nonlinear", e.to_string()))?;
                Some(nonlinear_from_expr(e, dim, &jet_vars, text)?)
            }
        };

        let exact = match &self.exact {
            None => None,
            Some(text) => Some(exact_from_expr(parse_at(text, "problem.custom.exact".into())?, dim, text)),
        };

        let source = match (&self.source, &exact) {
            (Some(text), _) => field(parse_at(text, "problem.custom.source".into())?),
            (None, Some(ex)) => manufactured_source(&linear_exprs, nonlinear.clone(), ex),
            (None, None) => {
                return Err(Error::config("problem.custom.source", "required when `exact` is absent"));
            }
        };
        let from_exact = |what: &str| -> Result<ScalarFn> {
            exact
                .as_ref()
                .map(|e| e.value.clone())
                .ok_or_else(|| Error::config(format!("problem.custom.{what}"), "required when `exact` is absent"))
        };
        let boundary = match &self.boundary {
            Some(text) => field(parse_at(text, "problem.custom.boundary".into())?),
            None => from_exact("boundary")?,
        };
        let initial = match (domain.temporal_axis(), &self.initial) {
            (None, Some(_)) => {
                return Err(Error::config("problem.custom.initial", "domain has no temporal axis"));
            }
            (None, None) => None,
            (Some(_), Some(text)) => Some(field(parse_at(text, "problem.custom.initial".into())?)),
            (Some(_), None) => Some(from_exact("initial")?),
        };
        if let Some(c) = &self.continuity {
            if c.len() != dim || c.iter().any(|&k| k > 2) {
                return Err(Error::config("problem.custom.continuity", format!("expected {dim} orders in 0..=2")));
            }
        }

        Ok(ProblemSpec {
            name: self.name.clone().unwrap_or_else(|| "custom".into()),
            description: format!("custom problem on {dim} axes"),
            domain,
            linear,
            nonlinear,
            source,
            boundary,
            initial,
            exact,
            continuity: self.continuity.clone(),
        })
    }
}

fn nonlinear_from_expr(e: Expr, dim: usize, jet_vars: &[(Deriv, String)], text: &str) -> Result<NonlinearTerm> {
    // Expression variables: coordinates first, then every jet entry.
    let used: Vec<usize> = (0..jet_vars.len()).filter(|&k| e.uses(dim + k)).collect();
    let depends_on: Vec<Deriv> = used.iter().map(|&k| jet_vars[k].0).collect();
    let partials: Vec<Expr> = used.iter().map(|&k| e.diff(dim + k)).collect();
    let n_jet = jet_vars.len();
    let used_v = used.clone();
    let scatter = move |point: &[f64], args: &[f64]| {
        let mut vars = Vec::with_capacity(dim + n_jet);
        vars.extend_from_slice(point);
        vars.resize(dim + n_jet, 0.0);
        for (&k, &a) in used_v.iter().zip(args) {
            vars[dim + k] = a;
        }
        vars
    };
    let scatter_p = scatter.clone();
    let value_expr = e;
    Ok(NonlinearTerm {
        depends_on,
        value: Arc::new(move |p, args| value_expr.eval(&scatter(p, args))),
        partials: Arc::new(move |p, args, out| {
            let vars = scatter_p(p, args);
            for (o, d) in out.iter_mut().zip(&partials) {
                *o = d.eval(&vars);
            }
        }),
        description: text.to_string(),
    })
}

fn exact_from_expr(e: Expr, dim: usize, text: &str) -> ExactSolution {
    let mut entries = vec![(Deriv::Value, e.clone())];
    for a in 0..dim {
        let da = e.diff(a);
        for b in a..dim {
            entries.push((Deriv::Second(a, b), da.diff(b)));
        }
        entries.push((Deriv::First(a), da));
    }
    ExactSolution {
        value: field(e),
        jet: Some(Arc::new(move |p: &[f64]| {
            Jet::from_pairs(entries.iter().map(|(d, ex)| (*d, ex.eval(p))))
        })),
        description: text.to_string(),
    }
}

fn manufactured_source(
    linear: &[(Expr, Deriv)],
    nonlinear: Option<NonlinearTerm>,
    exact: &ExactSolution,
) -> ScalarFn {
    let linear = linear.to_vec();
    let jet_fn = exact.jet.clone().expect("expression solutions carry jets");
    Arc::new(move |p: &[f64]| {
        let jet = jet_fn(p);
        let mut f: f64 = linear
            .iter()
            .map(|(c, d)| c.eval(p) * jet.get(*d).expect("jet has all derivatives up to order 2"))
            .sum();
        if let Some(n) = &nonlinear {
            f += n.eval(p, &jet).expect("jet has all derivatives up to order 2");
        }
        f
    })
}
