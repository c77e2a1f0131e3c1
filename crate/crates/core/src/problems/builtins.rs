use std::f64::consts::PI;
use std::sync::Arc;

use super::{scalar, ExactSolution, LinearTerm, NonlinearTerm, ProblemSpec};
use crate::deriv::{Deriv, Jet};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};

pub const BUILTIN_NAMES: [&str; 6] = [
    "helmholtz1d",
    "poisson2d",
    "parabolic1d",
    "boundary_layer1d",
    "nonlinear_helmholtz1d",
    "burgers1d",
];

pub fn builtin(name: &str) -> Result<ProblemSpec> {
    match name {
        "helmholtz1d" => Ok(helmholtz1d()),
        "poisson2d" => Ok(poisson2d()),
        "parabolic1d" => Ok(parabolic1d()),
        "boundary_layer1d" => Ok(boundary_layer1d()),
        "nonlinear_helmholtz1d" => Ok(nonlinear_helmholtz1d()),
        "burgers1d" => Ok(burgers1d()),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// One line per builtin: name, domain, equation, exact solution.
pub fn list_problems() -> String {
    let mut out = String::new();
    for name in BUILTIN_NAMES {
        let p = builtin(name).expect("registered");
        let exact = p.exact.as_ref().map_or("-", |e| e.description.as_str());
        out.push_str(&format!("{name}\n  {}\n  exact: {exact}\n", p.description));
    }
    out
}

fn jet1(u: f64, ux: f64, uxx: f64) -> Jet {
    Jet::from_pairs([
        (Deriv::Value, u),
        (Deriv::First(0), ux),
        (Deriv::Second(0, 0), uxx),
    ])
}

fn jet2(u: f64, u0: f64, u1: f64, u00: f64, u01: f64, u11: f64) -> Jet {
    Jet::from_pairs([
        (Deriv::Value, u),
        (Deriv::First(0), u0),
        (Deriv::First(1), u1),
        (Deriv::Second(0, 0), u00),
        (Deriv::Second(0, 1), u01),
        (Deriv::Second(1, 1), u11),
    ])
}

fn helmholtz1d() -> ProblemSpec {
    const LAMBDA: f64 = 10.0;
    let angles = |x: f64| (3.0 * PI * x + 3.0 * PI / 20.0, 2.0 * PI * x + PI / 10.0);
    let u = move |x: f64| {
        let (a, b) = angles(x);
        a.sin() * b.cos() + 2.0
    };
    ProblemSpec {
        name: "helmholtz1d".into(),
        description: "x in [0, 8]; u'' - 10 u = f; Dirichlet data from the exact solution".into(),
        domain: DomainSpec::spatial(&[(0.0, 8.0)]).expect("valid domain"),
        linear: vec![
            LinearTerm::constant(1.0, Deriv::Second(0, 0)),
            LinearTerm::constant(-LAMBDA, Deriv::Value),
        ],
        nonlinear: None,
        source: scalar(move |p| {
            let (a, b) = angles(p[0]);
            -13.0 * PI * PI * a.sin() * b.cos()
                - 12.0 * PI * PI * a.cos() * b.sin()
                - LAMBDA * (a.sin() * b.cos() + 2.0)
        }),
        boundary: scalar(move |p| u(p[0])),
        initial: None,
        exact: Some(ExactSolution {
            value: scalar(move |p| u(p[0])),
            jet: Some(Arc::new(move |p: &[f64]| {
                let (a, b) = angles(p[0]);
                let (sa, ca, sb, cb) = (a.sin(), a.cos(), b.sin(), b.cos());
                jet1(
                    sa * cb + 2.0,
                    3.0 * PI * ca * cb - 2.0 * PI * sa * sb,
                    -13.0 * PI * PI * sa * cb - 12.0 * PI * PI * ca * sb,
                )
            })),
            description: "sin(3 pi x + 3 pi/20) cos(2 pi x + pi/10) + 2".into(),
        }),
        continuity: None,
    }
}

fn poisson2d() -> ProblemSpec {
    ProblemSpec {
        name: "poisson2d".into(),
        description: "(x, y) in [0, 2]^2; -(u_xx + u_yy) = f; Dirichlet data from the exact solution".into(),
        domain: DomainSpec::spatial(&[(0.0, 2.0), (0.0, 2.0)]).expect("valid domain"),
        linear: vec![
            LinearTerm::constant(-1.0, Deriv::Second(0, 0)),
            LinearTerm::constant(-1.0, Deriv::Second(1, 1)),
        ],
        nonlinear: None,
        source: scalar(|p| 2.0 * PI * PI * (PI * p[0]).sin() * (PI * p[1]).sin()),
        boundary: scalar(|p| (PI * p[0]).sin() * (PI * p[1]).sin()),
        initial: None,
        exact: Some(ExactSolution {
            value: scalar(|p| (PI * p[0]).sin() * (PI * p[1]).sin()),
            jet: Some(Arc::new(|p: &[f64]| {
                let (sx, cx) = (PI * p[0]).sin_cos();
                let (sy, cy) = (PI * p[1]).sin_cos();
                let u = sx * sy;
                jet2(u, PI * cx * sy, PI * sx * cy, -PI * PI * u, PI * PI * cx * cy, -PI * PI * u)
            })),
            description: "sin(pi x) sin(pi y)".into(),
        }),
        continuity: None,
    }
}

fn parabolic1d() -> ProblemSpec {
    let u = |p: &[f64]| 2.0 * (-p[1]).exp() * (PI * p[0]).sin();
    ProblemSpec {
        name: "parabolic1d".into(),
        description: "(x, t) in [0, 2] x [0, 2]; u_t - u_xx = f; boundary data at x = 0, 2 and initial data at t = 0"
            .into(),
        domain: DomainSpec::space_time(&[(0.0, 2.0)], (0.0, 2.0)).expect("valid domain"),
        linear: vec![
            LinearTerm::constant(1.0, Deriv::First(1)),
            LinearTerm::constant(-1.0, Deriv::Second(0, 0)),
        ],
        nonlinear: None,
        source: scalar(|p| 2.0 * (-p[1]).exp() * (PI * p[0]).sin() * (PI * PI - 1.0)),
        boundary: scalar(u),
        initial: Some(scalar(|p| 2.0 * (PI * p[0]).sin())),
        exact: Some(ExactSolution {
            value: scalar(u),
            jet: Some(Arc::new(|p: &[f64]| {
                let e = 2.0 * (-p[1]).exp();
                let (s, c) = (PI * p[0]).sin_cos();
                let u = e * s;
                let ux = PI * e * c;
                jet2(u, ux, -u, -PI * PI * u, -ux, u)
            })),
            description: "2 exp(-t) sin(pi x)".into(),
        }),
        continuity: None,
    }
}

fn boundary_layer1d() -> ProblemSpec {
    const EPS: f64 = 0.01;
    // (e^{x/eps} - 1) / (e^{1/eps} - 1) without overflow
    let denom = 1.0 - (-1.0 / EPS).exp();
    let layer = move |x: f64| (((x - 1.0) / EPS).exp() - (-1.0 / EPS).exp()) / denom;
    let layer_d1 = move |x: f64| ((x - 1.0) / EPS).exp() / (EPS * denom);
    let u = move |x: f64| (PI * x).sin() + layer(x);
    ProblemSpec {
        name: "boundary_layer1d".into(),
        description: "x in [0, 1]; -eps u'' + u' = eps pi^2 sin(pi x) + pi cos(pi x), eps = 0.01".into(),
        domain: DomainSpec::spatial(&[(0.0, 1.0)]).expect("valid domain"),
        linear: vec![
            LinearTerm::constant(-EPS, Deriv::Second(0, 0)),
            LinearTerm::constant(1.0, Deriv::First(0)),
        ],
        nonlinear: None,
        source: scalar(|p| EPS * PI * PI * (PI * p[0]).sin() + PI * (PI * p[0]).cos()),
        boundary: scalar(move |p| u(p[0])),
        initial: None,
        exact: Some(ExactSolution {
            value: scalar(move |p| u(p[0])),
            jet: Some(Arc::new(move |p: &[f64]| {
                let x = p[0];
                let (s, c) = (PI * x).sin_cos();
                let d1 = layer_d1(x);
                jet1(s + layer(x), PI * c + d1, -PI * PI * s + d1 / EPS)
            })),
            description: "sin(pi x) + (exp(x/eps) - 1)/(exp(1/eps) - 1)".into(),
        }),
        continuity: None,
    }
}

fn nonlinear_helmholtz1d() -> ProblemSpec {
    const LAMBDA: f64 = 50.0;
    const C: f64 = 10.0;
    let angles = |x: f64| (3.0 * PI * x + 3.0 * PI / 20.0, 4.0 * PI * x - 2.0 * PI / 5.0);
    let u = move |x: f64| {
        let (a, b) = angles(x);
        a.sin() * b.cos() + 1.5 + x / 10.0
    };
    ProblemSpec {
        name: "nonlinear_helmholtz1d".into(),
        description: "x in [0, 8]; u'' - 50 u + 10 sin(u) = f".into(),
        domain: DomainSpec::spatial(&[(0.0, 8.0)]).expect("valid domain"),
        linear: vec![
            LinearTerm::constant(1.0, Deriv::Second(0, 0)),
            LinearTerm::constant(-LAMBDA, Deriv::Value),
        ],
        nonlinear: Some(NonlinearTerm {
            depends_on: vec![Deriv::Value],
            value: Arc::new(|_, a| C * a[0].sin()),
            partials: Arc::new(|_, a, out| out[0] = C * a[0].cos()),
            description: "10 sin(u)".into(),
        }),
        source: scalar(move |p| {
            let x = p[0];
            let (a, b) = angles(x);
            let uu = a.sin() * b.cos() + 1.5 + x / 10.0;
            -25.0 * PI * PI * a.sin() * b.cos() - 24.0 * PI * PI * a.cos() * b.sin() - LAMBDA * uu + C * uu.sin()
        }),
        boundary: scalar(move |p| u(p[0])),
        initial: None,
        exact: Some(ExactSolution {
            value: scalar(move |p| u(p[0])),
            jet: Some(Arc::new(move |p: &[f64]| {
                let x = p[0];
                let (a, b) = angles(x);
                let (sa, ca, sb, cb) = (a.sin(), a.cos(), b.sin(), b.cos());
                jet1(
                    sa * cb + 1.5 + x / 10.0,
                    3.0 * PI * ca * cb - 4.0 * PI * sa * sb + 0.1,
                    -25.0 * PI * PI * sa * cb - 24.0 * PI * PI * ca * sb,
                )
            })),
            description: "sin(3 pi x + 3 pi/20) cos(4 pi x - 2 pi/5) + 3/2 + x/10".into(),
        }),
        continuity: None,
    }
}

fn burgers1d() -> ProblemSpec {
    const NU: f64 = 0.01;
    let u = |p: &[f64]| (-0.01 * p[1]).exp() * p[0].sin();
    ProblemSpec {
        name: "burgers1d".into(),
        description: "(x, t) in [0, 2 pi] x [0, 1]; u_t + u u_x - nu u_xx = f, nu = 0.01".into(),
        domain: DomainSpec::space_time(&[(0.0, 2.0 * PI)], (0.0, 1.0)).expect("valid domain"),
        linear: vec![
            LinearTerm::constant(1.0, Deriv::First(1)),
            LinearTerm::constant(-NU, Deriv::Second(0, 0)),
        ],
        nonlinear: Some(NonlinearTerm {
            depends_on: vec![Deriv::Value, Deriv::First(0)],
            value: Arc::new(|_, a| a[0] * a[1]),
            partials: Arc::new(|_, a, out| {
                out[0] = a[1];
                out[1] = a[0];
            }),
            description: "u u_x".into(),
        }),
        source: scalar(|p| (-0.02 * p[1]).exp() * p[0].sin() * p[0].cos()),
        boundary: scalar(u),
        initial: Some(scalar(|p| p[0].sin())),
        exact: Some(ExactSolution {
            value: scalar(u),
            jet: Some(Arc::new(|p: &[f64]| {
                let e = (-0.01 * p[1]).exp();
                let (s, c) = p[0].sin_cos();
                let u = e * s;
                let ux = e * c;
                jet2(u, ux, -0.01 * u, -u, -0.01 * ux, 1e-4 * u)
            })),
            description: "exp(-0.01 t) sin(x)".into(),
        }),
        continuity: None,
    }
}
