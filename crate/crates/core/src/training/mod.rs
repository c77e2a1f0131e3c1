//! Per-subdomain training of the subspace networks on the PDE residual with
//! all combination coefficients fixed to one.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::forward::{forward, input_channels, layer_backward, ChannelPlan, Channels, LayerCache};
use crate::basis::{normalize_batch, NetworkParams};
use crate::deriv::Deriv;
use crate::domain::SubdomainSpec;
use crate::error::{Error, Result};
use crate::problems::{InteriorData, ProblemSpec};

pub const DEFAULT_SEED: u64 = 202;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once `loss / initial_loss <= rel_tol`.
    pub rel_tol: f64,
    pub seed: u64,
    /// Skip training entirely and keep the initial parameters.
    pub epochs_zero: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-3,
            max_epochs: 5000,
            rel_tol: 1e-3,
            seed: DEFAULT_SEED,
            epochs_zero: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("training.learning_rate", "must be positive"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1.0) {
            return Err(Error::config("training.rel_tol", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Result of training one subdomain network.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub epochs_used: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_rel_loss: f64,
    /// `(epoch, loss)`; epoch 0 is the loss before any step.
    pub log: Vec<(usize, f64)>,
}

/// Everything about a subdomain's residual that does not depend on the
/// network parameters.
pub struct ResidualModel<'a> {
    problem: &'a ProblemSpec,
    points: &'a [Vec<f64>],
    data: InteriorData,
    z: Array2<f64>,
    chain: Vec<f64>,
    plan: ChannelPlan,
}

impl<'a> ResidualModel<'a> {
    pub fn new(problem: &'a ProblemSpec, subdomain: &SubdomainSpec, points: &'a [Vec<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let (z, chain) = normalize_batch(points, subdomain)?;
        let derivs = problem.required_derivs();
        Ok(ResidualModel {
            problem,
            points,
            data: problem.interior_data(points),
            z,
            chain,
            plan: ChannelPlan::new(&derivs),
        })
    }

    fn derivs_of_channels(&self) -> Vec<Deriv> {
        let mut out = vec![Deriv::Value];
        out.extend(self.plan.first_axes.iter().map(|&a| Deriv::First(a)));
        out.extend(self.plan.second_pairs.iter().map(|&(a, b)| Deriv::Second(a, b)));
        out
    }

    fn run(&self, params: &NetworkParams, keep_cache: bool) -> (Channels, Vec<LayerCache>) {
        forward(
            params,
            input_channels(self.z.clone(), &self.chain, &self.plan),
            &self.plan,
            keep_cache,
        )
    }

    /// Residuals `r_i` and, for every channel, `∂r_i/∂û_channel`.
    fn residuals(&self, out: &Channels) -> (Array1<f64>, Vec<Array1<f64>>) {
        let derivs = self.derivs_of_channels();
        let sums: Vec<Array1<f64>> = std::iter::once(&out.value)
            .chain(&out.first)
            .chain(&out.second)
            .map(|m| m.sum_axis(Axis(1)))
            .collect();
        let n = self.points.len();
        let mut r = Array1::from(self.data.source.clone()).mapv(|f| -f);
        let mut sens: Vec<Array1<f64>> = vec![Array1::zeros(n); derivs.len()];
        for (d, coeffs) in &self.data.coefficients {
            let k = derivs.iter().position(|x| x == d).expect("operator derivative is planned");
            for i in 0..n {
                r[i] += coeffs[i] * sums[k][i];
                sens[k][i] += coeffs[i];
            }
        }
        if let Some(nl) = &self.problem.nonlinear {
            let slots: Vec<usize> = nl
                .depends_on
                .iter()
                .map(|d| derivs.iter().position(|x| x == d).expect("nonlinear derivative is planned"))
                .collect();
            let mut args = vec![0.0; slots.len()];
            let mut partials = vec![0.0; slots.len()];
            for i in 0..n {
                for (a, &k) in args.iter_mut().zip(&slots) {
                    *a = sums[k][i];
                }
                r[i] += (nl.value)(&self.points[i], &args);
                (nl.partials)(&self.points[i], &args, &mut partials);
                for (p, &k) in partials.iter().zip(&slots) {
                    sens[k][i] += p;
                }
            }
        }
        (r, sens)
    }

    pub fn loss(&self, params: &NetworkParams) -> f64 {
        let (out, _) = self.run(params, false);
        let (r, _) = self.residuals(&out);
        r.mapv(|v| v * v).mean().unwrap_or(0.0)
    }

    /// Loss and its gradient, flattened like [`NetworkParams::flatten`].
    pub fn loss_and_gradient(&self, params: &NetworkParams) -> (f64, Vec<f64>) {
        let (out, caches) = self.run(params, true);
        let (r, sens) = self.residuals(&out);
        let n = self.points.len() as f64;
        let loss = r.mapv(|v| v * v).mean().unwrap_or(0.0);

        // ∂L/∂out_ch[i, j] = (2/N) r_i ∂r_i/∂û_ch, the same for every j.
        let m = params.num_basis();
        let upstream_for = |s: &Array1<f64>| {
            let col = (&r * s) * (2.0 / n);
            col.insert_axis(Axis(1))
                .broadcast((r.len(), m))
                .expect("broadcast column")
                .to_owned()
        };
        let n_first = self.plan.first_axes.len();
        let mut upstream = Channels {
            value: upstream_for(&sens[0]),
            first: sens[1..1 + n_first].iter().map(upstream_for).collect(),
            second: sens[1 + n_first..].iter().map(upstream_for).collect(),
        };

        let mut layer_grads = Vec::with_capacity(params.layers.len());
        for (l, (layer, cache)) in params.layers.iter().zip(&caches).enumerate().rev() {
            let g = layer_backward(layer, cache, upstream, &self.plan, l > 0);
            upstream = g.input;
            layer_grads.push((g.weights, g.bias));
        }
        layer_grads.reverse();
        let mut flat = Vec::with_capacity(params.num_params());
        for (w, b) in layer_grads {
            flat.extend(w.iter());
            flat.extend(b.iter());
        }
        (loss, flat)
    }
}

/// Mean squared PDE residual of `û = Σ_j φ_j` over `points`.
pub fn residual_loss(
    params: &NetworkParams,
    problem: &ProblemSpec,
    subdomain: &SubdomainSpec,
    points: &[Vec<f64>],
) -> Result<f64> {
    Ok(ResidualModel::new(problem, subdomain, points)?.loss(params))
}

/// Exact gradient of [`residual_loss`] with respect to every weight and bias.
pub fn loss_gradient(
    params: &NetworkParams,
    problem: &ProblemSpec,
    subdomain: &SubdomainSpec,
    points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    Ok(ResidualModel::new(problem, subdomain, points)?
        .loss_and_gradient(params)
        .1)
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(lr: f64, n: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((th, g), (m, v)) in theta.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *th -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Full-batch Adam on the residual loss until the relative loss reaches
/// `rel_tol` or `max_epochs` steps have been taken.
pub fn train_subdomain(
    params: NetworkParams,
    problem: &ProblemSpec,
    subdomain: &SubdomainSpec,
    points: &[Vec<f64>],
    config: &TrainingConfig,
) -> Result<TrainOutcome> {
    let model = ResidualModel::new(problem, subdomain, points)?;
    if config.epochs_zero {
        let loss = model.loss(&params);
        return Ok(TrainOutcome {
            params,
            epochs_used: 0,
            initial_loss: loss,
            final_loss: loss,
            final_rel_loss: if loss == 0.0 { 0.0 } else { 1.0 },
            log: Vec::new(),
        });
    }
    let (l0, mut grad) = model.loss_and_gradient(&params);
    if !l0.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: 0 });
    }
    let mut log = vec![(0, l0)];
    let mut outcome = TrainOutcome {
        params,
        epochs_used: 0,
        initial_loss: l0,
        final_loss: l0,
        final_rel_loss: if l0 == 0.0 { 0.0 } else { 1.0 },
        log: Vec::new(),
    };
    if l0 == 0.0 || config.max_epochs == 0 {
        outcome.log = log;
        return Ok(outcome);
    }

    let mut theta = outcome.params.flatten();
    let mut adam = Adam::new(config.learning_rate, theta.len());
    for epoch in 1..=config.max_epochs {
        adam.step(&mut theta, &grad);
        outcome.params.assign_flat(&theta);
        let (loss, g) = model.loss_and_gradient(&outcome.params);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        grad = g;
        log.push((epoch, loss));
        outcome.epochs_used = epoch;
        outcome.final_loss = loss;
        outcome.final_rel_loss = loss / l0;
        if outcome.final_rel_loss <= config.rel_tol {
            break;
        }
    }
    outcome.log = log;
    Ok(outcome)
}

/// Trains every subdomain independently, in parallel.
pub fn train_all(
    initial: Vec<NetworkParams>,
    problem: &ProblemSpec,
    subdomains: &[SubdomainSpec],
    points: &[Vec<Vec<f64>>],
    config: &TrainingConfig,
) -> Result<Vec<TrainOutcome>> {
    initial
        .into_par_iter()
        .zip(subdomains.par_iter().zip(points.par_iter()))
        .map(|(params, (sub, pts))| train_subdomain(params, problem, sub, pts, config))
        .collect()
}
