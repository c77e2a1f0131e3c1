//! End-to-end drivers: train the subdomain bases, freeze them, and solve the
//! collocation system once (linear problems) or repeatedly (Picard, Newton).

mod discretization;

pub use discretization::Discretization;

use std::time::Instant;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::assembly::{residual_norm, GlobalSystem, LeastSquares, RowKind, DEFAULT_RCOND};
use crate::basis::{
    eval_basis_batch, init_params, BasisProvider, CoefficientVector, InitMode, NetworkConfig, NetworkParams, NeuralBasis,
    SubspaceActivation,
};
use crate::deriv::{Deriv, DerivSet};
use crate::domain::{
    partition, sample_boundary, sample_interface, sample_interior, BoundarySample, Partition, PartitionSpec,
    SamplingStrategy, SubdomainSpec,
};
use crate::error::{Error, Result};
use crate::problems::{norms_from_values, ErrorNorms, ProblemSpec};
use crate::training::{train_all, TrainOutcome, TrainingConfig};

fn default_strategy() -> SamplingStrategy {
    SamplingStrategy::Uniform
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "default_strategy")]
    pub strategy: SamplingStrategy,
    /// Interior points per axis in every subdomain.
    pub interior: Vec<usize>,
    /// Rule sizes for boundary facets, per axis; defaults to `interior`.
    #[serde(default)]
    pub boundary: Option<Vec<usize>>,
    /// Rule sizes for interface facets, per axis (the normal axis entry is
    /// ignored); defaults to `interior`.
    #[serde(default)]
    pub interface: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
}

fn default_hidden() -> Vec<usize> {
    vec![100, 100]
}

fn default_subspace() -> usize {
    100
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_subspace")]
    pub subspace_dim: usize,
    #[serde(default)]
    pub init: InitMode,
    /// `R_m` for `uniform_range` initialization.
    #[serde(default = "one")]
    pub init_range: f64,
    #[serde(default)]
    pub subspace_activation: SubspaceActivation,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            hidden: default_hidden(),
            subspace_dim: default_subspace(),
            init: InitMode::Glorot,
            init_range: 1.0,
            subspace_activation: SubspaceActivation::Tanh,
        }
    }
}

impl NetworkSpec {
    pub fn config(&self, input_dim: usize) -> NetworkConfig {
        let mut c = NetworkConfig::new(input_dim, self.hidden.clone(), self.subspace_dim);
        c.init_range = self.init_range;
        c.subspace_activation = self.subspace_activation;
        c
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Picard,
    Newton,
}

/// How a Picard step treats the nonlinear term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linearization {
    /// `N(û⁽ⁿ⁾)` moves to the rhs; the operator is factorized once.
    Frozen,
    /// Derivative arguments of `N` are taken at the new iterate, the rest
    /// at the old one (`u u_x` becomes `u⁽ⁿ⁾ u_x⁽ⁿ⁺¹⁾`). Same as `Frozen`
    /// when `N` depends on `u` alone.
    #[default]
    SemiImplicit,
}

/// Least-squares settings shared by every solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LsOptions {
    /// Scale every row to unit 2-norm first.
    pub equilibrate: bool,
    /// Relative singular-value cutoff.
    pub rcond: f64,
}

impl Default for LsOptions {
    fn default() -> Self {
        LsOptions {
            equilibrate: false,
            rcond: DEFAULT_RCOND,
        }
    }
}

impl LsOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rcond >= 0.0 && self.rcond < 1.0) {
            return Err(Error::config("solver.rcond", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearConfig {
    pub method: Method,
    pub max_iters: usize,
    /// Stop once the sup-norm change of `û` over the interior points is at
    /// most this.
    pub tol: f64,
    /// Picard steps taken before Newton starts.
    pub picard_warmup_iters: usize,
    /// Ends the warmup early once a Picard step changes `û` by at most this.
    pub warmup_tol: Option<f64>,
    pub linearization: Linearization,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        NonlinearConfig {
            method: Method::Picard,
            max_iters: 20,
            tol: 1e-6,
            picard_warmup_iters: 2,
            warmup_tol: None,
            linearization: Linearization::SemiImplicit,
        }
    }
}

impl NonlinearConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::config("nonlinear.max_iters", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("nonlinear.tol", "must be positive"));
        }
        if self.warmup_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::config("nonlinear.warmup_tol", "must be positive"));
        }
        Ok(())
    }
}

/// Uniform tensor grid over the whole domain for error reporting.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalGrid {
    /// Points per axis; defaults to 1001 in 1-D and 101 per axis otherwise.
    #[serde(default)]
    pub counts: Option<Vec<usize>>,
}

impl EvalGrid {
    pub fn points(&self, problem: &ProblemSpec) -> Result<Vec<Vec<f64>>> {
        let axes = problem.domain.axes();
        let counts = match &self.counts {
            Some(c) => c.clone(),
            None if axes.len() == 1 => vec![1001],
            None => vec![101; axes.len()],
        };
        if counts.len() != axes.len() {
            return Err(Error::config(
                "eval.counts",
                format!("expected {} entries, found {}", axes.len(), counts.len()),
            ));
        }
        if counts.iter().any(|&n| n < 2) {
            return Err(Error::config("eval.counts", "every count must be at least 2"));
        }
        let rules: Vec<Vec<f64>> = axes
            .iter()
            .zip(&counts)
            .map(|(a, &n)| {
                (0..n)
                    .map(|i| {
                        if i + 1 == n {
                            a.upper
                        } else {
                            a.lower + (a.upper - a.lower) * i as f64 / (n - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        // axis 0 fastest
        let mut points = vec![Vec::new()];
        for rule in &rules {
            let mut next = Vec::with_capacity(points.len() * rule.len());
            for v in rule {
                for p in &points {
                    let mut q: Vec<f64> = p.clone();
                    q.push(*v);
                    next.push(q);
                }
            }
            points = next;
        }
        Ok(points)
    }
}

/// Everything needed for one solve.
#[derive(Clone, Debug)]
pub struct SolveSetup {
    pub problem: ProblemSpec,
    pub counts: Vec<usize>,
    /// Per-axis continuity orders; defaults to the problem's.
    pub continuity: Option<Vec<usize>>,
    pub sampling: SamplingConfig,
    pub network: NetworkSpec,
    pub training: TrainingConfig,
    /// Required for nonlinear problems (defaults apply when absent); also
    /// accepted for linear ones, which then converge in one step.
    pub nonlinear: Option<NonlinearConfig>,
    pub eval: EvalGrid,
    pub ls: LsOptions,
}

impl SolveSetup {
    pub fn new(problem: ProblemSpec, counts: Vec<usize>, interior: Vec<usize>) -> Self {
        SolveSetup {
            problem,
            counts,
            continuity: None,
            sampling: SamplingConfig {
                strategy: SamplingStrategy::Uniform,
                interior,
                boundary: None,
                interface: None,
                seed: 0,
            },
            network: NetworkSpec::default(),
            training: TrainingConfig::default(),
            nonlinear: None,
            eval: EvalGrid::default(),
            ls: LsOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.problem.dim();
        let check_len = |path: &str, v: &[usize]| {
            if v.len() == dim {
                Ok(())
            } else {
                Err(Error::config(path, format!("expected {dim} entries, found {}", v.len())))
            }
        };
        check_len("partition.counts", &self.counts)?;
        if self.counts.contains(&0) {
            return Err(Error::config("partition.counts", "every count must be at least 1"));
        }
        if let Some(c) = &self.continuity {
            check_len("partition.continuity", c)?;
            if c.iter().any(|&k| k > 2) {
                return Err(Error::config("partition.continuity", "orders above 2 are not supported"));
            }
        }
        check_len("sampling.interior", &self.sampling.interior)?;
        if self.sampling.interior.iter().any(|&n| n < 2) {
            return Err(Error::config("sampling.interior", "every count must be at least 2"));
        }
        if let Some(b) = &self.sampling.boundary {
            check_len("sampling.boundary", b)?;
        }
        if let Some(b) = &self.sampling.interface {
            check_len("sampling.interface", b)?;
        }
        self.network.config(dim).validate()?;
        self.training.validate()?;
        if let Some(n) = &self.nonlinear {
            n.validate()?;
        }
        self.ls.validate()?;
        self.eval.points(&self.problem).map(|_| ())
    }

    fn partition_spec(&self) -> PartitionSpec {
        let orders = self
            .continuity
            .clone()
            .unwrap_or_else(|| self.problem.continuity_orders());
        PartitionSpec::new(self.counts.clone()).with_continuity(orders)
    }
}

/// Collocation points for every part of the system.
#[derive(Clone, Debug)]
pub struct PointSets {
    pub interior: Vec<Vec<Vec<f64>>>,
    pub boundary: BoundarySample,
    pub interfaces: Vec<Vec<Vec<f64>>>,
}

pub fn sample_points(setup: &SolveSetup, part: &Partition) -> Result<PointSets> {
    let s = &setup.sampling;
    let interior = part
        .subdomains
        .iter()
        .map(|sub| sample_interior(sub, s.strategy, &s.interior, s.seed).map(|p| p.points))
        .collect::<Result<Vec<_>>>()?;
    let bcounts = s.boundary.clone().unwrap_or_else(|| s.interior.clone());
    let boundary = sample_boundary(&part.domain, &part.subdomains, &bcounts, s.strategy, s.seed)?;
    let icounts = s.interface.clone().unwrap_or_else(|| s.interior.clone());
    let interfaces = part
        .interfaces
        .iter()
        .map(|iface| {
            let tangential: Vec<usize> = icounts
                .iter()
                .enumerate()
                .filter(|&(a, _)| a != iface.axis)
                .map(|(_, &n)| n)
                .collect();
            sample_interface(iface, &tangential, s.strategy, s.seed).map(|p| p.points)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointSets {
        interior,
        boundary,
        interfaces,
    })
}

/// Trained, frozen bases and the cached parts of the system.
pub struct Prepared<'a> {
    pub disc: Discretization<'a, NeuralBasis>,
    pub training: Vec<TrainOutcome>,
    pub train_seconds: f64,
    pub assemble_seconds: f64,
}

/// Initial parameters for every subdomain; subdomain `k` uses RNG stream `k`.
pub fn initial_params(setup: &SolveSetup, subdomains: &[SubdomainSpec]) -> Result<Vec<NetworkParams>> {
    let cfg = setup.network.config(setup.problem.dim());
    subdomains
        .iter()
        .map(|s| init_params(&cfg, setup.network.init, setup.training.seed, s.index as u64))
        .collect()
}

/// Partitions, samples, trains every subdomain and assembles the fixed rows.
pub fn prepare(setup: &SolveSetup) -> Result<Prepared<'_>> {
    setup.validate()?;
    let part = partition(&setup.problem.domain, &setup.partition_spec())?;
    let points = sample_points(setup, &part)?;

    let t0 = Instant::now();
    let initial = initial_params(setup, &part.subdomains)?;
    let training = train_all(initial, &setup.problem, &part.subdomains, &points.interior, &setup.training)?;
    let train_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let providers: Vec<NeuralBasis> = training
        .iter()
        .zip(&part.subdomains)
        .map(|(t, s)| NeuralBasis::new(t.params.clone(), s.clone()))
        .collect();
    let disc = Discretization::new(
        &setup.problem,
        part,
        providers,
        points.interior,
        &points.boundary,
        &points.interfaces,
    )?;
    Ok(Prepared {
        disc,
        training,
        train_seconds,
        assemble_seconds: t1.elapsed().as_secs_f64(),
    })
}

/// Result of the algebraic stage.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub beta: Vec<f64>,
    pub method: String,
    pub iterations: usize,
    pub warmup_iterations: usize,
    pub converged: bool,
    pub system_rows: usize,
    pub rank: usize,
    /// `‖Aβ - b‖₂` of every least-squares solve, in order.
    pub ls_residual_history: Vec<f64>,
    /// Sup-norm change of `û` at the interior points per iteration.
    pub update_history: Vec<f64>,
    /// `‖R(β)‖₂` at the interior points for every iterate.
    pub nonlinear_residual_history: Vec<f64>,
    pub assemble_seconds: f64,
    pub solve_seconds: f64,
}

impl SolveOutcome {
    /// Root-mean-square of the last least-squares residual.
    pub fn ls_residual_rms(&self) -> f64 {
        let last = self.ls_residual_history.last().copied().unwrap_or(0.0);
        last / (self.system_rows.max(1) as f64).sqrt()
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn norm2(v: &[Vec<f64>]) -> f64 {
    v.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

fn factor(sys: &GlobalSystem, opts: LsOptions) -> Result<LeastSquares> {
    LeastSquares::factor_with(sys.matrix.as_ref(), opts.equilibrate, opts.rcond)
}

/// One least-squares solve of the linear system.
pub fn solve_linear<P: BasisProvider>(disc: &Discretization<'_, P>, opts: LsOptions) -> Result<SolveOutcome> {
    if disc.problem.is_nonlinear() {
        return Err(Error::NotLinear);
    }
    let t0 = Instant::now();
    let sys = disc.system(None)?;
    let assemble_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let ls = factor(&sys, opts)?;
    let beta = ls.solve(&sys.rhs)?;
    let res = residual_norm(sys.matrix.as_ref(), &beta, &sys.rhs);
    let nl_res = norm2(&disc.residuals(&beta));
    Ok(SolveOutcome {
        beta,
        method: "linear".into(),
        iterations: 0,
        warmup_iterations: 0,
        converged: true,
        system_rows: sys.nrows(),
        rank: ls.rank(),
        ls_residual_history: vec![res],
        update_history: Vec::new(),
        nonlinear_residual_history: vec![nl_res],
        assemble_seconds,
        solve_seconds: t1.elapsed().as_secs_f64(),
    })
}

/// Picard state: the current iterate and, for the frozen linearization,
/// the operator factorized once.
struct PicardState {
    frozen: Option<(GlobalSystem, LeastSquares)>,
    opts: LsOptions,
    beta: Vec<f64>,
    values: Vec<f64>,
}

impl PicardState {
    /// β⁰: one step from the trained output with β = 1.
    fn start<P: BasisProvider>(
        disc: &Discretization<'_, P>,
        linearization: Linearization,
        opts: LsOptions,
        out: &mut SolveOutcome,
    ) -> Result<Self> {
        let semi = linearization == Linearization::SemiImplicit
            && disc
                .problem
                .nonlinear
                .as_ref()
                .is_some_and(|nl| nl.depends_on.iter().any(|&d| d != Deriv::Value));
        let frozen = if semi {
            None
        } else {
            let t0 = Instant::now();
            let sys = disc.system(None)?;
            out.assemble_seconds += t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let ls = factor(&sys, opts)?;
            out.solve_seconds += t1.elapsed().as_secs_f64();
            out.system_rows = sys.nrows();
            out.rank = ls.rank();
            Some((sys, ls))
        };
        let mut state = PicardState {
            frozen,
            opts,
            beta: vec![1.0; disc.layout.width()],
            values: Vec::new(),
        };
        state.beta = state.next(disc, out)?;
        state.values = disc.interior_values(&state.beta);
        out.nonlinear_residual_history.push(norm2(&disc.residuals(&state.beta)));
        Ok(state)
    }

    /// The iterate following `self.beta`.
    fn next<P: BasisProvider>(&mut self, disc: &Discretization<'_, P>, out: &mut SolveOutcome) -> Result<Vec<f64>> {
        let beta = match &mut self.frozen {
            Some((sys, ls)) => {
                let t = Instant::now();
                let rhs = disc.pde_rhs(&disc.frozen_nonlinear(&self.beta));
                let rows = sys.rows_of(RowKind::Pde);
                sys.rhs[rows].copy_from_slice(&rhs);
                let beta = ls.solve(&sys.rhs)?;
                out.ls_residual_history
                    .push(residual_norm(sys.matrix.as_ref(), &beta, &sys.rhs));
                out.solve_seconds += t.elapsed().as_secs_f64();
                beta
            }
            None => {
                let t0 = Instant::now();
                let sys = disc.semi_implicit_system(&self.beta)?;
                out.assemble_seconds += t0.elapsed().as_secs_f64();
                let t1 = Instant::now();
                let ls = factor(&sys, self.opts)?;
                let beta = ls.solve(&sys.rhs)?;
                out.ls_residual_history
                    .push(residual_norm(sys.matrix.as_ref(), &beta, &sys.rhs));
                out.solve_seconds += t1.elapsed().as_secs_f64();
                out.system_rows = sys.nrows();
                out.rank = ls.rank();
                beta
            }
        };
        Ok(beta)
    }

    /// One fixed-point step; returns the sup-norm change of `û`.
    fn step<P: BasisProvider>(&mut self, disc: &Discretization<'_, P>, out: &mut SolveOutcome) -> Result<f64> {
        let beta = self.next(disc, out)?;
        let values = disc.interior_values(&beta);
        let diff = sup_diff(&values, &self.values);
        self.beta = beta;
        self.values = values;
        out.nonlinear_residual_history.push(norm2(&disc.residuals(&self.beta)));
        Ok(diff)
    }
}

fn empty_outcome(method: &str) -> SolveOutcome {
    SolveOutcome {
        beta: Vec::new(),
        method: method.into(),
        iterations: 0,
        warmup_iterations: 0,
        converged: false,
        system_rows: 0,
        rank: 0,
        ls_residual_history: Vec::new(),
        update_history: Vec::new(),
        nonlinear_residual_history: Vec::new(),
        assemble_seconds: 0.0,
        solve_seconds: 0.0,
    }
}

/// Fixed-point iteration on `L û + N(û) = f`; see [`Linearization`].
pub fn solve_picard<P: BasisProvider>(
    disc: &Discretization<'_, P>,
    config: &NonlinearConfig,
    opts: LsOptions,
) -> Result<SolveOutcome> {
    config.validate()?;
    let mut out = empty_outcome("picard");
    let mut state = PicardState::start(disc, config.linearization, opts, &mut out)?;
    let mut best = (f64::INFINITY, state.beta.clone());
    for n in 1..=config.max_iters {
        let diff = state.step(disc, &mut out)?;
        out.update_history.push(diff);
        out.iterations = n;
        if diff < best.0 {
            best = (diff, state.beta.clone());
        }
        if diff <= config.tol {
            out.converged = true;
            break;
        }
    }
    out.beta = if out.converged { state.beta } else { best.1 };
    Ok(out)
}

/// Newton iteration on `β` after `picard_warmup_iters` Picard steps.
pub fn solve_newton<P: BasisProvider>(
    disc: &Discretization<'_, P>,
    config: &NonlinearConfig,
    opts: LsOptions,
) -> Result<SolveOutcome> {
    config.validate()?;
    let mut out = empty_outcome("newton");
    let mut beta = {
        let mut state = PicardState::start(disc, config.linearization, opts, &mut out)?;
        for _ in 0..config.picard_warmup_iters {
            let diff = state.step(disc, &mut out)?;
            out.update_history.push(diff);
            out.warmup_iterations += 1;
            if config.warmup_tol.is_some_and(|t| diff <= t) {
                break;
            }
        }
        state.beta
    };
    let mut best = (f64::INFINITY, beta.clone());
    for n in 1..=config.max_iters {
        let t0 = Instant::now();
        let sys = disc.newton_system(&beta)?;
        out.assemble_seconds += t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let ls = factor(&sys, opts)?;
        let delta = ls.solve(&sys.rhs)?;
        out.ls_residual_history
            .push(residual_norm(sys.matrix.as_ref(), &delta, &sys.rhs));
        out.solve_seconds += t1.elapsed().as_secs_f64();
        out.system_rows = sys.nrows();
        out.rank = ls.rank();
        beta.iter_mut().zip(&delta).for_each(|(b, d)| *b += d);
        let change = disc.interior_values(&delta).iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        out.update_history.push(change);
        out.nonlinear_residual_history.push(norm2(&disc.residuals(&beta)));
        out.iterations = n;
        if change < best.0 {
            best = (change, beta.clone());
        }
        if change <= config.tol {
            out.converged = true;
            break;
        }
    }
    out.beta = if out.converged { beta } else { best.1 };
    Ok(out)
}

/// Dispatches on the problem and nonlinear configuration.
pub fn solve_discretization<P: BasisProvider>(
    disc: &Discretization<'_, P>,
    nonlinear: Option<&NonlinearConfig>,
    opts: LsOptions,
) -> Result<SolveOutcome> {
    match (disc.problem.is_nonlinear(), nonlinear) {
        (false, None) => solve_linear(disc, opts),
        (true, None) => solve_picard(disc, &NonlinearConfig::default(), opts),
        (_, Some(c)) => match c.method {
            Method::Picard => solve_picard(disc, c, opts),
            Method::Newton => solve_newton(disc, c, opts),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub train: f64,
    pub assemble: f64,
    pub solve: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub problem: String,
    pub method: String,
    pub num_subdomains: usize,
    pub subspace_dim: usize,
    pub system_rows: usize,
    pub system_cols: usize,
    pub rank: usize,
    pub norms: Option<ErrorNorms>,
    pub epochs_per_subdomain: Vec<usize>,
    pub epochs_mean: f64,
    pub final_rel_loss_per_subdomain: Vec<f64>,
    pub nonlinear_iters: usize,
    pub picard_warmup_iters: usize,
    pub converged: bool,
    pub ls_residual_history: Vec<f64>,
    pub ls_residual_rms: f64,
    pub update_history: Vec<f64>,
    pub nonlinear_residual_history: Vec<f64>,
    pub interface_jump: f64,
    pub beta: CoefficientVector,
    pub wall_times: WallTimes,
}

/// A finished run: the report plus the evaluation-grid samples.
#[derive(Clone, Debug)]
pub struct Solution {
    pub report: SolveReport,
    pub grid: Vec<Vec<f64>>,
    pub numeric: Vec<f64>,
    pub exact: Option<Vec<f64>>,
    pub training_logs: Vec<Vec<(usize, f64)>>,
}

/// Evaluates `û` on the grid and fills in the report.
pub fn finish(setup: &SolveSetup, prepared: &Prepared<'_>, outcome: SolveOutcome, started: Instant) -> Result<Solution> {
    let disc = &prepared.disc;
    let grid = setup.eval.points(&setup.problem)?;
    let numeric = disc.evaluate(&outcome.beta, &grid)?;
    let exact: Option<Vec<f64>> = setup
        .problem
        .exact
        .as_ref()
        .map(|e| grid.iter().map(|p| (e.value)(p)).collect());
    let norms = exact.as_ref().map(|e| norms_from_values(&numeric, e)).transpose()?;
    let epochs: Vec<usize> = prepared.training.iter().map(|t| t.epochs_used).collect();
    let n = disc.partition.num_subdomains();
    let report = SolveReport {
        problem: setup.problem.name.clone(),
        method: outcome.method.clone(),
        num_subdomains: n,
        subspace_dim: setup.network.subspace_dim,
        system_rows: outcome.system_rows,
        system_cols: disc.layout.width(),
        rank: outcome.rank,
        norms,
        epochs_mean: epochs.iter().sum::<usize>() as f64 / epochs.len().max(1) as f64,
        epochs_per_subdomain: epochs,
        final_rel_loss_per_subdomain: prepared.training.iter().map(|t| t.final_rel_loss).collect(),
        nonlinear_iters: outcome.iterations,
        picard_warmup_iters: outcome.warmup_iterations,
        converged: outcome.converged,
        ls_residual_rms: outcome.ls_residual_rms(),
        interface_jump: disc.interface_jump(&outcome.beta),
        ls_residual_history: outcome.ls_residual_history,
        update_history: outcome.update_history,
        nonlinear_residual_history: outcome.nonlinear_residual_history,
        beta: CoefficientVector::from_flat(n, setup.network.subspace_dim, outcome.beta)?,
        wall_times: WallTimes {
            train: prepared.train_seconds,
            assemble: prepared.assemble_seconds + outcome.assemble_seconds,
            solve: outcome.solve_seconds,
            total: started.elapsed().as_secs_f64(),
        },
    };
    Ok(Solution {
        report,
        grid,
        numeric,
        exact,
        training_logs: prepared.training.iter().map(|t| t.log.clone()).collect(),
    })
}

/// Train, assemble, solve and evaluate.
pub fn run(setup: &SolveSetup) -> Result<Solution> {
    let started = Instant::now();
    let prepared = prepare(setup)?;
    let outcome = solve_discretization(&prepared.disc, setup.nonlinear.as_ref(), setup.ls)?;
    finish(setup, &prepared, outcome, started)
}

/// The system of a single network over the whole domain, built directly
/// from the network without any partition machinery: PDE rows at
/// `interior`, then boundary rows.
pub fn standalone_snn_system(
    problem: &ProblemSpec,
    params: &NetworkParams,
    interior: &[Vec<f64>],
    boundary: &BoundarySample,
) -> Result<(Mat<f64>, Vec<f64>)> {
    let whole = SubdomainSpec {
        index: 0,
        multi_index: vec![0; problem.dim()],
        bounds: problem.domain.axes().iter().map(|a| (a.lower, a.upper)).collect(),
    };
    let m = params.num_basis();
    let bpoints: Vec<(&Vec<f64>, f64)> = boundary
        .sets()
        .flat_map(|s| s.points.iter().map(move |p| (p, problem.data_at(s.kind, p))))
        .collect();
    let rows = interior.len() + bpoints.len();
    let mut a = Mat::<f64>::zeros(rows, m);
    let mut b = vec![0.0; rows];

    let batch = eval_basis_batch(params, &whole, interior, &problem.required_derivs())?;
    for (i, p) in interior.iter().enumerate() {
        for t in &problem.linear {
            let c = t.coefficient.at(p);
            let phi = batch.get(t.derivative)?;
            for j in 0..m {
                a[(i, j)] += c * phi[(i, j)];
            }
        }
        b[i] = (problem.source)(p);
    }
    let pts: Vec<Vec<f64>> = bpoints.iter().map(|(p, _)| (*p).clone()).collect();
    let values = eval_basis_batch(params, &whole, &pts, &DerivSet::value_only())?;
    let phi = values.get(Deriv::Value)?;
    for (r, (_, g)) in bpoints.iter().enumerate() {
        let i = interior.len() + r;
        for j in 0..m {
            a[(i, j)] = phi[(r, j)];
        }
        b[i] = *g;
    }
    Ok((a, b))
}
