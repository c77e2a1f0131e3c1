//! Per-subdomain subspace networks and their basis functions.
//!
//! A network maps a point of its subdomain through the normalization
//! `z = 2 (x - a) / (b - a) - 1`, a stack of tanh hidden layers, and a final
//! subspace layer whose `M` outputs are the basis functions. Input
//! derivatives of the basis functions are propagated exactly alongside the
//! forward pass.

pub(crate) mod forward;
mod monomial;

pub use monomial::MonomialBasis;

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::deriv::{Deriv, DerivSet, Jet};
use crate::domain::{SubdomainSpec, POINT_TOL};
use crate::error::{Error, Result};
use forward::{forward, input_channels, ChannelPlan};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceActivation {
    #[default]
    Tanh,
    /// Plain affine map with no activation.
    Affine,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Glorot-uniform weights, biases in ±1/sqrt(fan_in).
    #[default]
    Glorot,
    /// Weights and biases in ±1/sqrt(fan_in). A 1- or 2-wide input layer
    /// then has slopes of order one instead of Glorot's ~0.24, giving
    /// sharper features (needed for thin layers).
    FanIn,
    /// Every weight and bias drawn from U(-R_m, R_m).
    UniformRange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub subspace_dim: usize,
    pub output_dim: usize,
    pub subspace_activation: SubspaceActivation,
    pub init_range: f64,
}

impl NetworkConfig {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>, subspace_dim: usize) -> Self {
        NetworkConfig {
            input_dim,
            hidden_widths,
            subspace_dim,
            output_dim: 1,
            subspace_activation: SubspaceActivation::Tanh,
            init_range: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("network.input_dim", "must be at least 1"));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::config("network.hidden", "every width must be at least 1"));
        }
        if self.subspace_dim == 0 {
            return Err(Error::config("network.subspace_dim", "must be at least 1"));
        }
        if self.output_dim == 0 {
            return Err(Error::config("network.output_dim", "must be at least 1"));
        }
        if !(self.init_range >= 0.0 && self.init_range.is_finite()) {
            return Err(Error::config("network.init_range", "must be finite and non-negative"));
        }
        Ok(())
    }

    /// (fan_out, fan_in) of every layer, the subspace layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        widths.extend(&self.hidden_widths);
        widths.push(self.subspace_dim);
        widths.windows(2).map(|w| (w[1], w[0])).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `fan_out x fan_in`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(fan_out: usize, fan_in: usize) -> Self {
        DenseLayer {
            weights: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }
}

/// Weights and biases of one subdomain network; the last layer is the
/// subspace layer.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<DenseLayer>,
    pub subspace_activation: SubspaceActivation,
}

impl NetworkParams {
    pub fn zeros(config: &NetworkConfig) -> Self {
        NetworkParams {
            layers: config
                .layer_shapes()
                .into_iter()
                .map(|(o, i)| DenseLayer::zeros(o, i))
                .collect(),
            subspace_activation: config.subspace_activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn num_basis(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.nrows())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All entries, layer by layer: weights row-major, then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut it = flat.iter();
        for l in &mut self.layers {
            for (w, v) in l.weights.iter_mut().zip(&mut it) {
                *w = *v;
            }
            for (b, v) in l.bias.iter_mut().zip(&mut it) {
                *b = *v;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ParamsDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ParamsDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// Portable JSON layout: layer-major, row-major weights.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    subspace_activation: SubspaceActivation,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl From<&NetworkParams> for ParamsDoc {
    fn from(p: &NetworkParams) -> Self {
        ParamsDoc {
            subspace_activation: p.subspace_activation,
            layers: p
                .layers
                .iter()
                .map(|l| LayerDoc {
                    rows: l.weights.nrows(),
                    cols: l.weights.ncols(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ParamsDoc> for NetworkParams {
    type Error = Error;

    fn try_from(doc: ParamsDoc) -> Result<Self> {
        if doc.layers.is_empty() {
            return Err(Error::ShapeMismatch {
                context: "network params",
                expected: "at least one layer".into(),
                found: "none".into(),
            });
        }
        let mut layers = Vec::with_capacity(doc.layers.len());
        let mut prev_out: Option<usize> = None;
        for l in doc.layers {
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows || prev_out.is_some_and(|p| p != l.cols) {
                return Err(Error::ShapeMismatch {
                    context: "network params",
                    expected: format!("{}x{} weights chained to the previous layer", l.rows, l.cols),
                    found: format!("{} weights, {} biases", l.weights.len(), l.bias.len()),
                });
            }
            prev_out = Some(l.rows);
            let weights = Array2::from_shape_vec((l.rows, l.cols), l.weights).expect("length checked");
            layers.push(DenseLayer {
                weights,
                bias: Array1::from(l.bias),
            });
        }
        let params = NetworkParams {
            layers,
            subspace_activation: doc.subspace_activation,
        };
        if !params.is_finite() {
            return Err(Error::NonFinite("network params"));
        }
        Ok(params)
    }
}

/// Draws network parameters. Deterministic in `(seed, stream)`; the solver
/// uses the subdomain index as the stream.
pub fn init_params(config: &NetworkConfig, mode: InitMode, seed: u64, stream: u64) -> Result<NetworkParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut params = NetworkParams::zeros(config);
    for layer in &mut params.layers {
        let (fan_out, fan_in) = layer.weights.dim();
        let (w_bound, b_bound) = match mode {
            InitMode::FanIn => {
                let bound = 1.0 / (fan_in as f64).sqrt();
                (bound, bound)
            }
            InitMode::Glorot => (
                (6.0 / (fan_in + fan_out) as f64).sqrt(),
                1.0 / (fan_in as f64).sqrt(),
            ),
            InitMode::UniformRange => (config.init_range, config.init_range),
        };
        fill_uniform(layer.weights.iter_mut(), w_bound, &mut rng);
        fill_uniform(layer.bias.iter_mut(), b_bound, &mut rng);
    }
    Ok(params)
}

fn fill_uniform<'a>(slots: impl Iterator<Item = &'a mut f64>, bound: f64, rng: &mut impl Rng) {
    for v in slots {
        *v = if bound > 0.0 {
            rng.random_range(-bound..=bound)
        } else {
            0.0
        };
    }
}

/// Maps `point` into `[-1, 1]^d`; also returns the chain factors
/// `2 / (b_s - a_s)`.
pub fn normalize(point: &[f64], subdomain: &SubdomainSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if point.len() != subdomain.dim() {
        return Err(Error::DimensionMismatch {
            context: "normalize",
            expected: subdomain.dim(),
            found: point.len(),
        });
    }
    let mut z = Vec::with_capacity(point.len());
    let mut chain = Vec::with_capacity(point.len());
    for (axis, (&x, &(a, b))) in point.iter().zip(&subdomain.bounds).enumerate() {
        let width = b - a;
        if width == 0.0 {
            return Err(Error::ZeroWidth { axis });
        }
        if x < a - POINT_TOL || x > b + POINT_TOL {
            return Err(Error::PointOutside {
                subdomain: subdomain.index,
                point: point.to_vec(),
            });
        }
        let c = 2.0 / width;
        z.push((c * (x - a) - 1.0).clamp(-1.0, 1.0));
        chain.push(c);
    }
    Ok((z, chain))
}

/// Basis values and derivatives at a batch of points: one `n x M` matrix per
/// requested derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisBatch {
    pub num_points: usize,
    pub num_basis: usize,
    channels: BTreeMap<Deriv, Array2<f64>>,
}

impl BasisBatch {
    pub fn new(num_points: usize, num_basis: usize) -> Self {
        BasisBatch {
            num_points,
            num_basis,
            channels: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, d: Deriv, values: Array2<f64>) {
        assert_eq!(values.dim(), (self.num_points, self.num_basis));
        self.channels.insert(d, values);
    }

    pub fn get(&self, d: Deriv) -> Result<&Array2<f64>> {
        self.channels.get(&d).ok_or(Error::MissingDerivative(d))
    }

    pub fn derivs(&self) -> impl Iterator<Item = Deriv> + '_ {
        self.channels.keys().copied()
    }

    /// Evaluation at the `i`-th point.
    pub fn point(&self, i: usize) -> BasisEval {
        BasisEval {
            entries: self
                .channels
                .iter()
                .map(|(&d, m)| (d, m.row(i).to_owned()))
                .collect(),
        }
    }

    /// `û` and its requested derivatives at every point for coefficients
    /// `beta` (length M).
    pub fn contract(&self, beta: ArrayView1<f64>) -> BTreeMap<Deriv, Array1<f64>> {
        self.channels.iter().map(|(&d, m)| (d, m.dot(&beta))).collect()
    }
}

/// Basis values `φ_j` and requested derivatives at a single point.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisEval {
    entries: BTreeMap<Deriv, Array1<f64>>,
}

impl BasisEval {
    pub fn from_entries(entries: impl IntoIterator<Item = (Deriv, Array1<f64>)>) -> Self {
        BasisEval {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn num_basis(&self) -> usize {
        self.entries.values().next().map_or(0, |v| v.len())
    }

    pub fn get(&self, d: Deriv) -> Result<ArrayView1<'_, f64>> {
        self.entries
            .get(&d)
            .map(|v| v.view())
            .ok_or(Error::MissingDerivative(d))
    }

    pub fn values(&self) -> Result<ArrayView1<'_, f64>> {
        self.get(Deriv::Value)
    }

    /// `∂φ_j/∂x_axis` for every basis function.
    pub fn first(&self, axis: usize) -> Result<ArrayView1<'_, f64>> {
        self.get(Deriv::First(axis))
    }

    /// `∂²φ_j/∂x_axis²` for every basis function.
    pub fn second(&self, axis: usize) -> Result<ArrayView1<'_, f64>> {
        self.get(Deriv::Second(axis, axis))
    }

    pub fn derivs(&self) -> impl Iterator<Item = Deriv> + '_ {
        self.entries.keys().copied()
    }
}

/// Anything that can evaluate a set of basis functions on a subdomain.
pub trait BasisProvider: Send + Sync {
    fn num_basis(&self) -> usize;

    fn eval_batch(&self, points: &[Vec<f64>], request: &DerivSet) -> Result<BasisBatch>;
}

/// A trained (or randomly initialized) subspace network bound to its
/// subdomain.
#[derive(Clone, Debug)]
pub struct NeuralBasis {
    pub params: NetworkParams,
    pub subdomain: SubdomainSpec,
}

impl NeuralBasis {
    pub fn new(params: NetworkParams, subdomain: SubdomainSpec) -> Self {
        NeuralBasis { params, subdomain }
    }
}

impl BasisProvider for NeuralBasis {
    fn num_basis(&self) -> usize {
        self.params.num_basis()
    }

    fn eval_batch(&self, points: &[Vec<f64>], request: &DerivSet) -> Result<BasisBatch> {
        eval_basis_batch(&self.params, &self.subdomain, points, request)
    }
}

/// Normalized coordinates of a batch (rows = points) and the chain factors.
pub(crate) fn normalize_batch(
    points: &[Vec<f64>],
    subdomain: &SubdomainSpec,
) -> Result<(Array2<f64>, Vec<f64>)> {
    let d = subdomain.dim();
    let mut z = Array2::zeros((points.len(), d));
    let mut chain = vec![0.0; d];
    for (i, p) in points.iter().enumerate() {
        let (zi, ci) = normalize(p, subdomain)?;
        z.row_mut(i).assign(&ArrayView1::from(&zi));
        chain = ci;
    }
    if points.is_empty() {
        for (axis, &(a, b)) in subdomain.bounds.iter().enumerate() {
            if b == a {
                return Err(Error::ZeroWidth { axis });
            }
            chain[axis] = 2.0 / (b - a);
        }
    }
    Ok((z, chain))
}

/// Evaluates all basis functions and the requested input derivatives at a
/// batch of points.
pub fn eval_basis_batch(
    params: &NetworkParams,
    subdomain: &SubdomainSpec,
    points: &[Vec<f64>],
    request: &DerivSet,
) -> Result<BasisBatch> {
    if params.input_dim() != subdomain.dim() {
        return Err(Error::DimensionMismatch {
            context: "network input",
            expected: subdomain.dim(),
            found: params.input_dim(),
        });
    }
    if let Some(axis) = request.max_axis().filter(|&a| a >= subdomain.dim()) {
        return Err(Error::UnsupportedDerivative(format!("axis {axis} out of range")));
    }
    let (z, chain) = normalize_batch(points, subdomain)?;
    let plan = ChannelPlan::new(request);
    let (out, _) = forward(params, input_channels(z, &chain, &plan), &plan, false);

    let mut batch = BasisBatch::new(points.len(), params.num_basis());
    for d in request.iter() {
        let m = match d {
            Deriv::Value => out.value.clone(),
            Deriv::First(a) => {
                let k = plan.first_axes.iter().position(|&x| x == a).expect("planned");
                out.first[k].clone()
            }
            Deriv::Second(a, b) => {
                let k = plan
                    .second_pairs
                    .iter()
                    .position(|&p| p == (a, b))
                    .expect("planned");
                out.second[k].clone()
            }
        };
        batch.insert(d, m);
    }
    Ok(batch)
}

/// Single-point evaluation.
pub fn eval_basis(
    params: &NetworkParams,
    subdomain: &SubdomainSpec,
    point: &[f64],
    request: &DerivSet,
) -> Result<BasisEval> {
    Ok(eval_basis_batch(params, subdomain, &[point.to_vec()], request)?.point(0))
}

/// `û = βᵀφ` and its derivatives, one jet per output component.
/// `beta_block` is `M x s`.
pub fn eval_solution(basis: &BasisEval, beta_block: ArrayView2<f64>) -> Result<Vec<Jet>> {
    if beta_block.nrows() != basis.num_basis() {
        return Err(Error::ShapeMismatch {
            context: "eval_solution",
            expected: format!("{} coefficient rows", basis.num_basis()),
            found: format!("{}", beta_block.nrows()),
        });
    }
    Ok(beta_block
        .columns()
        .into_iter()
        .map(|beta| Jet::from_pairs(basis.entries.iter().map(|(&d, phi)| (d, phi.dot(&beta)))))
        .collect())
}

/// Stacked per-subdomain coefficient blocks `β^k`, each `M x s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub num_subdomains: usize,
    pub subspace_dim: usize,
    pub output_dim: usize,
    pub data: Vec<f64>,
}

impl CoefficientVector {
    pub fn zeros(num_subdomains: usize, subspace_dim: usize, output_dim: usize) -> Self {
        CoefficientVector {
            num_subdomains,
            subspace_dim,
            output_dim,
            data: vec![0.0; num_subdomains * subspace_dim * output_dim],
        }
    }

    pub fn from_flat(num_subdomains: usize, subspace_dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != num_subdomains * subspace_dim {
            return Err(Error::ShapeMismatch {
                context: "coefficient vector",
                expected: format!("{}", num_subdomains * subspace_dim),
                found: format!("{}", data.len()),
            });
        }
        Ok(CoefficientVector {
            num_subdomains,
            subspace_dim,
            output_dim: 1,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block_len(&self) -> usize {
        self.subspace_dim * self.output_dim
    }

    pub fn block(&self, k: usize) -> ArrayView2<'_, f64> {
        let n = self.block_len();
        ArrayView2::from_shape((self.subspace_dim, self.output_dim), &self.data[k * n..(k + 1) * n])
            .expect("block shape")
    }

    /// First output component of block `k`.
    pub fn block_column(&self, k: usize) -> ArrayView1<'_, f64> {
        self.block(k).index_axis_move(ndarray::Axis(1), 0)
    }
}

#[cfg(test)]
mod tests;
