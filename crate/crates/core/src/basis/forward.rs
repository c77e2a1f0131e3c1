//! Batched forward pass that carries first and second input derivatives
//! through every layer alongside the activations.

use ndarray::{Array1, Array2, Axis, Zip};

use super::{DenseLayer, NetworkParams, SubspaceActivation};
use crate::deriv::DerivSet;

/// Which derivative channels are propagated.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ChannelPlan {
    pub first_axes: Vec<usize>,
    pub second_pairs: Vec<(usize, usize)>,
    /// For each second pair, the positions of its two axes in `first_axes`.
    pub pair_slots: Vec<(usize, usize)>,
}

impl ChannelPlan {
    pub fn new(request: &DerivSet) -> Self {
        let first_axes = request.first_axes();
        let second_pairs = request.second_pairs();
        let slot = |a: usize| first_axes.iter().position(|&x| x == a).expect("closed set");
        let pair_slots = second_pairs.iter().map(|&(a, b)| (slot(a), slot(b))).collect();
        ChannelPlan {
            first_axes,
            second_pairs,
            pair_slots,
        }
    }
}

/// Activations and their input derivatives for a batch of points
/// (rows = points, columns = units).
#[derive(Clone, Debug)]
pub(crate) struct Channels {
    pub value: Array2<f64>,
    pub first: Vec<Array2<f64>>,
    pub second: Vec<Array2<f64>>,
}

/// What a layer needs to remember for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct LayerCache {
    pub input: Channels,
    pub pre_first: Vec<Array2<f64>>,
    pub pre_second: Vec<Array2<f64>>,
    /// tanh of the pre-activation; `None` for an affine layer.
    pub activated: Option<Array2<f64>>,
}

/// Input channels for normalized coordinates `z` (rows = points) with the
/// per-axis chain factors of the normalization map.
pub(crate) fn input_channels(z: Array2<f64>, chain: &[f64], plan: &ChannelPlan) -> Channels {
    let (n, d) = z.dim();
    let first = plan
        .first_axes
        .iter()
        .map(|&axis| {
            let mut m = Array2::zeros((n, d));
            m.column_mut(axis).fill(chain[axis]);
            m
        })
        .collect();
    let second = plan
        .second_pairs
        .iter()
        .map(|_| Array2::zeros((n, d)))
        .collect();
    Channels {
        value: z,
        first,
        second,
    }
}

fn affine(layer: &DenseLayer, x: &Array2<f64>, with_bias: bool) -> Array2<f64> {
    let mut out = x.dot(&layer.weights.t());
    if with_bias {
        out += &layer.bias;
    }
    out
}

fn layer_forward(
    layer: &DenseLayer,
    input: &Channels,
    activate: bool,
    plan: &ChannelPlan,
) -> (Channels, Option<Array2<f64>>, Vec<Array2<f64>>, Vec<Array2<f64>>) {
    let pre = affine(layer, &input.value, true);
    let pre_first: Vec<Array2<f64>> = input.first.iter().map(|c| affine(layer, c, false)).collect();
    let pre_second: Vec<Array2<f64>> = input.second.iter().map(|c| affine(layer, c, false)).collect();

    if !activate {
        let out = Channels {
            value: pre,
            first: pre_first.clone(),
            second: pre_second.clone(),
        };
        return (out, None, pre_first, pre_second);
    }

    let h = pre.mapv(f64::tanh);
    // sigma' = 1 - h^2, sigma'' = -2 h sigma'
    let d1 = h.mapv(|v| 1.0 - v * v);
    let d2 = Zip::from(&h).and(&d1).map_collect(|&v, &p| -2.0 * v * p);

    let first: Vec<Array2<f64>> = pre_first.iter().map(|a| &d1 * a).collect();
    let second: Vec<Array2<f64>> = plan
        .pair_slots
        .iter()
        .zip(&pre_second)
        .map(|(&(i, j), a2)| {
            let mut y = &d1 * a2;
            Zip::from(&mut y)
                .and(&d2)
                .and(&pre_first[i])
                .and(&pre_first[j])
                .for_each(|y, &q, &ai, &aj| *y += q * ai * aj);
            y
        })
        .collect();
    let out = Channels {
        value: h.clone(),
        first,
        second,
    };
    (out, Some(h), pre_first, pre_second)
}

/// Runs the network on prepared input channels. Returns the subspace-layer
/// channels and, when `keep_cache` is set, one cache entry per layer.
pub(crate) fn forward(
    params: &NetworkParams,
    input: Channels,
    plan: &ChannelPlan,
    keep_cache: bool,
) -> (Channels, Vec<LayerCache>) {
    let mut caches = Vec::new();
    let mut current = input;
    let last = params.layers.len() - 1;
    for (l, layer) in params.layers.iter().enumerate() {
        let activate = l < last || params.subspace_activation == SubspaceActivation::Tanh;
        let (next, activated, pre_first, pre_second) = layer_forward(layer, &current, activate, plan);
        if keep_cache {
            caches.push(LayerCache {
                input: current,
                pre_first,
                pre_second,
                activated,
            });
        }
        current = next;
    }
    (current, caches)
}

/// Gradient of a scalar objective with respect to one layer's parameters and
/// its input channels, given gradients with respect to its output channels.
pub(crate) struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub input: Channels,
}

pub(crate) fn layer_backward(
    layer: &DenseLayer,
    cache: &LayerCache,
    upstream: Channels,
    plan: &ChannelPlan,
    need_input_grad: bool,
) -> LayerGrad {
    let Channels {
        value: g,
        first: g1,
        second: g2,
    } = upstream;

    // Gradients with respect to the pre-activation channels.
    let (d_pre, d_first, d_second) = match &cache.activated {
        None => (g, g1, g2),
        Some(h) => {
            let p = h.mapv(|v| 1.0 - v * v);
            let q = Zip::from(h).and(&p).map_collect(|&v, &p| -2.0 * v * p);
            // d sigma'' / da = -2 p^2 + 4 h^2 p
            let q_prime = Zip::from(h).and(&p).map_collect(|&v, &p| -2.0 * p * p + 4.0 * v * v * p);

            let mut d_pre = &g * &p;
            for (gs, a_s) in g1.iter().zip(&cache.pre_first) {
                Zip::from(&mut d_pre)
                    .and(gs)
                    .and(a_s)
                    .and(&q)
                    .for_each(|d, &g, &a, &q| *d += g * a * q);
            }
            let mut d_first: Vec<Array2<f64>> = g1.iter().map(|gs| gs * &p).collect();
            for ((&(i, j), g2p), a2) in plan.pair_slots.iter().zip(&g2).zip(&cache.pre_second) {
                let ai = &cache.pre_first[i];
                let aj = &cache.pre_first[j];
                Zip::from(&mut d_pre)
                    .and(g2p)
                    .and(&q_prime)
                    .and(ai)
                    .and(aj)
                    .for_each(|d, &g, &qp, &ai, &aj| *d += g * qp * ai * aj);
                Zip::from(&mut d_pre)
                    .and(g2p)
                    .and(&q)
                    .and(a2)
                    .for_each(|d, &g, &q, &a2| *d += g * q * a2);
                Zip::from(&mut d_first[i])
                    .and(g2p)
                    .and(&q)
                    .and(aj)
                    .for_each(|d, &g, &q, &aj| *d += g * q * aj);
                Zip::from(&mut d_first[j])
                    .and(g2p)
                    .and(&q)
                    .and(ai)
                    .for_each(|d, &g, &q, &ai| *d += g * q * ai);
            }
            let d_second: Vec<Array2<f64>> = g2.iter().map(|g| g * &p).collect();
            (d_pre, d_first, d_second)
        }
    };

    let input = &cache.input;
    let mut weights = d_pre.t().dot(&input.value);
    for (d, z) in d_first.iter().zip(&input.first) {
        weights += &d.t().dot(z);
    }
    for (d, z) in d_second.iter().zip(&input.second) {
        weights += &d.t().dot(z);
    }
    let bias = d_pre.sum_axis(Axis(0));

    let input_grad = if need_input_grad {
        Channels {
            value: d_pre.dot(&layer.weights),
            first: d_first.iter().map(|d| d.dot(&layer.weights)).collect(),
            second: d_second.iter().map(|d| d.dot(&layer.weights)).collect(),
        }
    } else {
        Channels {
            value: Array2::zeros((0, 0)),
            first: Vec::new(),
            second: Vec::new(),
        }
    };
    LayerGrad {
        weights,
        bias,
        input: input_grad,
    }
}
