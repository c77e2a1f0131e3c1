use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gll_nodes, AxisRole, DomainSpec, InterfaceSpec, PointKind, PointSet, SubdomainSpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    /// Equispaced, endpoints included.
    Uniform,
    /// Gauss–Lobatto–Legendre nodes mapped to the interval.
    Gauss,
    /// Uniform random draws with both endpoints forced.
    Random,
}

impl std::str::FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplingStrategy::Uniform),
            "gauss" => Ok(SamplingStrategy::Gauss),
            "random" => Ok(SamplingStrategy::Random),
            other => Err(Error::config("sampling.strategy", format!("unknown strategy `{other}`"))),
        }
    }
}

const INTERIOR_TAG: u64 = 0x1f3a_5c7e_9b2d_4f60;
const BOUNDARY_TAG: u64 = 0x2e4b_6d8f_a1c3_e5f7;
const INTERFACE_TAG: u64 = 0x3d5c_7e9f_b2d4_f618;

fn rng_for(seed: u64, tag: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag);
    rng.set_stream(stream);
    rng
}

/// One-dimensional rule with `n >= 2` nodes on `[lower, upper]`, ascending,
/// whose first and last nodes are exactly `lower` and `upper`.
pub fn axis_rule(
    lower: f64,
    upper: f64,
    n: usize,
    strategy: SamplingStrategy,
    rng: &mut impl Rng,
) -> Vec<f64> {
    assert!(n >= 2);
    let width = upper - lower;
    let mut nodes: Vec<f64> = match strategy {
        SamplingStrategy::Uniform => (0..n)
            .map(|i| lower + width * i as f64 / (n - 1) as f64)
            .collect(),
        SamplingStrategy::Gauss => gll_nodes(n)
            .into_iter()
            .map(|z| lower + 0.5 * (z + 1.0) * width)
            .collect(),
        SamplingStrategy::Random => {
            let mut inner: Vec<f64> = (0..n - 2)
                .map(|_| lower + width * rng.random::<f64>())
                .collect();
            inner.sort_by(f64::total_cmp);
            let mut nodes = Vec::with_capacity(n);
            nodes.push(lower);
            nodes.extend(inner);
            nodes.push(upper);
            nodes
        }
    };
    nodes[0] = lower;
    nodes[n - 1] = upper;
    nodes
}

/// Tensor product of per-axis rules; axis 0 varies fastest.
fn tensor_grid(rules: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = rules.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let point = rules
            .iter()
            .map(|rule| {
                let x = rule[rem % rule.len()];
                rem /= rule.len();
                x
            })
            .collect();
        out.push(point);
    }
    out
}

fn check_counts(counts: &[usize]) -> Result<()> {
    match counts.iter().position(|&c| c < 2) {
        Some(axis) => Err(Error::TooFewSamples {
            axis,
            count: counts[axis],
        }),
        None => Ok(()),
    }
}

/// Tensor-product collocation grid on one subdomain.
pub fn sample_interior(
    subdomain: &SubdomainSpec,
    strategy: SamplingStrategy,
    counts_per_axis: &[usize],
    seed: u64,
) -> Result<PointSet> {
    if counts_per_axis.len() != subdomain.dim() {
        return Err(Error::DimensionMismatch {
            context: "interior sample counts",
            expected: subdomain.dim(),
            found: counts_per_axis.len(),
        });
    }
    check_counts(counts_per_axis)?;
    let mut rng = rng_for(seed, INTERIOR_TAG, subdomain.index as u64);
    let rules: Vec<Vec<f64>> = subdomain
        .bounds
        .iter()
        .zip(counts_per_axis)
        .map(|(&(a, b), &n)| axis_rule(a, b, n, strategy, &mut rng))
        .collect();
    let mut set = PointSet::new(PointKind::Interior);
    for p in tensor_grid(&rules) {
        set.push(p, subdomain.index);
    }
    Ok(set)
}

/// Points on the domain boundary, grouped by kind.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySample {
    /// Points on spatial boundary facets (and on every facet of a purely
    /// spatial domain).
    pub spatial: PointSet,
    /// Points on the `t = lower` facet when the domain has a temporal axis.
    pub initial: Option<PointSet>,
}

impl BoundarySample {
    pub fn len(&self) -> usize {
        self.spatial.len() + self.initial.as_ref().map_or(0, PointSet::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sets(&self) -> impl Iterator<Item = &PointSet> {
        std::iter::once(&self.spatial).chain(self.initial.iter())
    }
}

fn point_key(p: &[f64]) -> Vec<u64> {
    // Adding 0.0 folds -0.0 onto +0.0.
    p.iter().map(|&x| (x + 0.0).to_bits()).collect()
}

/// Samples every boundary facet of every subdomain that lies on the domain
/// boundary. For a temporal axis only the lower (initial) facet is sampled.
///
/// `counts_per_axis` gives the rule size along each axis; a facet normal to
/// axis `s` uses the counts of the remaining axes. Points shared by several
/// subdomain facets are kept once, owned by the lowest subdomain id.
pub fn sample_boundary(
    domain: &DomainSpec,
    subdomains: &[SubdomainSpec],
    counts_per_axis: &[usize],
    strategy: SamplingStrategy,
    seed: u64,
) -> Result<BoundarySample> {
    let dim = domain.dim();
    if counts_per_axis.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "boundary sample counts",
            expected: dim,
            found: counts_per_axis.len(),
        });
    }
    let tangential: Vec<usize> = counts_per_axis.to_vec();
    if dim > 1 {
        check_counts(&tangential)?;
    }

    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut spatial = PointSet::new(PointKind::Boundary);
    let mut initial = domain.temporal_axis().map(|_| PointSet::new(PointKind::Initial));

    // Spatial facets first, then the initial facet, each in subdomain order.
    for pass_initial in [false, true] {
        for sub in subdomains {
            for (axis, spec) in domain.axes().iter().enumerate() {
                let temporal = spec.role == AxisRole::Temporal;
                if temporal != pass_initial {
                    continue;
                }
                for upper_side in [false, true] {
                    if temporal && upper_side {
                        continue;
                    }
                    let (lo, hi) = sub.bounds[axis];
                    let on_boundary = if upper_side {
                        hi == spec.upper
                    } else {
                        lo == spec.lower
                    };
                    if !on_boundary {
                        continue;
                    }
                    let facet_id = (sub.index * dim + axis) * 2 + usize::from(upper_side);
                    let mut rng = rng_for(seed, BOUNDARY_TAG, facet_id as u64);
                    let rules: Vec<Vec<f64>> = (0..dim)
                        .map(|r| {
                            if r == axis {
                                vec![if upper_side { hi } else { lo }]
                            } else {
                                let (a, b) = sub.bounds[r];
                                axis_rule(a, b, tangential[r], strategy, &mut rng)
                            }
                        })
                        .collect();
                    let target = if temporal {
                        initial.as_mut().expect("temporal axis implies initial set")
                    } else {
                        &mut spatial
                    };
                    for p in tensor_grid(&rules) {
                        if seen.insert(point_key(&p)) {
                            target.push(p, sub.index);
                        }
                    }
                }
            }
        }
    }
    Ok(BoundarySample { spatial, initial })
}

/// Points on a shared facet. `counts` has one entry per tangential axis
/// (empty for one-dimensional domains, whose facets are single points).
pub fn sample_interface(
    interface: &InterfaceSpec,
    counts: &[usize],
    strategy: SamplingStrategy,
    seed: u64,
) -> Result<PointSet> {
    let dim = interface.facet_bounds.len();
    if counts.len() + 1 != dim {
        return Err(Error::DimensionMismatch {
            context: "interface sample counts",
            expected: dim - 1,
            found: counts.len(),
        });
    }
    check_counts(counts)?;
    let stream = ((interface.left as u64) << 32) | interface.right as u64;
    let mut rng = rng_for(seed, INTERFACE_TAG, stream);
    let mut tangential = counts.iter();
    let rules: Vec<Vec<f64>> = interface
        .facet_bounds
        .iter()
        .enumerate()
        .map(|(axis, &(a, b))| {
            if axis == interface.axis {
                vec![a]
            } else {
                let n = *tangential.next().expect("counts checked");
                axis_rule(a, b, n, strategy, &mut rng)
            }
        })
        .collect();
    let mut set = PointSet::new(PointKind::Interface);
    for p in tensor_grid(&rules) {
        set.push(p, interface.left);
    }
    Ok(set)
}
