//! Hyper-rectangular domains, Cartesian partitions into subdomains, the
//! interfaces between neighbouring subdomains, and collocation point sets.

mod gll;
mod sampling;

pub use gll::gll_nodes;
pub use sampling::{axis_rule, sample_boundary, sample_interface, sample_interior, BoundarySample, SamplingStrategy};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for membership tests of points on cells and facets.
pub const POINT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisRole {
    Spatial,
    Temporal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub role: AxisRole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    axes: Vec<Axis>,
}

impl DomainSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidDomain("domain needs at least one axis".into()));
        }
        for (i, axis) in axes.iter().enumerate() {
            if !(axis.lower.is_finite() && axis.upper.is_finite() && axis.lower < axis.upper) {
                return Err(Error::InvalidDomain(format!(
                    "axis {i} has bounds [{}, {}]",
                    axis.lower, axis.upper
                )));
            }
        }
        if axes.iter().filter(|a| a.role == AxisRole::Temporal).count() > 1 {
            return Err(Error::InvalidDomain("at most one temporal axis".into()));
        }
        Ok(DomainSpec { axes })
    }

    /// Purely spatial box from `(lower, upper)` pairs.
    pub fn spatial(bounds: &[(f64, f64)]) -> Result<Self> {
        DomainSpec::new(
            bounds
                .iter()
                .map(|&(lower, upper)| Axis {
                    lower,
                    upper,
                    role: AxisRole::Spatial,
                })
                .collect(),
        )
    }

    /// Spatial box with one trailing temporal axis `[t0, t1]`.
    pub fn space_time(space: &[(f64, f64)], time: (f64, f64)) -> Result<Self> {
        let mut axes: Vec<Axis> = space
            .iter()
            .map(|&(lower, upper)| Axis {
                lower,
                upper,
                role: AxisRole::Spatial,
            })
            .collect();
        axes.push(Axis {
            lower: time.0,
            upper: time.1,
            role: AxisRole::Temporal,
        });
        DomainSpec::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn temporal_axis(&self) -> Option<usize> {
        self.axes.iter().position(|a| a.role == AxisRole::Temporal)
    }

    pub fn measure(&self) -> f64 {
        self.axes.iter().map(|a| a.upper - a.lower).product()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && self
                .axes
                .iter()
                .zip(point)
                .all(|(a, &x)| x >= a.lower - POINT_TOL && x <= a.upper + POINT_TOL)
    }
}

/// Number of cells along each axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub counts: Vec<usize>,
    /// Continuity order imposed across interfaces normal to each axis.
    /// Empty means C^0 on every axis.
    #[serde(default)]
    pub continuity: Vec<usize>,
}

impl PartitionSpec {
    pub fn new(counts: Vec<usize>) -> Self {
        PartitionSpec {
            counts,
            continuity: Vec::new(),
        }
    }

    pub fn with_continuity(mut self, orders: Vec<usize>) -> Self {
        self.continuity = orders;
        self
    }

    pub fn num_subdomains(&self) -> usize {
        self.counts.iter().product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubdomainSpec {
    pub index: usize,
    pub multi_index: Vec<usize>,
    pub bounds: Vec<(f64, f64)>,
}

impl SubdomainSpec {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn measure(&self) -> f64 {
        self.bounds.iter().map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && self
                .bounds
                .iter()
                .zip(point)
                .all(|(&(a, b), &x)| x >= a - POINT_TOL && x <= b + POINT_TOL)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    /// Subdomain on the lower side of the facet.
    pub left: usize,
    /// Subdomain on the upper side of the facet.
    pub right: usize,
    /// Axis normal to the facet.
    pub axis: usize,
    /// Facet extent; degenerate (`lo == hi`) on `axis`.
    pub facet_bounds: Vec<(f64, f64)>,
    pub continuity_order: usize,
}

impl InterfaceSpec {
    pub fn position(&self) -> f64 {
        self.facet_bounds[self.axis].0
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.facet_bounds.len()
            && self
                .facet_bounds
                .iter()
                .zip(point)
                .all(|(&(a, b), &x)| x >= a - POINT_TOL && x <= b + POINT_TOL)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Interior,
    Boundary,
    Initial,
    Interface,
}

/// Collocation points of one kind, each tagged with an owning subdomain.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    pub kind: PointKind,
    pub points: Vec<Vec<f64>>,
    pub owners: Vec<usize>,
}

impl PointSet {
    pub fn new(kind: PointKind) -> Self {
        PointSet {
            kind,
            points: Vec::new(),
            owners: Vec::new(),
        }
    }

    pub fn push(&mut self, point: Vec<f64>, owner: usize) {
        self.points.push(point);
        self.owners.push(owner);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of the points owned by `subdomain`, in order.
    pub fn owned_by(&self, subdomain: usize) -> Vec<usize> {
        self.owners
            .iter()
            .enumerate()
            .filter_map(|(i, &o)| (o == subdomain).then_some(i))
            .collect()
    }
}

/// Result of partitioning a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub domain: DomainSpec,
    pub counts: Vec<usize>,
    pub subdomains: Vec<SubdomainSpec>,
    pub interfaces: Vec<InterfaceSpec>,
}

impl Partition {
    pub fn num_subdomains(&self) -> usize {
        self.subdomains.len()
    }

    /// Cell containing `point`; on shared facets the lowest id wins.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        self.subdomains
            .iter()
            .find(|s| s.contains(point))
            .map(|s| s.index)
    }
}

/// Cell edge `i` of `n` on `[lower, upper]`; the last edge is exactly `upper`
/// so neighbouring cells share bit-identical bounds.
fn cell_edge(lower: f64, upper: f64, i: usize, n: usize) -> f64 {
    if i == n {
        upper
    } else {
        lower + (upper - lower) * i as f64 / n as f64
    }
}

fn linear_index(multi: &[usize], counts: &[usize]) -> usize {
    // Axis 0 varies fastest.
    multi
        .iter()
        .zip(counts)
        .rev()
        .fold(0, |acc, (&m, &n)| acc * n + m)
}

/// Splits `domain` into a Cartesian grid of `spec.counts` cells and lists one
/// interface per pair of face-adjacent cells.
pub fn partition(domain: &DomainSpec, spec: &PartitionSpec) -> Result<Partition> {
    let dim = domain.dim();
    if spec.counts.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "partition counts",
            expected: dim,
            found: spec.counts.len(),
        });
    }
    if let Some(axis) = spec.counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidDomain(format!("partition count on axis {axis} is zero")));
    }
    if !spec.continuity.is_empty() && spec.continuity.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "continuity orders",
            expected: dim,
            found: spec.continuity.len(),
        });
    }
    if let Some(&k) = spec.continuity.iter().find(|&&k| k > 2) {
        return Err(Error::UnsupportedDerivative(format!(
            "continuity order {k} exceeds the supported maximum of 2"
        )));
    }

    let total = spec.num_subdomains();
    let mut subdomains = Vec::with_capacity(total);
    for index in 0..total {
        let mut rem = index;
        let multi_index: Vec<usize> = spec
            .counts
            .iter()
            .map(|&n| {
                let m = rem % n;
                rem /= n;
                m
            })
            .collect();
        let bounds = domain
            .axes()
            .iter()
            .zip(&multi_index)
            .zip(&spec.counts)
            .map(|((axis, &m), &n)| {
                (
                    cell_edge(axis.lower, axis.upper, m, n),
                    cell_edge(axis.lower, axis.upper, m + 1, n),
                )
            })
            .collect();
        subdomains.push(SubdomainSpec {
            index,
            multi_index,
            bounds,
        });
    }

    let mut interfaces = Vec::new();
    for axis in 0..dim {
        for sub in &subdomains {
            if sub.multi_index[axis] + 1 >= spec.counts[axis] {
                continue;
            }
            let mut neighbour = sub.multi_index.clone();
            neighbour[axis] += 1;
            let right = linear_index(&neighbour, &spec.counts);
            let mut facet_bounds = sub.bounds.clone();
            let x = sub.bounds[axis].1;
            facet_bounds[axis] = (x, x);
            interfaces.push(InterfaceSpec {
                left: sub.index,
                right,
                axis,
                facet_bounds,
                continuity_order: spec.continuity.get(axis).copied().unwrap_or(0),
            });
        }
    }

    Ok(Partition {
        domain: domain.clone(),
        counts: spec.counts.clone(),
        subdomains,
        interfaces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_split() {
        let domain = DomainSpec::spatial(&[(0.0, 8.0)]).unwrap();
        let p = partition(&domain, &PartitionSpec::new(vec![4])).unwrap();
        let bounds: Vec<_> = p.subdomains.iter().map(|s| s.bounds[0]).collect();
        assert_eq!(bounds, vec![(0.0, 2.0), (2.0, 4.0), (4.0, 6.0), (6.0, 8.0)]);
        let at: Vec<_> = p.interfaces.iter().map(|i| i.position()).collect();
        assert_eq!(at, vec![2.0, 4.0, 6.0]);
        assert!(p.interfaces.iter().all(|i| i.right == i.left + 1));
    }

    #[test]
    fn two_dimensional_counts() {
        let domain = DomainSpec::spatial(&[(0.0, 2.0), (0.0, 2.0)]).unwrap();
        let p = partition(&domain, &PartitionSpec::new(vec![4, 4])).unwrap();
        assert_eq!(p.subdomains.len(), 16);
        assert_eq!(p.interfaces.len(), 24);
        assert_eq!(p.interfaces.iter().filter(|i| i.axis == 0).count(), 12);
    }

    #[test]
    fn burgers_layout() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let domain = DomainSpec::space_time(&[(0.0, two_pi)], (0.0, 1.0)).unwrap();
        let p = partition(&domain, &PartitionSpec::new(vec![4, 2])).unwrap();
        assert_eq!(p.subdomains.len(), 8);
        // 3 x-interfaces per time slab, 4 t-interfaces.
        assert_eq!(p.interfaces.len(), 3 * 2 + 4);
        assert_eq!(p.subdomains[7].bounds[0].1, two_pi);
        assert_eq!(p.subdomains[7].bounds[1], (0.5, 1.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let domain = DomainSpec::spatial(&[(0.0, 1.0)]).unwrap();
        assert!(matches!(
            partition(&domain, &PartitionSpec::new(vec![2, 2])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(DomainSpec::spatial(&[(1.0, 1.0)]).is_err());
        assert!(DomainSpec::new(vec![
            Axis { lower: 0.0, upper: 1.0, role: AxisRole::Temporal },
            Axis { lower: 0.0, upper: 1.0, role: AxisRole::Temporal },
        ])
        .is_err());
    }

    proptest! {
        #[test]
        fn tiling_and_interface_count(
            counts in proptest::collection::vec(1usize..5, 1..4),
            widths in proptest::collection::vec(0.1f64..10.0, 3),
        ) {
            let bounds: Vec<_> = counts.iter().zip(&widths).map(|(_, &w)| (-0.5 * w, 0.7 * w)).collect();
            let domain = DomainSpec::spatial(&bounds).unwrap();
            let p = partition(&domain, &PartitionSpec::new(counts.clone())).unwrap();
            let total: f64 = p.subdomains.iter().map(|s| s.measure()).sum();
            prop_assert!((total - domain.measure()).abs() <= 1e-12 * domain.measure());

            let expected: usize = (0..counts.len())
                .map(|s| (counts[s] - 1) * counts.iter().enumerate().filter(|&(r, _)| r != s).map(|(_, &n)| n).product::<usize>())
                .sum();
            prop_assert_eq!(p.interfaces.len(), expected);

            // Interiors are pairwise disjoint.
            for a in &p.subdomains {
                for b in &p.subdomains {
                    if a.index >= b.index { continue; }
                    let overlap = a.bounds.iter().zip(&b.bounds).all(|(&(a0, a1), &(b0, b1))| a0.max(b0) < a1.min(b1));
                    prop_assert!(!overlap);
                }
            }
            // Interfaces join face-adjacent cells on a shared facet.
            for i in &p.interfaces {
                let (l, r) = (&p.subdomains[i.left], &p.subdomains[i.right]);
                prop_assert_eq!(l.bounds[i.axis].1, r.bounds[i.axis].0);
                for s in 0..counts.len() {
                    if s != i.axis {
                        prop_assert_eq!(l.bounds[s], r.bounds[s]);
                    }
                }
            }
        }
    }
}
