//! Input-derivative identifiers of total order at most two, and point-wise
//! collections of derivative values ("jets").

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A partial derivative with respect to the input coordinates.
///
/// `Second(a, b)` is always stored with `a <= b`; `Second(a, a)` is the pure
/// second derivative along axis `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Deriv {
    Value,
    First(usize),
    Second(usize, usize),
}

impl Deriv {
    pub fn second(a: usize, b: usize) -> Self {
        if a <= b {
            Deriv::Second(a, b)
        } else {
            Deriv::Second(b, a)
        }
    }

    /// The `order`-th pure derivative along `axis`.
    pub fn along(axis: usize, order: usize) -> Result<Self> {
        match order {
            0 => Ok(Deriv::Value),
            1 => Ok(Deriv::First(axis)),
            2 => Ok(Deriv::Second(axis, axis)),
            _ => Err(Error::UnsupportedDerivative(format!(
                "order {order} along axis {axis}"
            ))),
        }
    }

    /// Builds the derivative from a per-axis multi-index such as `[2, 0]`.
    pub fn from_multi_index(index: &[u32]) -> Result<Self> {
        let total: u32 = index.iter().sum();
        let axes: Vec<usize> = index
            .iter()
            .enumerate()
            .flat_map(|(axis, &n)| std::iter::repeat_n(axis, n as usize))
            .collect();
        match (total, axes.as_slice()) {
            (0, _) => Ok(Deriv::Value),
            (1, [a]) => Ok(Deriv::First(*a)),
            (2, [a, b]) => Ok(Deriv::second(*a, *b)),
            _ => Err(Error::UnsupportedDerivative(format!("{index:?}"))),
        }
    }

    pub fn to_multi_index(self, dim: usize) -> Vec<u32> {
        let mut index = vec![0; dim];
        match self {
            Deriv::Value => {}
            Deriv::First(a) => index[a] += 1,
            Deriv::Second(a, b) => {
                index[a] += 1;
                index[b] += 1;
            }
        }
        index
    }

    pub fn order(self) -> usize {
        match self {
            Deriv::Value => 0,
            Deriv::First(_) => 1,
            Deriv::Second(..) => 2,
        }
    }

    /// Number of differentiations taken along `axis`.
    pub fn order_along(self, axis: usize) -> usize {
        match self {
            Deriv::Value => 0,
            Deriv::First(a) => usize::from(a == axis),
            Deriv::Second(a, b) => usize::from(a == axis) + usize::from(b == axis),
        }
    }

    pub fn max_axis(self) -> Option<usize> {
        match self {
            Deriv::Value => None,
            Deriv::First(a) => Some(a),
            Deriv::Second(_, b) => Some(b),
        }
    }
}

impl fmt::Display for Deriv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Deriv::Value => write!(f, "u"),
            Deriv::First(a) => write!(f, "d/dx{a}"),
            Deriv::Second(a, b) if a == b => write!(f, "d2/dx{a}2"),
            Deriv::Second(a, b) => write!(f, "d2/dx{a}dx{b}"),
        }
    }
}

/// Sorted, deduplicated set of derivatives, closed under the first-order
/// factors that forward propagation needs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DerivSet {
    items: Vec<Deriv>,
}

impl DerivSet {
    pub fn new(items: impl IntoIterator<Item = Deriv>) -> Self {
        let mut items: Vec<Deriv> = items.into_iter().collect();
        items.push(Deriv::Value);
        items.sort();
        items.dedup();
        DerivSet { items }
    }

    pub fn value_only() -> Self {
        DerivSet::new([])
    }

    pub fn contains(&self, d: Deriv) -> bool {
        self.items.binary_search(&d).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = Deriv> + '_ {
        self.items.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn union(&self, other: &DerivSet) -> DerivSet {
        DerivSet::new(self.iter().chain(other.iter()))
    }

    /// Axes whose first derivative must be propagated.
    pub fn first_axes(&self) -> Vec<usize> {
        let mut axes: Vec<usize> = self
            .iter()
            .flat_map(|d| match d {
                Deriv::Value => vec![],
                Deriv::First(a) => vec![a],
                Deriv::Second(a, b) => vec![a, b],
            })
            .collect();
        axes.sort_unstable();
        axes.dedup();
        axes
    }

    pub fn second_pairs(&self) -> Vec<(usize, usize)> {
        self.iter()
            .filter_map(|d| match d {
                Deriv::Second(a, b) => Some((a, b)),
                _ => None,
            })
            .collect()
    }

    pub fn max_axis(&self) -> Option<usize> {
        self.iter().filter_map(Deriv::max_axis).max()
    }
}

/// Values of a scalar function and some of its derivatives at one point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Jet {
    entries: Vec<(Deriv, f64)>,
}

impl Jet {
    pub fn new() -> Self {
        Jet::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Deriv, f64)>) -> Self {
        let mut jet = Jet::new();
        for (d, v) in pairs {
            jet.set(d, v);
        }
        jet
    }

    pub fn set(&mut self, d: Deriv, value: f64) {
        match self.entries.iter_mut().find(|(k, _)| *k == d) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((d, value)),
        }
    }

    pub fn get(&self, d: Deriv) -> Option<f64> {
        self.entries.iter().find(|(k, _)| *k == d).map(|(_, v)| *v)
    }

    pub fn require(&self, d: Deriv) -> Result<f64> {
        self.get(d).ok_or(Error::MissingDerivative(d))
    }

    pub fn value(&self) -> f64 {
        self.get(Deriv::Value).unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Deriv, f64)> + '_ {
        self.entries.iter().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_round_trip() {
        assert_eq!(Deriv::from_multi_index(&[2, 0]).unwrap(), Deriv::Second(0, 0));
        assert_eq!(Deriv::from_multi_index(&[0, 1]).unwrap(), Deriv::First(1));
        assert_eq!(Deriv::from_multi_index(&[1, 1]).unwrap(), Deriv::Second(0, 1));
        assert_eq!(Deriv::from_multi_index(&[0, 0]).unwrap(), Deriv::Value);
        assert!(Deriv::from_multi_index(&[2, 1]).is_err());
        assert_eq!(Deriv::Second(0, 1).to_multi_index(2), vec![1, 1]);
    }

    #[test]
    fn order_along_axes() {
        assert_eq!(Deriv::Second(1, 1).order_along(1), 2);
        assert_eq!(Deriv::Second(0, 1).order_along(1), 1);
        assert_eq!(Deriv::First(0).order_along(1), 0);
    }

    #[test]
    fn set_closure() {
        let set = DerivSet::new([Deriv::Second(0, 0), Deriv::Second(0, 1)]);
        assert!(set.contains(Deriv::Value));
        assert_eq!(set.first_axes(), vec![0, 1]);
        assert_eq!(set.second_pairs(), vec![(0, 0), (0, 1)]);
    }
}
