use ndarray::Array2;

use super::{BasisBatch, BasisProvider};
use crate::deriv::DerivSet;
use crate::domain::SubdomainSpec;
use crate::error::{Error, Result};

/// Monomials `Π (x_s - c_s)^{k_s}` about an origin `c`, with exact
/// derivatives. Used as a reference basis in tests.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    pub subdomain: SubdomainSpec,
    pub exponents: Vec<Vec<u32>>,
    pub origin: Vec<f64>,
}

impl MonomialBasis {
    /// All monomials of total degree `<= degree`.
    pub fn total_degree(subdomain: SubdomainSpec, degree: u32) -> Self {
        let dim = subdomain.dim();
        let mut exponents = Vec::new();
        let mut current = vec![0u32; dim];
        collect(&mut exponents, &mut current, 0, degree);
        exponents.sort_by_key(|e| (e.iter().sum::<u32>(), e.clone()));
        let origin = subdomain.bounds.iter().map(|&(a, b)| 0.5 * (a + b)).collect();
        MonomialBasis {
            subdomain,
            exponents,
            origin,
        }
    }

    /// Same monomials about the coordinate origin instead of the centre.
    pub fn uncentred(subdomain: SubdomainSpec, degree: u32) -> Self {
        let mut b = Self::total_degree(subdomain, degree);
        b.origin.iter_mut().for_each(|c| *c = 0.0);
        b
    }
}

fn collect(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, axis: usize, left: u32) {
    if axis == current.len() {
        out.push(current.clone());
        return;
    }
    for k in 0..=left {
        current[axis] = k;
        collect(out, current, axis + 1, left - k);
    }
    current[axis] = 0;
}

/// `d^order/dt^order t^k`.
fn power_derivative(t: f64, k: u32, order: usize) -> f64 {
    let order = order as u32;
    if order > k {
        return 0.0;
    }
    let falling: f64 = (0..order).map(|i| (k - i) as f64).product();
    falling * t.powi((k - order) as i32)
}

impl BasisProvider for MonomialBasis {
    fn num_basis(&self) -> usize {
        self.exponents.len()
    }

    fn eval_batch(&self, points: &[Vec<f64>], request: &DerivSet) -> Result<BasisBatch> {
        let dim = self.subdomain.dim();
        let mut batch = BasisBatch::new(points.len(), self.exponents.len());
        for d in request.iter() {
            let orders: Vec<usize> = (0..dim).map(|a| d.order_along(a)).collect();
            if d.max_axis().is_some_and(|a| a >= dim) {
                return Err(Error::UnsupportedDerivative(d.to_string()));
            }
            let mut m = Array2::zeros((points.len(), self.exponents.len()));
            for (i, p) in points.iter().enumerate() {
                if p.len() != dim {
                    return Err(Error::DimensionMismatch {
                        context: "monomial basis",
                        expected: dim,
                        found: p.len(),
                    });
                }
                for (j, e) in self.exponents.iter().enumerate() {
                    m[[i, j]] = (0..dim)
                        .map(|a| power_derivative(p[a] - self.origin[a], e[a], orders[a]))
                        .product();
                }
            }
            batch.insert(d, m);
        }
        Ok(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deriv::Deriv;

    fn unit_square() -> SubdomainSpec {
        SubdomainSpec {
            index: 0,
            multi_index: vec![0, 0],
            bounds: vec![(0.0, 2.0), (0.0, 2.0)],
        }
    }

    #[test]
    fn counts_total_degree_monomials() {
        let b = MonomialBasis::total_degree(unit_square(), 3);
        assert_eq!(b.num_basis(), 10);
    }

    #[test]
    fn mixed_derivative_of_xy() {
        let b = MonomialBasis::total_degree(unit_square(), 2);
        let j = b.exponents.iter().position(|e| e == &vec![1, 1]).unwrap();
        let req = DerivSet::new([Deriv::Second(0, 1), Deriv::First(0)]);
        let batch = b.eval_batch(&[vec![1.5, 0.25]], &req).unwrap();
        assert_eq!(batch.get(Deriv::Second(0, 1)).unwrap()[[0, j]], 1.0);
        assert_eq!(batch.get(Deriv::First(0)).unwrap()[[0, j]], 0.25 - 1.0);
    }
}
