//! Minimum-norm least squares through a truncated SVD. Tall systems are
//! first reduced by a Householder QR so the SVD only sees the `n x n`
//! triangular factor.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder::{
    apply_block_householder_sequence_transpose_on_the_left_in_place_scratch,
    apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj,
};
use faer::linalg::solvers::Qr;
use faer::{Conj, Mat, MatRef, Par};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are discarded.
pub const DEFAULT_RCOND: f64 = 1e-12;

/// A reusable factorization of a fixed matrix.
pub struct LeastSquares {
    nrows: usize,
    ncols: usize,
    /// Householder factors when the system was tall.
    qr: Option<Qr<f64>>,
    u: Mat<f64>,
    singular: Vec<f64>,
    v: Mat<f64>,
    rank: usize,
    row_scale: Option<Vec<f64>>,
}

impl LeastSquares {
    pub fn factor(a: MatRef<'_, f64>, equilibrate: bool) -> Result<Self> {
        Self::factor_with(a, equilibrate, DEFAULT_RCOND)
    }

    pub fn factor_with(a: MatRef<'_, f64>, equilibrate: bool, rcond: f64) -> Result<Self> {
        let (m, n) = (a.nrows(), a.ncols());
        if m == 0 || n == 0 {
            return Err(Error::Factorization(format!("empty {m}x{n} system")));
        }
        for j in 0..n {
            for i in 0..m {
                if !a[(i, j)].is_finite() {
                    return Err(Error::NonFinite("system matrix"));
                }
            }
        }
        faer::set_global_parallelism(Par::Seq);

        let row_scale = equilibrate.then(|| {
            (0..m)
                .map(|i| {
                    let norm = (0..n).map(|j| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        1.0 / norm
                    } else {
                        1.0
                    }
                })
                .collect::<Vec<f64>>()
        });
        let scaled;
        let a = match &row_scale {
            Some(s) => {
                scaled = Mat::from_fn(m, n, |i, j| a[(i, j)] * s[i]);
                scaled.as_ref()
            }
            None => a,
        };

        let (qr, svd) = if m >= n {
            let qr = a.qr();
            let svd = qr
                .thin_R()
                .thin_svd()
                .map_err(|e| Error::Factorization(format!("{e:?}")))?;
            (Some(qr), svd)
        } else {
            let svd = a
                .thin_svd()
                .map_err(|e| Error::Factorization(format!("{e:?}")))?;
            (None, svd)
        };
        let singular: Vec<f64> = svd.S().column_vector().iter().copied().collect();
        let s_max = singular.iter().copied().fold(0.0, f64::max);
        let rank = singular.iter().filter(|&&s| s > rcond * s_max).count();
        Ok(LeastSquares {
            nrows: m,
            ncols: n,
            qr,
            u: svd.U().to_owned(),
            singular,
            v: svd.V().to_owned(),
            rank,
            row_scale,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular
    }

    /// Minimum-norm minimizer of `‖A x - b‖₂` (of the row-scaled system when
    /// equilibration is on).
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                context: "least-squares rhs",
                expected: self.nrows,
                found: b.len(),
            });
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("system rhs"));
        }
        let mut rhs = Mat::from_fn(self.nrows, 1, |i, _| match &self.row_scale {
            Some(s) => b[i] * s[i],
            None => b[i],
        });
        if let Some(qr) = &self.qr {
            let (basis, coeff) = (qr.Q_basis(), qr.Q_coeff());
            let block = coeff.nrows();
            let mut buf = MemBuffer::new(apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<f64>(
                self.nrows, block, 1,
            ));
            apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
                basis,
                coeff,
                Conj::No,
                rhs.as_mut(),
                Par::Seq,
                MemStack::new(&mut buf),
            );
        }
        // coordinates in the left singular basis, truncated
        let k = self.u.nrows();
        let mut c = vec![0.0; self.rank];
        for (r, cr) in c.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..k {
                acc += self.u[(i, r)] * rhs[(i, 0)];
            }
            *cr = acc / self.singular[r];
        }
        let mut x = vec![0.0; self.ncols];
        for (r, &cr) in c.iter().enumerate() {
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += self.v[(j, r)] * cr;
            }
        }
        Ok(x)
    }
}

/// `‖A x - b‖₂`.
pub fn residual_norm(a: MatRef<'_, f64>, x: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        let mut r = -b[i];
        for (j, &xj) in x.iter().enumerate() {
            r += a[(i, j)] * xj;
        }
        acc += r * r;
    }
    acc.sqrt()
}

/// `Aᵀ (A x - b)`.
pub fn normal_residual(a: MatRef<'_, f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = (0..a.nrows())
        .map(|i| x.iter().enumerate().map(|(j, &xj)| a[(i, j)] * xj).sum::<f64>() - b[i])
        .collect();
    (0..a.ncols())
        .map(|j| r.iter().enumerate().map(|(i, &ri)| a[(i, j)] * ri).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    fn solve(a: &Mat<f64>, b: &[f64]) -> Vec<f64> {
        LeastSquares::factor(a.as_ref(), false).unwrap().solve(b).unwrap()
    }

    #[test]
    fn identity_returns_rhs() {
        let a = Mat::<f64>::identity(3, 3);
        let x = solve(&a, &[1.0, -2.0, 0.5]);
        for (u, v) in x.iter().zip([1.0, -2.0, 0.5]) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn overdetermined_mean() {
        let x = solve(&mat(&[&[1.0], &[1.0]]), &[0.0, 2.0]);
        assert!((x[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn underdetermined_minimum_norm() {
        let x = solve(&mat(&[&[1.0, 1.0]]), &[2.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_tall_system_takes_minimum_norm() {
        // duplicated column: minimum-norm solution splits the weight evenly
        let a = mat(&[&[1.0, 1.0], &[2.0, 2.0], &[0.0, 0.0]]);
        let ls = LeastSquares::factor(a.as_ref(), false).unwrap();
        assert_eq!(ls.rank(), 1);
        let x = ls.solve(&[1.0, 2.0, 0.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-14 && (x[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn equilibration_keeps_consistent_solutions() {
        let a = mat(&[&[1e6, 0.0], &[0.0, 1e-3], &[1.0, 1.0]]);
        let b = [2e6, 3e-3, 5.0];
        let x = LeastSquares::factor(a.as_ref(), true).unwrap().solve(&b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10 && (x[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_finite_input() {
        let a = mat(&[&[1.0, f64::NAN]]);
        assert!(matches!(LeastSquares::factor(a.as_ref(), false), Err(Error::NonFinite(_))));
        let ls = LeastSquares::factor(Mat::<f64>::identity(2, 2).as_ref(), false).unwrap();
        assert!(matches!(ls.solve(&[1.0, f64::INFINITY]), Err(Error::NonFinite(_))));
    }

    proptest! {
        #[test]
        fn normal_equations_hold(seed in 0u64..1000, m in 3usize..12, n in 1usize..6) {
            let n = n.min(m);
            let a = Mat::from_fn(m, n, |i, j| ((seed + 1) as f64 * (i * 31 + j * 17 + 3) as f64).sin());
            let b: Vec<f64> = (0..m).map(|i| ((seed + i as u64) as f64).cos()).collect();
            let x = solve(&a, &b);
            let g = normal_residual(a.as_ref(), &x, &b);
            let a_norm = a.norm_l2();
            let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(g.iter().all(|v| v.abs() <= 1e-8 * a_norm * b_norm));
        }
    }
}
