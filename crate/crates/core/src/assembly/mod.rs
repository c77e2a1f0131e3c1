//! Global collocation system over the stacked coefficient vector: PDE rows
//! per subdomain, boundary rows and interface continuity rows.

mod lstsq;

pub use lstsq::{normal_residual, residual_norm, LeastSquares, DEFAULT_RCOND};

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use faer::Mat;
use ndarray::{Array2, Axis};

use crate::basis::{BasisBatch, BasisProvider};
use crate::deriv::{Deriv, DerivSet};
use crate::domain::{InterfaceSpec, PointSet};
use crate::error::{Error, Result};
use crate::problems::ProblemSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowKind {
    Pde,
    Boundary,
    Continuity,
}

/// Where each subdomain's coefficients live in the global vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnLayout {
    offsets: Vec<usize>,
    width: usize,
}

impl ColumnLayout {
    pub fn new(block_sizes: impl IntoIterator<Item = usize>) -> Self {
        let mut offsets = Vec::new();
        let mut width = 0;
        for n in block_sizes {
            offsets.push(width);
            width += n;
        }
        ColumnLayout { offsets, width }
    }

    pub fn uniform(num_subdomains: usize, block: usize) -> Self {
        Self::new(std::iter::repeat_n(block, num_subdomains))
    }

    pub fn from_providers<P: BasisProvider>(providers: &[P]) -> Self {
        Self::new(providers.iter().map(BasisProvider::num_basis))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_blocks(&self) -> usize {
        self.offsets.len()
    }

    pub fn columns(&self, k: usize) -> Range<usize> {
        let end = self.offsets.get(k + 1).copied().unwrap_or(self.width);
        self.offsets[k]..end
    }

    fn check(&self, k: usize, num_basis: usize) -> Result<usize> {
        if k >= self.num_blocks() {
            return Err(Error::MissingOwner(k));
        }
        let cols = self.columns(k);
        if cols.len() != num_basis {
            return Err(Error::WidthMismatch {
                expected: cols.len(),
                found: num_basis,
            });
        }
        Ok(cols.start)
    }
}

/// Which subdomains, point and derivative order produced a row.
#[derive(Clone, Debug, PartialEq)]
pub struct RowMeta {
    pub subdomains: Vec<usize>,
    pub point: Vec<f64>,
    pub order: usize,
}

/// A dense sub-block placed at `(row, col)` inside a [`RowBlock`].
#[derive(Clone, Debug, PartialEq)]
pub struct Part {
    pub row: usize,
    pub col: usize,
    pub values: Array2<f64>,
}

/// Rows of the global system, stored as dense sub-blocks; entries outside
/// every part are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct RowBlock {
    pub kind: RowKind,
    pub width: usize,
    pub parts: Vec<Part>,
    pub rhs: Vec<f64>,
    pub meta: Vec<RowMeta>,
}

impl RowBlock {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.len(), self.width));
        for p in &self.parts {
            let (r, c) = p.values.dim();
            out.slice_mut(ndarray::s![p.row..p.row + r, p.col..p.col + c])
                .assign(&p.values);
        }
        out
    }

    /// `A β` restricted to these rows.
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for p in &self.parts {
            let x = ndarray::ArrayView1::from(&beta[p.col..p.col + p.values.ncols()]);
            for (i, v) in p.values.dot(&x).iter().enumerate() {
                out[p.row + i] += v;
            }
        }
        out
    }
}

/// `Σ_terms c_t(x_i) ∂^{d_t} φ_j(x_i)`.
pub fn operator_rows(coefficients: &[(Deriv, Vec<f64>)], batch: &BasisBatch) -> Result<Array2<f64>> {
    let mut rows = Array2::zeros((batch.num_points, batch.num_basis));
    for (d, c) in coefficients {
        let phi = batch.get(*d)?;
        if c.iter().all(|&v| v == 0.0) {
            continue;
        }
        for ((mut row, phi_row), &ci) in rows.axis_iter_mut(Axis(0)).zip(phi.axis_iter(Axis(0))).zip(c) {
            row.scaled_add(ci, &phi_row);
        }
    }
    Ok(rows)
}

/// PDE rows of subdomain `k`: `A[i][j] = Σ c(x_i) ∂φ_j(x_i)` and
/// `rhs_i = f(x_i) - frozen_i`.
pub fn assemble_pde_rows(
    problem: &ProblemSpec,
    k: usize,
    layout: &ColumnLayout,
    points: &[Vec<f64>],
    batch: &BasisBatch,
    frozen: Option<&[f64]>,
) -> Result<RowBlock> {
    let col = layout.check(k, batch.num_basis)?;
    if batch.num_points != points.len() {
        return Err(Error::DimensionMismatch {
            context: "pde basis batch",
            expected: points.len(),
            found: batch.num_points,
        });
    }
    let data = problem.interior_data(points);
    let values = operator_rows(&data.coefficients, batch)?;
    let mut rhs = data.source;
    if let Some(frozen) = frozen {
        if frozen.len() != rhs.len() {
            return Err(Error::DimensionMismatch {
                context: "frozen nonlinear term",
                expected: rhs.len(),
                found: frozen.len(),
            });
        }
        rhs.iter_mut().zip(frozen).for_each(|(r, v)| *r -= v);
    }
    Ok(RowBlock {
        kind: RowKind::Pde,
        width: layout.width(),
        parts: vec![Part { row: 0, col, values }],
        rhs,
        meta: points
            .iter()
            .map(|p| RowMeta {
                subdomains: vec![k],
                point: p.clone(),
                order: 0,
            })
            .collect(),
    })
}

/// Dirichlet rows `φ^owner(x_i) β^owner = g(x_i)` (or `h` on the initial
/// facet).
pub fn assemble_boundary_rows<P: BasisProvider>(
    problem: &ProblemSpec,
    set: &PointSet,
    layout: &ColumnLayout,
    providers: &[P],
) -> Result<RowBlock> {
    let mut parts = Vec::new();
    let mut start = 0;
    while start < set.len() {
        let owner = set.owners[start];
        let end = start + set.owners[start..].iter().take_while(|&&o| o == owner).count();
        let provider = providers.get(owner).ok_or(Error::MissingOwner(owner))?;
        let col = layout.check(owner, provider.num_basis())?;
        let batch = provider.eval_batch(&set.points[start..end], &DerivSet::value_only())?;
        parts.push(Part {
            row: start,
            col,
            values: batch.get(Deriv::Value)?.clone(),
        });
        start = end;
    }
    Ok(RowBlock {
        kind: RowKind::Boundary,
        width: layout.width(),
        parts,
        rhs: set.points.iter().map(|p| problem.data_at(set.kind, p)).collect(),
        meta: set
            .points
            .iter()
            .zip(&set.owners)
            .map(|(p, &o)| RowMeta {
                subdomains: vec![o],
                point: p.clone(),
                order: 0,
            })
            .collect(),
    })
}

/// Continuity rows `∂^α φ^p β^p - ∂^α φ^q β^q = 0` along the interface normal
/// for `α = 0..=continuity_order`, one row per (point, order).
pub fn assemble_continuity_rows<P: BasisProvider + ?Sized>(
    interface: &InterfaceSpec,
    points: &[Vec<f64>],
    layout: &ColumnLayout,
    left: &P,
    right: &P,
) -> Result<RowBlock> {
    let orders: Vec<Deriv> = (0..=interface.continuity_order)
        .map(|a| Deriv::along(interface.axis, a))
        .collect::<Result<_>>()?;
    let request = DerivSet::new(orders.iter().copied());
    let lcol = layout.check(interface.left, left.num_basis())?;
    let rcol = layout.check(interface.right, right.num_basis())?;
    let lb = left.eval_batch(points, &request)?;
    let rb = right.eval_batch(points, &request)?;
    let per = orders.len();
    let rows = points.len() * per;
    let mut lv = Array2::zeros((rows, left.num_basis()));
    let mut rv = Array2::zeros((rows, right.num_basis()));
    let mut meta = Vec::with_capacity(rows);
    for (i, p) in points.iter().enumerate() {
        for (a, &d) in orders.iter().enumerate() {
            let r = i * per + a;
            lv.row_mut(r).assign(&lb.get(d)?.row(i));
            rv.row_mut(r).assign(&rb.get(d)?.row(i).mapv(|v| -v));
            meta.push(RowMeta {
                subdomains: vec![interface.left, interface.right],
                point: p.clone(),
                order: a,
            });
        }
    }
    Ok(RowBlock {
        kind: RowKind::Continuity,
        width: layout.width(),
        parts: vec![
            Part {
                row: 0,
                col: lcol,
                values: lv,
            },
            Part {
                row: 0,
                col: rcol,
                values: rv,
            },
        ],
        rhs: vec![0.0; rows],
        meta,
    })
}

/// The stacked system `A β = b`.
#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub matrix: Mat<f64>,
    pub rhs: Vec<f64>,
    pub layout: ColumnLayout,
    pub kinds: Vec<RowKind>,
    pub meta: Vec<RowMeta>,
}

impl GlobalSystem {
    pub fn nrows(&self) -> usize {
        self.rhs.len()
    }

    pub fn ncols(&self) -> usize {
        self.layout.width()
    }

    /// Rows of one kind; blocks are stacked by kind so this is contiguous.
    pub fn rows_of(&self, kind: RowKind) -> Range<usize> {
        let start = self.kinds.iter().position(|&k| k == kind).unwrap_or(self.nrows());
        let len = self.kinds[start..].iter().take_while(|&&k| k == kind).count();
        start..start + len
    }

    pub fn solve(&self, equilibrate: bool) -> Result<(Vec<f64>, f64)> {
        let ls = LeastSquares::factor(self.matrix.as_ref(), equilibrate)?;
        let beta = ls.solve(&self.rhs)?;
        let res = residual_norm(self.matrix.as_ref(), &beta, &self.rhs);
        Ok((beta, res))
    }

    /// Writes `[A | b]` as CSV, one system row per line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (0..self.ncols())
            .map(|j| format!("a{j}"))
            .chain(std::iter::once("b".to_string()))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.nrows() {
            let row: Vec<String> = (0..self.ncols())
                .map(|j| format!("{:.16e}", self.matrix[(i, j)]))
                .chain(std::iter::once(format!("{:.16e}", self.rhs[i])))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Stacks blocks in the order pde, boundary, continuity; blocks of the same
/// kind keep their relative order.
pub fn assemble_global(blocks: &[RowBlock], layout: &ColumnLayout) -> Result<GlobalSystem> {
    let mut order: Vec<&RowBlock> = blocks.iter().collect();
    order.sort_by_key(|b| b.kind);
    if let Some(b) = order.iter().find(|b| b.width != layout.width()) {
        return Err(Error::WidthMismatch {
            expected: layout.width(),
            found: b.width,
        });
    }
    let rows: usize = order.iter().map(|b| b.len()).sum();
    let mut matrix = Mat::<f64>::zeros(rows, layout.width());
    let mut rhs = Vec::with_capacity(rows);
    let mut kinds = Vec::with_capacity(rows);
    let mut meta = Vec::with_capacity(rows);
    let mut offset = 0;
    for b in order {
        for p in &b.parts {
            if p.col + p.values.ncols() > layout.width() || p.row + p.values.nrows() > b.len() {
                return Err(Error::ShapeMismatch {
                    context: "row block part",
                    expected: format!("within {}x{}", b.len(), layout.width()),
                    found: format!("{}x{} at ({}, {})", p.values.nrows(), p.values.ncols(), p.row, p.col),
                });
            }
            for ((i, j), &v) in p.values.indexed_iter() {
                matrix[(offset + p.row + i, p.col + j)] += v;
            }
        }
        rhs.extend_from_slice(&b.rhs);
        kinds.extend(std::iter::repeat_n(b.kind, b.len()));
        meta.extend(b.meta.iter().cloned());
        offset += b.len();
    }
    Ok(GlobalSystem {
        matrix,
        rhs,
        layout: layout.clone(),
        kinds,
        meta,
    })
}

#[cfg(test)]
mod tests;
