use std::collections::BTreeMap;

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;

use crate::assembly::{
    assemble_boundary_rows, assemble_continuity_rows, assemble_global, assemble_pde_rows, operator_rows, ColumnLayout,
    GlobalSystem, Part, RowBlock, RowKind, RowMeta,
};
use crate::basis::{BasisBatch, BasisProvider};
use crate::deriv::{Deriv, DerivSet};
use crate::domain::{BoundarySample, Partition};
use crate::error::{Error, Result};
use crate::problems::ProblemSpec;

/// Everything about the collocation system that stays fixed once the bases
/// are frozen: basis evaluations at the interior points, operator
/// coefficients, and the boundary and continuity rows.
pub struct Discretization<'a, P: BasisProvider> {
    pub problem: &'a ProblemSpec,
    pub partition: Partition,
    pub providers: Vec<P>,
    pub layout: ColumnLayout,
    pub interior: Vec<Vec<Vec<f64>>>,
    batches: Vec<BasisBatch>,
    coefficients: Vec<Vec<(Deriv, Vec<f64>)>>,
    sources: Vec<Vec<f64>>,
    fixed: Vec<RowBlock>,
}

impl<'a, P: BasisProvider> Discretization<'a, P> {
    /// `interface_points[i]` belongs to `partition.interfaces[i]`.
    pub fn new(
        problem: &'a ProblemSpec,
        partition: Partition,
        providers: Vec<P>,
        interior: Vec<Vec<Vec<f64>>>,
        boundary: &BoundarySample,
        interface_points: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        let n = partition.num_subdomains();
        if providers.len() != n || interior.len() != n {
            return Err(Error::DimensionMismatch {
                context: "subdomain count",
                expected: n,
                found: providers.len().min(interior.len()),
            });
        }
        if interface_points.len() != partition.interfaces.len() {
            return Err(Error::DimensionMismatch {
                context: "interface point sets",
                expected: partition.interfaces.len(),
                found: interface_points.len(),
            });
        }
        let layout = ColumnLayout::from_providers(&providers);
        let request = problem.required_derivs();
        let batches = providers
            .par_iter()
            .zip(interior.par_iter())
            .map(|(p, pts)| p.eval_batch(pts, &request))
            .collect::<Result<Vec<_>>>()?;
        let (coefficients, sources) = interior
            .iter()
            .map(|pts| {
                let d = problem.interior_data(pts);
                (d.coefficients, d.source)
            })
            .unzip();

        let mut fixed = Vec::new();
        for set in boundary.sets() {
            if !set.is_empty() {
                fixed.push(assemble_boundary_rows(problem, set, &layout, &providers)?);
            }
        }
        let continuity = partition
            .interfaces
            .par_iter()
            .zip(interface_points.par_iter())
            .map(|(iface, pts)| {
                assemble_continuity_rows(iface, pts, &layout, &providers[iface.left], &providers[iface.right])
            })
            .collect::<Result<Vec<_>>>()?;
        fixed.extend(continuity);

        Ok(Discretization {
            problem,
            partition,
            providers,
            layout,
            interior,
            batches,
            coefficients,
            sources,
            fixed,
        })
    }

    pub fn num_interior(&self) -> usize {
        self.interior.iter().map(Vec::len).sum()
    }

    fn block<'b>(&self, beta: &'b [f64], k: usize) -> ArrayView1<'b, f64> {
        ArrayView1::from(&beta[self.layout.columns(k)])
    }

    /// `û` and its operator derivatives at every interior point, per
    /// subdomain.
    pub fn jets(&self, beta: &[f64]) -> Vec<BTreeMap<Deriv, Array1<f64>>> {
        self.batches
            .iter()
            .enumerate()
            .map(|(k, b)| b.contract(self.block(beta, k)))
            .collect()
    }

    /// `û` at the interior points, concatenated in subdomain order.
    pub fn interior_values(&self, beta: &[f64]) -> Vec<f64> {
        self.batches
            .iter()
            .enumerate()
            .flat_map(|(k, b)| {
                b.get(Deriv::Value)
                    .expect("value always evaluated")
                    .dot(&self.block(beta, k))
                    .to_vec()
            })
            .collect()
    }

    fn nonlinear_args(&self, jets: &BTreeMap<Deriv, Array1<f64>>, depends_on: &[Deriv], i: usize) -> Vec<f64> {
        depends_on.iter().map(|d| jets[d][i]).collect()
    }

    /// `N(û)` at the interior points, per subdomain; zeros for linear
    /// problems.
    pub fn frozen_nonlinear(&self, beta: &[f64]) -> Vec<Vec<f64>> {
        let jets = self.jets(beta);
        self.interior
            .iter()
            .zip(&jets)
            .map(|(pts, jet)| match &self.problem.nonlinear {
                Some(nl) => pts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (nl.value)(p, &self.nonlinear_args(jet, &nl.depends_on, i)))
                    .collect(),
                None => vec![0.0; pts.len()],
            })
            .collect()
    }

    /// PDE residual `L û + N(û) - f` at the interior points, per subdomain.
    pub fn residuals(&self, beta: &[f64]) -> Vec<Vec<f64>> {
        let frozen = self.frozen_nonlinear(beta);
        self.jets(beta)
            .iter()
            .enumerate()
            .map(|(k, jet)| {
                let mut r: Vec<f64> = self.sources[k].iter().zip(&frozen[k]).map(|(f, n)| n - f).collect();
                for (d, c) in &self.coefficients[k] {
                    for (i, ri) in r.iter_mut().enumerate() {
                        *ri += c[i] * jet[d][i];
                    }
                }
                r
            })
            .collect()
    }

    pub fn pde_blocks(&self, frozen: Option<&[Vec<f64>]>) -> Result<Vec<RowBlock>> {
        (0..self.providers.len())
            .into_par_iter()
            .map(|k| {
                assemble_pde_rows(
                    self.problem,
                    k,
                    &self.layout,
                    &self.interior[k],
                    &self.batches[k],
                    frozen.map(|f| f[k].as_slice()),
                )
            })
            .collect()
    }

    /// `f - frozen` at the interior points, concatenated in subdomain order
    /// like the PDE rows of [`Self::system`].
    pub fn pde_rhs(&self, frozen: &[Vec<f64>]) -> Vec<f64> {
        self.sources
            .iter()
            .zip(frozen)
            .flat_map(|(f, n)| f.iter().zip(n).map(|(a, b)| a - b))
            .collect()
    }

    /// Boundary and continuity rows.
    pub fn fixed_blocks(&self) -> &[RowBlock] {
        &self.fixed
    }

    /// The system with the nonlinear term (if any) frozen at the given
    /// per-point values.
    pub fn system(&self, frozen: Option<&[Vec<f64>]>) -> Result<GlobalSystem> {
        let mut blocks = self.pde_blocks(frozen)?;
        blocks.extend(self.fixed.iter().cloned());
        assemble_global(&blocks, &self.layout)
    }

    /// Operator coefficients at subdomain `k` with the nonlinear term
    /// linearized at `jets` in the arguments selected by `implicit`, plus
    /// `Σ ∂N/∂a · a(û)` over those arguments.
    fn linearized_coefficients(
        &self,
        k: usize,
        jets: &BTreeMap<Deriv, Array1<f64>>,
        implicit: impl Fn(Deriv) -> bool,
    ) -> (Vec<(Deriv, Vec<f64>)>, Vec<f64>) {
        let mut coeffs = self.coefficients[k].clone();
        let n = self.interior[k].len();
        let mut shift = vec![0.0; n];
        let Some(nl) = &self.problem.nonlinear else {
            return (coeffs, shift);
        };
        let slots: Vec<usize> = (0..nl.depends_on.len()).filter(|&s| implicit(nl.depends_on[s])).collect();
        if slots.is_empty() {
            return (coeffs, shift);
        }
        let mut partial = vec![vec![0.0; n]; slots.len()];
        let mut out = vec![0.0; nl.depends_on.len()];
        for (i, p) in self.interior[k].iter().enumerate() {
            let args = self.nonlinear_args(jets, &nl.depends_on, i);
            (nl.partials)(p, &args, &mut out);
            for (j, &slot) in slots.iter().enumerate() {
                partial[j][i] = out[slot];
                shift[i] += out[slot] * args[slot];
            }
        }
        for (&slot, c) in slots.iter().zip(partial) {
            let d = nl.depends_on[slot];
            match coeffs.iter_mut().find(|(e, _)| *e == d) {
                Some((_, existing)) => existing.iter_mut().zip(&c).for_each(|(a, b)| *a += b),
                None => coeffs.push((d, c)),
            }
        }
        (coeffs, shift)
    }

    fn pde_block(&self, k: usize, coeffs: &[(Deriv, Vec<f64>)], rhs: Vec<f64>) -> Result<RowBlock> {
        let values = operator_rows(coeffs, &self.batches[k])?;
        let col = self.layout.columns(k).start;
        Ok(RowBlock {
            kind: RowKind::Pde,
            width: self.layout.width(),
            parts: vec![Part { row: 0, col, values }],
            rhs,
            meta: self.interior[k]
                .iter()
                .map(|p| RowMeta {
                    subdomains: vec![k],
                    point: p.clone(),
                    order: 0,
                })
                .collect(),
        })
    }

    /// Newton system for the correction `Δβ` at `beta`: Jacobian rows with
    /// rhs `-R(β)` at interior points, and the fixed rows with rhs
    /// `b - A β`.
    pub fn newton_system(&self, beta: &[f64]) -> Result<GlobalSystem> {
        let jets = self.jets(beta);
        let residuals = self.residuals(beta);
        let mut blocks = (0..self.providers.len())
            .into_par_iter()
            .map(|k| {
                let (coeffs, _) = self.linearized_coefficients(k, &jets[k], |_| true);
                self.pde_block(k, &coeffs, residuals[k].iter().map(|r| -r).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        for b in &self.fixed {
            let mut b = b.clone();
            let applied = b.apply(beta);
            b.rhs.iter_mut().zip(applied).for_each(|(r, a)| *r -= a);
            blocks.push(b);
        }
        assemble_global(&blocks, &self.layout)
    }

    /// System for the next semi-implicit Picard iterate: the nonlinear term
    /// is linearized at `beta` in its derivative arguments only, so
    /// `N(u, u_x) = u u_x` becomes `u⁽ⁿ⁾ u_x⁽ⁿ⁺¹⁾`; dependence on `u`
    /// alone stays frozen.
    pub fn semi_implicit_system(&self, beta: &[f64]) -> Result<GlobalSystem> {
        let jets = self.jets(beta);
        let frozen = self.frozen_nonlinear(beta);
        let mut blocks = (0..self.providers.len())
            .into_par_iter()
            .map(|k| {
                let (coeffs, shift) = self.linearized_coefficients(k, &jets[k], |d| d != Deriv::Value);
                let rhs = self.sources[k]
                    .iter()
                    .zip(&frozen[k])
                    .zip(&shift)
                    .map(|((f, n), s)| f - n + s)
                    .collect();
                self.pde_block(k, &coeffs, rhs)
            })
            .collect::<Result<Vec<_>>>()?;
        blocks.extend(self.fixed.iter().cloned());
        assemble_global(&blocks, &self.layout)
    }

    /// Largest `|∂^α û^p - ∂^α û^q|` over all interface points and orders.
    pub fn interface_jump(&self, beta: &[f64]) -> f64 {
        self.fixed
            .iter()
            .filter(|b| b.kind == RowKind::Continuity)
            .flat_map(|b| b.apply(beta))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `û` at arbitrary points of the domain; points on shared facets use
    /// the lowest-numbered subdomain.
    pub fn evaluate(&self, beta: &[f64], points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); self.providers.len()];
        for (i, p) in points.iter().enumerate() {
            let k = self.partition.locate(p).ok_or_else(|| Error::PointOutside {
                subdomain: usize::MAX,
                point: p.clone(),
            })?;
            groups[k].push(i);
        }
        let mut out = vec![0.0; points.len()];
        for (k, idx) in groups.iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            let pts: Vec<Vec<f64>> = idx.iter().map(|&i| points[i].clone()).collect();
            let batch = self.providers[k].eval_batch(&pts, &DerivSet::value_only())?;
            let vals = batch.get(Deriv::Value)?.dot(&self.block(beta, k));
            for (&i, v) in idx.iter().zip(vals) {
                out[i] = v;
            }
        }
        Ok(out)
    }
}
