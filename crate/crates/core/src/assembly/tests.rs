use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::basis::{init_params, InitMode, MonomialBasis, NetworkConfig, NeuralBasis};
use crate::domain::{
    partition, sample_boundary, sample_interface, sample_interior, DomainSpec, Partition, PartitionSpec, PointKind,
    SamplingStrategy, SubdomainSpec,
};
use crate::problems::{builtin, scalar, ExactSolution, LinearTerm, ProblemSpec};

fn cell(index: usize, bounds: Vec<(f64, f64)>) -> SubdomainSpec {
    SubdomainSpec {
        index,
        multi_index: vec![index; bounds.len()],
        bounds,
    }
}

fn monomials(sub: SubdomainSpec, degree: u32) -> MonomialBasis {
    MonomialBasis::uncentred(sub, degree)
}

/// `u'' - u = f` on `[0, 2]` with `u = x³ - 2x`.
fn cubic_problem() -> ProblemSpec {
    let u = |x: f64| x * x * x - 2.0 * x;
    ProblemSpec {
        name: "cubic".into(),
        description: "u'' - u = f".into(),
        domain: DomainSpec::spatial(&[(0.0, 2.0)]).unwrap(),
        linear: vec![
            LinearTerm::constant(1.0, Deriv::Second(0, 0)),
            LinearTerm::constant(-1.0, Deriv::Value),
        ],
        nonlinear: None,
        source: scalar(move |p| 6.0 * p[0] - u(p[0])),
        boundary: scalar(move |p| u(p[0])),
        initial: None,
        exact: Some(ExactSolution {
            value: scalar(move |p| u(p[0])),
            jet: None,
            description: "x^3 - 2x".into(),
        }),
        continuity: Some(vec![1]),
    }
}

/// Every block of a full system for `problem` on `part` with the given bases.
fn all_blocks<P: BasisProvider>(
    problem: &ProblemSpec,
    part: &Partition,
    providers: &[P],
    interior: usize,
    layout: &ColumnLayout,
) -> Vec<RowBlock> {
    let dim = part.domain.dim();
    let req = problem.required_derivs();
    let mut blocks = Vec::new();
    for (sub, prov) in part.subdomains.iter().zip(providers) {
        let pts = sample_interior(sub, SamplingStrategy::Uniform, &vec![interior; dim], 0)
            .unwrap()
            .points;
        let batch = prov.eval_batch(&pts, &req).unwrap();
        blocks.push(assemble_pde_rows(problem, sub.index, layout, &pts, &batch, None).unwrap());
    }
    let bnd = sample_boundary(&part.domain, &part.subdomains, &vec![interior; dim], SamplingStrategy::Uniform, 0).unwrap();
    for set in bnd.sets() {
        blocks.push(assemble_boundary_rows(problem, set, layout, providers).unwrap());
    }
    for iface in &part.interfaces {
        let pts = sample_interface(iface, &vec![interior; dim - 1], SamplingStrategy::Uniform, 0)
            .unwrap()
            .points;
        blocks.push(
            assemble_continuity_rows(iface, &pts, layout, &providers[iface.left], &providers[iface.right]).unwrap(),
        );
    }
    blocks
}

fn cubic_system() -> (GlobalSystem, Partition, Vec<MonomialBasis>) {
    let p = cubic_problem();
    let part = partition(&p.domain, &PartitionSpec::new(vec![2]).with_continuity(vec![1])).unwrap();
    let providers: Vec<MonomialBasis> = part
        .subdomains
        .iter()
        .map(|s| MonomialBasis::total_degree(s.clone(), 5))
        .collect();
    let layout = ColumnLayout::from_providers(&providers);
    let blocks = all_blocks(&p, &part, &providers, 8, &layout);
    (assemble_global(&blocks, &layout).unwrap(), part, providers)
}

#[test]
fn helmholtz_operator_row_on_monomials() {
    let p = builtin("helmholtz1d").unwrap();
    let sub = cell(0, vec![(0.0, 2.0)]);
    let basis = monomials(sub, 2);
    let layout = ColumnLayout::uniform(1, 3);
    let pts = vec![vec![1.0]];
    let batch = basis.eval_batch(&pts, &p.required_derivs()).unwrap();
    let block = assemble_pde_rows(&p, 0, &layout, &pts, &batch, None).unwrap();
    assert_eq!(block.to_dense().row(0).to_vec(), vec![-10.0, -10.0, -8.0]);
    assert_eq!(block.rhs, vec![(p.source)(&[1.0])]);
}

#[test]
fn zero_coefficients_give_zero_rows() {
    let mut p = builtin("helmholtz1d").unwrap();
    for t in &mut p.linear {
        t.coefficient = crate::problems::Coefficient::Constant(0.0);
    }
    let basis = monomials(cell(0, vec![(0.0, 2.0)]), 2);
    let pts = vec![vec![0.5], vec![1.5]];
    let batch = basis.eval_batch(&pts, &p.required_derivs()).unwrap();
    let block = assemble_pde_rows(&p, 0, &ColumnLayout::uniform(1, 3), &pts, &batch, None).unwrap();
    assert!(block.to_dense().iter().all(|&v| v == 0.0));
    assert_eq!(block.rhs, vec![(p.source)(&[0.5]), (p.source)(&[1.5])]);
}

#[test]
fn frozen_term_at_zero_leaves_the_source() {
    let p = builtin("nonlinear_helmholtz1d").unwrap();
    let basis = monomials(cell(0, vec![(0.0, 2.0)]), 2);
    let pts = vec![vec![0.5]];
    let batch = basis.eval_batch(&pts, &p.required_derivs()).unwrap();
    let nl = p.nonlinear.as_ref().unwrap();
    let frozen = vec![(nl.value)(&pts[0], &[0.0])];
    let block = assemble_pde_rows(&p, 0, &ColumnLayout::uniform(1, 3), &pts, &batch, Some(&frozen)).unwrap();
    assert_eq!(block.rhs, vec![(p.source)(&pts[0])]);
}

#[test]
fn missing_derivative_is_reported() {
    let p = builtin("helmholtz1d").unwrap();
    let basis = monomials(cell(0, vec![(0.0, 2.0)]), 2);
    let pts = vec![vec![0.5]];
    let batch = basis.eval_batch(&pts, &DerivSet::value_only()).unwrap();
    assert!(matches!(
        assemble_pde_rows(&p, 0, &ColumnLayout::uniform(1, 3), &pts, &batch, None),
        Err(Error::MissingDerivative(Deriv::Second(0, 0)))
    ));
}

#[test]
fn boundary_row_on_monomials() {
    let p = builtin("helmholtz1d").unwrap();
    let basis = vec![monomials(cell(0, vec![(0.0, 2.0)]), 1)];
    let mut set = PointSet::new(PointKind::Boundary);
    set.push(vec![0.0], 0);
    let block = assemble_boundary_rows(&p, &set, &ColumnLayout::uniform(1, 2), &basis).unwrap();
    assert_eq!(block.to_dense().row(0).to_vec(), vec![1.0, 0.0]);
    assert_eq!(block.rhs, vec![(p.boundary)(&[0.0])]);
}

#[test]
fn boundary_rhs_uses_exact_and_initial_data() {
    let p = builtin("poisson2d").unwrap();
    let basis = vec![monomials(cell(0, vec![(0.0, 2.0), (0.0, 2.0)]), 1)];
    let mut set = PointSet::new(PointKind::Boundary);
    set.push(vec![0.0, 0.0], 0);
    let block = assemble_boundary_rows(&p, &set, &ColumnLayout::uniform(1, 3), &basis).unwrap();
    assert!(block.rhs[0].abs() < 1e-15);

    let p = builtin("parabolic1d").unwrap();
    let mut set = PointSet::new(PointKind::Initial);
    set.push(vec![0.3, 0.0], 0);
    let block = assemble_boundary_rows(&p, &set, &ColumnLayout::uniform(1, 3), &basis).unwrap();
    assert!((block.rhs[0] - 2.0 * (PI * 0.3).sin()).abs() < 1e-15);
}

#[test]
fn boundary_owner_must_exist() {
    let p = builtin("helmholtz1d").unwrap();
    let basis = vec![monomials(cell(0, vec![(0.0, 2.0)]), 1)];
    let mut set = PointSet::new(PointKind::Boundary);
    set.push(vec![0.0], 3);
    assert!(matches!(
        assemble_boundary_rows(&p, &set, &ColumnLayout::uniform(1, 2), &basis),
        Err(Error::MissingOwner(3))
    ));
}

fn two_cell_interface(order: usize) -> InterfaceSpec {
    InterfaceSpec {
        left: 0,
        right: 1,
        axis: 0,
        facet_bounds: vec![(1.0, 1.0)],
        continuity_order: order,
    }
}

#[test]
fn continuity_rows_on_monomials() {
    let left = monomials(cell(0, vec![(0.0, 1.0)]), 1);
    let right = monomials(cell(1, vec![(1.0, 2.0)]), 1);
    let layout = ColumnLayout::uniform(2, 2);
    let pts = vec![vec![1.0]];

    let c0 = assemble_continuity_rows(&two_cell_interface(0), &pts, &layout, &left, &right).unwrap();
    assert_eq!(c0.to_dense().row(0).to_vec(), vec![1.0, 1.0, -1.0, -1.0]);
    assert_eq!(c0.rhs, vec![0.0]);

    let c1 = assemble_continuity_rows(&two_cell_interface(1), &pts, &layout, &left, &right).unwrap();
    let d = c1.to_dense();
    assert_eq!(d.nrows(), 2);
    assert_eq!(d.row(0).to_vec(), vec![1.0, 1.0, -1.0, -1.0]);
    assert_eq!(d.row(1).to_vec(), vec![0.0, 1.0, 0.0, -1.0]);
    assert_eq!(c1.meta[1].order, 1);
}

#[test]
fn continuity_order_above_two_is_unavailable() {
    let left = monomials(cell(0, vec![(0.0, 1.0)]), 3);
    let right = monomials(cell(1, vec![(1.0, 2.0)]), 3);
    let r = assemble_continuity_rows(&two_cell_interface(3), &[vec![1.0]], &ColumnLayout::uniform(2, 4), &left, &right);
    assert!(matches!(r, Err(Error::UnsupportedDerivative(_))));
}

#[test]
fn identical_networks_cancel_across_an_interface() {
    let cfg = NetworkConfig::new(1, vec![6], 5);
    let params = init_params(&cfg, InitMode::Glorot, 11, 0).unwrap();
    // Same width so the local normalization of the shared point agrees.
    let left = NeuralBasis::new(params.clone(), cell(0, vec![(0.0, 1.0)]));
    let right = NeuralBasis::new(params, cell(1, vec![(0.0, 1.0)]));
    let iface = InterfaceSpec {
        facet_bounds: vec![(0.4, 0.4)],
        ..two_cell_interface(2)
    };
    let block = assemble_continuity_rows(&iface, &[vec![0.4]], &ColumnLayout::uniform(2, 5), &left, &right).unwrap();
    let beta: Vec<f64> = [0.3, -1.2, 0.7, 2.0, 0.1].repeat(2);
    assert!(block.apply(&beta).iter().all(|&v| v == 0.0));
}

#[test]
fn single_block_system_equals_the_block() {
    let p = builtin("helmholtz1d").unwrap();
    let basis = monomials(cell(0, vec![(0.0, 2.0)]), 3);
    let pts = vec![vec![0.5], vec![1.0], vec![1.7]];
    let layout = ColumnLayout::uniform(1, 4);
    let batch = basis.eval_batch(&pts, &p.required_derivs()).unwrap();
    let block = assemble_pde_rows(&p, 0, &layout, &pts, &batch, None).unwrap();
    let sys = assemble_global(std::slice::from_ref(&block), &layout).unwrap();
    let dense = block.to_dense();
    for i in 0..3 {
        for j in 0..4 {
            assert_eq!(sys.matrix[(i, j)], dense[(i, j)]);
        }
    }
    assert_eq!(sys.rhs, block.rhs);
}

#[test]
fn width_mismatch_is_rejected() {
    let p = builtin("helmholtz1d").unwrap();
    let basis = monomials(cell(0, vec![(0.0, 2.0)]), 1);
    let pts = vec![vec![0.5]];
    let batch = basis.eval_batch(&pts, &p.required_derivs()).unwrap();
    let block = assemble_pde_rows(&p, 0, &ColumnLayout::uniform(1, 2), &pts, &batch, None).unwrap();
    assert!(matches!(
        assemble_global(&[block], &ColumnLayout::uniform(2, 2)),
        Err(Error::WidthMismatch { expected: 4, found: 2 })
    ));
}

#[test]
fn blocks_are_stacked_by_kind() {
    let (sys, _, _) = cubic_system();
    let mut sorted = sys.kinds.clone();
    sorted.sort();
    assert_eq!(sys.kinds, sorted);
    assert_eq!(sys.rows_of(RowKind::Pde), 0..16);
    assert_eq!(sys.rows_of(RowKind::Boundary), 16..18);
    assert_eq!(sys.rows_of(RowKind::Continuity), 18..20);
}

#[test]
fn four_subdomain_shape() {
    let p = builtin("helmholtz1d").unwrap();
    let part = partition(&p.domain, &PartitionSpec::new(vec![4]).with_continuity(vec![1])).unwrap();
    let mut cfg = NetworkConfig::new(1, vec![], 100);
    cfg.init_range = 1.0;
    let providers: Vec<NeuralBasis> = part
        .subdomains
        .iter()
        .map(|s| NeuralBasis::new(init_params(&cfg, InitMode::UniformRange, 1, s.index as u64).unwrap(), s.clone()))
        .collect();
    let layout = ColumnLayout::from_providers(&providers);
    let blocks = all_blocks(&p, &part, &providers, 50, &layout);
    let sys = assemble_global(&blocks, &layout).unwrap();
    assert_eq!((sys.nrows(), sys.ncols()), (208, 400));
}

#[test]
fn single_subdomain_has_no_continuity_rows() {
    let p = cubic_problem();
    let part = partition(&p.domain, &PartitionSpec::new(vec![1]).with_continuity(vec![1])).unwrap();
    let providers = vec![MonomialBasis::total_degree(part.subdomains[0].clone(), 5)];
    let layout = ColumnLayout::from_providers(&providers);
    let sys = assemble_global(&all_blocks(&p, &part, &providers, 8, &layout), &layout).unwrap();
    assert!(sys.rows_of(RowKind::Continuity).is_empty());
    assert_eq!(sys.nrows(), 10);
}

/// Global solution at `x`, evaluated through the owning subdomain's basis.
fn evaluate<P: BasisProvider>(part: &Partition, providers: &[P], layout: &ColumnLayout, beta: &[f64], x: &[f64]) -> f64 {
    let k = part.locate(x).unwrap();
    let batch = providers[k].eval_batch(&[x.to_vec()], &DerivSet::value_only()).unwrap();
    let phi = batch.get(Deriv::Value).unwrap();
    layout.columns(k).enumerate().map(|(j, c)| phi[(0, j)] * beta[c]).sum()
}

#[test]
fn polynomial_solution_in_the_span_is_recovered() {
    let (sys, part, providers) = cubic_system();
    let (beta, res) = sys.solve(false).unwrap();
    assert!(res < 1e-10, "residual {res}");
    let mut worst: f64 = 0.0;
    for i in 0..=200 {
        let x = 2.0 * i as f64 / 200.0;
        let u = evaluate(&part, &providers, &sys.layout, &beta, &[x]);
        worst = worst.max((u - (x * x * x - 2.0 * x)).abs());
    }
    assert!(worst <= 1e-10, "linf {worst}");
}

#[test]
fn rows_touch_only_their_own_blocks() {
    let p = builtin("poisson2d").unwrap();
    let part = partition(&p.domain, &PartitionSpec::new(vec![2, 2]).with_continuity(vec![1, 1])).unwrap();
    let cfg = NetworkConfig::new(2, vec![4], 5);
    let providers: Vec<NeuralBasis> = part
        .subdomains
        .iter()
        .map(|s| NeuralBasis::new(init_params(&cfg, InitMode::Glorot, 3, s.index as u64).unwrap(), s.clone()))
        .collect();
    let layout = ColumnLayout::from_providers(&providers);
    let sys = assemble_global(&all_blocks(&p, &part, &providers, 4, &layout), &layout).unwrap();
    for i in 0..sys.nrows() {
        let touched: Vec<usize> = (0..4)
            .filter(|&k| layout.columns(k).any(|c| sys.matrix[(i, c)] != 0.0))
            .collect();
        let expected = &sys.meta[i].subdomains;
        match sys.kinds[i] {
            RowKind::Pde | RowKind::Boundary => assert_eq!(&touched, expected, "row {i}"),
            RowKind::Continuity => {
                assert!(touched.iter().all(|k| expected.contains(k)), "row {i}");
                assert_eq!(expected.len(), 2);
            }
        }
    }
    // value-order continuity rows see both sides
    let c = sys.rows_of(RowKind::Continuity);
    assert!((c.start..c.end).any(|i| {
        (0..4).filter(|&k| layout.columns(k).any(|col| sys.matrix[(i, col)] != 0.0)).count() == 2
    }));
}

fn permuted_solution(sys: &GlobalSystem, seed: u64) -> Vec<f64> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut perm: Vec<usize> = (0..sys.nrows()).collect();
    perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let a = Mat::from_fn(sys.nrows(), sys.ncols(), |i, j| sys.matrix[(perm[i], j)]);
    let b: Vec<f64> = perm.iter().map(|&i| sys.rhs[i]).collect();
    LeastSquares::factor(a.as_ref(), false).unwrap().solve(&b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn row_order_does_not_change_the_solution(seed in 0u64..u64::MAX) {
        let (sys, _, _) = cubic_system();
        let (beta, _) = sys.solve(false).unwrap();
        let shuffled = permuted_solution(&sys, seed);
        let diff = beta.iter().zip(&shuffled).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-10, "{diff}");
    }
}

#[test]
fn row_order_does_not_change_a_neural_solution() {
    let p = builtin("helmholtz1d").unwrap();
    let part = partition(&p.domain, &PartitionSpec::new(vec![2]).with_continuity(vec![1])).unwrap();
    let cfg = NetworkConfig::new(1, vec![], 4);
    // few, well-separated features keep the system well conditioned
    let providers: Vec<NeuralBasis> = part
        .subdomains
        .iter()
        .map(|s| NeuralBasis::new(init_params(&cfg, InitMode::Glorot, 5, s.index as u64).unwrap(), s.clone()))
        .collect();
    let layout = ColumnLayout::from_providers(&providers);
    let sys = assemble_global(&all_blocks(&p, &part, &providers, 20, &layout), &layout).unwrap();
    let (beta, _) = sys.solve(false).unwrap();
    for seed in 0..4 {
        let shuffled = permuted_solution(&sys, seed);
        let diff = beta.iter().zip(&shuffled).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-10, "{diff}");
    }
}

#[test]
fn csv_dump_has_one_line_per_row() {
    let (sys, _, _) = cubic_system();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("system.csv");
    sys.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), sys.nrows() + 1);
    assert_eq!(text.lines().next().unwrap().split(',').count(), sys.ncols() + 1);
}

#[test]
fn apply_matches_the_dense_product() {
    let (sys, _, _) = cubic_system();
    let beta: Vec<f64> = (0..sys.ncols()).map(|j| (j as f64).sin()).collect();
    let p = cubic_problem();
    let part = partition(&p.domain, &PartitionSpec::new(vec![2]).with_continuity(vec![1])).unwrap();
    let providers: Vec<MonomialBasis> = part
        .subdomains
        .iter()
        .map(|s| MonomialBasis::total_degree(s.clone(), 5))
        .collect();
    let layout = ColumnLayout::from_providers(&providers);
    let mut row = 0;
    let mut blocks = all_blocks(&p, &part, &providers, 8, &layout);
    blocks.sort_by_key(|b| b.kind);
    for block in &blocks {
        for v in block.apply(&beta) {
            let dense: f64 = (0..sys.ncols()).map(|j| sys.matrix[(row, j)] * beta[j]).sum();
            assert!((v - dense).abs() <= 1e-12 * dense.abs().max(1.0));
            row += 1;
        }
    }
}
