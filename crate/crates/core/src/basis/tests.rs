use approx::assert_abs_diff_eq;
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;

use super::*;

fn interval(a: f64, b: f64) -> SubdomainSpec {
    SubdomainSpec {
        index: 0,
        multi_index: vec![0],
        bounds: vec![(a, b)],
    }
}

fn square() -> SubdomainSpec {
    SubdomainSpec {
        index: 3,
        multi_index: vec![1, 1],
        bounds: vec![(0.5, 1.0), (0.5, 1.25)],
    }
}

fn all_second(dim: usize) -> DerivSet {
    let mut v = vec![Deriv::Value];
    for a in 0..dim {
        v.push(Deriv::First(a));
        for b in a..dim {
            v.push(Deriv::Second(a, b));
        }
    }
    DerivSet::new(v)
}

fn values_at(params: &NetworkParams, sub: &SubdomainSpec, p: &[f64]) -> Array1<f64> {
    eval_basis(params, sub, p, &DerivSet::value_only())
        .unwrap()
        .values()
        .unwrap()
        .to_owned()
}

fn channel_at(params: &NetworkParams, sub: &SubdomainSpec, p: &[f64], d: Deriv) -> Array1<f64> {
    eval_basis(params, sub, p, &DerivSet::new([d]))
        .unwrap()
        .get(d)
        .unwrap()
        .to_owned()
}

/// First derivatives against central differences of the values, second
/// derivatives against central differences of the first-derivative channel.
fn check_against_fd(params: &NetworkParams, sub: &SubdomainSpec, p: &[f64]) {
    let dim = p.len();
    let ev = eval_basis(params, sub, p, &all_second(dim)).unwrap();
    let h = 1e-5;
    let shifted = |axis: usize, delta: f64| {
        let mut q = p.to_vec();
        q[axis] += delta;
        q
    };
    let close = |x: f64, y: f64| (x - y).abs() <= (1e-6 * y.abs()).max(1e-8);
    for a in 0..dim {
        let fd = (values_at(params, sub, &shifted(a, h)) - values_at(params, sub, &shifted(a, -h))) / (2.0 * h);
        for (x, y) in ev.first(a).unwrap().iter().zip(&fd) {
            assert!(close(*x, *y), "d/dx{a}: {x} vs {y}");
        }
        for b in 0..dim {
            let g = Deriv::First(a);
            let fd = (channel_at(params, sub, &shifted(b, h), g) - channel_at(params, sub, &shifted(b, -h), g)) / (2.0 * h);
            for (x, y) in ev.get(Deriv::second(a, b)).unwrap().iter().zip(&fd) {
                assert!(close(*x, *y), "d2/dx{a}dx{b}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn derivatives_match_finite_differences_for_each_depth() {
    for depth in 0..=3 {
        for act in [SubspaceActivation::Tanh, SubspaceActivation::Affine] {
            let mut cfg = NetworkConfig::new(2, vec![7; depth], 5);
            cfg.subspace_activation = act;
            let params = init_params(&cfg, InitMode::Glorot, 11 + depth as u64, 0).unwrap();
            check_against_fd(&params, &square(), &[0.7, 0.9]);
            check_against_fd(&params, &square(), &[0.55, 1.2]);
        }
    }
}

#[test]
fn derivatives_match_finite_differences_in_one_dimension() {
    let cfg = NetworkConfig::new(1, vec![10, 10], 6);
    let params = init_params(&cfg, InitMode::UniformRange, 3, 1).unwrap();
    check_against_fd(&params, &interval(2.0, 4.0), &[3.1]);
}

#[test]
fn single_unit_closed_form() {
    // one tanh unit with weight w and bias c on [a, b]:
    // phi = tanh(w z + c), z = 2 (x - a) / (b - a) - 1
    let (a, b, w, c) = (1.0, 3.0, 0.8, -0.3);
    let params = NetworkParams {
        layers: vec![DenseLayer {
            weights: array![[w]],
            bias: array![c],
        }],
        subspace_activation: SubspaceActivation::Tanh,
    };
    let x = 2.4;
    let k = 2.0 / (b - a);
    let t = (w * (k * (x - a) - 1.0) + c).tanh();
    let ev = eval_basis(&params, &interval(a, b), &[x], &all_second(1)).unwrap();
    assert_abs_diff_eq!(ev.values().unwrap()[0], t, epsilon = 1e-15);
    assert_abs_diff_eq!(ev.first(0).unwrap()[0], (1.0 - t * t) * w * k, epsilon = 1e-15);
    assert_abs_diff_eq!(
        ev.second(0).unwrap()[0],
        -2.0 * t * (1.0 - t * t) * (w * k).powi(2),
        epsilon = 1e-15
    );
}

#[test]
fn zero_network_gives_zero_basis() {
    let mut cfg = NetworkConfig::new(2, vec![4, 4], 3);
    cfg.init_range = 0.0;
    let params = init_params(&cfg, InitMode::UniformRange, 0, 0).unwrap();
    let batch = eval_basis_batch(&params, &square(), &[vec![0.6, 0.6], vec![1.0, 1.25]], &all_second(2)).unwrap();
    for d in batch.derivs().collect::<Vec<_>>() {
        assert!(batch.get(d).unwrap().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn point_outside_subdomain_is_rejected() {
    let cfg = NetworkConfig::new(1, vec![3], 2);
    let params = init_params(&cfg, InitMode::Glorot, 0, 0).unwrap();
    let err = eval_basis(&params, &interval(0.0, 1.0), &[1.5], &DerivSet::value_only()).unwrap_err();
    assert!(matches!(err, Error::PointOutside { .. }));
}

#[test]
fn width_and_seed_determine_the_network() {
    let cfg = NetworkConfig::new(2, vec![5, 5], 4);
    let a = init_params(&cfg, InitMode::Glorot, 9, 2).unwrap();
    let b = init_params(&cfg, InitMode::Glorot, 9, 2).unwrap();
    let c = init_params(&cfg, InitMode::Glorot, 9, 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.num_params(), 5 * 2 + 5 + 5 * 5 + 5 + 4 * 5 + 4);
    let bound = (6.0f64 / 7.0).sqrt();
    assert!(a.layers[0].weights.iter().all(|w| w.abs() <= bound));
}

#[test]
fn fan_in_bounds_follow_each_layer() {
    let cfg = NetworkConfig::new(1, vec![50, 50], 20);
    let p = init_params(&cfg, InitMode::FanIn, 4, 0).unwrap();
    let first = &p.layers[0];
    assert!(first.weights.iter().chain(first.bias.iter()).all(|w| w.abs() <= 1.0));
    // the 1-wide input layer should not collapse to tiny slopes
    assert!(first.weights.iter().any(|w| w.abs() > 0.5));
    let bound = 1.0 / 50f64.sqrt();
    for layer in &p.layers[1..] {
        assert!(layer.weights.iter().chain(layer.bias.iter()).all(|w| w.abs() <= bound));
    }
}

#[test]
fn json_round_trip_is_exact() {
    let cfg = NetworkConfig::new(2, vec![3], 4);
    let params = init_params(&cfg, InitMode::Glorot, 5, 0).unwrap();
    let back = NetworkParams::from_json(&params.to_json().unwrap()).unwrap();
    assert_eq!(params, back);
}

#[test]
fn json_with_bad_shape_is_rejected() {
    let text = r#"{"subspace_activation":"tanh","layers":[{"rows":2,"cols":1,"weights":[1.0],"bias":[0.0,0.0]}]}"#;
    assert!(NetworkParams::from_json(text).is_err());
}

#[test]
fn solution_is_linear_in_coefficients() {
    let cfg = NetworkConfig::new(1, vec![6], 5);
    let params = init_params(&cfg, InitMode::Glorot, 1, 0).unwrap();
    let ev = eval_basis(&params, &interval(0.0, 2.0), &[0.3], &all_second(1)).unwrap();
    let b1 = Array2::from_shape_fn((5, 1), |(i, _)| i as f64 - 1.5);
    let b2 = Array2::from_shape_fn((5, 1), |(i, _)| (i as f64).sin());
    let u1 = &eval_solution(&ev, b1.view()).unwrap()[0];
    let u2 = &eval_solution(&ev, b2.view()).unwrap()[0];
    let sum = &eval_solution(&ev, (&b1 * 2.0 + &b2).view()).unwrap()[0];
    for (d, v) in sum.iter() {
        let expect = 2.0 * u1.get(d).unwrap() + u2.get(d).unwrap();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-13);
    }
}

#[test]
fn coefficient_blocks_are_contiguous() {
    let c = CoefficientVector::from_flat(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    assert_eq!(c.block_column(1).to_vec(), vec![3.0, 4.0]);
}

proptest! {
    #[test]
    fn flatten_round_trips(seed in 0u64..1000, h in 1usize..5, m in 1usize..6) {
        let cfg = NetworkConfig::new(2, vec![h, h + 1], m);
        let params = init_params(&cfg, InitMode::Glorot, seed, 0).unwrap();
        let mut other = NetworkParams::zeros(&cfg);
        other.assign_flat(&params.flatten());
        prop_assert_eq!(params, other);
    }

    #[test]
    fn normalized_coordinates_stay_in_unit_box(x in 0.5f64..=1.0, y in 0.5f64..=1.25) {
        let (z, chain) = normalize(&[x, y], &square()).unwrap();
        prop_assert!(z.iter().all(|v| (-1.0..=1.0).contains(v)));
        prop_assert!((chain[0] - 4.0).abs() < 1e-15);
        prop_assert!((chain[1] - 2.0 / 0.75).abs() < 1e-15);
    }
}
