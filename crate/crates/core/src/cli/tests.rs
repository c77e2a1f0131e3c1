use super::*;

const MINIMAL: &str = r#"{
  "problem": "helmholtz1d",
  "partition": { "counts": [2] },
  "sampling": { "interior": [10] }
}"#;

fn config_error_path(text: &str) -> String {
    match RunConfig::from_json(text) {
        Err(Error::Config { path, .. }) => path,
        Err(e) => panic!("expected a config error, got {e}"),
        Ok(_) => panic!("config was accepted"),
    }
}

#[test]
fn minimal_config_fills_defaults() {
    let c = RunConfig::from_json(MINIMAL).unwrap();
    assert_eq!(c.problem, ProblemRef::Builtin("helmholtz1d".into()));
    assert_eq!(c.network.hidden, vec![100, 100]);
    assert_eq!(c.network.subspace_dim, 100);
    assert_eq!(c.output.dir, PathBuf::from("out"));
    assert!(c.output.training_log);
    assert!(!c.solver.equilibrate);
    assert!(c.nonlinear.is_none());
    let setup = c.setup().unwrap();
    assert_eq!(setup.counts, vec![2]);
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    let text = MINIMAL.replace(r#""counts": [2]"#, r#""counts": [2], "overlap": 1"#);
    assert_eq!(config_error_path(&text), "partition.overlap");
    let text = MINIMAL.replace(r#""interior": [10]"#, r#""interior": [10], "jitter": true"#);
    assert_eq!(config_error_path(&text), "sampling.jitter");
}

#[test]
fn type_errors_point_at_the_field() {
    let text = MINIMAL.replace(r#""counts": [2]"#, r#""counts": ["two"]"#);
    assert_eq!(config_error_path(&text), "partition.counts[0]");
}

#[test]
fn wrong_dimension_counts_fail_setup_with_a_path() {
    let text = MINIMAL.replace(r#""counts": [2]"#, r#""counts": [2, 2]"#);
    let c = RunConfig::from_json(&text).unwrap();
    match c.setup() {
        Err(Error::Config { path, .. }) => assert_eq!(path, "partition.counts"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_problem_names_are_config_errors() {
    let text = MINIMAL.replace("helmholtz1d", "wave3d");
    let err = RunConfig::from_json(&text).unwrap().setup().unwrap_err();
    assert!(err.is_config());
    assert!(err.to_string().contains("wave3d"));
}

#[test]
fn inline_custom_problems_parse_and_report_nested_paths() {
    let text = r#"{
      "problem": { "custom": {
        "axes": [{ "name": "x", "lower": 0, "upper": 1 }],
        "linear": [{ "derivative": [2], "coefficient": "1" }],
        "exact": "sin(x)"
      }},
      "partition": { "counts": [2] },
      "sampling": { "interior": [8] }
    }"#;
    let c = RunConfig::from_json(text).unwrap();
    assert!(matches!(c.problem, ProblemRef::Custom(_)));
    let setup = c.setup().unwrap();
    assert_eq!(setup.problem.dim(), 1);

    let bad = text.replace(r#""derivative": [2]"#, r#""derivative": [3]"#);
    let err = RunConfig::from_json(&bad).unwrap().setup().unwrap_err();
    match err {
        Error::Config { path, .. } => assert!(path.starts_with("problem.custom.linear[0]"), "{path}"),
        other => panic!("{other:?}"),
    }

    let extra = text.replace(r#"{ "custom": {"#, r#"{ "other": 1, "custom": {"#);
    assert!(RunConfig::from_json(&extra).unwrap_err().is_config());
}

#[test]
fn sweep_values_apply_to_the_right_field() {
    let c = RunConfig::from_json(MINIMAL).unwrap();
    let v = apply_sweep_value(&c, SweepAxis::SubspaceDim, "40", 1).unwrap();
    assert_eq!(v.network.subspace_dim, 40);
    let v = apply_sweep_value(&c, SweepAxis::Subdomains, "8", 1).unwrap();
    assert_eq!(v.partition.counts, vec![8]);
    let v = apply_sweep_value(&c, SweepAxis::Subdomains, "4x2", 2).unwrap();
    assert_eq!(v.partition.counts, vec![4, 2]);
    let v = apply_sweep_value(&c, SweepAxis::Subdomains, "3", 2).unwrap();
    assert_eq!(v.partition.counts, vec![3, 3]);
    let v = apply_sweep_value(&c, SweepAxis::HiddenLayers, "3", 1).unwrap();
    assert_eq!(v.network.hidden, vec![100, 100, 100]);
    let v = apply_sweep_value(&c, SweepAxis::HiddenLayers, "0", 1).unwrap();
    assert!(v.network.hidden.is_empty());
    let v = apply_sweep_value(&c, SweepAxis::HiddenLayers, "50x20", 1).unwrap();
    assert_eq!(v.network.hidden, vec![50, 20]);
    let v = apply_sweep_value(&c, SweepAxis::Sampling, "gauss", 1).unwrap();
    assert_eq!(v.sampling.strategy, SamplingStrategy::Gauss);
    let v = apply_sweep_value(&c, SweepAxis::Sampling, "25", 1).unwrap();
    assert_eq!(v.sampling.interior, vec![25]);
    let v = apply_sweep_value(&c, SweepAxis::Seed, "666", 1).unwrap();
    assert_eq!(v.training.seed, 666);
}

#[test]
fn malformed_sweep_values_are_config_errors() {
    let c = RunConfig::from_json(MINIMAL).unwrap();
    for (axis, v) in [
        (SweepAxis::SubspaceDim, "ten"),
        (SweepAxis::Subdomains, "2x2x2"),
        (SweepAxis::Sampling, "sobol"),
        (SweepAxis::Seed, "-1"),
    ] {
        assert!(apply_sweep_value(&c, axis, v, 1).unwrap_err().is_config(), "{axis} {v}");
    }
}

#[test]
fn coordinate_columns_name_time_last() {
    let p = crate::problems::builtin("burgers1d").unwrap();
    assert_eq!(coordinate_names(&p), vec!["x", "t"]);
    let p = crate::problems::builtin("poisson2d").unwrap();
    assert_eq!(coordinate_names(&p), vec!["x", "y"]);
}

#[test]
fn axis_names_round_trip_through_clap() {
    for axis in [
        SweepAxis::SubspaceDim,
        SweepAxis::Subdomains,
        SweepAxis::HiddenLayers,
        SweepAxis::Sampling,
        SweepAxis::Seed,
    ] {
        assert_eq!(SweepAxis::from_str(&axis.to_string(), false).unwrap(), axis);
    }
}

#[test]
fn cli_parses_sweep_values_as_a_list() {
    let cli = Cli::try_parse_from(["ddsnn", "sweep", "c.json", "--axis", "seed", "--values", "1,202,666"]).unwrap();
    match cli.command {
        Command::Sweep { axis, values, .. } => {
            assert_eq!(axis, SweepAxis::Seed);
            assert_eq!(values, vec!["1", "202", "666"]);
        }
        other => panic!("{other:?}"),
    }
}
