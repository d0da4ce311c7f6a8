use obcouple::experiments::{self, canned_config, parse_config, ExperimentKind};
use obcouple::geometry::{build_families, generate_point_cloud, PartialVolumeRule};
use obcouple::io;
use obcouple::lps::{InfluenceFunction, InfluenceKind};
use obcouple::verification::{ConvergenceReport, LevelResult};
use obcouple::{BoxUnion, Error, MaterialParams};

fn key_of(e: Error) -> (String, Option<usize>) {
    match e {
        Error::Config { key, line, .. } => (key, line),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn bar_defaults_convert_units() {
    let cfg = canned_config(ExperimentKind::BarDirichlet).unwrap();
    assert_eq!(cfg.horizon, 1.0);
    let p = cfg.material_params().unwrap();
    assert!((p.bulk - 140_000.0).abs() < 1e-9);
    assert!((p.shear - 64_615.384_615).abs() < 1e-3);
    assert!((p.shear - 3.0 * 140_000.0 * 0.4 / 2.6).abs() < 1e-9);
    let resolved = cfg.resolved().unwrap();
    assert_eq!(resolved.material.bulk_modulus_mpa, Some(p.bulk));
    assert_eq!(resolved.material_params().unwrap(), p);
}

#[test]
fn user_file_overrides_defaults_per_key() {
    let cfg = parse_config(
        r#"
experiment = "bar-dirichlet"
h = 0.5

[optimizer]
memory = 7
"#,
    )
    .unwrap();
    assert_eq!(cfg.h, 0.5);
    assert_eq!(cfg.optimizer.memory, 7);
    let canned = canned_config(ExperimentKind::BarDirichlet).unwrap();
    assert_eq!(cfg.optimizer.gradient_tolerance, canned.optimizer.gradient_tolerance);
    assert_eq!(cfg.geometry, canned.geometry);
    assert_eq!(cfg.loads, canned.loads);
}

#[test]
fn material_table_replaces_as_a_whole() {
    let cfg = parse_config(
        r#"
experiment = "bar-neumann"
[material]
bulk_modulus_mpa = 140000.0
shear_modulus_mpa = 64615.4
"#,
    )
    .unwrap();
    let p = cfg.material_params().unwrap();
    assert_eq!((p.bulk, p.shear), (140_000.0, 64_615.4));
    assert!(cfg.material.poisson_ratio.is_none());

    let err = parse_config("experiment = \"bar-neumann\"\n[material]\nbulk_modulus_gpa = 140.0\nbulk_modulus_mpa = 1.0\npoisson_ratio = 0.3\n")
        .unwrap_err();
    assert_eq!(key_of(err).0, "material");
}

#[test]
fn thin_layer_is_a_hard_error_under_the_strict_rule() {
    let text = "experiment = \"bar-dirichlet\"\nlayer_rule = \"strict\"\n";
    let (key, line) = key_of(parse_config(text).unwrap_err());
    assert_eq!(key, "geometry.eta_c");
    assert_eq!(line, None);
    assert!(parse_config("experiment = \"bar-dirichlet\"\n").is_ok());
}

#[test]
fn custom_experiment_needs_a_material() {
    let text = r#"
experiment = "custom"
h = 1.0
horizon = 2.0
"#;
    let (key, _) = key_of(parse_config(text).unwrap_err());
    assert_eq!(key, "material");
}

#[test]
fn unknown_keys_are_rejected_with_their_line() {
    let text = "experiment = \"patch-test\"\n\n[optimizer]\nmemroy = 3\n";
    let (key, line) = key_of(parse_config(text).unwrap_err());
    assert_eq!(key, "optimizer.memroy");
    assert_eq!(line, Some(4));
    let (key, _) = key_of(parse_config("colour = 1\n").unwrap_err());
    assert_eq!(key, "colour");
    let (key, line) = key_of(parse_config("experiment = \"patch-test\"\nh = -1.0\n").unwrap_err());
    assert_eq!((key.as_str(), line), ("h", Some(2)));
}

#[test]
fn resolved_config_round_trips() {
    for kind in [ExperimentKind::PatchTest, ExperimentKind::Converge, ExperimentKind::BarDirichlet, ExperimentKind::BarNeumann] {
        let cfg = canned_config(kind).unwrap().resolved().unwrap();
        let text = cfg.to_toml().unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg, "{kind:?}");
        assert_eq!(back.material_params().unwrap(), cfg.material_params().unwrap());
    }
}

#[test]
fn converge_levels_are_checked() {
    let bad = "experiment = \"converge\"\n[converge]\nh_levels = [0.1, 0.2, 0.05]\n";
    assert_eq!(key_of(parse_config(bad).unwrap_err()).0, "converge.h_levels");
    let two = "experiment = \"converge\"\n[converge]\nh_levels = [0.125, 0.1]\n";
    assert_eq!(key_of(parse_config(two).unwrap_err()).0, "converge.h_levels");
    let unfit = "experiment = \"converge\"\n[converge]\nh_levels = [0.125, 0.1]\nfit_rate = false\n";
    assert!(parse_config(unfit).is_ok());
}

#[test]
fn vtk_cloud_round_trips_through_a_text_parser() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = canned_config(ExperimentKind::PatchTest).unwrap();
    cfg.h = 0.25;
    cfg.horizon = 0.25;
    let s = experiments::build_setup(&cfg, 0.25, 0.25).unwrap();
    let u: Vec<f64> = (0..3 * s.cloud.len()).map(|i| i as f64 * 0.5).collect();
    let path = dir.path().join("cloud.vtk");
    io::write_nonlocal_vtk(&path, &s, &u).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let n = s.cloud.len();
    assert_eq!(lines[4], format!("POINTS {n} double"));
    let at = lines.iter().position(|l| *l == "VECTORS displacement double").unwrap();
    let parsed: Vec<f64> = lines[at + 1..at + 1 + n].iter().flat_map(|l| l.split(' ').map(|v| v.parse::<f64>().unwrap())).collect();
    assert_eq!(parsed, u);
    assert!(lines.contains(&"VECTORS force_density double"));
    let xs: Vec<f64> = lines[5..5 + n].iter().flat_map(|l| l.split(' ').map(|v| v.parse::<f64>().unwrap())).collect();
    assert_eq!(xs, s.cloud.positions.iter().flatten().copied().collect::<Vec<_>>());

    // identical inputs, identical bytes
    let again = dir.path().join("again.vtk");
    io::write_nonlocal_vtk(&again, &s, &u).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());

    let mesh_path = dir.path().join("mesh.vtk");
    io::write_local_vtk(&mesh_path, &s.mesh, &vec![0.0; 3 * s.mesh.num_nodes()]).unwrap();
    let text = std::fs::read_to_string(&mesh_path).unwrap();
    assert!(text.contains(&format!("CELLS {} {}", s.mesh.num_cells(), 9 * s.mesh.num_cells())));
    assert_eq!(text.lines().filter(|l| *l == "12").count(), s.mesh.num_cells());
}

#[test]
fn eight_point_cloud_file() {
    let dir = tempfile::tempdir().unwrap();
    // the writer only needs the cloud and its families
    let cloud = generate_point_cloud(&BoxUnion::single([0.0; 3], [1.0; 3]).unwrap(), 0.5).unwrap();
    assert_eq!(cloud.len(), 8);
    let family = build_families(&cloud, 0.6, PartialVolumeRule::Linear).unwrap();
    let params = MaterialParams::from_bulk_poisson(140_000.0, 0.3).unwrap();
    let mut s = experiments::build_setup(&canned_config(ExperimentKind::PatchTest).unwrap(), 0.25, 0.25).unwrap();
    s.cloud = cloud;
    s.family = family;
    s.params = params;
    s.influence = InfluenceFunction::new(InfluenceKind::Constant, 0.6).unwrap();
    let path = dir.path().join("eight.vtk");
    io::write_nonlocal_vtk(&path, &s, &[0.1; 24]).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("POINTS 8 double"));
    let at = text.lines().position(|l| l == "VECTORS displacement double").unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[at + 1..at + 9].iter().all(|l| *l == "0.1 0.1 0.1"));
    assert_eq!(lines[at + 9], "VECTORS force_density double");
}

#[test]
fn convergence_csv_leaves_first_rates_empty() {
    let dir = tempfile::tempdir().unwrap();
    let levels = [0.2, 0.1, 0.05]
        .iter()
        .map(|&h| LevelResult { h, delta: 0.3, error_n: h, error_l: h * h, objective: 0.0, iterations: 3 })
        .collect();
    let report = ConvergenceReport::from_levels(levels, true);
    let path = dir.path().join("c.csv");
    io::write_convergence_csv(&path, &report).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0], "h,error_n,error_l,rate_n,rate_l");
    assert!(rows[1].ends_with(",,"));
    let last: Vec<f64> = rows[3].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[3] - 1.0).abs() < 1e-12 && (last[4] - 2.0).abs() < 1e-12);
}

#[test]
fn unwritable_path_is_an_io_error() {
    let report = ConvergenceReport::from_levels(vec![], false);
    let err = io::write_convergence_csv(std::path::Path::new("/nonexistent-dir/x.csv"), &report).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn patch_test_run_writes_a_reproducible_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = canned_config(ExperimentKind::PatchTest).unwrap();
    cfg.h = 0.125;
    cfg.horizon = 0.25;
    let a = experiments::run_experiment(&cfg, &dir.path().join("a")).unwrap();
    let b = experiments::run_experiment(&cfg, &dir.path().join("b")).unwrap();
    assert!(a.converged);
    assert!(a.mismatch_rms <= 1e-9);
    assert!(a.error_n.unwrap() <= 1e-9 && a.error_l.unwrap() <= 1e-9);
    for f in ["summary.json", "nonlocal.vtk", "local.vtk", "history.csv"] {
        let (x, y) = (std::fs::read(dir.path().join("a").join(f)).unwrap(), std::fs::read(dir.path().join("b").join(f)).unwrap());
        assert_eq!(x, y, "{f}");
    }
    // the embedded config reproduces the run
    let echo: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("a/summary.json")).unwrap()).unwrap();
    let again: obcouple::ExperimentConfig = serde_json::from_value(echo["config"].clone()).unwrap();
    assert_eq!(again, cfg.resolved().unwrap());
    assert_eq!(b.iterations, a.iterations);
}
