use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use liegraph::graph;
use nalgebra::{DMatrix, SymmetricEigen};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liegraph")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn field(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no {key} in\n{out}"))
        .trim()
        .to_string()
}

fn small_se2(dir: &Path, name: &str, extra: &[&str]) {
    let mut args = vec!["build-graph", "--kind", "se2", "--nx", "6", "--ny", "6", "--orient", "4"];
    args.extend_from_slice(&["--epsilon", "0.5", "--alpha", "1", "--out", name]);
    args.extend_from_slice(extra);
    let o = run(dir, &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn every_subcommand_prints_its_config_first() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_se2(d, "g.clgr", &[]);
    for args in [
        vec!["info", "g.clgr"],
        vec!["eigenmaps", "--graph", "g.clgr", "--k", "3"],
        vec!["diffuse", "--graph", "g.clgr", "--impulse", "0"],
        vec!["check-equivariance", "--graph", "g.clgr"],
        vec!["sample", "--graph", "g.clgr", "--edges", "0.5"],
        vec!["train-demo", "--epochs", "0", "--seed", "4"],
    ] {
        let o = run(d, &args);
        assert_eq!(code(&o), 0, "{args:?}");
        let first = stdout(&o).lines().next().unwrap().to_string();
        assert!(first.starts_with(&format!("config: {}", args[0])), "{first}");
    }
    let o = run(d, &["train-demo", "--epochs", "0", "--seed", "4"]);
    assert!(stdout(&o).contains("seed=4"));
}

#[test]
fn lifted_grid_size() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["build-graph", "--kind", "se2", "--nx", "28", "--ny", "28", "--orient", "6", "--epsilon", "0.3162", "--alpha", "1", "--knn", "16"],
    );
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(field(&out, "vertices:"), "4704");
    for key in ["edges:", "bandwidth t:", "lambda_max:", "neighbors:"] {
        field(&out, key);
    }
    // default output path
    assert!(dir.path().join("graph.clgr").exists());
}

#[test]
fn sphere_base_space_forces_isotropic_metric() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["build-graph", "--kind", "s2", "--level", "0", "--knn", "8"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(field(&out, "vertices:"), "12");
    assert!(out.contains("isotropic"));
    let (g, _) = graph::deserialize(&fs::read(dir.path().join("graph.clgr")).unwrap()).unwrap();
    assert_eq!((g.metric.epsilon(), g.metric.xi()), (1.0, 1.0));
}

#[test]
fn conflicting_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        &["build-graph", "--kind", "se2", "--nx", "4", "--ny", "4", "--orient", "2", "--alpha", "1", "--xi", "1"][..],
        &["build-graph", "--kind", "se2", "--nx", "4", "--ny", "4", "--orient", "2"],
        &["build-graph", "--kind", "se2", "--nx", "4", "--orient", "2", "--xi", "1"],
        &["build-graph", "--kind", "r2", "--nx", "4", "--ny", "4", "--orient", "2"],
        &["build-graph", "--kind", "s2", "--level", "1", "--nx", "3"],
        &["build-graph", "--kind", "torus"],
        &["sample", "--graph", "x.clgr", "--edges", "0.5", "--vertices", "0.5"],
        &["frobnicate"],
    ] {
        assert_eq!(code(&run(d, args)), 2, "{args:?}");
    }
}

#[test]
fn diffusion_at_zero_time_is_the_impulse() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_se2(d, "g.clgr", &[]);
    assert_eq!(code(&run(d, &["diffuse", "--graph", "g.clgr", "--impulse", "17", "--tau", "0", "--out", "d.csv"])), 0);
    let csv = fs::read_to_string(d.join("d.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("vertex_id,x,y,theta,value"));
    for (i, line) in lines.enumerate() {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(value, if i == 17 { 1.0 } else { 0.0 });
    }
}

#[test]
fn diffusion_total_matches_dense_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_se2(d, "g.clgr", &[]);
    let tau = 2.0;
    let o = run(d, &["diffuse", "--graph", "g.clgr", "--impulse", "40", "--tau", "2", "--out", "d.csv"]);
    assert_eq!(code(&o), 0);
    let total: f64 = fs::read_to_string(d.join("d.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();

    let (g, _) = graph::deserialize(&fs::read(d.join("g.clgr")).unwrap()).unwrap();
    let n = g.n_vertices();
    let deg = g.degrees();
    let mut lap = DMatrix::<f64>::identity(n, n);
    for (i, j, w) in g.adjacency.iter() {
        lap[(i, j)] -= w / (deg[i] * deg[j]).sqrt();
    }
    let eig = SymmetricEigen::new(lap);
    let heat = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (-tau * l).exp()))
        * eig.eigenvectors.transpose();
    let oracle: f64 = heat.column(40).sum();
    assert!((total - oracle).abs() < 1e-6, "{total} vs {oracle}");
    let ratio: f64 = field(&stdout(&o), "anisotropy:").rsplit(' ').next().unwrap().parse().unwrap();
    assert!(ratio > 1.0, "{ratio}");
}

#[test]
fn impulse_out_of_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    small_se2(dir.path(), "g.clgr", &[]);
    assert_eq!(code(&run(dir.path(), &["diffuse", "--graph", "g.clgr", "--impulse", "144"])), 2);
}

#[test]
fn equivariance_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_se2(d, "sq.clgr", &[]);
    small_se2(d, "lo.clgr", &["--ties", "lower-id"]);
    let o = run(d, &["build-graph", "--kind", "se2", "--nx", "6", "--ny", "4", "--orient", "4", "--xi", "1", "--out", "rect.clgr"]);
    assert_eq!(code(&o), 0);

    assert_eq!(code(&run(d, &["check-equivariance", "--graph", "sq.clgr", "--quarter-turns", "1"])), 0);
    let o = run(d, &["check-equivariance", "--graph", "sq.clgr", "--quarter-turns", "0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(field(&stdout(&o), "relative Frobenius error:").parse::<f64>().unwrap(), 0.0);
    assert_eq!(code(&run(d, &["check-equivariance", "--graph", "lo.clgr"])), 1);
    assert_eq!(code(&run(d, &["check-equivariance", "--graph", "rect.clgr"])), 2);
}

#[test]
fn first_eigenmap_row_is_the_null_space() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_se2(d, "g.clgr", &[]);
    assert_eq!(code(&run(d, &["eigenmaps", "--graph", "g.clgr", "--k", "5", "--out", "e.csv"])), 0);
    let csv = fs::read_to_string(d.join("e.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("k,lambda,v0,v1"));
    let lambda0: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!(lambda0.abs() <= 1e-9);
    assert_eq!(code(&run(d, &["eigenmaps", "--graph", "g.clgr", "--k", "0"])), 2);
}

#[test]
fn full_edge_sample_keeps_the_edge_set() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_se2(d, "g.clgr", &[]);
    assert_eq!(code(&run(d, &["sample", "--graph", "g.clgr", "--edges", "1.0", "--out", "s.clgr"])), 0);
    let (a, _) = graph::deserialize(&fs::read(d.join("g.clgr")).unwrap()).unwrap();
    let (b, _) = graph::deserialize(&fs::read(d.join("s.clgr")).unwrap()).unwrap();
    assert_eq!(a.edges(), b.edges());
    assert_eq!(code(&run(d, &["sample", "--graph", "g.clgr", "--vertices", "0.5", "--out", "v.clgr"])), 0);
    let (v, _) = graph::deserialize(&fs::read(d.join("v.clgr")).unwrap()).unwrap();
    assert_eq!(v.n_vertices(), 72);
    assert_eq!(code(&run(d, &["sample", "--graph", "g.clgr", "--edges", "1.5"])), 2);
}

#[test]
fn untrained_demo_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["train-demo", "--epochs", "0", "--metrics", "m.csv", "--checkpoint", "m.clmd"])), 0);
    let csv = fs::read_to_string(d.join("m.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows, [rows[0], rows[1]]);
    assert_eq!(rows[0], "epoch,loss,accuracy,rotation_consistency");
    let acc: f64 = rows[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!((acc - 0.25).abs() <= 0.15, "{acc}");
    let o = run(d, &["info", "m.clmd"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("CLMD"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_se2(d, "a.clgr", &[]);
    small_se2(d, "b.clgr", &[]);
    assert_eq!(fs::read(d.join("a.clgr")).unwrap(), fs::read(d.join("b.clgr")).unwrap());
    for out in ["x.csv", "y.csv"] {
        run(d, &["diffuse", "--graph", "a.clgr", "--impulse", "5", "--tau", "1", "--out", out]);
    }
    assert_eq!(fs::read(d.join("x.csv")).unwrap(), fs::read(d.join("y.csv")).unwrap());
    for out in ["p.clgr", "q.clgr"] {
        run(d, &["sample", "--graph", "a.clgr", "--edges", "0.7", "--seed", "9", "--out", out]);
    }
    assert_eq!(fs::read(d.join("p.clgr")).unwrap(), fs::read(d.join("q.clgr")).unwrap());
}

#[test]
fn corrupted_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_se2(d, "g.clgr", &[]);
    let good = fs::read(d.join("g.clgr")).unwrap();
    let mut bad = good.clone();
    bad[0] = b'Z';
    fs::write(d.join("magic.clgr"), &bad).unwrap();
    let mut bad = good.clone();
    bad[4] = 7;
    fs::write(d.join("version.clgr"), &bad).unwrap();
    fs::write(d.join("short.clgr"), &good[..good.len() / 2]).unwrap();
    for (file, msg) in [("magic.clgr", "bad magic"), ("version.clgr", "unsupported version"), ("short.clgr", "truncated")] {
        let o = run(d, &["info", file]);
        assert_eq!(code(&o), 2, "{file}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(msg), "{file}");
        assert_eq!(code(&run(d, &["diffuse", "--graph", file, "--impulse", "0"])), 2);
    }
    assert_eq!(code(&run(d, &["info", "missing.clgr"])), 2);
}
