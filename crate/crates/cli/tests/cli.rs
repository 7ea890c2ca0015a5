use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn mdsclt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdsclt"))
        .args(args)
        .current_dir(dir)
        .env_remove("MDSCLT_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = mdsclt(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn triangle() -> Value {
    json!({"point_mass_mixture": {
        "locations": [[-0.9, -2.0], [2.1, -2.0], [-0.9, 2.0]],
        "weights": [0.2, 0.3, 0.5]
    }})
}

fn small_config(checks: Value) -> Value {
    json!({
        "distribution": triangle(),
        "noise": {"model": "model2", "law": {"uniform": {"a": 2.0}}},
        "n_list": [40, 80, 160],
        "d": 2,
        "replicates": 6,
        "seed": 11,
        "checks": checks,
    })
}

#[test]
fn embed_recovers_the_3_4_5_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "sq.csv", "0,9,16\n9,0,25\n16,25,0\n");
    ok(&["embed", "--in", "sq.csv", "--d", "2", "--out", "x.csv"], d);
    let x = read_csv(&d.join("x.csv"));
    assert_eq!(x.len(), 3);
    for (i, j, want) in [(0, 1, 3.0), (0, 2, 4.0), (1, 2, 5.0)] {
        assert!((dist(&x[i], &x[j]) - want).abs() <= 1e-9);
    }
    let meta = read_json(&d.join("x.csv.json"));
    assert_eq!(meta["d"], 2);
    assert_eq!(meta["eigenvalues"].as_array().unwrap().len(), 2);
}

#[test]
fn gen_points_distmat_embed_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "dist.json",
        r#"{"gaussian": {"mean": [0, 0], "covariance": [[2, 0.5], [0.5, 1]]}}"#,
    );
    ok(&["gen-points", "--distribution", "dist.json", "--n", "40", "--seed", "123", "--out", "p.csv"], d);
    ok(&["distmat", "--in", "p.csv", "--out", "sq.csv", "--squared"], d);
    ok(&["embed", "--in", "sq.csv", "--d", "2", "--out", "x.csv"], d);
    let (p, x) = (read_csv(&d.join("p.csv")), read_csv(&d.join("x.csv")));
    assert_eq!(p.len(), 40);
    let mut worst: f64 = 0.0;
    for i in 0..40 {
        for j in 0..i {
            worst = worst.max((dist(&p[i], &p[j]) - dist(&x[i], &x[j])).abs());
        }
    }
    assert!(worst <= 1e-9, "{worst}");
    let meta = read_json(&d.join("p.csv.json"));
    assert_eq!(meta["seed"], 123);
    assert_eq!(meta["n"], 40);
}

#[test]
fn seeded_commands_are_reproducible_and_echo_their_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "tri.json", &triangle().to_string());
    write(d, "noise.json", r#"{"model": "model1", "law": {"gaussian": {"sigma": 1.0}}}"#);
    ok(&["gen-points", "--distribution", "tri.json", "--n", "30", "--seed", "4", "--out", "p.csv"], d);
    ok(&["distmat", "--in", "p.csv", "--out", "dist.csv"], d);
    for name in ["a.csv", "b.csv"] {
        ok(&["perturb", "--in", "dist.csv", "--noise", "noise.json", "--seed", "77", "--out", name], d);
    }
    assert_eq!(
        std::fs::read(d.join("a.csv")).unwrap(),
        std::fs::read(d.join("b.csv")).unwrap()
    );
    assert_eq!(read_json(&d.join("a.csv.json"))["seed"], 77);
    let sq = read_csv(&d.join("a.csv"));
    for (i, row) in sq.iter().enumerate() {
        assert_eq!(row[i], 0.0);
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, sq[j][i]);
        }
    }
}

#[test]
fn mc_run_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "cfg.json", &small_config(json!({"clt": true, "bounds": true})).to_string());
    ok(&["mc-run", "--config", "cfg.json", "--out", "one.json", "--threads", "1"], d);
    ok(&["mc-run", "--config", "cfg.json", "--out", "two.json", "--threads", "2"], d);
    let (a, b) = (std::fs::read(d.join("one.json")).unwrap(), std::fs::read(d.join("two.json")).unwrap());
    assert_eq!(a, b);
    let report = read_json(&d.join("one.json"));
    let per_n = report["per_n"].as_array().unwrap();
    assert_eq!(per_n.len(), 3);
    for (block, n) in per_n.iter().zip([40, 80, 160]) {
        assert_eq!(block["n"], n);
        assert_eq!(block["per_class"].as_array().unwrap().len(), 3);
    }
    assert!(report["bounds"].is_object());

    ok(&["mc-run", "--config", "cfg.json", "--out", "reseeded.json", "--seed", "12", "--threads", "2"], d);
    assert_ne!(a, std::fs::read(d.join("reseeded.json")).unwrap());
}

#[test]
fn ellipse_plot_has_paths_and_markers_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "cfg.json", &small_config(json!({"clt": true})).to_string());
    ok(&["mc-run", "--config", "cfg.json", "--out", "rep.json"], d);
    ok(&["plot", "--report", "rep.json", "--kind", "ellipses", "--out", "a.svg"], d);
    ok(&["plot", "--report", "rep.json", "--kind", "ellipses", "--out", "b.svg"], d);
    let svg = std::fs::read_to_string(d.join("a.svg")).unwrap();
    assert_eq!(svg, std::fs::read_to_string(d.join("b.svg")).unwrap());
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches(r#"class="ellipse empirical""#).count(), 3);
    assert_eq!(svg.matches(r#"class="ellipse theoretical""#).count(), 3);
    assert_eq!(svg.matches(r#"class="mean-marker""#).count(), 3);
    assert!(svg.contains("n = 160") && svg.contains("model2"));

    ok(&["plot", "--report", "rep.json", "--kind", "ellipses", "--n", "40", "--out", "small.svg"], d);
    assert!(std::fs::read_to_string(d.join("small.svg")).unwrap().contains("n = 40"));
    ok(&["plot", "--report", "rep.json", "--kind", "scree", "--out", "scree.svg"], d);
    assert!(std::fs::read_to_string(d.join("scree.svg")).unwrap().contains(r#"class="threshold""#));
}

#[test]
fn plots_of_missing_sections_fail_with_the_check_name() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "cfg.json", &small_config(json!({"clt": true})).to_string());
    ok(&["mc-run", "--config", "cfg.json", "--out", "rep.json"], d);
    for (kind, flag) in [("bound-ratios", "checks.bounds"), ("bias-trend", "checks.hetero_bias")] {
        let out = mdsclt(&["plot", "--report", "rep.json", "--kind", kind, "--out", "x.svg"], d);
        assert_eq!(out.status.code(), Some(1), "{kind}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(flag), "{kind}");
    }
    assert!(!d.join("x.svg").exists());

    let mut report = read_json(&d.join("rep.json"));
    for block in report["per_n"].as_array_mut().unwrap() {
        block["per_class"] = json!([]);
    }
    write(d, "empty.json", &report.to_string());
    let out = mdsclt(&["plot", "--report", "empty.json", "--kind", "ellipses", "--out", "x.svg"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checks.clt"));

    let out = mdsclt(&["plot", "--report", "rep.json", "--kind", "pie", "--out", "x.svg"], d);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = mdsclt(&["embed", "--bogus"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(mdsclt(&["--help"], d).status.code(), Some(0));

    let out = mdsclt(&["embed", "--in", "missing.csv", "--d", "2", "--out", "x.csv"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    write(d, "asym.csv", "0,1\n2,0\n");
    let out = mdsclt(&["embed", "--in", "asym.csv", "--d", "1", "--out", "x.csv"], d);
    assert_eq!(out.status.code(), Some(1));

    let mut cfg = small_config(json!({}));
    cfg["replicates"] = json!(1);
    write(d, "bad.json", &cfg.to_string());
    let out = mdsclt(&["mc-run", "--config", "bad.json", "--out", "r.json"], d);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Four collinear points: the second eigenvalue is zero.
    write(d, "line.csv", "0,1,4,9\n1,0,1,4\n4,1,0,1\n9,4,1,0\n");
    let out = mdsclt(&["embed", "--in", "line.csv", "--d", "2", "--out", "x.csv"], d);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!d.join("x.csv").exists());

    ok(&["embed", "--in", "line.csv", "--d", "2", "--out", "x.csv", "--allow-deficient"], d);
    let x = read_csv(&d.join("x.csv"));
    assert!(x.iter().all(|r| r[1] == 0.0));
    let meta = read_json(&d.join("x.csv.json"));
    assert_eq!(meta["flags"]["deficient"], json!([2]));
}

#[test]
fn select_dim_and_theory_cov_write_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "tri.json", &triangle().to_string());
    write(d, "noise.json", r#"{"model": "model2", "law": {"uniform": {"a": 2.0}}}"#);
    ok(&["theory-cov", "--distribution", "tri.json", "--noise", "noise.json", "--out", "th.json"], d);
    let th = read_json(&d.join("th.json"));
    assert_eq!(th["command"], "theory-cov");

    ok(&["gen-points", "--distribution", "tri.json", "--n", "60", "--seed", "1", "--out", "p.csv"], d);
    ok(&["distmat", "--in", "p.csv", "--out", "dist.csv"], d);
    ok(&["perturb", "--in", "dist.csv", "--noise", "noise.json", "--seed", "2", "--out", "sq.csv", "--delta-out", "delta.csv"], d);
    ok(&["select-dim", "--in", "sq.csv", "--max-d", "4", "--out", "sel.json"], d);
    let sel = read_json(&d.join("sel.json"));
    assert!(sel["d_hat"].as_u64().unwrap() >= 1);
    ok(&["rawstress", "--in", "delta.csv", "--d", "2", "--out", "rs.csv"], d);
    let history = read_json(&d.join("rs.csv.json"))["history"].as_array().unwrap().clone();
    let h: Vec<f64> = history.iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(h.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}
