use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mcrt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcrt")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = mcrt(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn map_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["sample-path", "-n", "300", "--gamma", "1.2", "--out", "o"]);
    assert!(d.join("o/path.bin").exists());
    let built = ok(d, &["build-map", "--path", "o/path.bin", "--out", "o"]);
    assert!(built.starts_with("vertices 300 "), "{built}");

    let emb = ok(d, &["tutte", "--map", "o/map.txt", "--out", "o"]);
    let residual: f64 = emb.split_whitespace().last().unwrap().parse().unwrap();
    assert!(residual < 1e-9);
    let rows = csv_rows(&d.join("o/embedding.csv"));
    assert_eq!(rows.len(), 300);
    for row in rows.iter().filter(|r| r[3] == "true") {
        let (x, y): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
        assert!((x.hypot(y) - 1.0).abs() < 1e-9);
    }
    assert!(fs::read_to_string(d.join("o/embedding.svg")).unwrap().starts_with("<svg"));

    let walk = ok(d, &["walk", "--map", "o/map.txt", "--hit-boundary", "--out", "o"]);
    let steps: usize = walk.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(steps > 0);
    assert_eq!(csv_rows(&d.join("o/walk.csv")).len(), steps + 1);

    let r: f64 = ok(d, &["resistance", "--map", "o/map.txt", "--a", "0", "--z", "10,20"]).trim().parse().unwrap();
    assert!(r > 0.0 && r.is_finite());
}

#[test]
fn plane_path_and_map() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["build-map", "--topology", "plane", "-n", "100", "--seed", "5", "--out", "p"]);
    let text = fs::read_to_string(d.join("p/map.txt")).unwrap();
    ok(d, &["build-map", "--topology", "plane", "-n", "100", "--seed", "5", "--out", "q"]);
    assert_eq!(text, fs::read_to_string(d.join("q/map.txt")).unwrap());
}

#[test]
fn field_measure_and_lbm() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gff", "-m", "32", "--bc", "torus", "--out", "o"]);
    ok(d, &["lqg", "--field", "o/field.bin", "--gamma", "1.0", "--out", "o"]);
    assert!(d.join("o/measure.bin").exists());
    let lbm = ok(d, &["lbm", "--measure", "o/measure.bin", "--steps", "500", "--m0-samples", "20", "--out", "o"]);
    assert!(lbm.contains("m0 median"), "{lbm}");
    let rows = csv_rows(&d.join("o/lbm.csv"));
    assert_eq!(rows.len(), 501);
    let t: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(t.windows(2).all(|w| w[1] >= w[0]));

    // a measure sampled directly, with the cone singularity
    ok(d, &["lqg", "-m", "32", "--cone", "--gamma", "0.8", "--out", "c"]);
    assert!(d.join("c/measure.bin").exists());
}

#[test]
fn list_and_small_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let list = ok(d, &["list"]);
    for name in ["degree", "perimeter", "gmc", "lbm"] {
        assert!(list.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
    fs::write(d.join("small.cfg"), "name = perimeter\nsizes = 32, 64\nreplicates = 2\nwalks = 2\n").unwrap();
    ok(d, &["experiment", "perimeter", "--config", "small.cfg", "--out", "e", "--seed", "3"]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("e/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 3);
    assert_eq!(manifest["config"]["sizes"], serde_json::json!([32, 64]));
    assert!(d.join("e/perimeter.csv").exists());

    ok(d, &["experiment", "perimeter", "--config", "small.cfg", "--out", "j", "--format", "json"]);
    assert!(d.join("j/perimeter.json").exists());
}

#[test]
fn errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("bad.cfg"), "name = degree\nbogus = 1\n").unwrap();
    let out = mcrt(d, &["experiment", "degree", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    assert_eq!(mcrt(d, &["experiment", "no_such_thing"]).status.code(), Some(1));
    assert_eq!(mcrt(d, &["tutte", "--map", "missing.txt"]).status.code(), Some(1));
    assert_eq!(mcrt(d, &["gff", "-m", "4"]).status.code(), Some(1));
    assert!(!mcrt(d, &["sample-path", "--gamma", "abc"]).status.success());
}
