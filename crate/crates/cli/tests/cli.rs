use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn willmore(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_willmore"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let col = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn analyze_torus_of_revolution() {
    let dir = tempfile::tempdir().unwrap();
    let o = willmore(dir.path(), &["analyze", "--surface", "torus_of_revolution", "--grid", "64", "--out", "a"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let r = json(&dir.path().join("a/analyze.json"));
    let w = r["energy"].as_f64().unwrap();
    assert!((w - 2.0 * PI * PI).abs() < 1e-3, "energy {w}");
    assert!(r["tau"][0].as_f64().unwrap().abs() < 1e-4);
    assert!((r["tau"][1].as_f64().unwrap() - 1.0).abs() < 1e-4);
    assert_eq!(r["rank"]["rank"], 1);
    for key in ["gauss_bonnet", "conformal_factor", "multiplier"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    assert!(r["conformal_factor"]["grad_l2"].as_f64().unwrap().is_finite());
}

#[test]
fn analyze_clifford_torus() {
    let dir = tempfile::tempdir().unwrap();
    let o = willmore(dir.path(), &["analyze", "--surface", "clifford", "--grid", "64"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let r = json(&dir.path().join("out/analyze.json"));
    assert_eq!(r["dim"], 4);
    assert!((r["energy"].as_f64().unwrap() - 2.0 * PI * PI).abs() < 1e-3);
    assert!(r["rank"].is_object());
}

#[test]
fn config_errors_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = willmore(dir.path(), &["analyze", "--config", "missing.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.cfg"));
    fs::write(dir.path().join("bad.cfg"), "grid = 32\ncolour = red\n").unwrap();
    let o = willmore(dir.path(), &["analyze", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    let o = willmore(dir.path(), &["analyze", "--grid", "lots"]);
    assert_eq!(o.status.code(), Some(2));
    let o = willmore(dir.path(), &["verify", "--filter", "nothing"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "# torus\nsurface = torus_of_revolution\ngrid = 32\nR = 2\nout = o\n").unwrap();
    let o = willmore(dir.path(), &["analyze", "--config", "run.cfg", "--grid", "48"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let r = json(&dir.path().join("o/analyze.json"));
    assert_eq!(r["grid"][0], 48);
    // R = 2 from the file: τ = i√3.
    assert!((r["tau"][1].as_f64().unwrap() - 3f64.sqrt()).abs() < 1e-3);
}

#[test]
fn minimize_log_is_monotone_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        ["minimize", "--grid", "32", "--max-iters", "8", "--tau-re", "0", "--tau-im", "1", "--seed", "3", "--out", out]
    };
    let o = willmore(dir.path(), &args("a"));
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert_eq!(willmore(dir.path(), &args("b")).status.code(), Some(0));
    let a = fs::read(dir.path().join("a/iterations.csv")).unwrap();
    let b = fs::read(dir.path().join("b/iterations.csv")).unwrap();
    assert_eq!(a, b);
    let header = String::from_utf8_lossy(&a).lines().next().unwrap().to_string();
    assert_eq!(header, "iter,energy,tau_re,tau_im,grad_norm,step,corrected_norm,status");
    let e = csv_column(&dir.path().join("a/iterations.csv"), "energy");
    assert!(e.len() >= 2 && e.windows(2).all(|w| w[1] <= w[0]), "{e:?}");
    let report = json(&dir.path().join("a/minimize.json"));
    assert!(report["final_energy"].as_f64().unwrap() < report["initial_energy"].as_f64().unwrap());
}

#[test]
fn exported_mesh_reimports() {
    let dir = tempfile::tempdir().unwrap();
    let o = willmore(dir.path(), &["minimize", "--grid", "32", "--max-iters", "2", "--out", "m"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let o = willmore(
        dir.path(),
        &["analyze", "--surface", "from_file", "--input", "m/final.obj", "--out", "m"],
    );
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let analyzed = json(&dir.path().join("m/analyze.json"))["energy"].as_f64().unwrap();
    let minimized = json(&dir.path().join("m/minimize.json"))["final_energy"].as_f64().unwrap();
    assert!((analyzed - minimized).abs() <= 1e-6 * minimized, "{analyzed} vs {minimized}");
}

#[test]
fn ceiling_run_has_distinct_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = willmore(dir.path(), &["minimize", "--surface", "thin", "--grid", "32", "--max-iters", "1"]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");
    assert_eq!(json(&dir.path().join("out/minimize.json"))["status"], "ceiling_exceeded");
}

#[test]
fn verify_default_corpus_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = willmore(dir.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(!out.contains("FAIL"));
    for m in ["grid", "geometry", "uniformization", "variations", "correction", "minimizer"] {
        assert!(out.contains(&format!("PASS {m}/")), "{m}");
    }
}

#[test]
fn verify_filter_runs_one_suite() {
    let dir = tempfile::tempdir().unwrap();
    let o = willmore(dir.path(), &["verify", "--filter", "variations", "--grid", "32"]);
    let lines: Vec<String> = stdout(&o).lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).map(String::from).collect();
    assert!(!lines.is_empty());
    assert!(lines.iter().all(|l| l.contains(" variations/")), "{lines:?}");
}

/// Torus of revolution OBJ with a 5×5 patch collapsed to a single point.
fn collapsed_torus_obj(n: usize) -> String {
    let mut s = format!("# grid {n} {n}\n");
    for i in 0..n {
        for j in 0..n {
            let (ii, jj) = if (8..13).contains(&i) && (8..13).contains(&j) { (10, 10) } else { (i, j) };
            let (u, v) = (ii as f64 / n as f64, jj as f64 / n as f64);
            let a = 2f64.sqrt() + (2.0 * PI * u).cos();
            let _ = writeln!(s, "v {} {} {}", a * (2.0 * PI * v).cos(), a * (2.0 * PI * v).sin(), (2.0 * PI * u).sin());
        }
    }
    s
}

#[test]
fn verify_reports_degenerate_immersion() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.obj"), collapsed_torus_obj(32)).unwrap();
    let o = willmore(
        dir.path(),
        &["verify", "--surface", "from_file", "--input", "bad.obj", "--filter", "geometry", "--grid", "32"],
    );
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.contains("geometry/immersion_regular")).unwrap();
    assert!(line.starts_with("FAIL") && line.contains("degenerate immersion"), "{line}");
}

#[test]
fn single_tau_sweep_equals_minimize() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("one.cfg"), "sweep_points = 1\nsweep_im_min = 1.0\nsweep_im_max = 1.0\n").unwrap();
    let common = ["--grid", "32", "--max-iters", "4", "--tau-re", "0"];
    let mut a = vec!["sweep", "--config", "one.cfg", "--out", "s"];
    a.extend(common);
    assert_eq!(willmore(dir.path(), &a).status.code(), Some(0));
    let mut b = vec!["minimize", "--tau-im", "1", "--out", "m"];
    b.extend(common);
    assert_eq!(willmore(dir.path(), &b).status.code(), Some(0));
    let swept = csv_column(&dir.path().join("s/sweep.csv"), "energy");
    let single = json(&dir.path().join("m/minimize.json"))["final_energy"].as_f64().unwrap();
    assert_eq!(swept, vec![single]);
}

#[test]
fn sweep_is_continuous_on_a_coarse_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = willmore(dir.path(), &["sweep", "--surface", "torus_of_revolution", "--grid", "32", "--max-iters", "10"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let e = csv_column(&dir.path().join("out/sweep.csv"), "energy");
    assert_eq!(e.len(), 10);
    assert!(e.iter().all(|&w| w.is_finite() && w < 8.0 * PI));
    for w in e.windows(2) {
        assert!((w[1] - w[0]).abs() <= 0.05 * w[0].min(w[1]), "{e:?}");
    }
}

#[test]
fn ift_demo_bounds_hold() {
    let dir = tempfile::tempdir().unwrap();
    let o = willmore(dir.path(), &["ift-demo"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let r = json(&dir.path().join("out/ift_demo.json"));
    let cases = r["cases"].as_array().unwrap();
    assert!(!cases.is_empty());
    for c in cases {
        assert_eq!(c["passed"], true, "{c}");
        assert!(c["mu"].as_f64().unwrap() * c["nu"].as_f64().unwrap() == 0.0);
        assert!(c["norm"].as_f64().unwrap() <= c["bound"].as_f64().unwrap());
    }
    let k = r["scaling_exponent"].as_f64().unwrap();
    assert!((0.4..=0.6).contains(&k), "{k}");
}
