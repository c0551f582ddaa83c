use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn credsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_credsel")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = credsel(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

fn tiny_dataset(path: &Path) {
    // n = 30, p = 5, y = 2 x1 - x3 + small deterministic wiggle
    let mut text = String::from("y,x1,x2,x3,x4,x5\n");
    for i in 0..30 {
        let x: Vec<f64> = (0..5).map(|j| (((i * 7 + j * 13) % 17) as f64 - 8.0) / 4.0).collect();
        let y = 2.0 * x[0] - x[2] + 0.1 * ((i % 5) as f64 - 2.0);
        let cells: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        text.push_str(&format!("{y},{}\n", cells.join(",")));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn simulate_writes_datasets_truth_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    ok(&["simulate", "--seed", "5", "--out", out.to_str().unwrap(), "n=60", "p=50", "rho=0.5", "reps=2"]);
    assert_eq!(
        files(&out),
        ["dataset_000.csv", "dataset_001.csv", "manifest.txt", "truth_000.csv", "truth_001.csv"]
    );
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("command=simulate\n") && manifest.contains("seed=5\n") && manifest.contains("rho=0.5\n"));
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for o in [&a, &b] {
        ok(&["simulate", "--seed", "9", "--out", o.to_str().unwrap(), "reps=2"]);
    }
    for f in files(&a) {
        let (x, y) = (fs::read_to_string(a.join(&f)).unwrap(), fs::read_to_string(b.join(&f)).unwrap());
        if f == "manifest.txt" {
            let strip = |s: &str| s.lines().filter(|l| !l.starts_with("out=")).collect::<Vec<_>>().join("\n");
            assert_eq!(strip(&x), strip(&y));
        } else {
            assert_eq!(x, y, "{f}");
        }
    }
}

#[test]
fn invalid_design_and_unknown_keys_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = credsel(&["simulate", "--out", out, "rho=1.0"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("rho"));
    let r = credsel(&["simulate", "--out", out, "colour=blue"]);
    assert!(String::from_utf8_lossy(&r.stderr).contains("unknown key"));
}

#[test]
fn config_file_is_overridden_by_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\nreps = 3\nrho = 0.9\n").unwrap();
    let out = dir.path().join("o");
    ok(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "reps=1"]);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("reps=1\n") && manifest.contains("rho=0.9\n"));
    assert_eq!(files(&out).len(), 3);
}

#[test]
fn tune_reports_closed_form_and_validates_grid() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--seed", "3", "--out", sim.to_str().unwrap(), "reps=1"]);
    let data = sim.join("dataset_000.csv");
    let data = data.to_str().unwrap();

    let out = dir.path().join("t");
    ok(&["tune", "--out", out.to_str().unwrap(), &format!("data={data}"), "family=normal", "draws=500"]);
    let summary = fs::read_to_string(out.join("tune_summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    let closed: f64 = row[3].parse().unwrap();
    assert!((30.0..70.0).contains(&closed), "{closed}");
    assert_eq!(fs::read_to_string(out.join("tune_grid.csv")).unwrap().lines().count(), 51);

    let single = dir.path().join("s");
    ok(&["tune", "--out", single.to_str().unwrap(), &format!("data={data}"), "family=laplace", "grid=0.7"]);
    let summary = fs::read_to_string(single.join("tune_summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("laplace,0.7,"));

    let r = credsel(&["tune", "--out", single.to_str().unwrap(), &format!("data={data}"), "family=dl", "grid=0.1,0.8"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("invalid grid"));
}

#[test]
fn fit_select_smoke_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.csv");
    tiny_dataset(&data);
    let mut supports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(&[
            "fit-select",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
            &format!("data={}", data.display()),
            "method=Normal_tune",
            "n_iter=1500",
            "n_burn=500",
        ]);
        for f in ["posterior_summary.csv", "path.csv", "selected.csv"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
        supports.push(fs::read_to_string(out.join("selected.csv")).unwrap());
    }
    assert_eq!(supports[0], supports[1]);
    assert!(supports[0].contains("1,x1\n") && supports[0].contains("3,x3\n"), "{}", supports[0]);
}

#[test]
fn fit_select_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--seed", "4", "--out", sim.to_str().unwrap(), "reps=1"]);
    let fit = dir.path().join("fit");
    ok(&[
        "fit-select",
        "--out",
        fit.to_str().unwrap(),
        &format!("data={}", sim.join("dataset_000.csv").display()),
        "method=DL_tune",
        "hyper=0.2",
        "n_iter=1500",
        "n_burn=500",
    ]);
    let ev = dir.path().join("ev");
    ok(&[
        "evaluate",
        "--out",
        ev.to_str().unwrap(),
        &format!("ordering={}", fit.join("ordering.csv").display()),
        &format!("truth={}", sim.join("truth_000.csv").display()),
    ]);
    let text = fs::read_to_string(ev.join("evaluation.csv")).unwrap();
    let roc: f64 = text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(roc > 0.6, "{roc}");
    assert_eq!(fs::read_to_string(ev.join("curve.csv")).unwrap().lines().count(), 52);
}

#[test]
fn lasso_and_bad_hyper_are_rejected_by_fit_select() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.csv");
    tiny_dataset(&data);
    let d = format!("data={}", data.display());
    let out = dir.path().to_str().unwrap();
    assert_eq!(credsel(&["fit-select", "--out", out, &d, "method=Lasso"]).status.code(), Some(2));
    assert_eq!(credsel(&["fit-select", "--out", out, &d, "method=DL_hyper", "hyper=0.1"]).status.code(), Some(2));
    assert_eq!(credsel(&["fit-select", "--out", out, &d, "dl_order=sideways"]).status.code(), Some(2));
}

#[test]
fn reproduce_smoke_tables() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = dir.path().join("t1");
    ok(&[
        "reproduce",
        "--jobs",
        "1",
        "--out",
        t1.to_str().unwrap(),
        "table=t1",
        "reps=3",
        "rho=0.5",
        "n_iter=1200",
        "n_burn=200",
        "dl_grid_points=50",
        "tune_draws=300",
    ]);
    let summary = fs::read_to_string(t1.join("summary.csv")).unwrap();
    for m in ["Lasso", "Normal_hyper", "Normal_tune", "Laplace_hyper", "Laplace_tune", "DL_hyper", "DL_tune"] {
        for metric in ["roc_area", "prc_area"] {
            let row = summary
                .lines()
                .find(|l| l.starts_with(&format!("{m},0.5,{metric},")))
                .unwrap_or_else(|| panic!("{m} {metric} missing"));
            let mean: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
            assert!(mean.is_finite() && (0.0..=1.0).contains(&mean));
        }
    }
    assert!(t1.join("curves.csv").exists() && !t1.join("failures.csv").exists());

    let t5 = dir.path().join("t5");
    ok(&["reproduce", "--out", t5.to_str().unwrap(), "table=t5", "reps=2", "rho=0.5", "tune_draws=300"]);
    let summary = fs::read_to_string(t5.join("summary.csv")).unwrap();
    let theoretic = summary.lines().find(|l| l.starts_with("Theoretic,")).unwrap();
    let g: f64 = theoretic.split(',').nth(3).unwrap().parse().unwrap();
    assert!((g - 47.6).abs() < 0.1, "{g}");
}

#[test]
fn replicate_failures_give_exit_code_one_and_a_table() {
    let dir = tempfile::tempdir().unwrap();
    // with seed 1 the literal DL sweep order breaks down on this replicate
    let r = credsel(&[
        "reproduce",
        "--out",
        dir.path().to_str().unwrap(),
        "table=t1",
        "reps=1",
        "rho=0.9",
        "methods=DL_hyper",
        "dl_order=as_listed",
        "n_iter=3000",
        "n_burn=500",
        "dl_grid_points=20",
    ]);
    let stderr = String::from_utf8_lossy(&r.stderr);
    assert_eq!(r.status.code(), Some(1), "{stderr}");
    assert!(stderr.contains("replicate(s) failed") && stderr.contains("DL_hyper"));
    assert!(dir.path().join("failures.csv").exists());
}
