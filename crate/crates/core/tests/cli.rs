use ahlab::cli::{read_text, run_with_env};
use std::path::Path;

fn no_env(_: &str) -> Option<String> {
    None
}

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["ahlab"];
    v.extend_from_slice(args);
    run_with_env(v, &no_env)
}

#[test]
fn resonance_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["resonance", "--n0", "1,0", "--N", "4,8,16,32,64", "--out", out]), 0);
    let csv = read_text(dir.path(), "resonance.csv").unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "N,component1,component2,limit1,limit2,abs_err");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    let lim = -1.0 / (8.0 * std::f64::consts::PI);
    assert!(rows.iter().all(|r| r[3] == lim && r[4] == 0.0));
    assert!(rows[4][5] < rows[0][5]);
    let man: serde_json::Value = serde_json::from_str(&read_text(dir.path(), "manifest.json").unwrap()).unwrap();
    assert_eq!(man["status"], "ok");
    assert_eq!(man["config"]["n0"], "1,0");
    assert!(man["outputs"].as_array().unwrap().iter().any(|f| f == "schema.json"));
}

fn files_equal(a: &Path, b: &Path, name: &str) {
    assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
}

#[test]
fn simulate_is_deterministic_and_replayable() {
    let (d1, d2, d3) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = |o: &Path| {
        vec!["simulate", "--M", "16", "--N", "4", "--dt", "0.005", "--T", "0.1", "--q", "3", "--seed", "7", "--init", "smooth"]
            .into_iter()
            .map(String::from)
            .chain(["--out".to_string(), o.to_str().unwrap().to_string()])
            .collect::<Vec<_>>()
    };
    let call = |a: Vec<String>| run(&a.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    assert_eq!(call(args(d1.path())), 0);
    assert_eq!(call(args(d2.path())), 0);
    for f in ["series.csv", "checkpoints/00000_phi.bin", "checkpoints/00002_A.bin", "config.txt"] {
        files_equal(d1.path(), d2.path(), f);
    }
    let cfg = d1.path().join("config.txt");
    assert_eq!(run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", d3.path().to_str().unwrap()]), 0);
    files_equal(d1.path(), d3.path(), "series.csv");
    let series = read_text(d1.path(), "series.csv").unwrap();
    assert_eq!(series.lines().count(), 1 + 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["simulate", "--M", "16", "--out", out]), 1);
    assert_eq!(run(&["simulate", "--M", "16", "--N", "4", "--dt", "0.01", "--T", "0.1", "--q", "2", "--out", out]), 1);
    assert_eq!(run(&["no-such-command"]), 1);
    // a ceiling below the first noise kick forces a numerical abort
    let code = run(&["simulate", "--M", "16", "--N", "4", "--dt", "0.01", "--T", "0.1", "--q", "3", "--ceiling", "1e-9", "--out", out]);
    assert_eq!(code, 2);
    let man: serde_json::Value = serde_json::from_str(&read_text(dir.path(), "manifest.json").unwrap()).unwrap();
    assert_eq!(man["status"], "numerical_abort");
}

#[test]
fn small_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["wick-table", "--N", "1,2", "--out", out]), 0);
    let t = read_text(dir.path(), "sigma2.csv").unwrap();
    assert!(t.starts_with("N,parseval,quadrature,diff\n") && t.lines().count() == 3);
    assert_eq!(run(&["kernel", "--M", "32", "--b", "1,0.5", "--paths", "2000", "--t", "0.2", "--out", out]), 0);
    let k = read_text(dir.path(), "kernel.csv").unwrap();
    let backends: Vec<&str> = k.lines().skip(1).map(|l| l.split(',').nth(6).unwrap()).collect();
    assert_eq!(backends, ["pde", "constant", "fki"]);
    assert_eq!(run(&["selftest", "--out", out]), 0);
    assert_eq!(run(&["decay-report", "--M", "16", "--N", "4", "--dt", "0.005", "--T", "0.1", "--q", "3", "--out", out]), 0);
    let d = read_text(dir.path(), "decay.csv").unwrap();
    assert!(d.starts_with("t,gaugeinvA_gamma,psi_Lr,max_col,window_id\n"));
    assert_eq!(d.lines().count(), 1 + 3);
}
