//! End-to-end runs of the `shortfall` binary on small configurations.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_shortfall");

const SMALL: &str = r#"{
  "n": 16, "m": 20, "x_grid": [0, 10, 20, 40],
  "mc": {"paths": 3000, "dt": 0.01, "seed": 5},
  "table2": {"sigma_hi": [0.4, 0.8, 1.0, 2.0], "x": [0, 20]},
  "table3": {"x": 20, "n": [8, 16], "m_fractions": [0.25, 1.0], "m_rounding": "both", "off_grid": "floor"},
  "table4": {"x": 20, "n": [8, 16, 32], "m_fractions": [0.5], "m_rounding": "floor", "off_grid": "floor"},
  "diagnostics": {"n": [8, 16], "ks_paths": 3000, "upsilon": 0.0, "jump_paths": 200},
  "demos": {"covariation_n": [10, 100], "covariation_paths": 2000, "hullwhite_n": [6, 40],
            "hullwhite": {"paths": 2000, "seed": 1, "strike": 1.0, "sde_dt": 0.01}, "nonconcave_n": 6}
}"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("SHORTFALL_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn body(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn every_verb_succeeds_on_a_small_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    for verb in ["table1", "table2", "table3", "table4", "diagnostics", "demos", "mc"] {
        let o = run(&[verb, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{verb}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for file in [
        "table1.csv",
        "figure1.csv",
        "table2.csv",
        "table2_exit.csv",
        "table3.csv",
        "table4.csv",
        "diagnostics_kernels.csv",
        "diagnostics_convergence.csv",
        "demos_covariation.csv",
        "demos_hullwhite.csv",
        "demos_nonconcave.csv",
        "mc_exit.csv",
        "mc_unhedged.csv",
        "mc_checks.csv",
    ] {
        assert!(out.join(file).exists(), "{file} missing");
    }
}

#[test]
fn result_files_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run(&["table1", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--projection", "ps3"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(out.join("table1.csv")).unwrap();
    let head: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(head.iter().any(|l| l.starts_with("# config-sha256: ") && l.len() == 17 + 64));
    assert!(head.contains(&"# projection: ps3"));
    assert!(head.iter().any(|l| l.starts_with("# code-version: shortfall-cli ")));
    let first_data = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(first_data, "x,j_minus,j_plus,u_lattice,u_mc,u_mc_stderr");

    // figure data: the table's x-grid and four series, no comment lines
    let fig = std::fs::read_to_string(out.join("figure1.csv")).unwrap();
    let lines: Vec<&str> = fig.lines().collect();
    assert_eq!(lines[0], "x,j_minus,j_plus,u_lattice,u_mc");
    let xs: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(xs, ["0.0", "10.0", "20.0", "40.0"]);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut reference: Option<Vec<String>> = None;
    for threads in ["1", "4", "8"] {
        let out = dir.path().join(format!("t{threads}"));
        let mut bodies = Vec::new();
        for verb in ["table1", "table4", "mc", "diagnostics"] {
            let o = run(&[verb, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
            assert_eq!(code(&o), 0);
        }
        let mut names: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for p in names {
            bodies.push(std::fs::read_to_string(&p).unwrap());
        }
        match &reference {
            None => reference = Some(bodies),
            Some(r) => assert_eq!(r, &bodies, "{threads} workers differ"),
        }
    }
}

#[test]
fn seed_flag_changes_monte_carlo_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, seed) in [(&a, "1"), (&b, "2")] {
        assert_eq!(code(&run(&["mc", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed])), 0);
    }
    assert_ne!(body(&a.join("mc_unhedged.csv")), body(&b.join("mc_unhedged.csv")));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        r#"{"n": 0}"#,
        r#"{"x_grid": [33.3]}"#,
        r#"{"params": {"mu": 0.05, "kappa": 0.1, "theta": 0.1, "sigma": 1.0, "rho": 0.0, "s0": 100, "nu0": 0.1, "maturity": 1, "strike": 90}}"#,
        r#"{"unknown_field": 1}"#,
        "not json",
    ] {
        let cfg = write_config(dir.path(), bad);
        let o = run(&["table1", "--config", cfg.to_str().unwrap(), "--dry-run"]);
        assert_eq!(code(&o), 2, "{bad}");
    }
    assert_eq!(code(&run(&["table1", "--config", "/no/such/file.json"])), 2);
    assert_eq!(code(&run(&["table9"])), 2);
    assert_eq!(code(&run(&["table1", "--threads", "0", "--dry-run"])), 2);
}

#[test]
fn dry_run_counts_states_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"n": 3, "m": 4, "x_grid": [0, 25, 50]}"#);
    let out = dir.path().join("out");
    let o = run(&["table1", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--dry-run", "--bound", "minus"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    // 1 + 9 + 25 + 49 nodes, 5 proportions each
    assert!(text.contains("(2k+1)^2 = 84"), "{text}");
    assert!(text.contains("states = 420"), "{text}");
    assert!(!out.exists());
}

#[test]
fn resume_needs_a_checkpoint_and_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let c = cfg.to_str().unwrap();
    let ck = dir.path().join("ck");
    let (first, second) = (dir.path().join("first"), dir.path().join("second"));

    let o = run(&["resume", "--config", c, "--checkpoint", ck.to_str().unwrap(), "--out", first.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert_eq!(code(&run(&["resume", "--config", c])), 3);

    let o = run(&["table1", "--config", c, "--checkpoint", ck.to_str().unwrap(), "--out", first.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = run(&["resume", "--config", c, "--checkpoint", ck.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(body(&first.join("table1.csv")), body(&second.join("table1.csv")));

    // a checkpoint from different parameters is refused
    let other = write_config(dir.path(), &SMALL.replace("\"n\": 16", "\"n\": 16, \"sigma_tilde\": 6"));
    let o = run(&["resume", "--config", other.to_str().unwrap(), "--checkpoint", ck.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn demos_report_three_halves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run(&["demos", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("3/2"));
}
