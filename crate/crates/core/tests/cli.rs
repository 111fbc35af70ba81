use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_volterra-mr"))
        .args(args)
        .output()
        .unwrap()
}

fn csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn meta(path: &Path) -> String {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    fs::read_to_string(p).unwrap()
}

#[test]
fn lemma4_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l4.csv");
    let r = cli(&["lemma4", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let rows = csv(&out);
    assert_eq!(rows[0].join(","), "q,s,theta,alpha,R,C_R,lhs,rhs,satisfied");
    assert_eq!(rows.len(), 10);
    assert!(rows[1..].iter().all(|r| r[8] == "1"));
    let m = meta(&out);
    assert!(m.contains("checks=Bergman-to-Lp embedding grid"));
    assert!(m.contains("constant_decreases_under_halving=1"));
}

#[test]
fn malformed_kernel_is_a_validation_error() {
    let r = cli(&["bergman", "--kernel", "exp:1"]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("invalid kernel"), "{err}");
    assert!(r.stdout.is_empty());
}

#[test]
fn field_level_validation_messages() {
    for (args, field) in [
        (&["maxreg"][..], "seed"),
        (&["solve", "--dt", "0.3"][..], "dt"),
        (&["solve", "--alpha", "0.7"][..], "alpha"),
        (&["solve", "--kernel", "mexp:1,1,1"][..], "solver"),
        (&["admissibility", "--p", "1"][..], "p"),
        (&["trace-bound", "--seed", "1", "--q", "4"][..], "q"),
        (&["solve", "--tol", "2"][..], "tol"),
        (&["exponents", "--q", "3"][..], "q"),
    ] {
        let r = cli(args);
        assert_eq!(r.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&r.stderr);
        assert!(err.contains(&format!("invalid {field}")), "{args:?}: {err}");
    }
    assert_eq!(cli(&["bergman", "--modes", "3"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_and_flushes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let r = cli(&[
        "solve",
        "--solver",
        "cq",
        "--kernel",
        "exp:1e6,1",
        "--modes",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(3));
    assert_eq!(csv(&out)[0].join(","), "t,norm_z,norm_Az,norm_w,residual");
    assert!(meta(&out).contains("error=numerical failure"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# sector sweep\nscenario = bergman\nq = 3\nkernel = exp:2,1\n").unwrap();
    let r = cli(&["bergman", "--config", cfg.to_str().unwrap(), "--q", "2"]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    let line = text.lines().nth(1).unwrap();
    assert!(line.starts_with("\"exp:2,1\",2,"), "{line}");
    let row: Vec<&str> = line.rsplitn(4, ',').collect();
    let norm: f64 = row[1].parse().unwrap();
    assert!((norm - 2.0 * 0.5f64.sqrt()).abs() < 1e-6);

    fs::write(&cfg, "scenario = solve\n").unwrap();
    assert_eq!(
        cli(&["bergman", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
    fs::write(&cfg, "modes = 4\n").unwrap();
    assert_eq!(
        cli(&["bergman", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn solve_both_writes_two_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let r = cli(&[
        "solve",
        "--modes",
        "8",
        "--solver",
        "both",
        "--dt",
        "0.01",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let aug = csv(&out);
    let cq = csv(&dir.path().join("run.cq.csv"));
    assert_eq!(aug.len(), 102);
    assert_eq!(aug.len(), cq.len());
    let m = meta(&out);
    let d: f64 = m
        .lines()
        .find_map(|l| l.strip_prefix("max_discrepancy="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(d > 0.0 && d < 1e-3);
}

#[test]
fn ensembles_write_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let r = cli(&[
        "maxreg",
        "--seed",
        "3",
        "--modes",
        "8",
        "--ensemble",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let rows = csv(&out);
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[0][8], "ratio");
    let m = meta(&out);
    assert!(m.contains("contracts=1") && m.contains("trace_bound_holds=1"), "{m}");

    let r = cli(&["trace-bound", "--seed", "3", "--modes", "8", "--ensemble", "4"]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",1")));
}

#[test]
fn different_seeds_change_random_output() {
    let a = cli(&["boundary", "--modes", "8", "--seed", "1"]).stdout;
    let b = cli(&["boundary", "--modes", "8", "--seed", "2"]).stdout;
    assert_ne!(a, b);
}

#[test]
fn exponents_flags_inadmissible_pairs() {
    let r = cli(&["exponents", "--q", "1.5", "--l", "2"]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "1.5,2,nan,nan,q<=l,0");
}
