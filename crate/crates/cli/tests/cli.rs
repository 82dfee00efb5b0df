use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semiclassical_cli::RunConfig;
use tempfile::TempDir;

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn bsq(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsq"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

const HARMONIC: &str = r#"
[problem]
potential = "harmonic"
hbar = 0.1
energy_min = 0.05
energy_max = 1.0
"#;

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

#[test]
fn harmonic_spectrum_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "h.toml", HARMONIC);
    let out = bsq(&["spectrum"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("n,E_bs0,E_bs1,E_bs2,E_oracle,err0,err2"));
    let e0: Vec<f64> = column(&csv, "E_bs0").iter().map(|s| s.parse().unwrap()).collect();
    let expect = [0.1, 0.3, 0.5, 0.7, 0.9];
    assert_eq!(e0.len(), expect.len());
    for (a, b) in e0.iter().zip(expect) {
        assert!((a - b).abs() < 1e-10);
    }
    for e in column(&csv, "E_oracle") {
        assert!(!e.is_empty());
    }
}

#[test]
fn order_flag_truncates_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "h.toml", HARMONIC);
    let out = bsq(&["spectrum", "--order", "0"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(column(&csv, "E_bs1").iter().all(|c| c.is_empty()));
    assert!(column(&csv, "E_bs2").iter().all(|c| c.is_empty()));
}

#[test]
fn double_well_is_a_validation_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "dw.toml", &HARMONIC.replace("\"harmonic\"", "\"(x^2 - 1)^2\""));
    let out = bsq(&["spectrum"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("multiple wells"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let syntax = write_config(&dir, "s.toml", &HARMONIC.replace("\"harmonic\"", "\"x^^2\""));
    assert_eq!(bsq(&["spectrum"], &syntax).status.code(), Some(2));
    let toml = write_config(&dir, "t.toml", "[problem\n");
    assert_eq!(bsq(&["oracle"], &toml).status.code(), Some(2));
    let missing = dir.path().join("absent.toml");
    assert_eq!(bsq(&["oracle"], &missing).status.code(), Some(2));
    let general = write_config(
        &dir,
        "g.toml",
        &HARMONIC.replace("potential = \"harmonic\"", "p0 = \"xi^2 + x^2 + 0.1*x*xi\""),
    );
    assert_eq!(bsq(&["oracle"], &general).status.code(), Some(2));
}

#[test]
fn general_symbol_spectrum_omits_oracle_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "g.toml",
        &HARMONIC.replace("potential = \"harmonic\"", "p0 = \"xi^2 + x^2 + x*xi\""),
    );
    let out = bsq(&["spectrum", "--order", "1"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("n,E_bs0,E_bs1,E_bs2"));
    // Area of {xi^2 + x^2 + x xi <= E} is 2πE/√3.
    let e0: Vec<f64> = column(&csv, "E_bs0").iter().map(|s| s.parse().unwrap()).collect();
    for (n, e) in e0.iter().enumerate() {
        let exact = 0.1 * (2 * n + 1) as f64 * 3f64.sqrt() / 2.0;
        assert!((e - exact).abs() < 1e-8, "{e} vs {exact}");
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "h.toml", HARMONIC);
    for cmd in ["spectrum", "oracle"] {
        let a = bsq(&[cmd], &cfg);
        let b = bsq(&[cmd], &cfg);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn out_flag_and_config_dump_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "h.toml", HARMONIC);
    let out_path = dir.path().join("o.csv");
    let dump = dir.path().join("eff.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_bsq"))
        .args(["oracle", "--hbar", "0.045", "--order", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .arg("--dump-config")
        .arg(&dump)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(csv.lines().count(), 11);
    let text = std::fs::read_to_string(&dump).unwrap();
    let back = RunConfig::from_toml(&text).unwrap();
    assert_eq!(back.problem.hbar.values(), vec![0.045]);
    assert_eq!(back.solver.order, 1);
    assert_eq!(RunConfig::from_toml(&back.to_toml()).unwrap(), back);
    // The dump drives the same computation.
    let again = bsq(&["oracle"], &dump);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), csv);
}

#[test]
fn gram_scan_flags_levels() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "h.toml",
        &format!("{HARMONIC}[solver]\norder = 0\ngram_steps = 40\n"),
    );
    let out = bsq(&["gram-scan"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("E,det,zero_flag"));
    let zeros: Vec<f64> = csv
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",1"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(zeros.len(), 5);
    for (z, n) in zeros.iter().zip(0..) {
        assert!((z - 0.1 * (2 * n + 1) as f64).abs() < 1e-8);
    }
}

#[test]
fn wronskian_check_rows() {
    let dir = TempDir::new().unwrap();
    let body = r#"
[problem]
potential = "harmonic"
hbar = 0.05
energy_min = 0.5
energy_max = 1.5
[wronlab]
energy = 1.0
"#;
    let cfg = write_config(&dir, "w.toml", body);
    let out = bsq(&["wronskian-check"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("check,value,bound,pass"));
    let names = column(&csv, "check");
    for expected in [
        "commutator_identity",
        "flux_w_right",
        "flux_w_left",
        "chi_independence",
        "gram_det",
    ] {
        assert!(names.iter().any(|n| n == expected), "{expected}");
    }
    assert!(column(&csv, "pass").iter().all(|p| p == "true"), "{csv}");
}

#[test]
fn convergence_reports_slopes() {
    let dir = TempDir::new().unwrap();
    let body = r#"
[problem]
potential = "quartic"
hbar = [0.2, 0.1, 0.05, 0.025]
energy_min = 1.0
energy_max = 3.0
"#;
    let cfg = write_config(&dir, "q.toml", body);
    let out = bsq(&["convergence"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("h,max_err_order0,max_err_order2"));
    let comment = csv.lines().last().unwrap();
    assert!(comment.starts_with("# slope_order0="));
    let slope2: f64 = comment.split("slope_order2=").nth(1).unwrap().parse().unwrap();
    assert!(slope2 >= 3.5, "{comment}");
    let single = write_config(&dir, "one.toml", &body.replace("[0.2, 0.1, 0.05, 0.025]", "0.1"));
    assert_eq!(bsq(&["convergence"], &single).status.code(), Some(2));
}
