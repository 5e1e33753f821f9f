//! End-to-end tests of the `vbl` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vbl::scenarios::REGISTRY;

fn vbl(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vbl"));
    cmd.args(args);
    match out_dir {
        Some(d) => cmd.env("VBL_OUTPUT_DIR", d),
        None => cmd.env_remove("VBL_OUTPUT_DIR"),
    };
    cmd.output().expect("spawn vbl")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn template(name: &str) -> String {
    let o = vbl(&["scenarios", "--template", name], None);
    assert!(o.status.success(), "{}", stderr(&o));
    stdout(&o)
}

/// Writes `text` with `edits` applied line by line (`key = value` replaced).
fn write_config(dir: &Path, file: &str, text: &str, edits: &[(&str, &str)]) -> std::path::PathBuf {
    let body: String = text
        .lines()
        .map(|l| {
            let key = l.split('=').next().unwrap_or("").trim();
            match edits.iter().find(|(k, _)| *k == key) {
                Some((k, v)) if l.contains('=') => format!("{k} = {v}\n"),
                _ => format!("{l}\n"),
            }
        })
        .collect();
    let path = dir.join(file);
    fs::write(&path, body).unwrap();
    path
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn registry_lists_every_scenario() {
    let o = vbl(&["scenarios"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in ["heat_sanity", "vacuum_blob", "rough_mu", "barotropic_forcing", "system_kappa_sweep", "recursion_only"] {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
}

#[test]
fn every_template_validates() {
    for s in &REGISTRY {
        let cfg = vbl::ExperimentConfig::parse(&template(s.name)).unwrap_or_else(|e| panic!("{}: {e}", s.name));
        assert!(cfg.violations().is_empty(), "{}: {:?}", s.name, cfg.violations());
    }
}

#[test]
fn unknown_template_lists_the_registry() {
    let o = vbl(&["scenarios", "--template", "nope"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("heat_sanity"));
}

#[test]
fn kappa_outside_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "k.ini", &template("barotropic_forcing"), &[("kappa", "0.6")]);
    let o = vbl(&["run", path.to_str().unwrap()], Some(&dir.path().join("out")));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("3|lambda| <= kappa nu") && err.contains("0 < kappa < 1/2") && err.contains("kappa = 0.6"), "{err}");
}

#[test]
fn integrability_exponent_is_checked_against_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "p.ini", &template("vacuum_blob"), &[("p", "1"), ("alpha", "0.5")]);
    let o = vbl(&["run", path.to_str().unwrap()], Some(&dir.path().join("out")));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("p > 1/(1-alpha)") && err.contains("needs p > 2"), "{err}");
}

#[test]
fn every_violation_is_reported_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "m.ini", &template("barotropic_forcing"), &[("kappa", "0.6"), ("mu", "0.5"), ("precision", "40")]);
    let o = vbl(&["run", path.to_str().unwrap()], Some(&dir.path().join("out")));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("kappa = 0.6") && err.contains("mu >= 1") && err.contains("precision"), "{err}");
}

#[test]
fn parse_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ini");
    fs::write(&path, "[grid]\nn = 64\nthis line is broken\n").unwrap();
    let o = vbl(&["run", path.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    fs::write(&path, "[grid]\nn = 64\n\n[time]\nbogus = 1\n").unwrap();
    let o = vbl(&["run", path.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5: unknown key `bogus`"), "{}", stderr(&o));
}

#[test]
fn unknown_scenario_lists_the_registry() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "u.ini", &template("heat_sanity"), &[("name", "mystery")]);
    let o = vbl(&["run", path.to_str().unwrap()], Some(&dir.path().join("out")));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("recursion_only"), "{}", stderr(&o));
}

#[test]
fn output_directory_follows_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("custom");
    let o = vbl(&["recursion", "model"], Some(&out));
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for f in ["trace.csv", "summary.txt", "plot.py"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("PARTIAL").exists());
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "v.ini", &template("vacuum_blob"), &[]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = vbl(&["run", path.to_str().unwrap()], Some(d));
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    let (ca, cb) = (csvs(&a), csvs(&b));
    assert!(ca.len() >= 3);
    assert_eq!(ca, cb);
}

#[test]
fn failed_check_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    // A heavier datum tail at a coarser level schedule: too few positive
    // tail levels decay too slowly for the kappa = 1/4 target.
    let path = write_config(
        dir.path(),
        "t.ini",
        &template("system_kappa_sweep"),
        &[("tail_power", "0.25"), ("k_level", "0.5"), ("t_final", "0.02")],
    );
    let out = dir.path().join("out");
    let o = vbl(&["run", path.to_str().unwrap()], Some(&out));
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL  tail exponent"));
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("overall: FAIL"));
}

#[test]
fn numerical_failure_leaves_a_partial_marker() {
    let dir = tempfile::tempdir().unwrap();
    let text = template("heat_sanity").replace("mu = 1.0\n", "mu = 1.0\nmu_high = 1e300\n");
    let path = write_config(dir.path(), "n.ini", &text, &[("n", "64")]);
    let out = dir.path().join("out");
    let o = vbl(&["run", path.to_str().unwrap()], Some(&out));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(fs::read_to_string(out.join("PARTIAL")).unwrap().contains("run aborted"));
}

#[test]
fn sweep_reports_the_uniformity_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "s.ini", &template("vacuum_blob"), &[("n", "128")]);
    let out = dir.path().join("sweep");
    let o = vbl(&["sweep", path.to_str().unwrap(), "--floors", "0,1e-3,1e-1"], Some(&out));
    let text = stdout(&o);
    assert!(text.contains("floor uniformity") && text.contains("max/min over floors"), "{text}");
    assert!(out.join("sweep.csv").exists());
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 4);
}

#[test]
fn recursion_accepts_parameter_lists_and_rejects_bad_ones() {
    let dir = tempfile::tempdir().unwrap();
    let o = vbl(&["recursion", "a=2,beta1=1.5,beta2=2,c=1,k=50"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("threshold dichotomy"));
    let o = vbl(&["recursion", "a=2,beta1=2,beta2=1.5"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
}
