use std::path::Path;
use std::process::{Command, Output};

use boussinesq::io::json::run_report_from_json;
use boussinesq::io::{read_checkpoint, read_report_json};

const RUN: &str = "[run]\nn = 16\nt_final = 0.1\nkappa = 1e-2\nnu = 1e-3\ncheckpoint_times = [0.05]\n";
const SWEEP: &str = "[run]\nn = 16\nt_final = 0.1\nkappa = 1e-2\nsamples_per_unit = 40\n\n\
[sweep]\nnu_list = [1e-2, 1e-3, 1e-4]\nperturb_omega = 1.0\nperturb_theta = 1.0\n\
mollifier_cutoffs = [2, 4]\ngronwall_cutoff = 2\nsnapshot_stride = 1\nworkers = 1\n";

fn bq(args: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bq")).args(args).output().expect("run bq")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&bq(&[])), 1);
    assert_eq!(code(&bq(&["frobnicate".as_ref()])), 1);
    assert_eq!(code(&bq(&["--help".as_ref()])), 0);
    assert_eq!(code(&bq(&["run".as_ref(), "/nonexistent/config.toml".as_ref()])), 1);
}

#[test]
fn config_errors_are_reported_together() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[run]\nn = 15\nt_final = 1\nkappa = 0\ncolour = 3\n");
    let out = bq(&["run".as_ref(), &cfg]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["run.colour", "kappa > 0"] {
        assert!(err.contains(needle), "{needle} missing from {err}");
    }
}

#[test]
fn run_writes_trace_report_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", RUN);
    let out_dir = dir.path().join("out");
    let out = bq(&["run".as_ref(), &cfg, "--out".as_ref(), &out_dir]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report = run_report_from_json(&std::fs::read(out_dir.join("run.json")).unwrap()).unwrap();
    assert!(report.abort.is_none());
    assert_eq!(report.checkpoints, vec!["checkpoint_000.bqchk".to_string()]);
    let chk = read_checkpoint(&out_dir.join("checkpoint_000.bqchk")).unwrap();
    assert_eq!(chk.t, 0.05);
    assert_eq!(chk.nu, 1e-3);
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,u_l2,"));
    let sweep_cfg = write(dir.path(), "sweep.toml", SWEEP);
    assert_eq!(code(&bq(&["run".as_ref(), &sweep_cfg])), 1);
}

#[test]
fn sweep_check_envelope_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.toml", SWEEP);
    let out_dir = dir.path().join("sweep");
    let out = bq(&["sweep".as_ref(), &cfg, "--out".as_ref(), &out_dir]);
    let status = code(&out);
    assert!(status == 0 || status == 2, "{}", String::from_utf8_lossy(&out.stderr));
    let report_path = out_dir.join("report.json");
    let report = read_report_json(&report_path).unwrap();
    assert_eq!(report.runs.len(), 3);
    assert_eq!(status == 0, report.all_passed());
    for name in ["reference.csv", "nu1e-2.csv", "nu1e-3_gaps.csv", "nu1e-4.csv"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }

    let check = bq(&["check".as_ref(), &report_path]);
    assert_eq!(code(&check), status);
    assert!(String::from_utf8_lossy(&check.stdout).contains("reference completed"));

    // A stored verdict that disagrees with the stored series is flagged.
    let mut tampered = report.clone();
    tampered.runs[0].checks = Default::default();
    let tampered_path = out_dir.join("tampered.json");
    boussinesq::io::write_report_json(&tampered, &tampered_path).unwrap();
    let out = bq(&["check".as_ref(), &tampered_path]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("differ from re-evaluation"));

    // Invariants recomputed from a modified trace disagree with the report.
    let trace = out_dir.join("reference.csv");
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut cells: Vec<String> = lines[2].split(',').map(str::to_string).collect();
    cells[8] = "9.0e0".into();
    lines[2] = cells.join(",");
    std::fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let out = bq(&["check".as_ref(), &report_path]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("reference.csv differ"));

    let env_path = out_dir.join("loose.json");
    let out = bq(&["envelope".as_ref(), &report_path, "--c0".as_ref(), "4".as_ref(), "--out".as_ref(), &env_path]);
    assert_ne!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let loose = read_report_json(&env_path).unwrap();
    assert_eq!(loose.metadata.options.c0, 4.0);
    assert_eq!(loose.constants.unwrap().c0, 4.0);
    assert_eq!(code(&bq(&["envelope".as_ref(), &report_path, "--c0".as_ref(), "-1".as_ref()])), 1);

    let plots = dir.path().join("plots");
    let out = bq(&["plot".as_ref(), &report_path, "--out".as_ref(), &plots]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(plots.join("convergence.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            boussinesq::io::parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
