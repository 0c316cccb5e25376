use std::fs;
use std::path::Path;
use std::process::Command;

use topopt::optimizers::{ConvergenceRecord, IterationRow};
use topopt::problems::builtin_problem;
use topopt::simp_model::DesignField;
use topopt_cli::{convergence_csv, density_csv, density_pgm, pixel, run_cli, write_atomic};

fn run(args: &[&str], out: &Path) -> i32 {
    let mut argv = vec!["topopt", "--out", out.to_str().unwrap()];
    argv.extend_from_slice(args);
    run_cli(argv)
}

#[test]
fn pixel_rule() {
    assert_eq!(pixel(1.0), 0);
    assert_eq!(pixel(0.001), 255);
    assert_eq!(pixel(0.5), 128);
    assert_eq!(pixel(0.0), 255);
    for i in 0..=1000 {
        let rho = i as f64 / 1000.0;
        let back = 1.0 - pixel(rho) as f64 / 255.0;
        assert!((back - rho).abs() <= 1.0 / 255.0);
    }
}

#[test]
fn image_rows_run_top_to_bottom() {
    let p = builtin_problem("cantilever", 3, 2, 0.5).unwrap();
    // element e = ex·ny + ey; make the top row solid
    let rho: Vec<f64> = (0..6).map(|e| if e % 2 == 1 { 1.0 } else { 0.001 }).collect();
    let f = DesignField::new(rho, 0.001, 3.003, vec![1.0; 6]).unwrap();
    assert_eq!(density_pgm(&f, &p.grid), "P2\n3 2\n255\n0 0 0\n255 255 255\n");
    let csv = density_csv(&f, &p.grid);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].split(',').all(|v| v.parse::<f64>().unwrap() == 1.0));
    assert!(lines[1].split(',').all(|v| v.parse::<f64>().unwrap() == 0.001));
}

#[test]
fn convergence_log_round_trips() {
    assert_eq!(convergence_csv(&ConvergenceRecord::default()), "iter,compliance,volume,kkt_inf,max_change,lambda\n");
    let row = IterationRow {
        iter: 0,
        compliance: 0.1 + 0.2,
        volume: 1.0 / 3.0,
        kkt_inf: 1e-300,
        max_change: 0.0,
        lambda: -std::f64::consts::PI,
        reduced_energy: None,
    };
    let text = convergence_csv(&ConvergenceRecord { rows: vec![row] });
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let v: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(v, vec![0.0, row.compliance, row.volume, row.kkt_inf, row.max_change, row.lambda]);
}

#[test]
fn atomic_write_replaces_whole_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.txt");
    write_atomic(&path, "first version, longer\n").unwrap();
    write_atomic(&path, "second\n").unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), "second\n");
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn benchmark_run_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(
        &["--problem", "cantilever", "--nx", "40", "--ny", "20", "--volfrac", "0.5", "--optimizer", "pg-add"],
        dir.path(),
    );
    assert_eq!(code, 0);
    let pgm = fs::read_to_string(dir.path().join("density.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n40 20\n255\n"));
    assert_eq!(pgm.lines().count(), 3 + 20);
    let csv = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert_eq!(csv.lines().count(), 20);
    assert!(csv.lines().all(|l| l.split(',').count() == 40));
    let log = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(log.lines().count() > 2);
}

#[test]
fn identical_runs_give_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--problem", "mbb", "--nx", "30", "--ny", "10", "--optimizer", "oc", "--max-iters", "30"];
    let ca = run(&args, a.path());
    let cb = run(&args, b.path());
    assert_eq!(ca, cb);
    for name in ["density.pgm", "density.csv", "convergence.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn zero_iterations_write_the_initial_field() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(&["--nx", "8", "--ny", "4", "--volfrac", "0.5", "--max-iters", "0"], dir.path());
    assert_eq!(code, 2);
    let pgm = fs::read_to_string(dir.path().join("density.pgm")).unwrap();
    assert!(pgm.lines().skip(3).all(|l| l.split(' ').all(|p| p == "128")));
    let log = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(log.lines().count(), 1);
}

#[test]
fn skip_flags_suppress_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(&["--nx", "8", "--ny", "4", "--max-iters", "3", "--no-pgm", "--no-csv"], dir.path());
    assert_eq!(code, 2);
    assert!(!dir.path().join("density.pgm").exists());
    assert!(!dir.path().join("density.csv").exists());
    assert!(dir.path().join("convergence.csv").exists());
}

#[test]
fn problem_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("beam.txt");
    let p = builtin_problem("cantilever", 12, 6, 0.4).unwrap();
    fs::write(&file, p.to_problem_file()).unwrap();
    let out = dir.path().join("out");
    let code = run(&["--problem", file.to_str().unwrap(), "--optimizer", "pg-add"], &out);
    assert_eq!(code, 0);
    assert!(fs::read_to_string(out.join("density.pgm")).unwrap().starts_with("P2\n12 6\n"));
    assert_eq!(run(&["--problem", file.to_str().unwrap(), "--nx", "5"], &out), 1);
}

#[test]
fn configuration_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--optimizer", "newton"][..],
        &["--volfrac", "1.5"],
        &["--tension-k", "2"],
        &["--optimizer", "oc", "--gamma", "0.1"],
        &["--optimizer", "pg-add", "--damping", "0.5"],
        &["--move-limit", "0"],
        &["--problem", "no-such-problem"],
        &["--nx", "many"],
    ] {
        assert_eq!(run(args, dir.path()), 1, "{args:?}");
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn binary_reports_status_and_lists_optimizers() {
    let exe = env!("CARGO_BIN_EXE_topopt");
    let dir = tempfile::tempdir().unwrap();
    let bad = Command::new(exe)
        .args(["--optimizer", "newton", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&bad.stderr);
    for name in ["oc", "pg-add", "pg-mult"] {
        assert!(msg.contains(name), "{msg}");
    }

    let ok = Command::new(exe)
        .args(["--problem", "bridge", "--nx", "20", "--ny", "10", "--volfrac", "0.3"])
        .args(["--optimizer", "pg-add", "--tension-k", "0", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(text.contains("compliance") && text.contains("reduced energy"), "{text}");
}
