//! End-to-end checks of the command-line binary: output files, formats,
//! validation, config handling and run-to-run determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hjdecomp"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn hjdecomp")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn solve_writes_field_and_report() {
    let dir = scratch("solve-happy");
    let field = dir.join("v.txt");
    let report = dir.join("report.csv");
    let out = run(&[
        "solve",
        "--problem",
        "eikonal-kruzkov",
        "--nx",
        "20",
        "--out-field",
        field.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_ok(&out);
    let (spec, loaded) = hjdecomp::io::read_field(&field).unwrap();
    assert_eq!((spec.nx, spec.ny), (21, 21));
    assert_eq!(loaded.len(), 441);

    let report = fs::read_to_string(&report).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next().unwrap(), "problem,nx,iters,residual,seconds");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "eikonal-kruzkov");
    assert_eq!(row[1], "21");
    assert!(row[2].parse::<usize>().unwrap() > 0);
    assert!(row[3].parse::<f64>().unwrap() <= 1e-6);
}

#[test]
fn solve_rerun_is_byte_identical() {
    let dir = scratch("solve-determinism");
    let a = dir.join("a.txt");
    let b = dir.join("b.txt");
    for (path, workers) in [(&a, "1"), (&b, "2")] {
        let out = run(&[
            "solve",
            "--problem",
            "eikonal-square",
            "--nx",
            "16",
            "--workers",
            workers,
            "--out-field",
            path.to_str().unwrap(),
        ]);
        assert_ok(&out);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn isa_writes_field_masks_and_stage_report() {
    let dir = scratch("isa-happy");
    let field = dir.join("vbar.txt");
    let masks = dir.join("masks");
    let report = dir.join("stages.csv");
    let out = run(&[
        "isa",
        "--problem",
        "eikonal-kruzkov",
        "--coarse",
        "10",
        "--fine",
        "40",
        "--parts",
        "4",
        "--C",
        "0.05",
        "--M",
        "0.45",
        "--q",
        "0.5",
        "--workers",
        "2",
        "--out-field",
        field.to_str().unwrap(),
        "--out-masks",
        masks.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_ok(&out);

    let (spec, _) = hjdecomp::io::read_field(&field).unwrap();
    assert_eq!(spec.nx, 41);

    for part in 0..4 {
        let pgm = fs::read_to_string(masks.join(format!("mask_{part}.pgm"))).unwrap();
        let mut lines = pgm.lines();
        assert_eq!(lines.next().unwrap(), "P2");
        assert_eq!(lines.next().unwrap(), "41 41");
        assert_eq!(lines.next().unwrap(), "255");
        let pixels: Vec<&str> = lines.flat_map(|l| l.split_whitespace()).collect();
        assert_eq!(pixels.len(), 41 * 41);
        assert!(pixels.iter().all(|p| *p == "0" || *p == "255"));
        assert!(pixels.iter().any(|p| *p == "255"));
    }
    assert!(masks.join("masks.txt").exists());

    let stages = fs::read_to_string(&report).unwrap();
    let mut lines = stages.lines();
    assert_eq!(lines.next().unwrap(), "stage,part,iters,seconds");
    let body: Vec<&str> = lines.collect();
    assert!(body.iter().any(|l| l.starts_with("coarse_aux,0,")));
    assert!(body.iter().any(|l| l.starts_with("project,")));
    assert!(body.iter().any(|l| l.starts_with("fine_solve,3,")));
    assert!(body.iter().any(|l| l.starts_with("assembly,")));
}

#[test]
fn isa_outputs_are_identical_across_worker_counts() {
    let dir = scratch("isa-workers");
    let mut dumps = Vec::new();
    for workers in ["1", "2"] {
        let field = dir.join(format!("v{workers}.txt"));
        let masks = dir.join(format!("m{workers}"));
        let out = run(&[
            "isa",
            "--problem",
            "eikonal-kruzkov",
            "--coarse",
            "10",
            "--fine",
            "30",
            "--parts",
            "4",
            "--C",
            "0.05",
            "--M",
            "0.45",
            "--workers",
            workers,
            "--out-field",
            field.to_str().unwrap(),
            "--out-masks",
            masks.to_str().unwrap(),
        ]);
        assert_ok(&out);
        let mut bundle = fs::read(&field).unwrap();
        for part in 0..4 {
            bundle.extend(fs::read(masks.join(format!("mask_{part}.pgm"))).unwrap());
        }
        dumps.push(bundle);
    }
    assert_eq!(dumps[0], dumps[1]);
}

#[test]
fn decompose_reports_fractions_and_checks_overlap() {
    let dir = scratch("decompose");
    let masks = dir.join("masks");
    let out = run(&[
        "decompose",
        "--problem",
        "eikonal-kruzkov",
        "--nx",
        "15",
        "--parts",
        "4",
        "--penalty",
        "ramp",
        "--C",
        "0.05",
        "--M",
        "0.45",
        "--check-h2",
        "--workers",
        "2",
        "--tie-tol",
        "0.13",
        "--out-masks",
        masks.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("part 0:"));
    assert!(stdout.contains("overlap check:"));
    assert!(stdout.contains("pass"), "stdout: {stdout}");
    assert!(masks.join("mask_2.pgm").exists());
}

#[test]
fn config_file_provides_defaults_and_flags_override() {
    let dir = scratch("config");
    let conf = dir.join("run.conf");
    fs::write(&conf, "problem=eikonal-square\nnx=8\nworkers=1\n").unwrap();
    let field = dir.join("v.txt");
    // --nx on the command line beats the config value
    let out = run(&[
        "solve",
        "--config",
        conf.to_str().unwrap(),
        "--nx",
        "12",
        "--out-field",
        field.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let (spec, _) = hjdecomp::io::read_field(&field).unwrap();
    assert_eq!(spec.nx, 13);
}

#[test]
fn bench_emits_schema_and_rows() {
    let dir = scratch("bench");
    let out_csv = dir.join("t1.csv");
    let out = run(&[
        "bench",
        "--table",
        "t1",
        "--size",
        "5",
        "--size",
        "7",
        "--workers",
        "2",
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let text = fs::read_to_string(&out_csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "problem,scheme,parts,coarse_nx,fine_nx,C,M,q,gamma,stage,seconds,delta_inf,delta_1,max_fraction"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[0], "eikonal-kruzkov");
        assert_eq!(cols[9], "reconstruction");
        let fraction: f64 = cols[13].parse().unwrap();
        assert!(fraction > 0.0 && fraction <= 1.0);
    }
}

#[test]
fn invalid_inputs_fail_before_compute() {
    // unsupported part count for the square layout
    let out = run(&[
        "decompose",
        "--problem",
        "eikonal-kruzkov",
        "--nx",
        "10",
        "--parts",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scheme"));

    let out = run(&["solve", "--problem", "not-a-problem", "--nx", "10"]);
    assert_eq!(out.status.code(), Some(1));

    // unknown flag is a usage error
    let out = run(&["solve", "--problem", "eikonal-square", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    // missing required option
    let out = run(&["solve", "--problem", "eikonal-square"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--nx"));
}

#[test]
fn seed_flag_is_accepted_and_inert() {
    let dir = scratch("seed");
    let a = dir.join("a.txt");
    let b = dir.join("b.txt");
    for (path, seed) in [(&a, "1"), (&b, "99")] {
        let out = run(&[
            "solve",
            "--problem",
            "eikonal-square",
            "--nx",
            "10",
            "--seed",
            seed,
            "--out-field",
            path.to_str().unwrap(),
        ]);
        assert_ok(&out);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn strip_problem_runs_with_vertical_partition() {
    let dir = scratch("strip");
    let masks = dir.join("masks");
    let out = run(&[
        "decompose",
        "--problem",
        "strip-flat",
        "--param",
        "delta=5",
        "--nx",
        "20",
        "--parts",
        "2",
        "--C",
        "1",
        "--M",
        "1",
        "--q",
        "1",
        "--workers",
        "2",
        "--out-masks",
        masks.to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert!(masks.join("mask_1.pgm").exists());
}
