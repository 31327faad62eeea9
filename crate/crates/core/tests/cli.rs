//! Black-box tests of the `ssnsdp` binary: exit codes, JSON records, SDPA
//! generation, benchmark CSV output and the iteration trace.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ssnsdp::report::{RunRecord, CSV_HEADER};
use ssnsdp::sdpa::read_sdpa;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssnsdp"))
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ssnsdp-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_k3_graph(dir: &Path) -> PathBuf {
    let path = dir.join("k3.graph");
    fs::write(&path, "3 3\n1 2 1\n1 3 1\n2 3 1\n").unwrap();
    path
}

fn k3_sdpa(dir: &Path) -> PathBuf {
    let graph = write_k3_graph(dir);
    let out = dir.join("k3.dat-s");
    let status = bin()
        .args(["generate", "maxcut"])
        .arg(&graph)
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    out
}

fn stdout_record(out: &Output) -> RunRecord {
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().last().expect("one JSON line");
    RunRecord::from_json(line).expect("record parses")
}

#[test]
fn solve_k3_prints_record_and_exits_zero() {
    let dir = tmpdir("solve");
    let file = k3_sdpa(&dir);
    let out = bin()
        .args(["solve", "--preset", "maxcut"])
        .arg(&file)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let rec = stdout_record(&out);
    assert_eq!(rec.problem, "k3");
    assert_eq!((rec.n, rec.m), (3, 3));
    assert!((rec.obj_primal + 2.25).abs() <= 1e-5, "obj {}", rec.obj_primal);
    assert!(rec.eta_p.max(rec.eta_d).max(rec.eta_c) <= 1e-6);
    assert!(rec.it0 > 0);
}

#[test]
fn missing_file_exits_one_with_stderr() {
    let out = bin().args(["solve", "/nonexistent/file.dat-s"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert!(out.stdout.is_empty());
}

#[test]
fn parse_error_reports_line() {
    let dir = tmpdir("parse");
    let bad = dir.join("bad.dat-s");
    fs::write(&bad, "1\n2\n2 2\n1.0\n").unwrap();
    let out = bin().arg("solve").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("multi-block"), "stderr: {err}");
}

#[test]
fn non_optimal_status_exits_two() {
    let dir = tmpdir("exit2");
    let file = k3_sdpa(&dir);
    let out = bin()
        .args(["solve", "--max-iter", "0", "--cold"])
        .arg(&file)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let rec = stdout_record(&out);
    assert_eq!(rec.it1, 0);
}

#[test]
fn loose_tolerance_takes_fewer_iterations() {
    let dir = tmpdir("tol");
    let graph = dir.join("er.graph");
    let er = ssnsdp::generators::Graph::erdos_renyi(30, 0.3, 11);
    let mut text = format!("{} {}\n", er.n(), er.edges().len());
    for (i, j, w) in er.edges() {
        text.push_str(&format!("{i} {j} {w}\n"));
    }
    fs::write(&graph, text).unwrap();
    let file = dir.join("er.dat-s");
    assert!(bin()
        .args(["generate", "maxcut"])
        .arg(&graph)
        .arg(&file)
        .status()
        .unwrap()
        .success());

    let loose = stdout_record(
        &bin()
            .args(["solve", "--preset", "maxcut", "--tol", "1e-2"])
            .arg(&file)
            .output()
            .unwrap(),
    );
    let tight = stdout_record(
        &bin()
            .args(["solve", "--preset", "maxcut", "--tol", "1e-6"])
            .arg(&file)
            .output()
            .unwrap(),
    );
    assert!(
        loose.it1 <= tight.it1,
        "loose {} > tight {}",
        loose.it1,
        tight.it1
    );
}

#[test]
fn generate_families_produce_parsable_sdpa() {
    let dir = tmpdir("gen");
    let graph = write_k3_graph(&dir);

    let maxcut = dir.join("maxcut.dat-s");
    assert!(bin()
        .args(["generate", "maxcut"])
        .arg(&graph)
        .arg(&maxcut)
        .status()
        .unwrap()
        .success());
    let p = read_sdpa(&fs::read_to_string(&maxcut).unwrap()).unwrap();
    assert_eq!((p.n(), p.m()), (3, 3));

    let c5 = dir.join("c5.graph");
    fs::write(&c5, "5 5\n1 2 1\n2 3 1\n3 4 1\n4 5 1\n1 5 1\n").unwrap();
    let theta = dir.join("theta.dat-s");
    assert!(bin()
        .args(["generate", "theta"])
        .arg(&c5)
        .arg(&theta)
        .status()
        .unwrap()
        .success());
    let p = read_sdpa(&fs::read_to_string(&theta).unwrap()).unwrap();
    assert_eq!((p.n(), p.m()), (5, 6));

    let biq_src = dir.join("biq.txt");
    fs::write(&biq_src, "2\n2.0 0.5\n0.5 1.0\n-1.0 0.5\n").unwrap();
    let biq = dir.join("biq.dat-s");
    assert!(bin()
        .args(["generate", "biq"])
        .arg(&biq_src)
        .arg(&biq)
        .status()
        .unwrap()
        .success());
    let p = read_sdpa(&fs::read_to_string(&biq).unwrap()).unwrap();
    assert_eq!((p.n(), p.m()), (3, 3));

    let clu_src = dir.join("clu.txt");
    fs::write(&clu_src, "3 2\n1.0 0.2 0.2\n0.2 1.0 0.2\n0.2 0.2 1.0\n").unwrap();
    let clu = dir.join("clu.dat-s");
    assert!(bin()
        .args(["generate", "clustering"])
        .arg(&clu_src)
        .arg(&clu)
        .status()
        .unwrap()
        .success());
    let p = read_sdpa(&fs::read_to_string(&clu).unwrap()).unwrap();
    assert_eq!((p.n(), p.m()), (3, 4));

    let out = bin()
        .args(["generate", "heat", "x", "y"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn generate_er_source_is_seeded() {
    let dir = tmpdir("er");
    let a = dir.join("a.dat-s");
    let b = dir.join("b.dat-s");
    for out in [&a, &b] {
        assert!(bin()
            .args(["generate", "maxcut", "er:20:0.3", "--seed", "7"])
            .arg(out)
            .status()
            .unwrap()
            .success());
    }
    assert_eq!(fs::read_to_string(&a).unwrap(), fs::read_to_string(&b).unwrap());
}

#[test]
fn trace_file_follows_schema() {
    let dir = tmpdir("trace");
    let file = k3_sdpa(&dir);
    let trace = dir.join("trace.jsonl");
    assert!(bin()
        .args(["solve", "--preset", "maxcut", "--trace"])
        .arg(&trace)
        .arg(&file)
        .status()
        .unwrap()
        .success());
    let text = fs::read_to_string(&trace).unwrap();
    let mut count = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            ["eps", "eta_c", "eta_d", "eta_p", "k", "pcg", "psi", "step"]
        );
        count += 1;
    }
    assert!(count > 0, "trace is empty");
}

#[test]
fn bench_writes_csv_in_manifest_order() {
    let dir = tmpdir("bench");
    let k3 = k3_sdpa(&dir);
    let c5g = dir.join("c5.graph");
    fs::write(&c5g, "5 5\n1 2 1\n2 3 1\n3 4 1\n4 5 1\n1 5 1\n").unwrap();
    let c5 = dir.join("c5.dat-s");
    assert!(bin()
        .args(["generate", "theta"])
        .arg(&c5g)
        .arg(&c5)
        .status()
        .unwrap()
        .success());

    let manifest = dir.join("manifest.txt");
    fs::write(
        &manifest,
        format!(
            "# toy sweep\n{} maxcut\n{} theta\n",
            k3.display(),
            c5.display()
        ),
    )
    .unwrap();
    let csv_path = dir.join("out.csv");
    let out = bin()
        .arg("bench")
        .arg(&manifest)
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success());

    // one JSON record per instance on stdout
    let stdout = String::from_utf8_lossy(&out.stdout);
    let records: Vec<RunRecord> = stdout
        .lines()
        .map(|l| RunRecord::from_json(l).unwrap())
        .collect();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0].problem, "k3");
    assert_eq!(records[1].problem, "c5");

    let csv = fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    for (row, rec) in rows.iter().zip(&records) {
        let parsed = RunRecord::from_csv_row(row).unwrap();
        assert_eq!(parsed, rec.csv_view());
    }
}

#[test]
fn bench_empty_manifest_header_only() {
    let dir = tmpdir("empty");
    let manifest = dir.join("manifest.txt");
    fs::write(&manifest, "# nothing\n").unwrap();
    let csv_path = dir.join("out.csv");
    let out = bin()
        .arg("bench")
        .arg(&manifest)
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&csv_path).unwrap(), format!("{CSV_HEADER}\n"));
}

#[test]
fn bench_bad_manifest_aborts_before_running() {
    let dir = tmpdir("badmanifest");
    let manifest = dir.join("manifest.txt");
    fs::write(&manifest, "file.dat-s not_a_preset\n").unwrap();
    let csv_path = dir.join("out.csv");
    let out = bin()
        .arg("bench")
        .arg(&manifest)
        .arg(&csv_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!csv_path.exists(), "csv must not be written on manifest errors");
}

#[test]
fn bench_missing_instance_recorded_without_aborting() {
    let dir = tmpdir("partial");
    let k3 = k3_sdpa(&dir);
    let manifest = dir.join("manifest.txt");
    fs::write(
        &manifest,
        format!("{} maxcut\n/nonexistent.dat-s maxcut\n", k3.display()),
    )
    .unwrap();
    let csv_path = dir.join("out.csv");
    let out = bin()
        .arg("bench")
        .arg(&manifest)
        .arg(&csv_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1)); // hard failure among instances
    let csv = fs::read_to_string(&csv_path).unwrap();
    assert_eq!(csv.lines().count(), 2); // header + the solved instance
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent.dat-s"));
}

#[test]
fn generated_solve_matches_in_memory_objective() {
    let dir = tmpdir("roundtrip");
    let file = k3_sdpa(&dir);
    let rec = stdout_record(
        &bin()
            .args(["solve", "--preset", "maxcut"])
            .arg(&file)
            .output()
            .unwrap(),
    );

    let p = ssnsdp::generators::maxcut_sdp(&common_k3());
    let ws = ssnsdp::admm_warmstart(&p, &ssnsdp::solver::Preset::Maxcut.warmstart_config())
        .unwrap();
    let rep = ssnsdp::solve(
        &p,
        &ssnsdp::solver::Preset::Maxcut.solver_config(),
        Some(ws.into_starting_point()),
    )
    .unwrap();
    assert!(
        (rec.obj_primal - rep.residuals.obj_primal).abs() <= 1e-10,
        "cli {} vs library {}",
        rec.obj_primal,
        rep.residuals.obj_primal
    );
}

fn common_k3() -> ssnsdp::generators::Graph {
    ssnsdp::generators::Graph::new(3, vec![(1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)]).unwrap()
}
