//! End-to-end checks of the binary: flags, exit codes, report shape, and
//! determinism, driven through the compiled executable.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

fn pmcgd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pmcgd"))
}

fn write_csv(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(content.as_bytes()).unwrap();
    path
}

/// Two well-separated blobs with a label column and two stray points.
fn blobs_csv(dir: &Path) -> std::path::PathBuf {
    let mut content = String::from("x,y,group\n");
    for i in 0..30 {
        let (cx, cy, class) = if i % 2 == 0 {
            (-4.0, -4.0, "left")
        } else {
            (4.0, 4.0, "right")
        };
        content.push_str(&format!(
            "{},{},{}\n",
            cx + ((i * 37) % 11) as f64 / 10.0 - 0.5,
            cy + ((i * 53) % 13) as f64 / 12.0 - 0.5,
            class
        ));
    }
    content.push_str("12.0,-12.0,left\n-12.0,12.0,right\n");
    write_csv(dir, "blobs.csv", &content)
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn sweep_produces_a_valid_round_tripping_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = blobs_csv(dir.path());
    let out = pmcgd()
        .args([
            "sweep",
            "--input",
            input.to_str().unwrap(),
            "--label-column",
            "group",
            "--structures",
            "VII,EEE",
            "--g-min",
            "1",
            "--g-max",
            "2",
            "--restarts",
            "3",
            "--seed",
            "5",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let json = stdout_str(&out);
    let report: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(report["ranking"].as_array().unwrap().len(), 4);
    assert_eq!(report["observations"].as_array().unwrap().len(), 32);
    assert!(report["confusion"]["classes"].as_array().is_some());
    // Lossless round-trip: parse -> serialize -> parse.
    let reparsed: serde_json::Value =
        serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(reparsed, report);
}

#[test]
fn identical_invocations_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let input = blobs_csv(dir.path());
    let args = [
        "sweep",
        "--input",
        input.to_str().unwrap(),
        "--columns",
        "x,y",
        "--structures",
        "VVI",
        "--g-min",
        "2",
        "--g-max",
        "2",
        "--restarts",
        "3",
        "--seed",
        "11",
    ];
    let a = pmcgd().args(args).output().unwrap();
    let b = pmcgd().args(args).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "reports differ between identical runs");
}

#[test]
fn plot_writes_deterministic_svg_with_one_marker_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = blobs_csv(dir.path());
    let svg_path = dir.path().join("plot.svg");
    let report_path = dir.path().join("r.json");
    let args = [
        "sweep",
        "--input",
        input.to_str().unwrap(),
        "--label-column",
        "group",
        "--structures",
        "VII",
        "--g-min",
        "2",
        "--g-max",
        "2",
        "--restarts",
        "3",
        "--output",
        report_path.to_str().unwrap(),
        "--plot",
        svg_path.to_str().unwrap(),
    ];
    let out = pmcgd().args(args).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let first = std::fs::read(&svg_path).unwrap();
    assert_eq!(
        String::from_utf8_lossy(&first).matches("<circle").count(),
        32
    );
    pmcgd().args(args).output().unwrap();
    let second = std::fs::read(&svg_path).unwrap();
    assert_eq!(first, second, "SVG bytes differ between identical runs");
}

#[test]
fn usage_errors_exit_1_with_machine_readable_object() {
    let out = pmcgd().args(["sweep"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value =
        serde_json::from_str(stderr_str(&out).lines().last().unwrap()).unwrap();
    assert_eq!(err["error"]["code"], 1);

    // Unknown structure code.
    let dir = tempfile::tempdir().unwrap();
    let input = blobs_csv(dir.path());
    let out = pmcgd()
        .args([
            "sweep",
            "--input",
            input.to_str().unwrap(),
            "--structures",
            "ZZZ",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_2_and_name_offending_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_csv(dir.path(), "bad.csv", "x,y\n1,2\n3,NA\n4,5\n");
    let out = pmcgd()
        .args(["sweep", "--input", input.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_str(stderr_str(&out).lines().last().unwrap()).unwrap();
    assert_eq!(err["error"]["code"], 2);
    assert!(
        err["error"]["message"].as_str().unwrap().contains("3"),
        "row number missing from {err}"
    );

    let out = pmcgd()
        .args(["sweep", "--input", "/does/not/exist.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_failures_exit_3() {
    // Three observations cannot support G = 3 with more parameters than
    // data; every fit in the grid fails.
    let dir = tempfile::tempdir().unwrap();
    let input = write_csv(dir.path(), "tiny.csv", "0.0,0.0\n0.1,0.1\n0.2,0.2\n5.0,5.0\n");
    let out = pmcgd()
        .args([
            "sweep",
            "--input",
            input.to_str().unwrap(),
            "--structures",
            "VVV",
            "--g-min",
            "4",
            "--g-max",
            "4",
            "--restarts",
            "2",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_str(&out));
    let err: serde_json::Value =
        serde_json::from_str(stderr_str(&out).lines().last().unwrap()).unwrap();
    assert_eq!(err["error"]["code"], 3);
}

#[test]
fn help_exits_zero() {
    let out = pmcgd().args(["--help"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_str(&out).contains("sweep"));
}

#[test]
fn replicate_synthetic_noise_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("synthetic.json");
    let out = pmcgd()
        .args([
            "replicate",
            "synthetic-noise",
            "--seeds",
            "2",
            "--restarts",
            "4",
            "--output",
            report_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["replication"]["experiment"], "synthetic-noise");
    assert_eq!(report["replication"]["per_seed"].as_array().unwrap().len(), 2);
    assert_eq!(report["observations"].as_array().unwrap().len(), 200);
}

#[test]
fn replicate_without_required_input_exits_1() {
    let out = pmcgd().args(["replicate", "wine"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
