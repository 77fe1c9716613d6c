//! Exit codes and subcommand wiring through the installed binary.

use std::io::Write as _;
use std::path::Path;
use std::process::Command;

fn sumforge(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sumforge"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_file(path: &Path, content: &str) {
    let mut f = std::fs::File::create(path).unwrap();
    f.write_all(content.as_bytes()).unwrap();
}

#[test]
fn unknown_subcommand_and_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = sumforge(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = sumforge(&["ingest", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validation_failures_exit_1_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let captions = dir.path().join("bad.jsonl");
    write_file(
        &captions,
        concat!(
            r#"{"video_id":"v","index":0,"start_s":0.0,"end_s":180.0,"caption":"a"}"#,
            "\n",
            r#"{"video_id":"v","index":1,"start_s":170.0,"end_s":350.0,"caption":"b"}"#,
            "\n"
        ),
    );
    let out = sumforge(
        &["ingest", "--captions", captions.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("overlap"), "stderr: {stderr}");
}

#[test]
fn evaluate_writes_corpus_and_item_records() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.jsonl");
    let refs = dir.path().join("refs.jsonl");
    write_file(
        &pred,
        concat!(
            r#"{"item_id":"a","text":"the dog runs"}"#,
            "\n",
            r#"{"item_id":"b","text":"x y z"}"#,
            "\n"
        ),
    );
    write_file(
        &refs,
        concat!(
            r#"{"item_id":"a","texts":["the dog runs"]}"#,
            "\n",
            r#"{"item_id":"b","texts":["p q r"]}"#,
            "\n"
        ),
    );
    let report = dir.path().join("report.jsonl");
    let out = sumforge(
        &[
            "evaluate",
            "--pred",
            pred.to_str().unwrap(),
            "--refs",
            refs.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("2 items"), "stdout: {stdout}");

    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&report)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["type"], "corpus");
    assert_eq!(lines[0]["item_count"], 2);
    assert_eq!(lines[1]["type"], "item");
    assert_eq!(lines[1]["item_id"], "a");
    assert_eq!(lines[1]["rouge_l"], 1.0);
    assert_eq!(lines[2]["rouge_l"], 0.0);
}

#[test]
fn bound_computes_with_and_without_compute_action() {
    let dir = tempfile::tempdir().unwrap();
    let args_tail = [
        "--eps-plus",
        "0.05",
        "--divergence",
        "0.4",
        "--d",
        "10",
        "--m",
        "100",
        "--delta",
        "0.1",
        "--lambda",
        "0.02",
    ];
    for prefix in [vec!["bound"], vec!["bound", "compute"]] {
        let mut args = prefix.clone();
        args.extend_from_slice(&args_tail);
        let out = sumforge(&args, dir.path());
        assert!(out.status.success(), "args {args:?}");
        let stdout = String::from_utf8_lossy(&out.stdout);
        // 2·0.05 + 0.5·0.4 + 1.496381… + 0.02
        assert!(stdout.contains("1.816381"), "stdout: {stdout}");
    }
}

#[test]
fn bound_estimates_divergence_from_sample_files() {
    let dir = tempfile::tempdir().unwrap();
    let plus = dir.path().join("plus.jsonl");
    let minus = dir.path().join("minus.jsonl");
    let mut plus_lines = Vec::new();
    let mut minus_lines = Vec::new();
    for i in 0..40 {
        let jitter = (i % 7) as f64 * 0.05;
        plus_lines.push(format!("[{}, {}]", -6.0 + jitter, 0.5 - jitter));
        minus_lines.push(format!("[{}, {}]", 6.0 - jitter, -0.5 + jitter));
    }
    write_file(&plus, &(plus_lines.join("\n") + "\n"));
    write_file(&minus, &(minus_lines.join("\n") + "\n"));
    let out = sumforge(
        &[
            "bound",
            "--samples-plus",
            plus.to_str().unwrap(),
            "--samples-minus",
            minus.to_str().unwrap(),
            "--eps-plus",
            "0.0",
            "--d",
            "3",
            "--asymptotic",
            "--delta",
            "0.1",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("proxy divergence"), "stdout: {stdout}");
    // Perfectly separated clusters give divergence 2 → total 1.0.
    assert!(
        stdout.contains("bound total                  = 1.000000"),
        "stdout: {stdout}"
    );
}

#[test]
fn losses_demo_reports_both_losses() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("demo.jsonl");
    let out = sumforge(
        &[
            "losses",
            "demo",
            "--eta",
            "0.2",
            "--seeds",
            "2",
            "--out",
            report.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("CE "), "stdout: {stdout}");
    assert!(stdout.contains("SCE"), "stdout: {stdout}");
    let record: serde_json::Value = serde_json::from_str(
        std::fs::read_to_string(&report)
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    assert_eq!(record["eta"], 0.2);
    assert_eq!(record["seeds"].as_array().unwrap().len(), 2);
}

#[test]
fn metaprompt_requires_role_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let captions = dir.path().join("caps.jsonl");
    write_file(
        &captions,
        concat!(
            r#"{"video_id":"v","index":0,"start_s":0.0,"end_s":180.0,"caption":"a"}"#,
            "\n"
        ),
    );
    let conf = dir.path().join("backends.conf");
    write_file(
        &conf,
        r#"
[backends.mock]
kind = "mock"
default_response = "Score: 50"
"#,
    );
    let out = sumforge(
        &[
            "metaprompt",
            "--captions",
            captions.to_str().unwrap(),
            "--backends",
            conf.to_str().unwrap(),
            "--out",
            dir.path().join("traces").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("role"));
}
