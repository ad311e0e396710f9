//! End-to-end runs of the binary: exit codes, emitted files, determinism,
//! and the seed environment override.

use std::path::Path;
use std::process::{Command, Output};

fn bridgescore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bridgescore"))
        .args(args)
        .env_remove("BRIDGESCORE_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn synth_fixture(dir: &Path) {
    let out = bridgescore(&["synth", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn score_emits_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = tmp.path().join("fixture");
    synth_fixture(&fixture);
    let run = tmp.path().join("run");
    let out = bridgescore(&[
        "score",
        "--notes",
        fixture.join("notes.tsv").to_str().unwrap(),
        "--ratings",
        fixture.join("ratings.tsv").to_str().unwrap(),
        "--out-dir",
        run.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "note-scores.tsv",
        "rater-stats.tsv",
        "diagnostics.json",
        "manifest.json",
    ] {
        assert!(run.join(name).is_file(), "{name} missing");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&read(&run, "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "score");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 2);
    assert_eq!(manifest["config"]["lambda_i"], 0.15);
}

#[test]
fn missing_ratings_file_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = tmp.path().join("fixture");
    synth_fixture(&fixture);
    let out = bridgescore(&[
        "score",
        "--notes",
        fixture.join("notes.tsv").to_str().unwrap(),
        "--ratings",
        fixture.join("no-such-file.tsv").to_str().unwrap(),
        "--out-dir",
        tmp.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn replayed_run_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = tmp.path().join("fixture");
    synth_fixture(&fixture);
    let score = |dir: &Path| {
        let out = bridgescore(&[
            "score",
            "--notes",
            fixture.join("notes.tsv").to_str().unwrap(),
            "--ratings",
            fixture.join("ratings.tsv").to_str().unwrap(),
            "--seed",
            "3",
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    score(&a);
    score(&b);
    for name in ["note-scores.tsv", "rater-stats.tsv", "diagnostics.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs");
    }
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth_fixture(&a);
    synth_fixture(&b);
    for name in ["notes.tsv", "ratings.tsv", "ground-truth.tsv"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs");
    }
}

#[test]
fn seed_env_overrides_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let (via_env, via_flag, other) = (
        tmp.path().join("env"),
        tmp.path().join("flag"),
        tmp.path().join("other"),
    );
    let out = Command::new(env!("CARGO_BIN_EXE_bridgescore"))
        .args([
            "synth",
            "--seed",
            "1",
            "--out-dir",
            via_env.to_str().unwrap(),
        ])
        .env("BRIDGESCORE_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let out = bridgescore(&[
        "synth",
        "--seed",
        "99",
        "--out-dir",
        via_flag.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let out = bridgescore(&["synth", "--seed", "1", "--out-dir", other.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        read(&via_env, "ratings.tsv"),
        read(&via_flag, "ratings.tsv")
    );
    assert_ne!(read(&via_env, "ratings.tsv"), read(&other, "ratings.tsv"));
}

#[test]
fn synth_without_bridging_notes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bridgescore(&[
        "synth",
        "--bridging-notes",
        "0",
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let truth = String::from_utf8(read(tmp.path(), "ground-truth.tsv")).unwrap();
    assert!(!truth.contains("BRIDGING"), "unexpected bridging rows");
}

#[test]
fn infeasible_ratings_range_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bridgescore(&[
        "synth",
        "--ratings-min",
        "0",
        "--ratings-max",
        "0",
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

const AB_TABLE: &str = "label\ttestCount\ttestImpressions\tcontrolCount\tcontrolImpressions
T1 favorite\t9644\t1006245\t15009\t1032634
T1 retweet\t2310\t1006245\t3376\t1032634
T1 quote\t599\t1006245\t716\t1032634
T1 follow\t19\t1006245\t22\t1032634
T2 favorite\t40154\t3386874\t60914\t3455092
T2 retweet\t10081\t3386874\t14440\t3455092
T2 quote\t1260\t3386874\t1749\t3455092
T2 follow\t79\t3386874\t86\t3455092
T3 favorite\t32022\t2052516\t45703\t2098654
T3 retweet\t6376\t2052516\t9067\t2098654
T3 quote\t992\t2052516\t1291\t2098654
T3 follow\t63\t2052516\t83\t2098654
";

#[test]
fn abtest_reproduces_the_reference_table() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("engagement.tsv");
    std::fs::write(&input, AB_TABLE).unwrap();
    let out = bridgescore(&[
        "abtest",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(read(tmp.path(), "ab-report.tsv")).unwrap();
    let expected = [
        ("T1 favorite", -34.06, -36.54, -31.58),
        ("T1 retweet", -29.78, -34.97, -24.59),
        ("T1 quote", -14.15, -24.95, -3.34),
        ("T1 follow", -11.37, -72.60, 49.85),
        ("T2 favorite", -32.75, -33.98, -31.53),
        ("T2 retweet", -28.78, -31.28, -26.28),
        ("T2 quote", -26.51, -33.65, -19.36),
        ("T2 follow", -6.29, -36.81, 24.23),
        ("T3 favorite", -28.36, -29.75, -26.97),
        ("T3 retweet", -28.10, -31.25, -24.95),
        ("T3 quote", -21.43, -29.64, -13.23),
        ("T3 follow", -22.39, -54.83, 10.05),
    ];
    let lines: Vec<&str> = report.lines().skip(1).collect();
    assert_eq!(lines.len(), 12);
    for (line, (label, pct, lo, hi)) in lines.iter().zip(expected) {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields[0], label);
        let f = |i: usize| fields[i].parse::<f64>().unwrap();
        assert!((f(1) - pct).abs() <= 0.02, "{label}: pct {}", fields[1]);
        assert!((f(2) - lo).abs() <= 0.05, "{label}: lo {}", fields[2]);
        assert!((f(3) - hi).abs() <= 0.05, "{label}: hi {}", fields[3]);
    }
}

#[test]
fn abtest_empty_input_is_ok() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("empty.tsv");
    std::fs::write(
        &input,
        "label\ttestCount\ttestImpressions\tcontrolCount\tcontrolImpressions\n",
    )
    .unwrap();
    let out = bridgescore(&[
        "abtest",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let report = String::from_utf8(read(tmp.path(), "ab-report.tsv")).unwrap();
    assert_eq!(report.lines().count(), 1, "expected header only");
}

#[test]
fn abtest_zero_control_count_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("bad.tsv");
    std::fs::write(
        &input,
        "label\ttestCount\ttestImpressions\tcontrolCount\tcontrolImpressions\nx\t5\t100\t0\t100\n",
    )
    .unwrap();
    let out = bridgescore(&[
        "abtest",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn compare_emits_report_over_common_universe() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = tmp.path().join("fixture");
    synth_fixture(&fixture);
    let run = tmp.path().join("cmp");
    let out = bridgescore(&[
        "compare",
        "--notes",
        fixture.join("notes.tsv").to_str().unwrap(),
        "--ratings",
        fixture.join("ratings.tsv").to_str().unwrap(),
        "--out-dir",
        run.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(read(&run, "comparison.tsv")).unwrap();
    assert!(report.lines().count() > 1);
    assert!(report.starts_with("noteId\tmfLabel\tbaselineLabel\tagrees"));
}
