//! Exit-code contract and command-surface behavior of the binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regionflow"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, body: &str) {
    fs::write(path, body).unwrap();
}

fn stderr_json(output: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&output.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr not JSON: {text}"))
}

fn small_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let flows = dir.join("flows.csv");
    let roster = dir.join("roster.csv");
    write(
        &flows,
        "patient_zone,hospital_id,count,service_class\n\
         a,ha,12,G\n\
         b,ha,8,G\n\
         b,hc,2,G\n\
         c,hc,11,G\n\
         d,hc,9,G\n\
         a,ha,3,S\n\
         c,hc,2,S\n",
    );
    write(
        &roster,
        "hospital_id,home_zone,is_general,admissions\n\
         ha,a,true,23\n\
         hc,c,true,24\n",
    );
    (flows, roster)
}

#[test]
fn detect_writes_artifacts_and_exits_zero() {
    let dir = tmp("detect_ok");
    let (flows, roster) = small_fixture(&dir);
    let out = dir.join("out");
    let output = bin()
        .args(["detect", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    for artifact in [
        "dendrogram.json",
        "partition.csv",
        "ingest_stats.json",
        "detect.log",
        "run.json",
    ] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }
    let dendrogram: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("dendrogram.json")).unwrap()).unwrap();
    assert!(dendrogram["levels"].is_array());
    assert!(dendrogram["config_hash"].is_string());
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ingest_stats.json")).unwrap()).unwrap();
    assert_eq!(stats["retained"], serde_json::json!(7));
}

#[test]
fn empty_flows_exit_two_with_empty_input_code() {
    let dir = tmp("detect_empty");
    let (_, roster) = small_fixture(&dir);
    let flows = dir.join("empty.csv");
    write(&flows, "patient_zone,hospital_id,count,service_class\n");
    let output = bin()
        .args(["detect", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert_eq!(stderr_json(&output)["error"], "empty_input");
}

#[test]
fn malformed_record_names_its_index() {
    let dir = tmp("detect_malformed");
    let (_, roster) = small_fixture(&dir);
    let flows = dir.join("bad.csv");
    write(
        &flows,
        "patient_zone,hospital_id,count,service_class\na,ha,1,G\nb,ha,zero,G\n",
    );
    let output = bin()
        .args(["detect", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = stderr_json(&output);
    assert_eq!(err["error"], "malformed_record");
    assert!(err["message"].as_str().unwrap().contains("record 2"));
}

#[test]
fn specialized_filter_applies() {
    let dir = tmp("detect_specialized");
    let (flows, roster) = small_fixture(&dir);
    let out = dir.join("out");
    let output = bin()
        .args(["detect", "--specialized", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let log = fs::read_to_string(out.join("detect.log")).unwrap();
    // Only the two specialized rows (weights 3 + 2) survive.
    assert!(log.contains("total_weight: 5"), "{log}");
}

#[test]
fn cut_k_out_of_range_exits_two() {
    let dir = tmp("cut_range");
    let (flows, roster) = small_fixture(&dir);
    let output = bin()
        .args(["cut", "--k", "99", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert_eq!(stderr_json(&output)["error"], "k_out_of_range");
}

#[test]
fn cut_k_one_scores_zero() {
    let dir = tmp("cut_one");
    let (flows, roster) = small_fixture(&dir);
    let out = dir.join("out");
    let output = bin()
        .args(["cut", "--k", "1", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let cut: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("cut.json")).unwrap()).unwrap();
    assert_eq!(cut["k"], 1);
    assert!(cut["q"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn cut_reuses_dendrogram_artifact() {
    let dir = tmp("cut_reuse");
    let (flows, roster) = small_fixture(&dir);
    let detect_out = dir.join("detect");
    assert!(bin()
        .args(["detect", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(&detect_out)
        .status()
        .unwrap()
        .success());
    let direct = dir.join("cut_direct");
    let reused = dir.join("cut_reused");
    assert!(bin()
        .args(["cut", "--k", "2", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(&direct)
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args(["cut", "--k", "2", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--dendrogram")
        .arg(detect_out.join("dendrogram.json"))
        .arg("--out")
        .arg(&reused)
        .output()
        .unwrap()
        .status
        .success());
    let strip = |path: &Path| -> String {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        strip(&direct.join("partition.csv")),
        strip(&reused.join("partition.csv"))
    );
}

#[test]
fn curve_reports_argmax_and_formats() {
    let dir = tmp("curve");
    let (flows, roster) = small_fixture(&dir);
    let out = dir.join("out");
    let output = bin()
        .args(["curve", "--k-min", "1", "--k-max", "4", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let curve: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("curve.json")).unwrap()).unwrap();
    assert_eq!(curve["points"].as_array().unwrap().len(), 4);
    assert!(curve["argmax_k"].as_u64().unwrap() >= 1);
    let csv = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert!(csv.contains("k,Q"));

    let json_only = dir.join("json_only");
    assert!(bin()
        .args(["curve", "--k-min", "1", "--k-max", "2", "--format", "json", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(&json_only)
        .status()
        .unwrap()
        .success());
    assert!(json_only.join("curve.json").exists());
    assert!(!json_only.join("curve.csv").exists());
}

#[test]
fn baseline_requires_adjacency_or_geoms() {
    let dir = tmp("baseline_missing");
    let (flows, roster) = small_fixture(&dir);
    let output = bin()
        .args(["baseline", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert_eq!(stderr_json(&output)["error"], "config");
}

#[test]
fn baseline_with_adjacency_writes_flags() {
    let dir = tmp("baseline_ok");
    let (flows, roster) = small_fixture(&dir);
    let adjacency = dir.join("adjacency.csv");
    write(&adjacency, "zone_a,zone_b\na,b\nb,c\nc,d\n");
    let out = dir.join("out");
    let output = bin()
        .args(["baseline", "--flows"])
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--adjacency")
        .arg(&adjacency)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    assert!(out.join("partition.csv").exists());
    let flags: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("flags.json")).unwrap()).unwrap();
    assert!(flags["islands"].is_array());
}

#[test]
fn evaluate_rejects_partition_not_covering_zones() {
    let dir = tmp("evaluate_coverage");
    let (flows, roster) = small_fixture(&dir);
    let partition = dir.join("partition.csv");
    write(&partition, "zone_id,region_id\na,0\nb,0\n");
    let output = bin()
        .arg("evaluate")
        .arg(&partition)
        .arg("--flows")
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = stderr_json(&output);
    assert_eq!(err["error"], "coverage_mismatch");
    assert!(err["message"].as_str().unwrap().contains('c'));
}

#[test]
fn evaluate_without_geometry_marks_pac_skipped() {
    let dir = tmp("evaluate_skip");
    let (flows, roster) = small_fixture(&dir);
    let partition = dir.join("partition.csv");
    write(&partition, "zone_id,region_id\na,0\nb,0\nc,1\nd,1\n");
    let out = dir.join("out");
    let output = bin()
        .arg("evaluate")
        .arg(&partition)
        .arg("--flows")
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["skipped"]
        .as_array()
        .unwrap()
        .contains(&serde_json::json!("pac")));
    assert!(report["regions"][0]["li"].as_f64().is_some());
}

#[test]
fn evaluate_two_partitions_side_by_side() {
    let dir = tmp("evaluate_pair");
    let (flows, roster) = small_fixture(&dir);
    let one = dir.join("one.csv");
    let two = dir.join("two.csv");
    write(&one, "zone_id,region_id\na,0\nb,0\nc,1\nd,1\n");
    write(&two, "zone_id,region_id\na,0\nb,1\nc,1\nd,0\n");
    let out = dir.join("out");
    let output = bin()
        .arg("evaluate")
        .arg(&one)
        .arg(&two)
        .arg("--flows")
        .arg(&flows)
        .arg("--roster")
        .arg(&roster)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    for artifact in ["report.json", "report2.json", "report.csv", "report2.csv", "compare.csv"] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }
    let compare = fs::read_to_string(out.join("compare.csv")).unwrap();
    let header = compare.lines().nth(1).unwrap();
    assert!(header.starts_with("metric,mean_a"));
    assert!(compare.lines().any(|l| l.starts_with("li,")));
    // Both reports recount the same flow table: identical global zone counts.
    let a: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report2.json")).unwrap()).unwrap();
    let zones = |r: &serde_json::Value| -> u64 {
        r["regions"]
            .as_array()
            .unwrap()
            .iter()
            .map(|row| row["zone_count"].as_u64().unwrap())
            .sum()
    };
    assert_eq!(zones(&a), zones(&b));
}

#[test]
fn synth_validates_spec() {
    let dir = tmp("synth_bad");
    let output = bin()
        .args([
            "synth",
            "--regions",
            "3",
            "--zones-per-region",
            "2",
            "--flow-mean",
            "10",
            "--leakage",
            "1.5",
            "--hospitals-per-region",
            "1",
            "--out",
        ])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert_eq!(stderr_json(&output)["error"], "bad_spec");
}

#[test]
fn synth_then_detect_round_trip() {
    let dir = tmp("synth_detect");
    let synth_out = dir.join("synth");
    assert!(bin()
        .args([
            "synth",
            "--regions",
            "5",
            "--zones-per-region",
            "3",
            "--flow-mean",
            "25",
            "--leakage",
            "0.05",
            "--hospitals-per-region",
            "1",
            "--seed",
            "11",
            "--out",
        ])
        .arg(&synth_out)
        .status()
        .unwrap()
        .success());
    let detect_out = dir.join("detect");
    assert!(bin()
        .args(["detect", "--flows"])
        .arg(synth_out.join("flows.csv"))
        .arg("--roster")
        .arg(synth_out.join("roster.csv"))
        .arg("--attrs")
        .arg(synth_out.join("attrs.csv"))
        .arg("--out")
        .arg(&detect_out)
        .status()
        .unwrap()
        .success());
    let log = fs::read_to_string(detect_out.join("detect.log")).unwrap();
    assert!(log.contains("final_regions: 5"), "{log}");
}
