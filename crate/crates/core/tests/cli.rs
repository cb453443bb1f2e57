use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use msgod::{auroc, load_dataset, SchemaSource};
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn msgod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msgod"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no '{key}' in report:\n{report}"))
        .parse()
        .unwrap()
}

#[test]
fn detect_hepat_reference_auroc() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("scores.csv");
    let rep = dir.path().join("report.txt");
    let input = data("hepat.csv");
    let o = msgod(&[
        "detect",
        "-i",
        s(&input),
        "--delta",
        "1.3",
        "--lambda",
        "10",
        "--contamination",
        "0.1625",
        "-o",
        s(&out),
        "--report",
        s(&rep),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(&rep).unwrap();
    let a = report_value(&report, "auroc");
    assert!((a - 0.8553).abs() <= 0.05, "auroc {a}");
    for key in [
        "views",
        "alpha",
        "beta",
        "pos",
        "bnd",
        "neg",
        "wall_time_ms",
    ] {
        assert!(
            report.lines().any(|l| l.starts_with(&format!("{key}:"))),
            "missing {key}"
        );
    }
    assert!(report.contains("view_1: balls="));

    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,fused,final,region"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 80);
    assert!(rows
        .iter()
        .all(|r| ["POS", "BND", "NEG"].contains(&r.rsplit(',').next().unwrap())));
}

#[test]
fn detect_missing_schema_names_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.schema");
    let input = data("iris.csv");
    let out = dir.path().join("s.csv");
    let o = msgod(&[
        "detect",
        "-i",
        s(&input),
        "--schema",
        s(&missing),
        "--delta",
        "0.1",
        "--lambda",
        "10",
        "--contamination",
        "0.1",
        "-o",
        s(&out),
    ]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(s(&missing)), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
    assert!(!out.exists());
}

#[test]
fn detect_rejects_bad_contamination() {
    let dir = TempDir::new().unwrap();
    let input = data("iris.csv");
    let out = dir.path().join("s.csv");
    let o = msgod(&[
        "detect",
        "-i",
        s(&input),
        "--delta",
        "0.1",
        "--lambda",
        "10",
        "--contamination",
        "1.5",
        "-o",
        s(&out),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("msgod: "));
}

#[test]
fn views_single_sample_and_last_record() {
    let dir = TempDir::new().unwrap();
    let one = dir.path().join("one.csv");
    fs::write(&one, "x,y\n0.3,0.7\n").unwrap();
    let out = dir.path().join("v.tsv");
    let o = msgod(&["views", "-i", s(&one), "--delta", "0.5", "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("views: 1"));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);

    let input = data("iris.csv");
    let o = msgod(&["views", "-i", s(&input), "--delta", "0.1", "-o", s(&out)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let last: Vec<&str> = text.lines().last().unwrap().split('\t').collect();
    let members: Vec<usize> = last[5].split(';').map(|m| m.parse().unwrap()).collect();
    let mut sorted = members.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..111).collect::<Vec<_>>());
}

#[test]
fn inject_is_deterministic_and_sized() {
    let dir = TempDir::new().unwrap();
    let src = dir.path().join("base.csv");
    let mut body = String::from("a,b\n");
    for i in 0..80 {
        body.push_str(&format!(
            "{},{}\n",
            (i % 9) as f64 / 8.0,
            (i % 7) as f64 / 6.0
        ));
    }
    fs::write(&src, body).unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let o = msgod(&[
            "inject",
            "-i",
            s(&src),
            "--kind",
            "group",
            "--ratio",
            "0.1",
            "--seed",
            "7",
            "-o",
            s(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let ds = load_dataset(&a, SchemaSource::Infer).unwrap();
    assert_eq!(ds.n_samples(), 88);
    assert_eq!(ds.labels().unwrap().iter().filter(|&&l| l).count(), 8);

    let o = msgod(&[
        "inject",
        "-i",
        s(&src),
        "--kind",
        "sideways",
        "--ratio",
        "0.1",
        "-o",
        s(&a),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_grid_and_auroc() {
    let dir = TempDir::new().unwrap();
    let labels = dir.path().join("labels.csv");
    let scores = dir.path().join("scores.csv");
    // 4 outliers out of 20, scored perfectly.
    let mut l = String::from("x,label\n");
    let mut sc = String::from("id,final\n");
    for i in 0..20 {
        let out = i < 4;
        l.push_str(&format!("{i},{}\n", u8::from(out)));
        sc.push_str(&format!(
            "{i},{}\n",
            if out {
                0.9 - i as f64 * 0.01
            } else {
                0.1 + i as f64 * 0.01
            }
        ));
    }
    fs::write(&labels, l).unwrap();
    fs::write(&scores, sc).unwrap();
    let rep = dir.path().join("r.txt");
    let roc = dir.path().join("roc.tsv");
    let o = msgod(&[
        "eval",
        "--scores",
        s(&scores),
        "--labels",
        s(&labels),
        "--rule",
        "inclusive",
        "--roc",
        s(&roc),
        "--report",
        s(&rep),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(&rep).unwrap();
    assert_eq!(report_value(&report, "auroc"), 1.0);
    let rows: Vec<&str> = report
        .lines()
        .skip_while(|l| *l != "t,precision,recall")
        .skip(1)
        .collect();
    assert_eq!(rows.len(), 20);
    for r in &rows {
        let f: Vec<f64> = r.split(',').map(|c| c.parse().unwrap()).collect();
        if f[0] <= 0.2 {
            assert_eq!(f[1], 1.0, "{r}");
        }
    }
    assert!(fs::read_to_string(&roc).unwrap().starts_with("fpr\ttpr\n"));

    // Under the strict rule the top-ranked sample is the threshold itself at
    // t = 0.05, so nothing is flagged.
    let o = msgod(&[
        "eval",
        "--scores",
        s(&scores),
        "--labels",
        s(&labels),
        "--t",
        "0.05,0.1",
        "--report",
        s(&rep),
    ]);
    assert!(o.status.success());
    let report = fs::read_to_string(&rep).unwrap();
    assert!(
        report.contains("0.05,0.0000,0.0000\n0.10,1.0000,0.2500\n"),
        "{report}"
    );
}

#[test]
fn eval_auroc_equals_library() {
    let dir = TempDir::new().unwrap();
    let input = data("iris.csv");
    let out = dir.path().join("scores.csv");
    let o = msgod(&[
        "detect",
        "-i",
        s(&input),
        "--delta",
        "0.1",
        "--lambda",
        "10",
        "--contamination",
        "0.0991",
        "-o",
        s(&out),
    ]);
    assert!(o.status.success());
    let rep = dir.path().join("r.txt");
    let schema = data("iris.schema");
    let o = msgod(&[
        "eval",
        "--scores",
        s(&out),
        "--column",
        "fused",
        "--labels",
        s(&input),
        "--labels-schema",
        s(&schema),
        "--report",
        s(&rep),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(&rep).unwrap();

    let ds = load_dataset(&input, SchemaSource::Sidecar(&schema)).unwrap();
    let fused: Vec<f64> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let expected = auroc(&fused, ds.labels().unwrap()).unwrap();
    assert!((report_value(&report, "auroc") - expected).abs() < 5e-5);
}

#[test]
fn stats_reference_average_ranks() {
    let table = data("performance_avg_ranks.csv");
    let o = msgod(&[
        "stats",
        "--table",
        s(&table),
        "--kind",
        "ranks",
        "--datasets",
        "20",
        "--q",
        "3.268",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!((report_value(&report, "tau_f") - 9.7544).abs() < 0.02);
    assert!((report_value(&report, "cd") - 3.7261).abs() < 1e-4);
}

#[test]
fn stats_identical_ranks_give_zero() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("t.csv");
    fs::write(&table, "dataset,a,b,c\nd1,0.5,0.5,0.5\nd2,0.7,0.7,0.7\n").unwrap();
    let o = msgod(&["stats", "--table", s(&table), "--q", "2.343"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        report_value(&String::from_utf8(o.stdout).unwrap(), "tau_chi2"),
        0.0
    );
}

#[test]
fn stats_malformed_table_reports_cell() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("t.csv");
    fs::write(&table, "dataset,a,b\nd1,0.5,0.4\nd2,0.7,oops\n").unwrap();
    let o = msgod(&["stats", "--table", s(&table), "--q", "1.96"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 3") && err.contains("'b'"), "{err}");
}
