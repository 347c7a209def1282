use std::path::Path;
use std::process::{Command, Output};

use subsight::evalstat::{parse_report_csv, REPORT_HEADER};

const BIN: &str = env!("CARGO_BIN_EXE_subsight");

const SMALL: &str = "\
n_rows = 10
n_cols = 10
acquisition_spacing_days = 12
n_acquisitions = 40
target_spacing_days = 14
target_epochs = 30
forest_n_trees = 6
folds = 3
";

fn subsight(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = subsight(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn prepared() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    for cmd in ["simulate", "invert", "fuse"] {
        ok(dir.path(), &["--config", "small.cfg", "--out", "o", cmd]);
    }
    dir
}

#[test]
fn invalid_config_names_the_key_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "cell_size_m = -5\nfolds = 1\nbogus = 3\n").unwrap();
    let out = subsight(dir.path(), &["--config", "bad.cfg", "simulate"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cell_size_m"), "{err}");
    assert!(err.contains("folds"), "{err}");
    assert!(err.contains("bogus"), "{err}");
    assert!(!dir.path().join("texture.tex").exists());
}

#[test]
fn missing_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = subsight(dir.path(), &["--out", "o", "fuse"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(subsight(dir.path(), &["eval", "--protocol", "nope:1"]).status.code(), Some(1));
}

#[test]
fn pipeline_writes_report_rows_per_protocol() {
    let dir = prepared();
    let d = dir.path();
    ok(d, &["--config", "small.cfg", "--out", "o", "train", "--model", "tree"]);
    assert!(d.join("o/model_tree.txt").is_file());
    ok(
        d,
        &[
            "--config", "small.cfg", "--out", "o", "eval", "--model", "forest", "--protocol", "holdout:0.6",
            "--protocol", "distance:4000",
        ],
    );
    let csv = std::fs::read_to_string(d.join("o/report.csv")).unwrap();
    assert!(csv.starts_with(REPORT_HEADER));
    let rows = parse_report_csv("report.csv", &csv).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].protocol, "holdout:0.6");
    assert_eq!((rows[0].n_train, rows[0].n_test), (60, 40));
    assert_eq!(rows[1].protocol, "distance:4000");
    assert!(rows[1].n_train < 60 && rows[1].n_test == 40);
    assert!(rows.iter().all(|r| r.model == "forest" && r.p_value.is_none()));
    let svg = std::fs::read_to_string(d.join("o/scatter.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 40 * 10);

    let summary = ok(d, &["--out", "o", "report"]);
    assert!(summary.contains("distance:4000"), "{summary}");
    for sub in ["simulate", "invert", "fuse", "train", "eval", "report"] {
        let m = std::fs::read_to_string(d.join(format!("o/manifest-{sub}.txt"))).unwrap();
        assert!(m.contains("wall_time_s"), "{sub}");
    }
}

#[test]
fn ablate_reports_twelve_months_at_the_bonferroni_threshold() {
    let dir = prepared();
    let d = dir.path();
    ok(d, &["--config", "small.cfg", "--out", "o", "ablate", "--model", "tree"]);
    let csv = std::fs::read_to_string(d.join("o/ablation.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let thr = header.iter().position(|h| *h == "threshold").unwrap();
    let p = header.iter().position(|h| *h == "p_value").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    for (m, r) in rows.iter().enumerate() {
        assert_eq!(r[0], (m + 1).to_string());
        assert!((r[thr].parse::<f64>().unwrap() - 0.05 / 12.0).abs() < 1e-15);
        let pv: f64 = r[p].parse().unwrap();
        assert!((0.0..=1.0).contains(&pv));
    }
    let folds = std::fs::read_to_string(d.join("o/ablation_folds.csv")).unwrap();
    assert_eq!(folds.lines().count(), 1 + 12 * 3);
}
