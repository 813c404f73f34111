use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rps_cli::formats::{read_histogram, read_lines, write_lines, EnsembleLine, HistogramRow, PlanFile};
use rps_core::ingest::DataPaths;
use rps_core::load_dataset;

const NC: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/nc");

fn rps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rps")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn copy_bundle(to: &Path) {
    for e in fs::read_dir(NC).unwrap() {
        let p = e.unwrap().path();
        fs::copy(&p, to.join(p.file_name().unwrap())).unwrap();
    }
}

fn generate(dir: &Path, runs: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join("ens.jsonl");
    let mut args = vec![
        "generate",
        "--data",
        NC,
        "--runs",
        runs,
        "--seed",
        "4",
        "--out",
        s(&out),
    ];
    args.extend_from_slice(extra);
    let o = rps(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn generate_writes_one_line_per_retained_plan() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate(dir.path(), "300", &["--workers", "2"]);
    let lines = read_lines(&out).unwrap();
    assert!(!lines.is_empty() && lines.len() <= 300);
    assert!(lines
        .iter()
        .all(|l| l.duplicate_of.is_none() && l.metrics.is_some() && l.assignment.len() == 107));
    let o = rps(&[
        "generate",
        "--data",
        NC,
        "--runs",
        "300",
        "--seed",
        "4",
        "--out",
        s(&out),
        "--workers",
        "2",
    ]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("runs                300"), "{stdout}");
    assert!(stdout.contains("pop_stddev_pp"));
}

#[test]
fn keep_all_lists_every_completed_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate(dir.path(), "400", &["--keep-all"]);
    let lines = read_lines(&out).unwrap();
    assert!(lines.windows(2).all(|w| w[0].run_index < w[1].run_index));
    for l in lines.iter().filter(|l| l.duplicate_of.is_some()) {
        let orig = lines.iter().find(|o| Some(o.run_index) == l.duplicate_of).unwrap();
        assert_eq!(orig.assignment, l.assignment);
        assert!(l.metrics.is_none());
    }
}

#[test]
fn missing_seed_file_exits_1_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    copy_bundle(dir.path());
    fs::remove_file(dir.path().join("seeds.csv")).unwrap();
    let out = dir.path().join("o.jsonl");
    let o = rps(&[
        "generate",
        "--data",
        s(dir.path()),
        "--runs",
        "5",
        "--seed",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seeds.csv"));
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("no/such/dir/o.jsonl");
    let o = rps(&["generate", "--data", NC, "--runs", "5", "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn evaluate_scores_the_best_plan_and_is_pure() {
    let dir = tempfile::tempdir().unwrap();
    let plan = format!("{NC}/best_plan.csv");
    let before = fs::read(&plan).unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let o = rps(&["evaluate", "--data", NC, "--plan", &plan, "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(&plan).unwrap(), before);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    let sd = v["pop_stddev_pp"].as_f64().unwrap();
    assert!((sd - 0.32).abs() <= 0.05, "{sd}");
    assert_eq!(v["district_share_pct"].as_array().unwrap().len(), 13);
}

#[test]
fn evaluate_rejects_a_split_district() {
    let dir = tempfile::tempdir().unwrap();
    let d = load_dataset(&DataPaths::in_dir(NC)).unwrap();
    let mut pf = PlanFile::read(Path::new(&format!("{NC}/best_plan.csv"))).unwrap();
    // Move a far-away county into district 1.
    let far = pf.rows.iter().position(|(n, _)| n == "Currituck").unwrap();
    pf.rows[far].1 = 1;
    let path = dir.path().join("split.csv");
    pf.write(&path).unwrap();
    assert!(pf.to_plan(&d, 13).is_ok());
    let o = rps(&[
        "evaluate",
        "--data",
        NC,
        "--plan",
        s(&path),
        "--out",
        s(&dir.path().join("x.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("district 1 is split into 2 pieces"));
}

#[test]
fn plan_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = load_dataset(&DataPaths::in_dir(NC)).unwrap();
    let pf = PlanFile::read(Path::new(&format!("{NC}/best_plan.csv"))).unwrap();
    let plan = pf.to_plan(&d, 13).unwrap();
    let back = PlanFile::from_plan(&plan, &d);
    let path = dir.path().join("p.csv");
    back.write(&path).unwrap();
    assert_eq!(PlanFile::read(&path).unwrap().to_plan(&d, 13).unwrap(), plan);
    assert_eq!(plan.seeds(), d.seeds.as_slice());
}

#[test]
fn plan_file_problems_are_listed() {
    let d = load_dataset(&DataPaths::in_dir(NC)).unwrap();
    let pf = PlanFile {
        rows: vec![("Atlantis".into(), 1), ("Wake 1".into(), 20), ("Wake 1".into(), 2)],
    };
    let problems = pf.to_plan(&d, 13).unwrap_err();
    assert!(problems.iter().any(|p| p.contains("Atlantis")));
    assert!(problems.iter().any(|p| p.contains("outside 1..=13")));
    assert!(problems.iter().any(|p| p.contains("listed twice")));
    assert!(problems.iter().any(|p| p.contains("not assigned")));
}

#[test]
fn ensemble_lines_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate(dir.path(), "50", &[]);
    let lines: Vec<EnsembleLine> = read_lines(&out).unwrap();
    let copy = dir.path().join("copy.jsonl");
    write_lines(&copy, &lines).unwrap();
    assert_eq!(fs::read(&out).unwrap(), fs::read(&copy).unwrap());
    assert_eq!(read_lines(&copy).unwrap(), lines);
}

#[test]
fn compare_with_one_bin_counts_everything() {
    let dir = tempfile::tempdir().unwrap();
    let ens = generate(dir.path(), "200", &[]);
    let n = read_lines(&ens).unwrap().len() as u64;
    let hist = dir.path().join("h.csv");
    let o = rps(&[
        "compare",
        "--ensemble",
        s(&ens),
        "--reference",
        &format!("{NC}/refs.json"),
        "--metric",
        "pp_avg",
        "--bins",
        "1",
        "--out",
        s(&hist),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_histogram(&hist).unwrap();
    let bins: Vec<u64> = rows
        .iter()
        .filter_map(|r| match r {
            HistogramRow::Bin { count, .. } => Some(*count),
            _ => None,
        })
        .collect();
    assert_eq!(bins, vec![n]);
    assert!(rows
        .iter()
        .any(|r| matches!(r, HistogramRow::Overlay { name, .. } if name == "2012")));
    assert!(String::from_utf8_lossy(&o.stdout).contains("percentile"));
}

#[test]
fn compare_rejects_unknown_metric() {
    let dir = tempfile::tempdir().unwrap();
    let ens = generate(dir.path(), "20", &[]);
    let o = rps(&[
        "compare",
        "--ensemble",
        s(&ens),
        "--reference",
        &format!("{NC}/refs.json"),
        "--metric",
        "compactness",
        "--out",
        s(&dir.path().join("h.csv")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("pp_avg") && err.contains("efficiency_gap"), "{err}");
}

#[test]
fn good_only_drops_bad_plans() {
    let dir = tempfile::tempdir().unwrap();
    let ens = generate(dir.path(), "200", &["--good-threshold", "0.8"]);
    let good = read_lines(&ens)
        .unwrap()
        .iter()
        .filter(|l| l.good == Some(true))
        .count() as u64;
    let hist = dir.path().join("h.csv");
    let o = rps(&[
        "compare",
        "--ensemble",
        s(&ens),
        "--reference",
        &format!("{NC}/refs.json"),
        "--metric",
        "seats_dem",
        "--bins",
        "1",
        "--good-only",
        "--out",
        s(&hist),
    ]);
    assert!(o.status.success());
    match &read_histogram(&hist).unwrap()[0] {
        HistogramRow::Bin { count, .. } => assert_eq!(*count, good),
        other => panic!("{other:?}"),
    }
}
