use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use salience_align::pgm::save_grayscale;
use salience_core::Heatmap;

const BIN: &str = env!("CARGO_BIN_EXE_salience-align");

const SUBCOMMANDS: [(&str, &[&str]); 9] = [
    ("saliency", &["--in", "--out", "--size", "--avg-kernel", "--sigma"]),
    ("lrp", &["--model", "--in", "--mask", "--rule", "--epsilon", "--out"]),
    ("compare", &["--a", "--b"]),
    ("emphasis", &["--a", "--b", "--det", "--min-confidence"]),
    ("subtract", &["--driving", "--imagenet", "--out"]),
    ("stats", &["--scores"]),
    ("fixtures", &["--spec", "--seed", "--out"]),
    ("run", &["--config", "--threads"]),
    ("report", &["--dir"]),
];

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SALIENCE_ALIGN_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn snapshot_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/snapshots")
}

/// Help text is pinned in `tests/snapshots`; set `UPDATE_SNAPSHOTS=1` to rewrite them.
#[test]
fn help_snapshots_pin_every_flag() {
    let update = std::env::var_os("UPDATE_SNAPSHOTS").is_some();
    for (sub, flags) in SUBCOMMANDS {
        let out = run(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        let text = stdout(&out);
        for flag in flags {
            assert!(text.contains(flag), "{sub} --help lacks {flag}");
        }
        let path = snapshot_dir().join(format!("{sub}.help"));
        if update {
            fs::create_dir_all(snapshot_dir()).unwrap();
            fs::write(&path, &text).unwrap();
        } else {
            let pinned = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing snapshot {}", path.display()));
            assert_eq!(text, pinned, "{sub} --help changed");
        }
    }
}

#[test]
fn compare_with_itself_prints_ones() {
    let dir = tempfile::tempdir().unwrap();
    let map = Heatmap::from_fn(7, 5, |x, y| ((x * 31 + y * 17) % 11) as f64 * 20.0).unwrap();
    let path = dir.path().join("x.pgm");
    save_grayscale(&map, &path).unwrap();
    let p = path.to_str().unwrap();
    let out = run(&["compare", "--a", p, "--b", p]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "cosine\t1.0\nspearman\t1.0\n");
    assert!(stderr(&out).is_empty());
}

#[test]
fn missing_model_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("img.pgm");
    save_grayscale(&Heatmap::filled(4, 4, 9.0).unwrap(), &img).unwrap();
    let missing = dir.path().join("missing.mdl");
    let out = run(&[
        "lrp",
        "--model",
        missing.to_str().unwrap(),
        "--in",
        img.to_str().unwrap(),
        "--out",
        dir.path().join("o.pgm").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains(missing.to_str().unwrap()));
    assert!(stdout(&out).is_empty());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["compare", "--a", "x", "--b", "y", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stats_prints_tab_separated_records() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("frame_id,method,cosine,spearman,attention\n");
    for i in 0..12 {
        let att = if i % 3 == 0 { "inattentive" } else { "attentive" };
        let c = 0.1 + 0.05 * (i as f64) + if att == "attentive" { 0.2 } else { 0.0 };
        csv += &format!("f{i},alpha,{c},{},{att}\n", c / 2.0);
        csv += &format!("f{i},beta,{},{},{att}\n", c / 3.0, c / 4.0);
    }
    let path = dir.path().join("scores.csv");
    fs::write(&path, csv).unwrap();
    let out = run(&["stats", "--scores", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    let kinds: Vec<&str> = lines.iter().map(|l| l[0]).collect();
    assert_eq!(
        kinds,
        ["median", "median", "median", "median", "mannwhitney", "mannwhitney", "anova", "anova"]
    );
    assert_eq!(lines[0][..3], ["median", "alpha", "cosine"]);
    assert_eq!(lines[0].len(), 7);
    assert_eq!(lines[4].len(), 9);
    assert_eq!(lines[6].len(), 6);
    for l in &lines {
        for field in &l[1..] {
            assert!(!field.is_empty());
        }
    }
    let ratio: f64 = lines[0][6].parse().unwrap();
    let (att, inatt): (f64, f64) = (lines[0][4].parse().unwrap(), lines[0][5].parse().unwrap());
    assert!((ratio - att / inatt).abs() < 1e-12);
}

#[test]
fn unreadable_scores_is_a_data_error() {
    let out = run(&["stats", "--scores", "/nonexistent/scores.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("/nonexistent/scores.csv"));
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["run", "--config", dir.path().join("absent.cfg").to_str().unwrap()])
        .env("SALIENCE_ALIGN_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    let fx = dir.path().join("fx");
    let spec = dir.path().join("spec.toml");
    fs::write(
        &spec,
        "frames = 24\nruns = 2\nwidth = 32\nheight = 32\nobject_min = 4\nobject_max = 8\ntrain_epochs = 3\n",
    )
    .unwrap();
    let out = run(&["fixtures", "--spec", spec.to_str().unwrap(), "--seed", "3", "--out", fx.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let cfg = fx.join("fixture.cfg");
    let bad = Command::new(BIN)
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env("SALIENCE_ALIGN_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(3));
    assert!(stderr(&bad).contains("SALIENCE_ALIGN_THREADS"));
    let good = Command::new(BIN)
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env("SALIENCE_ALIGN_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(good.status.code(), Some(0), "{}", stderr(&good));
    assert!(stdout(&good).starts_with("report\t"));
    let report = run(&["report", "--dir", fx.join("report").to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(0), "{}", stderr(&report));
    assert!(stdout(&report).starts_with("salience-align report"));
}
