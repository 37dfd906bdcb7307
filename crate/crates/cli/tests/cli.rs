use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qd_core::io::parse_metrics;
use qd_core::stats::median;

fn qd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qd")).args(args).output().expect("binary runs")
}

fn small_run(out: &Path, algo: &str, seed: u64, extra: &[&str]) -> Output {
    let seed = seed.to_string();
    let out = out.to_str().unwrap();
    let mut args = vec![
        "run", "--task", "arm", "--algo", algo, "--pop-size", "32", "--batch-size", "16", "--generations", "12",
        "--seed", &seed, "--out", out,
    ];
    args.extend_from_slice(extra);
    qd(&args)
}

fn stdout_path(o: &Output) -> PathBuf {
    PathBuf::from(String::from_utf8_lossy(&o.stdout).trim())
}

#[test]
fn run_writes_the_output_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let o = small_run(tmp.path(), "dns", 3, &["--set", "run.log_every=4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = stdout_path(&o);
    assert_eq!(dir, tmp.path().join("arm-dns-seed3"));
    for f in ["config.txt", "metrics.csv", "population.csv"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let records = parse_metrics(&fs::read_to_string(dir.join("metrics.csv")).unwrap()).unwrap();
    let gens: Vec<usize> = records.iter().map(|r| r.generation).collect();
    assert_eq!(gens, [0, 4, 8, 12]);
    assert_eq!(records.last().unwrap().evaluations, 32 + 12 * 16);
    let population = fs::read_to_string(dir.join("population.csv")).unwrap();
    assert_eq!(population.lines().count(), 1 + 32);
    assert!(!dir.join("FAILED").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for algo in ["dns", "threshold_elites"] {
        let da = stdout_path(&small_run(a.path(), algo, 9, &[]));
        let db = stdout_path(&small_run(b.path(), algo, 9, &[]));
        for f in ["metrics.csv", "population.csv"] {
            assert_eq!(fs::read(da.join(f)).unwrap(), fs::read(db.join(f)).unwrap(), "{algo} {f}");
        }
    }
}

#[test]
fn snapshot_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.cfg");
    fs::write(&cfg, "task.name = maze\ntask.layout = blocks\nalgo.name = map_elites\nrun.pop_size = 24\nrun.batch_size = 24\nrun.generations = 6\nrun.seed = 4\n").unwrap();
    let first = tmp.path().join("first");
    let o = qd(&["run", "--config", cfg.to_str().unwrap(), "--k", "2", "--out", first.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = stdout_path(&o);
    let snapshot = dir.join("config.txt");
    let text = fs::read_to_string(&snapshot).unwrap();
    assert!(text.contains("task.layout = blocks"));

    // The snapshot alone (with a new output directory) reproduces the metrics.
    let second = tmp.path().join("second");
    let o = qd(&["run", "--config", snapshot.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = stdout_path(&o);
    assert_eq!(fs::read(dir.join("metrics.csv")).unwrap(), fs::read(again.join("metrics.csv")).unwrap());
}

#[test]
fn unknown_algorithm_is_a_usage_error() {
    let o = qd(&["run", "--algo", "cmaes"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["dns", "map_elites", "threshold_elites", "cluster_elites", "plain_ga"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn bad_flags_and_configs_exit_2() {
    assert_eq!(qd(&["run", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(qd(&["run", "--pop-size", "many"]).status.code(), Some(2));
    assert_eq!(qd(&["run", "--set", "nonsense"]).status.code(), Some(2));
    assert_eq!(qd(&["run", "--config", "/definitely/missing.cfg"]).status.code(), Some(2));
    assert_eq!(qd(&["sweep", "--param", "sigma", "--values", "1"]).status.code(), Some(2));
    assert_eq!(qd(&["compare", "only=one"]).status.code(), Some(2));
}

#[test]
fn list_tasks_names_every_task() {
    let o = qd(&["list-tasks"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for task in ["arm", "rastrigin", "maze"] {
        assert!(text.lines().any(|l| l.starts_with(task)), "{text}");
    }
}

#[test]
fn sweep_accounts_for_every_run_and_summarises_medians() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = qd(&[
        "sweep", "--task", "arm", "--algo", "dns", "--pop-size", "24", "--batch-size", "12", "--generations", "5",
        "--out", out, "--param", "k", "--values", "1,3", "--seeds", "0,1,2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let root = tmp.path().join("sweep-k");
    let summary = fs::read_to_string(root.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 3, "{summary}");
    let mut best_count = 0;
    for (line, value) in lines[1..].iter().zip(["1", "3"]) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], value);
        assert_eq!(cells[1], "3");
        let mut qd_scores = Vec::new();
        let mut coverages = Vec::new();
        for seed in 0..3 {
            let dir = root.join(format!("k={value}")).join(format!("arm-dns-seed{seed}"));
            let records = parse_metrics(&fs::read_to_string(dir.join("metrics.csv")).unwrap()).unwrap();
            let last = records.last().unwrap();
            assert_eq!(last.evaluations, 24 + 5 * 12);
            qd_scores.push(last.qd_score);
            coverages.push(last.coverage);
            let config = fs::read_to_string(dir.join("config.txt")).unwrap();
            assert!(config.contains(&format!("algo.k = {value}")), "{config}");
        }
        assert_eq!(cells[2].parse::<f64>().unwrap(), median(&qd_scores).unwrap());
        assert_eq!(cells[3].parse::<f64>().unwrap(), median(&coverages).unwrap());
        best_count += usize::from(cells[4] == "true");
    }
    assert_eq!(best_count, 1);
}

#[test]
fn compare_runs_all_pairs_with_holm_correction() {
    let tmp = tempfile::tempdir().unwrap();
    let mut groups = Vec::new();
    for algo in ["dns", "map_elites", "threshold_elites", "plain_ga"] {
        let dirs: Vec<String> = (0..3)
            .map(|s| stdout_path(&small_run(tmp.path(), algo, s, &[])).to_str().unwrap().to_string())
            .collect();
        groups.push(format!("{algo}={}", dirs.join(",")));
    }
    let table = tmp.path().join("cmp.csv");
    let o = qd(&["compare", &groups[0], &groups[1], "--metric", "coverage"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut args: Vec<&str> = vec!["compare"];
    args.extend(groups.iter().map(String::as_str));
    args.extend(["--out", table.to_str().unwrap()]);
    let o = qd(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&table).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);

    // A group compared with itself: p = 1 and nothing rejected.
    let o = qd(&["compare", &groups[0], &groups[0].replacen("dns=", "again=", 1), "--out", table.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = fs::read_to_string(&table).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[3].parse::<f64>().unwrap(), 1.0);
    assert_eq!(row[5], "false");
}

#[test]
fn compare_rejects_runs_of_different_length() {
    let tmp = tempfile::tempdir().unwrap();
    let a: Vec<String> =
        (0..2).map(|s| stdout_path(&small_run(&tmp.path().join("a"), "dns", s, &[])).display().to_string()).collect();
    let b: Vec<String> = (0..2)
        .map(|s| {
            stdout_path(&small_run(&tmp.path().join("b"), "dns", s, &["--set", "run.generations=3"])).display().to_string()
        })
        .collect();
    let o = qd(&["compare", &format!("a={}", a.join(",")), &format!("b={}", b.join(","))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mismatched"));
}
