use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use e2c_core::snapshot::{read_snapshots, write_snapshots};
use tempfile::TempDir;

fn e2c(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_e2c"))
        .args(args)
        .output()
        .expect("run e2c")
}

fn ok(args: &[&str]) -> Output {
    let out = e2c(args);
    assert!(
        out.status.success(),
        "e2c {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    e2c(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic panel plus a fast config, in a fresh directory.
struct Fixture {
    dir: TempDir,
    data: PathBuf,
    config: PathBuf,
}

impl Fixture {
    fn new() -> Fixture {
        let dir = TempDir::new().unwrap();
        let config = dir.path().join("run.cfg");
        fs::write(&config, "trees = 12\nfeatures_per_node = 6\nmax_depth = 10\n").unwrap();
        ok(&[
            "synth",
            "--firms",
            "40",
            "--dates",
            "30",
            "--seed",
            "5",
            "--out-dir",
            s(dir.path()),
        ]);
        let data = dir.path().join("synth.csv");
        Fixture { dir, data, config }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, out: &str, extra: &[&str]) -> PathBuf {
        let out_dir = self.path(out);
        let mut args = vec![
            "train",
            "--input",
            s(&self.data),
            "--config",
            s(&self.config),
            "--seed",
            "9",
            "--out-dir",
            s(&out_dir),
        ];
        args.extend_from_slice(extra);
        ok(&args);
        out_dir
    }
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn csv_column(path: &Path, name: &str) -> Vec<String> {
    let lines = data_lines(path);
    let header: Vec<&str> = lines[0].split(',').collect();
    let j = header.iter().position(|h| *h == name).unwrap();
    lines[1..]
        .iter()
        .map(|l| l.split(',').nth(j).unwrap().to_string())
        .collect()
}

#[test]
fn debt_free_firm_gets_the_floor_debt_per_share() {
    let f = Fixture::new();
    let mut snaps = read_snapshots(fs::File::open(&f.data).unwrap()).unwrap();
    snaps.truncate(3);
    let s0 = &mut snaps[0];
    for v in [
        &mut s0.long_term_debt,
        &mut s0.short_term_debt,
        &mut s0.other_lt_liabilities,
        &mut s0.other_st_liabilities,
        &mut s0.lease_obligations,
        &mut s0.minority_interest,
        &mut s0.preferred_equity,
    ] {
        *v = Some(0.0);
    }
    snaps[1].market_cap = None;
    let input = f.path("three.csv");
    write_snapshots(fs::File::create(&input).unwrap(), &snaps).unwrap();

    let out = f.path("spread");
    ok(&["spread", "--input", s(&input), "--out-dir", s(&out)]);
    let e2c = csv_column(&out.join("spreads.csv"), "e2c_bps");
    let dps = csv_column(&out.join("spreads.csv"), "debt_per_share");
    let reason = csv_column(&out.join("spreads.csv"), "reason");
    let price = snaps[0].stock_price.unwrap();
    assert_eq!(dps[0].parse::<f64>().unwrap(), 0.1 * price);
    assert!(e2c[0].parse::<f64>().unwrap() > 0.0);
    assert_eq!(e2c[1], "");
    assert!(reason[1].contains("market_cap"), "{}", reason[1]);
    assert!(e2c[2].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn missing_column_exits_2_and_names_it() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "firm_id,date\nA,2020-01-31\n").unwrap();
    let out = e2c(&["spread", "--input", s(&input), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stock_price"));
}

#[test]
fn malformed_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "trees: 10\n").unwrap();
    assert_eq!(code(&["synth", "--config", s(&cfg), "--out-dir", s(dir.path())]), 2);
}

#[test]
fn training_is_reproducible_across_runs_and_workers() {
    let f = Fixture::new();
    let a = f.train("a", &["--workers", "1"]);
    let b = f.train("b", &["--workers", "4"]);
    let c = f.train("c", &["--workers", "1"]);
    let model = fs::read(a.join("model.e2c")).unwrap();
    assert_eq!(model, fs::read(b.join("model.e2c")).unwrap());
    assert_eq!(model, fs::read(c.join("model.e2c")).unwrap());
    assert_eq!(
        data_lines(&a.join("train_metrics.csv")),
        data_lines(&b.join("train_metrics.csv"))
    );
    assert_eq!(data_lines(&a.join("split.csv")), data_lines(&b.join("split.csv")));
}

#[test]
fn different_seeds_give_different_models() {
    let f = Fixture::new();
    let a = f.train("a", &[]);
    let out = f.path("b");
    ok(&[
        "train",
        "--input",
        s(&f.data),
        "--config",
        s(&f.config),
        "--seed",
        "10",
        "--out-dir",
        s(&out),
    ]);
    assert_ne!(
        fs::read(a.join("model.e2c")).unwrap(),
        fs::read(out.join("model.e2c")).unwrap()
    );
}

#[test]
fn config_is_echoed_into_csv_outputs() {
    let f = Fixture::new();
    let out = f.train("a", &[]);
    let text = fs::read_to_string(out.join("train_metrics.csv")).unwrap();
    assert!(text.starts_with("# recovery = 0.3\n"));
    assert!(text.contains("# trees = 12\n"));
    assert!(text.contains("# seed = 9\n"));
    let meta = fs::read_to_string(out.join("metadata.txt")).unwrap();
    assert!(meta.contains("started = "));
    assert!(!text.contains("started"));
}

#[test]
fn empty_out_of_sample_exits_3() {
    let f = Fixture::new();
    let cfg = f.path("nosplit.cfg");
    fs::write(&cfg, "trees = 4\nfirm_fraction = 0\ndate_fraction = 0\n").unwrap();
    let out = f.path("x");
    assert_eq!(
        code(&["train", "--input", s(&f.data), "--config", s(&cfg), "--out-dir", s(&out)]),
        3
    );
}

#[test]
fn training_on_no_complete_rows_exits_3() {
    let f = Fixture::new();
    let mut snaps = read_snapshots(fs::File::open(&f.data).unwrap()).unwrap();
    snaps.truncate(5);
    for s in &mut snaps {
        s.cds_5y_bps = None;
    }
    let input = f.path("nocds.csv");
    write_snapshots(fs::File::create(&input).unwrap(), &snaps).unwrap();
    assert_eq!(
        code(&["train", "--input", s(&input), "--out-dir", s(&f.path("x"))]),
        3
    );
}

#[test]
fn evaluation_reports_and_beats_e2c() {
    let f = Fixture::new();
    let model = f.train("m", &[]).join("model.e2c");
    let out = f.path("eval");
    ok(&[
        "evaluate",
        "--model",
        s(&model),
        "--input",
        s(&f.data),
        "--out-dir",
        s(&out),
    ]);
    for name in [
        "comparison_by_rating.csv",
        "comparison_by_sector.csv",
        "accuracy_by_rating.csv",
        "accuracy_by_sector.csv",
        "overall_metrics.csv",
        "describe.csv",
        "correlation_by_firm.csv",
        "correlation_by_date.csv",
        "timeseries.csv",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
    let lines = data_lines(&out.join("overall_metrics.csv"));
    let header: Vec<&str> = lines[0].split(',').collect();
    let row = |sample: &str, model: &str| -> Vec<String> {
        lines
            .iter()
            .map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>())
            .find(|c| c[0] == sample && c[1] == model)
            .unwrap()
    };
    let e2c = row("out", "e2c");
    let forest = row("out", "forest");
    for metric in ["rmse", "mape", "mase"] {
        let j = header.iter().position(|h| *h == metric).unwrap();
        let (e, f): (f64, f64) = (e2c[j].parse().unwrap(), forest[j].parse().unwrap());
        assert!(f < e, "{metric}: forest {f} vs e2c {e}");
    }
}

#[test]
fn unseen_category_is_refused_unless_lenient() {
    let f = Fixture::new();
    let model = f.train("m", &[]).join("model.e2c");
    let mut snaps = read_snapshots(fs::File::open(&f.data).unwrap()).unwrap();
    snaps[0].country = Some("Atlantis".into());
    let input = f.path("atlantis.csv");
    write_snapshots(fs::File::create(&input).unwrap(), &snaps).unwrap();
    let out = f.path("eval");
    let base = ["evaluate", "--model", s(&model), "--input", s(&input), "--out-dir", s(&out)];
    let refused = e2c(&base);
    assert_eq!(refused.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("Atlantis"));
    let mut lenient = base.to_vec();
    lenient.push("--lenient");
    ok(&lenient);
}

#[test]
fn unknown_model_version_exits_4() {
    let f = Fixture::new();
    let model = f.train("m", &[]).join("model.e2c");
    let text = fs::read_to_string(&model).unwrap();
    let bumped = f.path("future.e2c");
    fs::write(&bumped, text.replacen("e2c-model 1", "e2c-model 99", 1)).unwrap();
    assert_eq!(
        code(&["evaluate", "--model", s(&bumped), "--input", s(&f.data), "--out-dir", s(&f.path("x"))]),
        4
    );
}

#[test]
fn importance_ranks_e2c_first_and_is_reproducible() {
    let f = Fixture::new();
    let model = f.train("m", &[]).join("model.e2c");
    let run = |out: &str| {
        let dir = f.path(out);
        ok(&[
            "importance",
            "--model",
            s(&model),
            "--input",
            s(&f.data),
            "--seed",
            "2",
            "--out-dir",
            s(&dir),
        ]);
        fs::read_to_string(dir.join("importance.csv")).unwrap()
    };
    let a = run("i1");
    let b = run("i2");
    let strip = |t: &str| t.lines().filter(|l| !l.starts_with("# out_dir")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&a), strip(&b));

    let chart = f.path("i1").join("importance_chart.csv");
    let lines = data_lines(&chart);
    let firsts: Vec<Vec<&str>> = lines[1..]
        .iter()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|c| c[1] == "1")
        .collect();
    assert_eq!(firsts.len(), 2);
    assert!(firsts.iter().all(|c| c[2] == "e2c_bps"), "{firsts:?}");
}

#[test]
fn importance_needs_the_training_file() {
    let f = Fixture::new();
    let model = f.train("m", &[]).join("model.e2c");
    let mut snaps = read_snapshots(fs::File::open(&f.data).unwrap()).unwrap();
    snaps.truncate(snaps.len() / 2);
    let input = f.path("half.csv");
    write_snapshots(fs::File::create(&input).unwrap(), &snaps).unwrap();
    assert_eq!(
        code(&["importance", "--model", s(&model), "--input", s(&input), "--out-dir", s(&f.path("x"))]),
        4
    );
}
