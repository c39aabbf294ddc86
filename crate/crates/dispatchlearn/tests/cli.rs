use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispatchlearn"))
        .args(args)
        .current_dir(dir)
        .env_remove("DISPATCH_SEED")
        .env_remove("DISPATCH_OUT")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Data rows of a report, without `#` header lines.
fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn missing_config_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["train", "--config", "nope.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["train", "--bogus"]).status.code(), Some(1));
}

#[test]
fn training_history_has_one_row_per_epoch_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a", "b"] {
        ok(d, &["train", "--pipeline", "ilo", "--case", "ed-1h", "--out", out]);
    }
    let a = rows(&d.join("a/history.csv"));
    assert_eq!(a[0], ["epoch", "train_regret", "train_mse", "train_loss", "skipped"]);
    assert_eq!(a.len(), 101);
    assert_eq!(
        std::fs::read(d.join("a/history.csv")).unwrap(),
        std::fs::read(d.join("b/history.csv")).unwrap()
    );
    for f in ["checkpoint.json", "history.json", "train.log"] {
        assert!(d.join("a").join(f).exists(), "{f}");
    }
}

#[test]
fn compare_of_one_checkpoint_against_itself_has_equal_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["train", "--pipeline", "slo", "--case", "ed-1h", "--epochs", "5", "--out", "m"]);
    ok(d, &["compare", "--ilo", "m/checkpoint.json", "--slo", "m/checkpoint.json", "--out", "c.csv"]);
    let r = rows(&d.join("c.csv"));
    assert_eq!(
        r[0],
        ["setting", "regret_ilo_train", "regret_ilo_test", "regret_slo_train", "regret_slo_test"]
    );
    assert_eq!(r.len(), 6);
    for row in &r[1..] {
        assert_eq!(row[1], row[3]);
        assert_eq!(row[2], row[4]);
    }

    let stdout = ok(d, &["compare", "--ilo", "m/checkpoint.json", "--slo", "m/checkpoint.json"]).stdout;
    assert_eq!(String::from_utf8(stdout).unwrap().lines().count(), 6);

    let out = run(d, &["compare", "--ilo", "missing.json", "--slo", "m/checkpoint.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_replay_settles_to_zero_on_the_network_case() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["oracle", "--case", "dcopf", "--out", "o"]);
    ok(d, &["simulate", "--checkpoint", "o/checkpoint.json", "--report", "r"]);
    let hourly = rows(&d.join("r/hourly.csv"));
    let settle = hourly[0].iter().position(|c| c == "settlement").unwrap();
    assert_eq!(hourly.len(), 1 + 9 + 6);
    for row in &hourly[1..] {
        assert_eq!(row[settle].parse::<f64>().unwrap(), 0.0, "{row:?}");
    }
    let imp = rows(&d.join("r/impedance.csv"));
    assert_eq!(imp[0].len(), 2 + 20);
    assert_eq!(&imp[0][2..4], ["x1", "x2"]);
    for f in ["settlement.csv", "congestion.csv", "operational_cost.csv", "summary.json"] {
        assert!(d.join("r").join(f).exists(), "{f}");
    }
}

#[test]
fn unwritable_report_directory_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["oracle", "--case", "ed-1h", "--out", "o"]);
    std::fs::write(d.join("blocker"), "").unwrap();
    let out = run(d, &["simulate", "--checkpoint", "o/checkpoint.json", "--report", "blocker/r"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_writes_the_requested_days() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--days", "2", "--seed", "5", "--out", "s.csv"]);
    let ds = dispatchlearn::data_io::load_csv(&d.join("s.csv")).unwrap();
    assert_eq!(ds.len(), 48);
    assert_eq!(ds, dispatchlearn::data_io::load_csv(&d.join("s.csv")).unwrap());
}
