use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn algorec(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_algorec"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn csv_row(path: &Path, key: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let line = text
        .lines()
        .find(|l| l.split(',').next() == Some(key))
        .unwrap_or_else(|| panic!("no row {key} in {}", path.display()));
    line.split(',').skip(1).map(|x| x.parse().unwrap_or(f64::NAN)).collect()
}

#[test]
fn solve_uniform_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = algorec(dir.path(), &["solve", "--F", "uniform", "--G", "uniform"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path());
    assert!((s["buyer_surplus"].as_f64().unwrap() - 1.0 / 12.0).abs() < 1e-6);
    assert!((s["seller_profit"].as_f64().unwrap() - 1.0 / 24.0).abs() < 1e-6);
    assert!(dir.path().join("schedule.csv").exists());
    assert!(dir.path().join("threshold.csv").exists());
}

#[test]
fn json_format_replaces_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = algorec(dir.path(), &["--format", "json", "solve", "--F", "uniform", "--G", "uniform"]);
    assert!(o.status.success());
    assert!(dir.path().join("schedule.json").exists());
    assert!(!dir.path().join("schedule.csv").exists());
}

#[test]
fn segment_comparisons_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = algorec(
        dir.path(),
        &["segment", "--F", "uniform", "--G", "uniform", "--seg", "none", "--compare", "0,0.5,1|full"],
    );
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2, "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn informed_known_product() {
    let dir = tempfile::tempdir().unwrap();
    let o = algorec(dir.path(), &["informed", "--G", "uniform", "--c0", "0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("p_star=0.125"), "{text}");
    assert!(text.contains("seller_profit=0.125"), "{text}");
}

#[test]
fn informed_ic_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = algorec(dir.path(), &["informed", "--G", "uniform", "--F", "power:a=2", "--check-ic"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("holds=true"));
    let o = algorec(dir.path(), &["informed", "--G", "power:a=2", "--F", "uniform", "--check-ic"]);
    assert!(stdout(&o).contains("holds=false"));
}

#[test]
fn export_figure_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = algorec(dir.path(), &["export"]);
    assert!(o.status.success());
    let w = csv_row(&dir.path().join("fig3_surplus.csv"), "1");
    for (got, want) in w.iter().zip([0.3125, 0.296875, 0.25]) {
        assert!((got - want).abs() < 1e-6, "{w:?}");
    }
    let p = csv_row(&dir.path().join("fig2_prices.csv"), "0.25");
    assert!((p[0] - 0.375).abs() < 1e-6 && (p[1] - 0.625).abs() < 1e-6, "{p:?}");
    let t = csv_row(&dir.path().join("fig1_threshold.csv"), "0.25");
    assert!(t[0].abs() < 1e-9);
}

#[test]
fn compete_from_market_file() {
    let dir = tempfile::tempdir().unwrap();
    let market = dir.path().join("market.json");
    fs::write(
        &market,
        r#"{"sellers":[{"cost":"uniform"},{"cost":"uniform"}],"values":"iid:uniform","samples":20000,"seed":3}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = algorec(&out, &["compete", "--market", market.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("schedule_seller1_cell0.csv").exists());
    assert!(summary(&out)["buyer_surplus"]["mean"].as_f64().unwrap() > 0.0);

    let o = algorec(&out, &["compete", "--market", market.to_str().unwrap(), "--samples", "10"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["solve", "--F", "bogus", "--G", "uniform"][..],
        &["solve", "--F", "uniform", "--G", "uniform", "--alpha", "2"],
        &["segment", "--F", "uniform", "--G", "uniform", "--seg", "0,0.7,0.5"],
        &["nonsense"],
    ] {
        assert_eq!(algorec(dir.path(), args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn repeat_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        assert!(algorec(dir, &["export"]).status.success());
        assert!(algorec(dir, &["segment", "--F", "uniform", "--G", "power:a=2", "--seg", "0,0.5,1"]).status.success());
    }
    for name in ["fig1_trade.csv", "fig3_surplus.csv", "segment_curves.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn verify_battery_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = algorec(dir.path(), &["--mc-samples", "50000", "verify"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(!text.contains("FAIL"));
    assert!(dir.path().join("verify.json").exists());
}
