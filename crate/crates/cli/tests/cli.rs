use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

use forecast_cusum::simlab::{null_white_noise, seasonal_mean_shift};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn fcusum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcusum")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn write_column(path: &Path, name: &str, values: &[f64]) {
    let mut s = format!("{name}\n");
    for v in values {
        writeln!(s, "{v}").unwrap();
    }
    std::fs::write(path, s).unwrap();
}

/// Value following `key=` in `text`.
fn field<'a>(text: &'a str, key: &str) -> &'a str {
    let start = text.find(&format!("{key}=")).unwrap_or_else(|| panic!("{key} missing in {text}")) + key.len() + 1;
    text[start..].split_whitespace().next().unwrap()
}

#[test]
fn calibrate_is_deterministic_and_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = fcusum(&[
            "calibrate", "--gamma", "0", "--alpha", "0.5,0.05", "--replicates", "10000", "--grid", "10000",
            "--seed", "7", "--workers", workers, "--output", p(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (stdout(&o), std::fs::read(&out).unwrap())
    };
    let (text, a) = run("a.json", "1");
    let (_, b) = run("b.json", "1");
    let (_, c) = run("c.json", "8");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let cs: Vec<f64> = text.lines().map(|l| field(l, "c").parse().unwrap()).collect();
    assert_eq!(cs.len(), 2);
    assert!(cs[0] < cs[1], "{text}");
}

#[test]
fn calibrate_without_alphas_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let o = fcusum(&["calibrate", "--gamma", "0", "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let o = fcusum(&["calibrate", "--alpha", "", "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn quiet_stream_does_not_alarm() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("e.csv");
    let mut x: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    x.extend([0.0; 50]);
    write_column(&input, "error", &x);
    let o = fcusum(&["monitor", "--input", p(&input), "--m", "10", "--kind", "mean"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("no alarm"));
}

#[test]
fn all_zero_training_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("e.csv");
    write_column(&input, "error", &[0.0; 40]);
    let o = fcusum(&["monitor", "--input", p(&input), "--m", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn mean_jump_alarms_and_logs_recomputable_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("e.csv");
    let mut x = normals(1, 400);
    for v in &mut x[300..] {
        *v += 3.0;
    }
    write_column(&input, "error", &x);
    let log = dir.path().join("steps.csv");
    let o = fcusum(&[
        "monitor", "--input", p(&input), "--m", "300", "--kind", "both", "--output", p(&log),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let c: f64 = field(&text, "c").parse().unwrap();
    let mean_line = text.lines().find(|l| l.starts_with("mean:")).unwrap();
    assert!(mean_line.contains("ALARM"));
    let k: usize = field(mean_line, "k").parse().unwrap();
    assert!(k <= 20);
    let sigma: f64 = field(mean_line, "sigma_hat").parse().unwrap();

    let steps = std::fs::read_to_string(dir.path().join("steps.mean.csv")).unwrap();
    assert!(dir.path().join("steps.variance.csv").exists());
    let mut lines = steps.lines();
    assert_eq!(lines.next(), Some("k,detector,threshold,alarm"));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let k: f64 = f[0].parse().unwrap();
        let threshold: f64 = f[2].parse().unwrap();
        let g = 300f64.sqrt() * (1.0 + k / 300.0);
        assert!((threshold - sigma * c * g).abs() <= 1e-9 * threshold);
    }
}

#[test]
fn alarm_reports_the_calendar_label() {
    // July to October as training, monitoring from 1 November
    let months = [(7, 31), (8, 31), (9, 30), (10, 31), (11, 30), (12, 31)];
    let dates: Vec<String> = months
        .iter()
        .flat_map(|&(m, days)| (1..=days).map(move |d| format!("2020-{m:02}-{d:02}")))
        .collect();
    let m = 123;
    let mut x = normals(2, dates.len());
    for v in &mut x[m + 31..] {
        *v = *v * 3.0 + 2.0;
    }
    let mut csv = String::from("date,error\n");
    for (d, v) in dates.iter().zip(&x) {
        writeln!(csv, "{d},{v}").unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("parcels.csv");
    std::fs::write(&input, csv).unwrap();
    let o = fcusum(&[
        "monitor", "--input", p(&input), "--timestamp-column", "date", "--m", "123", "--kind", "both",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.contains("ALARM")).unwrap();
    let k: usize = field(line, "k").parse().unwrap();
    assert_eq!(field(line, "label"), dates[m + k - 1]);
    assert!(field(line, "label") >= "2020-12-01");
}

#[test]
fn fit_then_monitor_reads_the_split_from_the_errors_file() {
    let dir = tempfile::tempdir().unwrap();
    let z = normals(3, 600);
    let mut u = 0.0;
    let y: Vec<f64> = z
        .iter()
        .map(|e| {
            u = 0.6 * u + e;
            u
        })
        .collect();
    let input = dir.path().join("y.csv");
    write_column(&input, "value", &y);
    let model = dir.path().join("model.json");
    let errors = dir.path().join("errors.csv");
    let o = fcusum(&[
        "fit", "--input", p(&input), "--model", "arma", "--m", "400", "--output", p(&model), "--errors", p(&errors),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    let phi = json["model"]["phi"][0].as_f64().unwrap();
    assert!((phi - 0.6).abs() < 0.15, "{phi}");
    let rows = std::fs::read_to_string(&errors).unwrap();
    assert_eq!(rows.lines().count(), 601);
    assert_eq!(rows.lines().filter(|l| l.ends_with(",train")).count(), 400);

    let o = fcusum(&["monitor", "--input", p(&errors), "--kind", "mean"]);
    assert!(matches!(o.status.code(), Some(0 | 2)));
    assert!(stdout(&o).starts_with("m=400 "));
}

#[test]
fn ets_fit_reports_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let z = normals(4, 300);
    let mut level = 5.0;
    let y: Vec<f64> = z
        .iter()
        .map(|e| {
            let v = level + e;
            level += 0.4 * e;
            v
        })
        .collect();
    let input = dir.path().join("y.csv");
    write_column(&input, "value", &y);
    let model = dir.path().join("model.json");
    let errors = dir.path().join("errors.csv");
    let o = fcusum(&[
        "fit", "--input", p(&input), "--model", "ets-ann", "--train-frac", "0.8", "--output", p(&model), "--errors",
        p(&errors),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["model"]["family"], "ets");
    let alpha = json["model"]["alpha"].as_f64().unwrap();
    assert!((0.1..0.8).contains(&alpha), "{alpha}");
}

#[test]
fn fit_on_too_short_series_fails() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("y.csv");
    write_column(&input, "value", &[1.0, 2.0, 1.5, 0.5]);
    let o = fcusum(&[
        "fit", "--input", p(&input), "--model", "ets-ann", "--m", "3", "--output",
        p(&dir.path().join("m.json")), "--errors", p(&dir.path().join("e.csv")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_null_level_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("null.json");
    null_white_noise().save(&scenario).unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = fcusum(&[
            "simulate", "--scenario", p(&scenario), "--methods", "raw-cusum,arma", "--replicates", "200", "--seed",
            "11", "--workers", workers, "--output", p(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(&out).unwrap(), std::fs::read(out.with_extension("json")).unwrap())
    };
    let a = run("a.csv", "1");
    assert_eq!(a, run("b.csv", "1"));
    assert_eq!(a, run("c.csv", "8"));
    let text = String::from_utf8(a.0).unwrap();
    for row in text.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        let fdp: f64 = f[6].parse().unwrap();
        assert!(fdp <= 0.08, "{row}");
    }
}

#[test]
fn simulate_forecast_errors_beat_raw_on_seasonal_mean_shift() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    seasonal_mean_shift(1.0).save(&scenario).unwrap();
    let out = dir.path().join("r.csv");
    let o = fcusum(&[
        "simulate", "--scenario", p(&scenario), "--replicates", "60", "--seed", "2", "--output", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    let raw = rows.iter().find(|r| r[1] == "raw-cusum").unwrap();
    let fe = rows.iter().find(|r| r[1] == "arma-forecast-errors").unwrap();
    let dp = |r: &Vec<String>| r[5].parse::<f64>().unwrap();
    let add = |r: &Vec<String>| r[3].parse::<f64>().unwrap_or(f64::INFINITY);
    assert!(dp(fe) >= dp(raw));
    assert!(add(fe) <= add(raw));
}

#[test]
fn single_replicate_marks_undefined_errors() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    seasonal_mean_shift(2.0).save(&scenario).unwrap();
    let out = dir.path().join("r.csv");
    let o = fcusum(&[
        "simulate", "--scenario", p(&scenario), "--methods", "arma", "--replicates", "1", "--output", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[4], "NA");
    assert_eq!(row[7], "1");
}

#[test]
fn invalid_scenario_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.json");
    std::fs::write(&scenario, "{\"id\": 3}").unwrap();
    let o = fcusum(&[
        "simulate", "--scenario", p(&scenario), "--output", p(&dir.path().join("r.csv")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
