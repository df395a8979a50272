use std::path::Path;
use std::process::{Command, Output};

use rabit::commands;
use rabit::config::RunConfig;
use rabit::Engine;
use serde_json::{json, Value};
use tempfile::TempDir;

fn rabit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rabit"))
        .args(args)
        .current_dir(dir)
        .env_remove("RABIT_TOLERANCE")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn table2_row5() -> Value {
    let third = 1.0 / 3.0;
    json!({
        "design": {
            "k": 3,
            "n_total": 150,
            "proportions": [third, third, third],
            "effect_sizes": [0.5, 0.5, 0.5],
            "info_time": 0.5,
            "alpha": 0.025,
            "alpha_interim": 0.3
        }
    })
}

#[test]
fn evaluate_table2_row5_json_equals_library() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", &table2_row5());
    let out = rabit(&["evaluate", "--config", &cfg, "--format", "json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["power"].as_f64().unwrap() - 0.8786).abs() <= 0.005);

    let run = RunConfig::from_json(&table2_row5().to_string()).unwrap();
    let lib = commands::evaluate(&Engine::new(), &run, rabit::core::tail::DEFAULT_TOLERANCE).unwrap();
    assert_eq!(v, serde_json::to_value(&lib).unwrap());
}

#[test]
fn evaluate_with_accrual_reports_duration() {
    let dir = TempDir::new().unwrap();
    let mut c = table2_row5();
    c["accrual"] = json!({"rates": [2, 2, 2]});
    c["output"] = json!({"format": "json", "path": "report.json"});
    let cfg = write_config(dir.path(), "run.json", &c);
    let out = rabit(&["evaluate", "-c", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let ed = v["forecast"]["expected_duration"].as_f64().unwrap();
    assert!((ed - 36.28).abs() <= 0.01, "{ed}");
}

#[test]
fn evaluate_csv_is_byte_stable() {
    let dir = TempDir::new().unwrap();
    let mut c = table2_row5();
    c["accrual"] = json!({"rates": [2, 2, 1]});
    let cfg = write_config(dir.path(), "run.json", &c);
    let a = rabit(&["evaluate", "-c", &cfg, "--format", "csv"], dir.path());
    let b = rabit(&["evaluate", "-c", &cfg, "--format", "csv"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "mask,alpha_star,mask_probability,null_contribution,power_contribution,duration,participants"
    );
    assert_eq!(text.lines().count(), 1 + 8 + 1);
    assert!(text.lines().last().unwrap().starts_with("total,"));
}

#[test]
fn missing_proportions_names_the_field() {
    let dir = TempDir::new().unwrap();
    let mut c = table2_row5();
    c["design"].as_object_mut().unwrap().remove("proportions");
    let cfg = write_config(dir.path(), "run.json", &c);
    let out = rabit(&["evaluate", "-c", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("design.proportions"), "{}", stderr(&out));
}

#[test]
fn bad_json_names_the_path() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", &json!({"design": {"info_time": "half"}}));
    let out = rabit(&["evaluate", "-c", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("design.info_time"), "{}", stderr(&out));
}

#[test]
fn flags_override_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", &table2_row5());
    let out = rabit(
        &["evaluate", "-c", &cfg, "--effect-sizes", "1.1,0.2,0.2", "--format", "json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["inputs"]["effect_sizes"], json!([1.1, 0.2, 0.2]));
    assert!((v["power"].as_f64().unwrap() - 0.9692).abs() <= 0.005);
}

#[test]
fn unreachable_alpha_is_a_numeric_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", &table2_row5());
    let out = rabit(&["evaluate", "-c", &cfg, "--alpha", "0.7"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    assert_eq!(rabit(&["evaluate", "--n-total", "lots"], dir.path()).status.code(), Some(1));
    assert_eq!(rabit(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(rabit(&["--help"], dir.path()).status.code(), Some(0));
}

fn sweep_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn sweep_k2_matches_quoted_extremes() {
    let dir = TempDir::new().unwrap();
    let out = rabit(
        &["sweep", "--k", "2", "--n-total", "150", "--effect-sizes", "0.5,0.5", "--info-time", "0.5"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "allocation_1,allocation_2,gini,alpha_star,power");
    let rows = sweep_rows(&text);
    assert_eq!(rows.len(), 131);
    let max = rows.iter().max_by(|a, b| a[3].total_cmp(&b[3])).unwrap();
    let min = rows.iter().min_by(|a, b| a[3].total_cmp(&b[3])).unwrap();
    assert_eq!((min[0], min[1]), (75.0, 75.0));
    assert!([10.0, 140.0].contains(&max[0]));
    assert!((max[3] - 0.0192).abs() <= 0.0005);
    assert!((min[3] - 0.0143).abs() <= 0.0005);
    assert!((min[4] - 0.868).abs() <= 0.005);
    assert!((rows[0][4] - 0.846).abs() <= 0.005);
    // Gini ascending, ties lexicographic.
    assert!(rows.windows(2).all(|w| w[0][2] <= w[1][2]));
    assert_eq!((rows[0][0], rows[1][0]), (10.0, 140.0));
}

#[test]
fn sweep_k3_extremes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        &json!({
            "design": {"k": 3, "n_total": 150, "effect_sizes": [0.5, 0.5, 0.5], "info_time": 0.5},
            "sweep": {"step": 5, "min_basket": 10},
            "output": {"path": "k3.csv"}
        }),
    );
    let out = rabit(&["sweep", "-c", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = sweep_rows(&std::fs::read_to_string(dir.path().join("k3.csv")).unwrap());
    assert_eq!(rows.len(), 325);
    let find = |a: [f64; 3]| rows.iter().find(|r| r[..3] == a).unwrap().clone();
    assert!((find([50.0, 50.0, 50.0])[4] - 0.0100).abs() <= 0.0005);
    assert!((find([10.0, 10.0, 130.0])[4] - 0.0152).abs() <= 0.0005);
    assert_eq!(rows.last().unwrap()[..3], [50.0, 50.0, 50.0]);
}

#[test]
fn sweep_too_large() {
    let dir = TempDir::new().unwrap();
    let out = rabit(
        &[
            "sweep", "--k", "8", "--n-total", "800", "--effect-sizes", "0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5",
            "--info-time", "0.5", "--min-basket", "1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("limit of 1000000"), "{}", stderr(&out));
}

#[test]
fn simulate_is_reproducible_and_covers_power() {
    let dir = TempDir::new().unwrap();
    let mut c = table2_row5();
    c["simulation"] = json!({"replicates": 100000, "seed": 42});
    let cfg = write_config(dir.path(), "sim.json", &c);
    let a = rabit(&["simulate", "-c", &cfg, "--format", "json", "-o", "a.json"], dir.path());
    let b = rabit(&["simulate", "-c", &cfg, "--format", "json", "-o", "b.json"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0));
    let fa = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(fa, std::fs::read(dir.path().join("b.json")).unwrap());
    let v: Value = serde_json::from_slice(&fa).unwrap();
    let rate = v["rejection_rate"]["mean"].as_f64().unwrap();
    let se = v["rejection_rate"]["se"].as_f64().unwrap();
    assert!((rate - 0.8786).abs() <= 3.0 * se, "{rate} ± {se}");
}

#[test]
fn simulate_null_design_and_log() {
    let dir = TempDir::new().unwrap();
    let mut c = table2_row5();
    c["design"]["effect_sizes"] = json!([0.0, 0.0, 0.0]);
    let cfg = write_config(dir.path(), "sim.json", &c);
    let out = rabit(
        &[
            "simulate", "-c", &cfg, "--replicates", "100000", "--seed", "7", "--format", "csv",
            "--log", "reps.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let line = text.lines().find(|l| l.starts_with("rejection_rate,")).unwrap();
    let f: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
    assert!((f[0] - 0.025).abs() <= 3.0 * f[1], "{line}");
    let log = std::fs::read_to_string(dir.path().join("reps.csv")).unwrap();
    assert_eq!(log.lines().count(), 100_001);
    let rejected = log.lines().skip(1).filter(|l| l.split(',').nth(3) == Some("1")).count();
    assert_eq!(rejected as f64 / 1e5, f[0]);
}

#[test]
fn simulate_requires_a_section() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "sim.json", &table2_row5());
    let out = rabit(&["simulate", "-c", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("simulation"));
}

#[test]
fn solve_n_reaches_target() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", &table2_row5());
    let out = rabit(&["solve-n", "-c", &cfg, "--target-power", "0.87", "--format", "csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let n: u64 = row[1].parse().unwrap();
    assert!(n <= 150, "{n}");
}

#[test]
fn reproduce_table2_passes_and_writes_files() {
    let dir = TempDir::new().unwrap();
    let out = rabit(&["reproduce", "table2", "--out-dir", "rep"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("9/9 checked cells within tolerance"));
    let csv = std::fs::read_to_string(dir.path().join("rep/table2.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert!(dir.path().join("rep/report.txt").exists());
}

#[test]
fn reproduce_table3_reports_the_power_loss_mismatch() {
    let dir = TempDir::new().unwrap();
    let out = rabit(&["reproduce", "table3", "--out-dir", "rep", "--json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let cells = v["sections"][0]["cells"].as_array().unwrap();
    let failing: Vec<&str> = cells
        .iter()
        .filter(|c| c["pass"] == json!(false))
        .map(|c| c["label"].as_str().unwrap())
        .collect();
    assert_eq!(failing, vec!["power loss, A=(2,2,1), equal vs proportional p"]);
}
