use std::path::PathBuf;
use std::process::{Command, Output};

fn starmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starmm"))
        .args(args)
        .env_remove("STAR_MM_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("starmm-cli-{}-{name}", std::process::id()))
}

/// Value of column `col` in each data row of a whitespace table.
fn column(table: &str, col: &str) -> Vec<String> {
    let mut lines = table.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    let idx = header.iter().position(|h| *h == col).unwrap();
    lines.map(|l| l.split_whitespace().nth(idx).unwrap().to_string()).collect()
}

#[test]
fn run_reports_ok_with_metrics() {
    let o = starmm(&["run", "--algo", "co2", "--n", "64", "--b", "8", "--p", "2", "--semiring", "int", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.trim_end().ends_with("ok"));
    let json: serde_json::Value = serde_json::from_str(out.trim_end().strip_suffix("ok").unwrap()).unwrap();
    assert_eq!(json["status"], "ok");
    assert_eq!(json["p"], 2);
    assert!(json["metrics"]["leaf_peak"].as_i64().unwrap() <= 2);
}

#[test]
fn run_every_algorithm_and_semiring() {
    for algo in ["co2", "co3", "tar", "sar", "star", "strassen", "sar-strassen", "star-strassen-1", "star-strassen-2"] {
        for sr in ["int", "float"] {
            let o = starmm(&["run", "--algo", algo, "--n", "32", "--b", "4", "--p", "3", "--semiring", sr]);
            assert_eq!(o.status.code(), Some(0), "{algo} {sr}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    let o = starmm(&["run", "--algo", "star", "--n", "32", "--b", "4", "--semiring", "tropical"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn invalid_input_exits_two() {
    let cases: [&[&str]; 5] = [
        &["run", "--algo", "strassen", "--n", "16", "--b", "4", "--semiring", "tropical"],
        &["run", "--algo", "tar", "--n", "3", "--b", "1"],
        &["run", "--algo", "nope", "--n", "8", "--b", "2"],
        &["bench", "--algo", "co2", "--n", "8", "--b", "2", "--reps", "3"],
        &["simulate", "--algo", "co2", "--n", "1024", "--b", "8"],
    ];
    for args in cases {
        assert_eq!(starmm(args).status.code(), Some(2), "{args:?}");
    }
    let o = starmm(&["run", "--algo", "strassen", "--n", "16", "--b", "4", "--semiring", "tropical"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no additive inverse"));
    let o = starmm(&["run", "--algo", "tar", "--n", "3", "--b", "1"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid split"));
}

#[test]
fn thread_variable_overrides_flag() {
    let o = Command::new(env!("CARGO_BIN_EXE_starmm"))
        .args(["run", "--algo", "tar", "--n", "16", "--b", "4", "--p", "2"])
        .env("STAR_MM_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let json: serde_json::Value = serde_json::from_str(out.trim_end().strip_suffix("ok").unwrap()).unwrap();
    assert_eq!(json["p"], 3);
}

#[test]
fn analyze_span_columns() {
    let o = starmm(&["analyze", "--algo", "co2", "--n", "4..64", "--b", "1"]);
    assert_eq!(column(&stdout(&o), "span"), ["4", "8", "16", "32", "64"]);
    let o = starmm(&["analyze", "--algo", "co3", "--n", "4..64", "--b", "1"]);
    assert_eq!(column(&stdout(&o), "span"), ["3", "4", "5", "6", "7"]);
    let o = starmm(&["analyze", "--algo", "star", "--n", "16..256", "--b", "4", "--p", "16"]);
    assert!(column(&stdout(&o), "k").iter().all(|k| k == "2"));
}

#[test]
fn analyze_csv_output() {
    let path = scratch("analyze.csv");
    let o = starmm(&["analyze", "--algo", "tar,sar", "--n", "8,16", "--b", "2", "--p", "1,4", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(csv.starts_with("algo,n,b,p,M,B,work,span,space,q1,qp,k\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
}

fn misses(args: &[&str]) -> Vec<u64> {
    let o = starmm(args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    column(&stdout(&o), "misses").iter().map(|m| m.parse().unwrap()).collect()
}

#[test]
fn simulate_cold_misses_bounded_by_footprint() {
    // Distinct addresses of a co2 trace are exactly A, B and C.
    let q = misses(&["simulate", "--algo", "co2", "--n", "64", "--b", "8", "--M", "16384", "--B", "8"]);
    assert!(q[0] as f64 <= (3 * 64 * 64) as f64 / 8.0 * 1.05, "{q:?}");
}

#[test]
fn simulate_pooled_beats_raw() {
    let args = |mode| ["simulate", "--algo", "co3", "--mode", mode, "--n", "64", "--b", "8", "--M", "16384"];
    let pooled = misses(&args("pooled"));
    let raw = misses(&args("raw"));
    assert!(pooled[0] < raw[0], "{pooled:?} vs {raw:?}");
}

#[test]
fn simulate_raw_co3_flattens_with_small_blocks() {
    let q = misses(&["simulate", "--algo", "co3", "--mode", "raw", "--n", "128", "--b", "2", "--M", "16384,65536"]);
    let r = q[1] as f64 / q[0] as f64;
    assert!((0.9..=1.1).contains(&r), "{q:?}");
}

#[test]
fn simulate_dumps_trace() {
    let path = scratch("trace.bin");
    let o = starmm(&["simulate", "--algo", "tar", "--n", "8", "--b", "4", "--M", "64", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let len = std::fs::metadata(&path).unwrap().len();
    std::fs::remove_file(&path).ok();
    let accesses: u64 = stdout(&o).split("accesses=").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert_eq!(len, 9 * accesses);
}

#[test]
fn bench_csv_shape_and_stability() {
    let run = |name: &str| {
        let path = scratch(name);
        let o = starmm(&[
            "bench", "--algo", "co2,tar,sar", "--n", "16,32", "--b", "4", "--p", "2", "--reps", "5", "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let csv = std::fs::read_to_string(&path).unwrap();
        std::fs::remove_file(&path).ok();
        csv
    };
    let (x, y) = (run("b1.csv"), run("b2.csv"));
    assert_eq!(x.lines().next().unwrap(), "algo,n,b,p,median_ns,speedup_vs_co2_pct,speedup_vs_co3_pct");
    assert_eq!(x.lines().count(), 1 + 2 * 3);
    let stable = |csv: &str| csv.lines().map(|l| l.split(',').take(4).collect::<Vec<_>>().join(",")).collect::<Vec<_>>();
    assert_eq!(stable(&x), stable(&y));
    for line in x.lines().filter(|l| l.starts_with("co2,")) {
        assert_eq!(line.split(',').nth(5), Some("0.00"));
    }
}

#[test]
fn verify_reports_json() {
    let o = starmm(&["verify", "span"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["passed"], true);
    assert_eq!(json["criteria"][0]["id"], "span-oracles");
}

#[test]
fn verify_catches_a_sabotaged_pool() {
    assert_eq!(starmm(&["verify", "pool"]).status.code(), Some(0));
    let o = starmm(&["verify", "pool", "--sabotage-pool"]);
    assert_eq!(o.status.code(), Some(1));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["passed"], false);
}

#[test]
fn verify_unknown_suite() {
    assert_eq!(starmm(&["verify", "bogus"]).status.code(), Some(2));
}
