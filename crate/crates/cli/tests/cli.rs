use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_equifwer")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const LAPLACE_1000: &str = r#"{"n":1000,"global_null":true,"rho":0.2,"g":{"kind":"laplace"}}"#;

#[test]
fn table_long_format() {
    let o = run(&["table", "custom", "--rho", "0,0.2", "--n", "100,1000", "--g", r#"{"kind":"laplace"}"#]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rho,n,fwer");
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[1], "0,100,0.0487824698");
    assert_eq!(lines[3], "0.2,100,0.0294425941");
}

#[test]
fn table_wide_and_json() {
    let o = run(&["table", "table2", "--rho", "0.3", "--n", "1000", "--wide"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "rho,1000\n0.3,0.000399255363\n");
    let o = run(&["--output", "json", "table", "table2", "--rho", "0.3", "--n", "1000"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v[0]["fwer"].as_f64().unwrap() - 3.992_553_627_644_51e-4).abs() < 1e-12);
}

#[test]
fn table_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let o = run(&["table", "table1", "--rho", "0.5", "--n", "100", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("rho,n,fwer\n0.5,100,"));
}

#[test]
fn domain_errors_exit_two() {
    let o = run(&["bounds", "--model", r#"{"n":1000,"global_null":true,"rho":0}"#]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[domain]"));
    assert_eq!(run(&["table", "custom", "--rho", "1.5", "--n", "10"]).status.code(), Some(2));
    // Unknown keys in a distribution spec are rejected.
    let o = run(&["exact", "--model", r#"{"n":10,"global_null":true,"rho":0.2,"f":{"kind":"laplace","scale":2}}"#]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["exact", "--alpha", "1.5", "--model", LAPLACE_1000]).status.code(), Some(2));
    assert_eq!(run(&["--tolerance", "0", "exact", "--model", LAPLACE_1000]).status.code(), Some(2));
    assert_eq!(run(&["table", "bogus"]).status.code(), Some(2));
}

#[test]
fn io_errors_exit_four() {
    let o = run(&["exact", "--model", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["apply", "--pvalues", "/definitely/not/here.csv"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn model_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, r#"{"rho":0.2,"f":{"kind":"standard_normal"},"g":{"kind":"laplace"},"means":[0,0,0,0,0,0,0,0,0,3]}"#).unwrap();
    let o = run(&["exact", "--model", path.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n"], 10);
    assert_eq!(v["n0"], 9);
    let any = v["any_rejection_holm"].as_f64().unwrap();
    let fwer = v["fwer_bonferroni"].as_f64().unwrap();
    assert!(fwer < 0.05 && any > fwer);
}

#[test]
fn bounds_sandwich_the_exact_value() {
    let o = run(&["bounds", "--model", r#"{"n":1000,"global_null":true,"rho":0.3}"#]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let (lo, ex, up) = (v["lower"].as_f64().unwrap(), v["exact"].as_f64().unwrap(), v["upper"].as_f64().unwrap());
    assert!(lo <= ex && ex <= up);
    let o = run(&["bounds", "--d", "0.5", "--no-exact", "--model", r#"{"n":1000,"global_null":true,"rho":0.3}"#]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["d_used"], 0.5);
    assert!(v["exact"].is_null());
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let args = |threads: &'static str| -> Vec<&'static str> {
        vec![
            "--seed", "42", "--threads", threads, "--output", "csv", "simulate", "--model", LAPLACE_1000,
            "--procedure", "holm,bonferroni", "--estimand", "any_rejection", "--replications", "20000",
        ]
    };
    let a = run(&args("1"));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, run(&args("1")).stdout);
    assert_eq!(a.stdout, run(&args("4")).stdout);
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "model-hash,procedure,n,alpha,rho-or-sigma-id,replications,seed,p_hat,std_err,ci_low,ci_high,estimand"
    );
    // Shared panels: Holm and Bonferroni first reject in the same replications.
    fn tail(l: &str) -> Vec<&str> {
        l.split(',').skip(2).collect()
    }
    assert_eq!(tail(lines[1]), tail(lines[2]));
}

#[test]
fn simulate_appends_results() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    for seed in ["1", "2"] {
        let o = run(&[
            "--seed", seed, "--output", "csv", "simulate", "--model", LAPLACE_1000, "--replications", "2000",
            "--results", path.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().filter(|l| l.starts_with("model-hash")).count(), 1);
}

#[test]
fn simulate_rejects_undefined_estimands() {
    let o = run(&["simulate", "--model", LAPLACE_1000, "--estimand", "anypwr", "--replications", "100"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["simulate", "--model", LAPLACE_1000, "--n", "50", "--replications", "100"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["n"], 50);
}

#[test]
fn diagnose_reports_verdicts() {
    let o = run(&["diagnose", "--model", r#"{"n":10,"global_null":true,"rho":0.5,"g":{"kind":"laplace"}}"#]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["limit"]["verdict"], "tends_to_zero");
    assert_eq!(v["conditions"]["density_decay"]["verdict"], "satisfied");
    let o = run(&["diagnose", "--model", r#"{"n":10,"global_null":true,"rho":0.5,"f":{"kind":"standardized_pareto","delta":1}}"#,
        "--n-grid", "10000,100000,1000000,10000000"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["limit"]["verdict"], "positive_limit");
    assert_eq!(v["conditions"]["density_decay"]["verdict"], "violated");
}

#[test]
fn quantile_matches_bonferroni_cutoff() {
    let o = run(&["--output", "csv", "quantile", "--model", r#"{"n":1,"global_null":true,"rho":0.3}"#, "--upper", "0.05", "--alpha", "0.05"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(rows[0], rows[1]);
    assert_eq!(rows[0], "1.64485363");
}

#[test]
fn gordon_check_flags_the_first_violation() {
    let o = run(&["gordon-check", "--holm", "20"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    let o = run(&["gordon-check", "--cutoffs", "0.01,0.0125,0.02,0.03,0.05"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], false);
    assert_eq!(v["first_violation"], 2);
    assert_eq!(run(&["gordon-check", "--cutoffs", "0.02,0.01"]).status.code(), Some(2));
}

#[test]
fn apply_reads_a_pvalue_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    std::fs::write(&path, "id,p\na,0.001\nb,0.2\nc,0.02\nd,0.03\n").unwrap();
    let o = run(&["apply", "--pvalues", path.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    // Holm at 0.05: 0.001 ≤ 0.0125, 0.02 ≤ 0.0167 fails, so one rejection.
    assert_eq!(v["rejected_indices"], serde_json::json!([0]));
    let o = run(&["apply", "--pvalues", path.to_str().unwrap(), "--column", "q"]);
    assert_eq!(o.status.code(), Some(2));
}
