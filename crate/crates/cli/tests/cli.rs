use std::path::Path;
use std::process::{Command, Output};

fn gammalab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gammalab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn build_then_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let o = gammalab(dir.path(), &["build", "two_point", "--rho", "1", "-o", "tp.space"]);
    assert!(o.status.success());
    let o = gammalab(dir.path(), &["curvature", "tp.space"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "2.0");

    let o = gammalab(dir.path(), &["validate", "tp.space"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ok:"));
}

#[test]
fn validate_rejects_negative_rates() {
    let dir = tempfile::tempdir().unwrap();
    gammalab(dir.path(), &["build", "two_point", "--rho", "1", "-o", "tp.space"]);
    let text = std::fs::read_to_string(dir.path().join("tp.space")).unwrap();
    let broken = text.replacen("rate_ij = 1.0000000000000000e0", "rate_ij = -1.0", 1);
    assert_ne!(text, broken);
    std::fs::write(dir.path().join("bad.space"), broken).unwrap();
    let o = gammalab(dir.path(), &["validate", "bad.space"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("invalid: generator positivity"), "{}", stdout(&o));
}

#[test]
fn gauss_oracle_needs_no_space() {
    let dir = tempfile::tempdir().unwrap();
    let o = gammalab(dir.path(), &["check", "gauss-oracle", "--intervals", "[-1,1]"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("[-1,1]: mass 0.682689492137 perimeter 0.483941449038"), "{}", stdout(&o));
}

#[test]
fn asserted_isoperimetry_off_chain_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    gammalab(dir.path(), &["build", "complete", "--n", "4", "-o", "k4.space"]);
    let o = gammalab(dir.path(), &["check", "isoperimetry", "--space", "k4.space", "--assert"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("check/space incompatibility"));
}

#[test]
fn failed_assertion_exits_one_and_report_merges_runs() {
    let dir = tempfile::tempdir().unwrap();
    gammalab(dir.path(), &["build", "two_point", "--rho", "1", "-o", "tp.space"]);
    // The two-point profile f = (0, 1) is an equality case; a negative
    // tolerance turns the zero margin into a failure.
    let o = gammalab(dir.path(), &["--out", "bad", "check", "two-point-grid", "--grid", "5", "--tolerance=-1e-3"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let o = gammalab(dir.path(), &["--out", "good", "check", "gradient-estimate", "--space", "tp.space", "--samples", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("good/gradient-estimate.csv").exists());

    let o = gammalab(dir.path(), &["report", "good", "bad"]);
    assert_eq!(o.status.code(), Some(1));
    let table = stdout(&o);
    assert!(table.starts_with("run,seed,check,status,criterion,asserted,worst_margin,tolerance,pass"));
    assert!(table.lines().any(|l| l.starts_with("good,0,gradient-estimate,pass,")));
    assert!(table.lines().any(|l| l.starts_with("bad,0,two-point-grid,fail,")));
}

#[test]
fn config_runs_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        "seed = 3\n[space]\nmodel = \"cycle\"\nn = 5\n[checks.curvature]\n[checks.variance-bound]\nsamples = 4\n",
    )
    .unwrap();
    for fmt in ["csv", "json-lines"] {
        let o = gammalab(dir.path(), &["--config", "exp.toml", "--out", fmt, "--format", fmt]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("csv/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 3);
    let jl = std::fs::read_to_string(dir.path().join("json-lines/variance-bound.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(jl.lines().next().unwrap()).unwrap();
    assert!(first["margin"].is_number());
}

#[test]
fn evolve_prints_one_row_per_state_and_time() {
    let dir = tempfile::tempdir().unwrap();
    gammalab(dir.path(), &["build", "ou_chain", "--n", "20", "--R", "4", "-o", "ou.space"]);
    let o = gammalab(dir.path(), &["evolve", "ou.space", "--t", "0,1", "--sigmoid", "1,-0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("state,x,time,value"));
    assert_eq!(text.lines().count(), 41);
    let o = gammalab(dir.path(), &["evolve", "ou.space", "--t", "1", "--sigmoid", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
