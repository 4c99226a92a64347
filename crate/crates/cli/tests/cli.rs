use std::process::{Command, Output};

use torickems::fixture::Fixture;
use torickems::invariants::SolitonResult;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torickems")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn hexagon_needs_no_analysis() {
    let o = run(&["analyze", "--fixture", "dp3", "--mode", "ke"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("F ≡ 0; KE exists"));
}

#[test]
fn validation_errors_exit_2() {
    let o = run(&["analyze", "--fixture", "dp9", "--mode", "ke"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dp9"));

    let o = run(&["flow", "--fixture", "dp2", "--alpha", "0.4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("flow_mis_report"), "{}", stderr(&o));

    let o = run(&["analyze", "--mode", "ke"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn perturbed_fixture_is_rejected() {
    let dir = std::env::temp_dir().join(format!("torickems-cli-{}", std::process::id()));
    let o = run(&["fixtures", "export", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success());
    let path = dir.join("dp2.json");
    let mut f = Fixture::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let k = f.rays.iter().position(|r| r == &vec![1, 1]).unwrap();
    f.rays[k] = vec![2, 1];
    std::fs::write(&path, f.to_json()).unwrap();
    let o = run(&["analyze", "--input", path.to_str().unwrap(), "--mode", "ke"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not smooth"), "{}", stderr(&o));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn exported_fixture_reloads() {
    let o = run(&["fixtures", "export", "dp1"]);
    let f = Fixture::from_json(&stdout(&o)).unwrap();
    assert_eq!(f.candidate_labels.as_deref(), Some(&["E".to_string(), "(+1)-curve".to_string()][..]));
    let path = std::env::temp_dir().join(format!("torickems-dp1-{}.json", std::process::id()));
    std::fs::write(&path, stdout(&o)).unwrap();
    let o = run(&["analyze", "--input", path.to_str().unwrap(), "--mode", "ke"]);
    assert!(stdout(&o).contains("conclusion: KE-MIS = E"));
    std::fs::remove_file(path).unwrap();
}

#[test]
fn selftest_filter_and_threads() {
    let o = Command::new(env!("CARGO_BIN_EXE_torickems"))
        .args(["selftest", "--filter", "polytope"])
        .env("TORICKEMS_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().filter(|l| l.starts_with("ok")).all(|l| l.contains("polytope/")));
    assert!(out.contains("perturbed_fixture_rejected"));

    let o = run(&["selftest", "--filter", "nothing"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flow_csv_and_soliton_json() {
    let path = std::env::temp_dir().join(format!("torickems-flow-{}.csv", std::process::id()));
    let o = run(&["flow", "--fixture", "dp1", "--alpha", "0.8", "--csv", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().next(), Some("facet,alpha,t,log_integral"));
    assert_eq!(csv.lines().count(), 1 + 4 * 5);
    std::fs::remove_file(path).unwrap();

    let o = run(&["soliton", "--fixture", "dp2", "--format", "json"]);
    let sol: SolitonResult = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((sol.xi_s[0] - sol.xi_s[1]).abs() <= 1e-10);
    assert_eq!(serde_json::to_string_pretty(&sol).unwrap() + "\n", stdout(&o));
}

#[test]
fn roots_of_the_plane() {
    let o = run(&["roots", "--fixture", "cp2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 6);
}
