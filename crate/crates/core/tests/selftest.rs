use torickems::selftest::{run, SUITES};

#[test]
fn every_suite_passes() {
    let results = run(None);
    for r in &results {
        eprintln!("{} {} {}: {}", if r.passed { "ok  " } else { "FAIL" }, r.suite, r.name, r.detail);
    }
    for s in SUITES {
        assert!(results.iter().any(|r| r.suite == s), "suite {s} ran no checks");
    }
    assert!(results.iter().all(|r| r.passed));
}
