use ncball_core::{par, suite};

fn json(entries: &[suite::SuiteEntry]) -> String {
    let reports: Vec<_> = entries.iter().map(|e| &e.report).collect();
    serde_json::to_string(&reports).unwrap()
}

#[test]
fn full_suite_passes() {
    let entries = suite::run_suite(42, None, None);
    assert_eq!(entries.len(), suite::CHECKS.len());
    for e in &entries {
        assert!(e.report.passed, "{}: {:?}", e.report.name, e.report.notes);
    }
}

#[test]
fn reports_do_not_depend_on_the_dispatch_path() {
    for name in ["canonical", "moebius", "fock_uniqueness"] {
        let a = json(&suite::run_suite(7, Some(name), None));
        let b = json(&par::with_sequential(|| suite::run_suite(7, Some(name), None)));
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn injected_faults_fail_the_named_check_only() {
    for name in ["bidisk", "isometry", "nullss", "schwarz"] {
        let entries = suite::run_suite(3, Some(name), Some(name));
        assert_eq!(entries.len(), 1);
        assert!(!entries[0].report.passed, "{name} passed with a fault");
    }
    let entries = suite::run_suite(3, Some("s"), Some("nullss"));
    for e in entries {
        assert_eq!(e.report.passed, e.report.name != "nullss", "{}", e.report.name);
    }
}

#[test]
fn filter_selects_by_substring() {
    let names: Vec<String> = suite::run_suite(1, Some("fock"), None).into_iter().map(|e| e.report.name).collect();
    assert_eq!(names, ["fock_identities", "fock_uniqueness"]);
}
