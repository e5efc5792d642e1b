mod common;

use common::gradchecks;

#[test]
fn every_graph_operation_matches_finite_differences() {
    let reports = gradchecks::op_checks();
    assert_eq!(reports.len(), 18 * gradchecks::CONFIGS as usize);
    for (name, report) in reports {
        assert!(report.checked > 0, "{name} checked nothing");
        assert!(report.max_rel_error < 1e-4, "{name}: {report:?}");
    }
}
