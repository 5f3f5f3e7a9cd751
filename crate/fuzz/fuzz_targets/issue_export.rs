#![no_main]

use bugloc::ingest::{parse_issue_export, IssueMode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(json) = std::str::from_utf8(data) else {
        return;
    };
    let labels = vec!["bug".to_string()];
    for mode in [IssueMode::GroundTruth, IssueMode::Live] {
        if let Ok((reports, _)) = parse_issue_export(json, &labels, mode) {
            if mode == IssueMode::GroundTruth {
                assert!(reports.iter().all(|r| !r.linked_commits.is_empty()));
            }
        }
    }
});
