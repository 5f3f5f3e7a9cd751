#![no_main]

use bugloc::ingest::parse_git_log;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let (commits, _warnings) = parse_git_log(data);
    for c in commits {
        assert!(!c.commit_id.is_empty());
    }
});
