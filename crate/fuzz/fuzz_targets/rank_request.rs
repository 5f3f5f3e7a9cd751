#![no_main]

use bugloc::pipeline::parse_rank_request;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(req) = parse_rank_request(data) {
        assert!(!req.text.trim().is_empty());
        assert_ne!(req.k, Some(0));
    }
});
