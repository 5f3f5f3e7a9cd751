#![no_main]

use bugloc::negatives::parse_positives;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = parse_positives(&text);
});
