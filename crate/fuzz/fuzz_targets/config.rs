#![no_main]

use bugloc::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = Config::parse(&text, false);
    let _ = Config::parse(&text, true);
});
