#![no_main]

use bugloc::corpus::{segment_file, IndexerConfig, SourceFile};
use bugloc::prefix::declaration_prefix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let content = String::from_utf8_lossy(data);
    let _ = declaration_prefix(&content);
    let cfg = IndexerConfig {
        seg_len: 16,
        ..IndexerConfig::default()
    };
    let file = SourceFile::new("src/Fuzz.java", content.into_owned());
    for seg in segment_file(&file, &cfg) {
        assert!(seg.body_tokens.len() <= 16);
    }
});
