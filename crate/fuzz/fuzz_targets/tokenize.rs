#![no_main]

use bugloc::tokenize::{detokenize, normalize_whitespace, split_identifier, tokenize};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let tokens = tokenize(&text);
    let rebuilt = detokenize(&tokens);
    // nothing but whitespace may be lost
    assert_eq!(
        rebuilt.chars().filter(|c| !c.is_whitespace()).count(),
        normalize_whitespace(&text)
            .chars()
            .filter(|c| !c.is_whitespace())
            .count()
    );
    for word in text.split(|c: char| !(c.is_alphanumeric() || c == '_')) {
        let joined: String = split_identifier(word).concat();
        assert_eq!(joined, word.replace('_', ""));
    }
});
