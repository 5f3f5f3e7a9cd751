#![no_main]

use bugloc::EmbeddingStore;
use libfuzzer_sys::fuzz_target;

// Layout: two length bytes, then manifest, items and vectors back to back.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let (a, b) = (data[0] as usize, data[1] as usize);
    let rest = &data[2..];
    let a = a.min(rest.len());
    let b = b.min(rest.len() - a);
    let (manifest, rest) = rest.split_at(a);
    let (items, vectors) = rest.split_at(b);
    if let Ok(store) = EmbeddingStore::from_parts(manifest, items, vectors) {
        let (m, i, v) = store.to_parts();
        let again = EmbeddingStore::from_parts(&m, &i, &v).expect("round trip");
        assert_eq!(again, store);
    }
});
