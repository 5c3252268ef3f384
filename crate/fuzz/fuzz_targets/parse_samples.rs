#![no_main]

use libfuzzer_sys::fuzz_target;
use qforecast::market::{parse_samples, write_samples};

fuzz_target!(|data: &[u8]| {
    let Ok(samples) = parse_samples(data) else { return };
    assert!(samples.iter().all(|s| s.label <= 1));
    assert!(samples
        .iter()
        .all(|s| s.features.values().iter().all(|v| (0.0..=1.0).contains(v))));
    let mut buf = Vec::new();
    write_samples(&samples, &mut buf).unwrap();
    let back = parse_samples(buf.as_slice()).unwrap();
    assert_eq!(back.len(), samples.len());
});
