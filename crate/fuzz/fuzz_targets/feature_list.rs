#![no_main]

use libfuzzer_sys::fuzz_target;
use qforecast::cli::parse_feature_list;

fuzz_target!(|text: &str| {
    if let Ok(values) = parse_feature_list(text) {
        assert!(!values.is_empty());
        assert!(values.iter().all(|v| v.is_finite()));
    }
});
