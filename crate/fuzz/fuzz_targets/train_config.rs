#![no_main]

use libfuzzer_sys::fuzz_target;
use qforecast::train::TrainConfig;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = TrainConfig::from_json(text) {
        let again = TrainConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
});
