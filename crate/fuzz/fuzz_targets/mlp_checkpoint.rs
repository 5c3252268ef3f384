#![no_main]

use libfuzzer_sys::fuzz_target;
use qforecast::mlp::MlpParams;

fuzz_target!(|text: &str| {
    if let Ok(params) = MlpParams::from_json(text) {
        let again = MlpParams::from_json(&params.to_json().unwrap()).unwrap();
        assert_eq!(params, again);
    }
});
