#![no_main]

use libfuzzer_sys::fuzz_target;
use qforecast::market::{parse_ohlcv, write_ohlcv};

fuzz_target!(|data: &[u8]| {
    let Ok(rows) = parse_ohlcv(data) else { return };
    assert!(rows.iter().all(|r| r.check().is_ok()));
    assert!(rows.windows(2).all(|w| w[0].date < w[1].date));
    let mut buf = Vec::new();
    write_ohlcv(&rows, &mut buf).unwrap();
    assert_eq!(parse_ohlcv(buf.as_slice()).unwrap(), rows);
});
