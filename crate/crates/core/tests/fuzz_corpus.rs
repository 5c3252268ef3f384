//! Replays the checked-in fuzz corpus seeds through the same entry points
//! and invariants as the fuzz targets, on stable.

use std::fs;
use std::path::PathBuf;

use qforecast::cli::parse_feature_list;
use qforecast::market::{parse_ohlcv, parse_samples, write_ohlcv, write_samples};
use qforecast::mlp::MlpParams;
use qforecast::train::TrainConfig;
use qforecast::vqc::ParameterizedCircuit;
use qforecast::QuditRegister;

/// `(name, bytes)` for every seed of one target.
fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

fn expect(name: &str, ok: bool, bad: &[&str]) {
    assert_eq!(ok, !bad.contains(&name), "seed {name}");
}

#[test]
fn ohlcv_seeds() {
    for (name, data) in seeds("parse_ohlcv") {
        let parsed = parse_ohlcv(data.as_slice());
        expect(&name, parsed.is_ok(), &["high_below_low", "duplicate_date"]);
        if let Ok(rows) = parsed {
            assert!(rows.iter().all(|r| r.check().is_ok()));
            let mut buf = Vec::new();
            write_ohlcv(&rows, &mut buf).unwrap();
            assert_eq!(parse_ohlcv(buf.as_slice()).unwrap(), rows);
        }
    }
}

#[test]
fn sample_seeds() {
    for (name, data) in seeds("parse_samples") {
        let parsed = parse_samples(data.as_slice());
        expect(&name, parsed.is_ok(), &["out_of_range"]);
        if let Ok(samples) = parsed {
            let mut buf = Vec::new();
            write_samples(&samples, &mut buf).unwrap();
            assert_eq!(parse_samples(buf.as_slice()).unwrap().len(), samples.len());
        }
    }
}

#[test]
fn config_seeds() {
    for (name, data) in seeds("train_config") {
        let parsed = TrainConfig::from_json(text(&data));
        expect(&name, parsed.is_ok(), &["negative_lr"]);
        if let Ok(cfg) = parsed {
            assert_eq!(TrainConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
        }
    }
}

#[test]
fn checkpoint_seeds() {
    for (name, data) in seeds("mlp_checkpoint") {
        let parsed = MlpParams::from_json(text(&data));
        expect(&name, parsed.is_ok(), &["wrong_shape"]);
        if let Ok(p) = parsed {
            assert_eq!(MlpParams::from_json(&p.to_json().unwrap()).unwrap(), p);
        }
    }
}

#[test]
fn circuit_seeds() {
    for (name, data) in seeds("circuit_json") {
        let circuit = ParameterizedCircuit::from_json(text(&data))
            .unwrap_or_else(|e| panic!("seed {name}: {e}"));
        let reg = QuditRegister::basis_state(circuit.dim, circuit.wires, 0).unwrap();
        let out = circuit.forward(&reg).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn feature_list_seeds() {
    for (name, data) in seeds("feature_list") {
        let parsed = parse_feature_list(text(&data));
        expect(&name, parsed.is_ok(), &["empty_field", "nan"]);
    }
}

mod random_inputs {
    use super::*;
    use proptest::prelude::*;

    /// A seed with a few bytes overwritten.
    fn mutated(target: &'static str) -> impl Strategy<Value = Vec<u8>> {
        let pool = seeds(target);
        (0..pool.len(), prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 0..6)).prop_map(
            move |(i, edits)| {
                let mut bytes = pool[i].1.clone();
                for (at, b) in edits {
                    if !bytes.is_empty() {
                        let k = at.index(bytes.len());
                        bytes[k] = b;
                    }
                }
                bytes
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn parsers_never_panic(raw in prop::collection::vec(any::<u8>(), 0..200), ohlcv in mutated("parse_ohlcv"), samples in mutated("parse_samples")) {
            let _ = parse_ohlcv(raw.as_slice());
            let _ = parse_samples(raw.as_slice());
            if let Ok(rows) = parse_ohlcv(ohlcv.as_slice()) {
                prop_assert!(rows.iter().all(|r| r.check().is_ok()));
            }
            if let Ok(s) = parse_samples(samples.as_slice()) {
                prop_assert!(s.iter().all(|x| x.label <= 1));
            }
        }

        #[test]
        fn json_loaders_never_panic(config in mutated("train_config"), mlp in mutated("mlp_checkpoint"), circuit in mutated("circuit_json"), list in ".{0,40}") {
            let s = |b: &[u8]| String::from_utf8_lossy(b).into_owned();
            let _ = TrainConfig::from_json(&s(&config));
            let _ = MlpParams::from_json(&s(&mlp));
            if let Ok(c) = ParameterizedCircuit::from_json(&s(&circuit)) {
                let reg = QuditRegister::basis_state(c.dim, c.wires, 0).unwrap();
                prop_assert!(c.forward(&reg).is_ok());
            }
            let _ = parse_feature_list(&list);
        }
    }
}
