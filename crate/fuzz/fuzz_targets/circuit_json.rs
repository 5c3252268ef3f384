#![no_main]

use libfuzzer_sys::fuzz_target;
use qforecast::vqc::ParameterizedCircuit;

fuzz_target!(|text: &str| {
    let Ok(circuit) = ParameterizedCircuit::from_json(text) else { return };
    // a circuit that loads must also compile and run on its ground state
    if circuit.dim.pow(circuit.wires as u32) <= 1 << 12 {
        let reg = qforecast::QuditRegister::basis_state(circuit.dim, circuit.wires, 0).unwrap();
        let out = circuit.forward(&reg).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-6);
    }
});
