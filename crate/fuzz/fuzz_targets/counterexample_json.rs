#![no_main]

use libfuzzer_sys::fuzz_target;
use locfaults::Counterexample;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ce) = Counterexample::from_json(text) {
        let json = serde_json::to_string(&ce.inputs).unwrap();
        assert_eq!(Counterexample::from_json(&json).unwrap(), ce);
    }
});
