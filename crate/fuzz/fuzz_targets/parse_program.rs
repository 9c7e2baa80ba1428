#![no_main]

use libfuzzer_sys::fuzz_target;
use locfaults::frontend::{parse_program, typecheck};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(f) = parse_program(text) else {
        return;
    };
    let _ = typecheck(&f);
    // Printing an accepted program must give source that parses back to
    // the same tree.
    let printed = f.to_string();
    let again = parse_program(&printed).expect("printed program reparses");
    assert_eq!(again.to_string(), printed);
});
