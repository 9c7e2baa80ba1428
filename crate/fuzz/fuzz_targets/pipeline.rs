#![no_main]

use libfuzzer_sys::fuzz_target;
use locfaults::frontend::{parse_program, typecheck};
use locfaults::mcs::McsBounds;
use locfaults::solver::Domain;
use locfaults::{analyze, Counterexample, ExplorerConfig};

// Source text followed by a NUL byte and one input byte per parameter.
fuzz_target!(|data: &[u8]| {
    if data.len() > 1024 {
        return;
    }
    let (src, inputs) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], &data[i + 1..]),
        None => (data, &[][..]),
    };
    let Ok(src) = std::str::from_utf8(src) else {
        return;
    };
    let Ok(f) = parse_program(src) else {
        return;
    };
    if !typecheck(&f).is_empty() {
        return;
    }
    let ce = Counterexample::from_pairs(
        f.params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), inputs.get(i).map_or(0, |&b| b as i8 as i64))),
    );
    let config = ExplorerConfig {
        b_cond: 2,
        mcs: McsBounds { b_mcs: 2, k_max: 2 },
        domain: Domain { lo: -1000, hi: 1000 },
        incremental: true,
    };
    let _ = analyze(src, &ce, &config);
});
