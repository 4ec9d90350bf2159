//! Gradient verification report: every family, then a small network.

use std::fmt::Write as _;

use ftnn::gradcheck::{check_network, gradient_suite, reference_network};
use ftnn::Result;

/// Input and label fed to the reference network.
const PROBE: ([f64; 4], usize) = ([0.2, 0.7, 0.1, 0.9], 1);

/// One `PASS`/`FAIL` line per family plus one for the network. Returns the
/// text and whether everything passed.
pub fn gradcheck_report(trials: usize, seed: u64, tolerance: f64) -> Result<(String, bool)> {
    let mut out = String::new();
    let mut ok = true;
    for r in gradient_suite(trials, seed) {
        let pass = r.passed(tolerance);
        ok &= pass;
        writeln!(out, "{} {r}", verdict(pass)).expect("writing to a String");
        for f in &r.failures {
            writeln!(out, "     {f}").expect("writing to a String");
        }
    }
    let net = reference_network(seed)?;
    let r = check_network(&net, &PROBE.0, PROBE.1)?;
    let pass = r.passed(tolerance);
    ok &= pass;
    writeln!(
        out,
        "{} 4-2-3 network  max {:.2e} over {} parameters (worst #{})",
        verdict(pass),
        r.max_error,
        r.parameters,
        r.worst_parameter
    )
    .expect("writing to a String");
    Ok((out, ok))
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
