//! Runs every forward circuit followed by its inverse on random unit states
//! and reports the largest deviation per circuit. Then builds the inverse
//! the wrong way (each angle negated but α and γ left unswapped) to show what a
//! broken inverse looks like.

use ihqgan::audit::{check_inverse, INVERSE_TOLERANCE};
use ihqgan::qgen::InverseMode;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let exact = check_inverse(seed, 200, InverseMode::Exact);
    println!("exact inverse, {} draws:", exact.trials);
    for (k, dev) in exact.per_circuit.iter().enumerate().step_by(4) {
        println!("  circuit {k:>2}: max |F(G(x)) - x| = {dev:.2e}");
    }
    println!(
        "  worst over all 32 circuits: {:.2e} (tolerance {INVERSE_TOLERANCE:.0e}, {})",
        exact.max_deviation(),
        if exact.passed() { "ok" } else { "FAILED" }
    );

    let broken = check_inverse(seed, 20, InverseMode::NegateOnly);
    println!(
        "negate-only inverse: worst deviation {:.3} ({})",
        broken.max_deviation(),
        if broken.passed() { "unexpectedly ok" } else { "rejected as expected" }
    );
}
