//! Compares every analytic gradient in the model with central finite
//! differences and prints the worst relative error per component.

use ihqgan::audit::all_audits;

fn main() -> ihqgan::Result<()> {
    let instances = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let start = std::time::Instant::now();
    for audit in all_audits(11, instances)? {
        println!(
            "{:<24} {:>3} instances, {:>4} coordinates each, max rel. error {:.2e} / {:.0e}  {}",
            audit.name,
            audit.instances,
            audit.coordinates,
            audit.max_rel_error,
            audit.tolerance,
            if audit.passed() { "ok" } else { "FAILED" }
        );
    }
    println!("finished in {:.1?}", start.elapsed());
    Ok(())
}
