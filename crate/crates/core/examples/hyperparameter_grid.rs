//! A short loss-weight sweep: every combination trains from the same seed
//! for a few epochs and is scored on the test split after each one. The
//! CSV goes to stdout; pass `eps:k,...` to choose your own grid.

use ihqgan::data::{build_subdataset, synthetic, BuildConfig, Task};
use ihqgan::study::{default_grid, parse_grid, run_study, study_csv};
use ihqgan::trainer::TrainConfig;

fn main() -> ihqgan::Result<()> {
    let grid = match std::env::args().nth(1) {
        Some(entries) => parse_grid(&entries)?,
        None => default_grid(),
    };
    let source = synthetic::synthetic_mnist(80, 5);
    let cfg = BuildConfig {
        train: 40,
        test: 30,
        ..BuildConfig::default()
    };
    let ds = build_subdataset(Task::EdgeDetection, 3, 5, &source, &cfg)?;
    let base = TrainConfig {
        epochs: 2,
        n_critic: 2,
        seed: 5,
        ..TrainConfig::default()
    };
    let rows = run_study(&base, &grid, &ds, true, |r| {
        eprintln!(
            "eps {:>4} eta {:>4} rho {:>5} epoch {} {}: FD {:.3} SSIM {:.3}",
            r.combination.epsilon, r.combination.eta, r.combination.rho, r.epoch, r.direction, r.fd, r.ssim
        )
    })?;
    print!("{}", study_csv(&rows));
    Ok(())
}
