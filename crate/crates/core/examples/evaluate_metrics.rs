//! Scores an untrained generator pair on a small sub-dataset and prints
//! the evaluation CSV, next to the scores of the identity map (sources
//! compared with their own references) as a baseline.

use ihqgan::data::{build_subdataset, synthetic, BuildConfig, Task};
use ihqgan::evaluate::{evaluate_subdataset, pair_by_source, score_pairs, test_scorer};
use ihqgan::metrics::emit_report;
use ihqgan::qgen::{DecodeRule, GeneratorParams, QuantumGenerator, BLOCKS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ihqgan::Result<()> {
    let source = synthetic::synthetic_mnist(120, 4);
    let cfg = BuildConfig {
        train: 20,
        test: 80,
        ..BuildConfig::default()
    };
    let ds = build_subdataset(Task::FontStyleTransfer, 6, 2, &source, &cfg)?;

    let gen = QuantumGenerator::new(BLOCKS, DecodeRule::MaxNorm);
    let params = GeneratorParams::random(BLOCKS, 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
    print!("{}", emit_report(&evaluate_subdataset(&gen, &params, &ds, true)?));

    let scorer = test_scorer(&ds)?;
    let (src, refs) = pair_by_source(&ds.test_a, &ds.test_b)?;
    let id = score_pairs(&scorer, &src, &refs)?;
    println!("identity baseline A->B: FD {:.4}, SSIM {:.4}, PSNR {:.2} dB", id.fd, id.ssim, id.psnr);
    let perfect = score_pairs(&scorer, &refs, &refs)?;
    println!("perfect translation:    FD {:.1e}, SSIM {:.4}, PSNR {}", perfect.fd, perfect.ssim, perfect.psnr);
    Ok(())
}
