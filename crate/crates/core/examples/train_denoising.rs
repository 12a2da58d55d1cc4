//! Desk-scale training run on label-0 image denoising: 200 training images,
//! batches of 10, five critic steps per generator step, five epochs.
//! Prints the per-epoch mean generator loss and writes loss curves and
//! comparison grids to the directory given as the first argument.

use std::path::PathBuf;

use ihqgan::data::{build_subdataset, images, synthetic, BuildConfig, Task};
use ihqgan::qgen::Direction;
use ihqgan::trainer::{comparison_grid, TrainConfig, Trainer};

fn main() -> ihqgan::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ihqgan-train-denoising"));
    let source = synthetic::synthetic_mnist(260, 1);
    let build = BuildConfig {
        train: 200,
        test: 50,
        ..BuildConfig::default()
    };
    let ds = build_subdataset(Task::ImageDenoising, 0, 7, &source, &build)?;
    let (train_x, train_y) = (images(&ds.train_a), images(&ds.train_b));

    let config = TrainConfig {
        epochs: 5,
        seed: 7,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(config)?;
    let grid_sources: Vec<_> = ds.test_a.iter().take(8).collect();
    let refs: Vec<_> = grid_sources
        .iter()
        .map(|s| ds.test_b.iter().find(|b| b.source == s.source).unwrap().image.clone())
        .collect();
    let srcs: Vec<_> = grid_sources.iter().map(|s| s.image.clone()).collect();
    let start = std::time::Instant::now();
    trainer.fit(&train_x, &train_y, Some(&out), |t| {
        let e = t.state.epoch;
        println!(
            "epoch {e}: mean generator loss {:.4} (G {:.4}, F {:.4}) after {:.1?}",
            t.state.history.mean_total(e).unwrap_or(f64::NAN),
            t.state.history.mean_total_of(e, "G").unwrap_or(f64::NAN),
            t.state.history.mean_total_of(e, "F").unwrap_or(f64::NAN),
            start.elapsed()
        );
        comparison_grid(
            t.generator(),
            &t.state.params,
            Direction::Forward,
            &srcs,
            &refs,
            &out.join(format!("grid_epoch{e:03}.png")),
        )
    })?;
    println!("outputs in {}", out.display());
    Ok(())
}
