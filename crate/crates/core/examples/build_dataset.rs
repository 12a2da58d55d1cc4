//! Builds one unpaired sub-dataset per task from IDX files (the real MNIST
//! files if a directory is given, otherwise a freshly rendered stand-in),
//! saves each to disk and prints the split sizes and manifest hashes.

use std::path::PathBuf;

use ihqgan::data::{build_subdataset, load_mnist, synthetic, BuildConfig, Task};

fn main() -> ihqgan::Result<()> {
    let out = std::env::temp_dir().join("ihqgan-build-dataset");
    let mnist: PathBuf = match std::env::args().nth(1) {
        Some(dir) => dir.into(),
        None => {
            let dir = out.join("mnist");
            synthetic::write_synthetic_mnist(&dir, 400, 0)?;
            dir
        }
    };
    let source = load_mnist(&mnist)?;
    println!("{} labelled digits loaded from {}", source.len(), mnist.display());

    let cfg = BuildConfig {
        train: 300,
        test: 60,
        ..BuildConfig::default()
    };
    for task in Task::ALL {
        let label = task.valid_labels()[0];
        let ds = build_subdataset(task, label, 1, &source, &cfg)?;
        let dir = out.join(ds.dir_name());
        let hash = ds.save(&dir)?;
        println!(
            "{:<20} label {label}: trainA {} trainB {} testA {} testB {}  manifest {}…  -> {}",
            task.name(),
            ds.train_a.len(),
            ds.train_b.len(),
            ds.test_a.len(),
            ds.test_b.len(),
            &hash[..12],
            dir.display()
        );
    }
    let bad = Task::ImageDenoising.check_label(5).unwrap_err();
    println!("denoising label 5: {bad}");
    Ok(())
}
