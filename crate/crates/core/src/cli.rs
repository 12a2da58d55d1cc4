//! Command-line front end. [`run`] parses arguments, dispatches to a
//! subcommand and returns the process exit code:
//! 0 success, 1 usage or configuration error, 2 data or format error,
//! 3 numerical failure (including failed self-checks).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::audit::{self, DEFAULT_INSTANCES};
use crate::config::{parse_decode, RunConfig};
use crate::data::{self, build_subdataset, images, load_mnist, synthetic, SubDataset, Task};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_subdataset, pair_by_source};
use crate::metrics::emit_report;
use crate::postprocess::post_process;
use crate::qgen::{Direction, InverseMode, QuantumGenerator};
use crate::study::{default_grid, parse_grid, run_study, study_csv};
use crate::tensor_io::write_atomic;
use crate::trainer::{self, comparison_grid, params_checksum, Trainer, CONFIG_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const RUN_MANIFEST: &str = "run.txt";

#[derive(Parser, Debug)]
#[command(name = "ihqgan", version, about = "Invertible hybrid quantum-classical GAN for unpaired 32×32 image translation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write stroke-rendered stand-in digits as MNIST IDX files.
    SynthMnist {
        #[arg(long)]
        out: PathBuf,
        /// Images rendered per digit class.
        #[arg(long, default_value_t = 1300)]
        per_label: usize,
        #[arg(long, env = "IHQGAN_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Build one or more unpaired sub-datasets from MNIST IDX files.
    BuildData {
        #[command(flatten)]
        flags: RunFlags,
        /// Directory holding train-images-idx3-ubyte and train-labels-idx1-ubyte.
        #[arg(long)]
        mnist: Option<PathBuf>,
        /// Output root; each sub-dataset goes to `<out>/<task>-<label>`.
        #[arg(long)]
        out: PathBuf,
        /// Build every valid label of the task(s).
        #[arg(long)]
        all_labels: bool,
        /// Build all three tasks.
        #[arg(long)]
        all_tasks: bool,
        #[arg(long)]
        train_size: Option<usize>,
        #[arg(long)]
        test_size: Option<usize>,
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Train the generator pair, critics and assisted networks.
    Train {
        #[command(flatten)]
        flags: RunFlags,
        /// Sub-dataset directory (with manifest.txt).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from `<out>/checkpoint`.
        #[arg(long)]
        resume: bool,
    },
    /// Translate PNG images with a trained checkpoint.
    Translate {
        /// Checkpoint directory, run directory or generator tensor file.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, ignore_case = true)]
        direction: DirectionArg,
        /// A PNG file or a directory of PNGs.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        post: PostFlags,
        #[arg(long)]
        decode: Option<String>,
    },
    /// Score both directions on the test split of one or more sub-datasets.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// A sub-dataset directory, or a directory of sub-dataset directories.
        #[arg(long)]
        data: PathBuf,
        /// CSV report path.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        post: PostFlags,
        #[arg(long)]
        decode: Option<String>,
    },
    /// Check that every inverse circuit undoes its forward circuit.
    CheckInverse {
        #[arg(long, env = "IHQGAN_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Build the inverse by negating angles without reordering them.
        #[arg(long, hide = true)]
        corrupt_sign: bool,
    },
    /// Finite-difference audits of every analytic gradient.
    GradCheck {
        #[arg(long, env = "IHQGAN_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_INSTANCES)]
        instances: usize,
    },
    /// Sweep loss weights and record per-epoch FD and SSIM for each.
    Study {
        #[command(flatten)]
        flags: RunFlags,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated `eps:multiple` entries scaling (eta, rho) = (10, 150).
        #[arg(long)]
        grid: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DirectionArg {
    G,
    F,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::G => Direction::Forward,
            DirectionArg::F => Direction::Inverse,
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct PostFlags {
    /// Clear rows 0–7 and 26–31 of generated images.
    #[arg(long, overrides_with = "no_post")]
    post: bool,
    #[arg(long)]
    no_post: bool,
}

impl PostFlags {
    fn resolve(&self, default: bool) -> bool {
        if self.post {
            true
        } else if self.no_post {
            false
        } else {
            default
        }
    }
}

/// Flags shared by commands that build data or train. Values given here
/// override the configuration file.
#[derive(Args, Debug, Default)]
pub struct RunFlags {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    label: Option<u8>,
    #[arg(long, env = "IHQGAN_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    nc: Option<usize>,
    #[arg(long)]
    lr_gen: Option<f64>,
    #[arg(long)]
    lr_critic: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// `max` or `sum`.
    #[arg(long)]
    decode: Option<String>,
    /// `standard` or `literal`.
    #[arg(long)]
    adv_sign: Option<String>,
    #[command(flatten)]
    post: PostFlags,
}

impl RunFlags {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let pairs: [(&str, Option<String>); 14] = [
            ("task", self.task.clone()),
            ("label", self.label.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("batch_size", self.batch_size.map(|v| v.to_string())),
            ("nc", self.nc.map(|v| v.to_string())),
            ("lr_gen", self.lr_gen.map(|v| v.to_string())),
            ("lr_critic", self.lr_critic.map(|v| v.to_string())),
            ("eps", self.eps.map(|v| v.to_string())),
            ("eta", self.eta.map(|v| v.to_string())),
            ("rho", self.rho.map(|v| v.to_string())),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("decode", self.decode.clone()),
            ("adv_sign", self.adv_sign.clone()),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        cfg.post = self.post.resolve(cfg.post);
        Ok(cfg)
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Numerical(_) => EXIT_NUMERICAL,
        Error::Index(_) | Error::Shape(_) | Error::Format { .. } | Error::Data(_) | Error::Io { .. } | Error::Image(_) => {
            EXIT_DATA
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::SynthMnist { out, per_label, seed } => {
            synthetic::write_synthetic_mnist(&out, per_label, seed)?;
            println!("wrote {} synthetic digits to {}", per_label * 10, out.display());
            Ok(EXIT_OK)
        }
        Command::BuildData {
            flags,
            mnist,
            out,
            all_labels,
            all_tasks,
            train_size,
            test_size,
            noise_sigma,
        } => {
            let mut cfg = flags.resolve()?;
            if let Some(v) = train_size {
                cfg.data.train = v;
            }
            if let Some(v) = test_size {
                cfg.data.test = v;
            }
            if let Some(v) = noise_sigma {
                cfg.data.noise_sigma = v;
            }
            if mnist.is_some() {
                cfg.mnist = mnist;
            }
            cmd_build_data(&cfg, &out, all_tasks, all_labels)
        }
        Command::Train { flags, data, out, resume } => {
            let cfg = flags.resolve()?;
            cmd_train(cfg, &data, &out, resume)
        }
        Command::Translate {
            checkpoint,
            direction,
            input,
            out,
            post,
            decode,
        } => cmd_translate(&checkpoint, direction.into(), &input, &out, post.resolve(false), decode.as_deref()),
        Command::Evaluate {
            checkpoint,
            data,
            out,
            post,
            decode,
        } => cmd_evaluate(&checkpoint, &data, &out, post.resolve(true), decode.as_deref()),
        Command::CheckInverse {
            seed,
            trials,
            corrupt_sign,
        } => Ok(cmd_check_inverse(seed, trials, corrupt_sign)),
        Command::GradCheck { seed, instances } => cmd_grad_check(seed, instances),
        Command::Study { flags, data, out, grid } => {
            let cfg = flags.resolve()?;
            let grid = match grid {
                Some(g) => parse_grid(&g)?,
                None => default_grid(),
            };
            cmd_study(cfg, &data, &out, &grid)
        }
    }
}

fn write_run_manifest(dir: &Path, command: &str, cfg: &RunConfig, extra: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut text = format!("# command: {command}\n");
    text.push_str(&cfg.to_text());
    for (k, v) in extra {
        text.push_str(&format!("# {k}: {v}\n"));
    }
    write_atomic(&dir.join(RUN_MANIFEST), text.as_bytes())
}

pub fn cmd_build_data(cfg: &RunConfig, out: &Path, all_tasks: bool, all_labels: bool) -> Result<i32> {
    let tasks: Vec<Task> = if all_tasks { Task::ALL.to_vec() } else { vec![cfg.task] };
    let mnist_dir = cfg
        .mnist
        .clone()
        .ok_or_else(|| Error::Config("--mnist (or 'mnist' in the config) is required".into()))?;
    let mut jobs = Vec::new();
    for task in tasks {
        if all_labels {
            jobs.extend(task.valid_labels().iter().map(|&l| (task, l)));
        } else {
            task.check_label(cfg.label)?;
            jobs.push((task, cfg.label));
        }
    }
    let mut cfg = cfg.clone();
    cfg.validate_data()?;
    let source = load_mnist(&mnist_dir)?;
    let mut extra = Vec::new();
    for (task, label) in jobs {
        let ds = build_subdataset(task, label, cfg.train.seed, &source, &cfg.data)?;
        let dir = out.join(ds.dir_name());
        let hash = ds.save(&dir)?;
        println!(
            "{}: {} train + {} test per domain, manifest sha256 {hash}",
            dir.display(),
            ds.train_a.len(),
            ds.test_a.len()
        );
        extra.push((ds.dir_name(), format!("manifest sha256 {hash}")));
    }
    cfg.out_dir = Some(out.to_path_buf());
    write_run_manifest(out, "build-data", &cfg, &extra)?;
    Ok(EXIT_OK)
}

/// First eight test sources of a direction with their paired references.
fn grid_inputs(ds: &SubDataset, direction: Direction) -> Result<(Vec<crate::ImageTensor>, Vec<crate::ImageTensor>)> {
    let (src, refs) = match direction {
        Direction::Forward => (&ds.test_a, &ds.test_b),
        Direction::Inverse => (&ds.test_b, &ds.test_a),
    };
    let n = src.len().min(8);
    pair_by_source(&src[..n], refs)
}

pub fn cmd_train(mut cfg: RunConfig, data_dir: &Path, out: &Path, resume: bool) -> Result<i32> {
    let ds = SubDataset::load(data_dir)?;
    cfg.task = ds.task;
    cfg.label = ds.label;
    cfg.data_dir = Some(data_dir.to_path_buf());
    cfg.out_dir = Some(out.to_path_buf());
    cfg.validate()?;
    let mut trainer = if resume {
        let t = Trainer::resume(out, Some(cfg.train.epochs))?;
        cfg.train = t.config().clone();
        t
    } else {
        Trainer::new(cfg.train.clone())?
    };
    write_run_manifest(out, "train", &cfg, &[])?;
    let (train_x, train_y) = (images(&ds.train_a), images(&ds.train_b));
    let grids = [
        (Direction::Forward, grid_inputs(&ds, Direction::Forward)?),
        (Direction::Inverse, grid_inputs(&ds, Direction::Inverse)?),
    ];
    let every = cfg.sample_every;
    let result = trainer.fit(&train_x, &train_y, Some(out), |t| {
        let e = t.state.epoch;
        println!(
            "epoch {e}: mean generator loss {}",
            t.state.history.mean_total(e).map_or("n/a".into(), |v| format!("{v:.6}"))
        );
        if every > 0 && e % every == 0 {
            for (direction, (src, refs)) in &grids {
                let path = out.join(format!("grid_{}_epoch{e:03}.png", direction.label()));
                comparison_grid(t.generator(), &t.state.params, *direction, src, refs, &path)?;
            }
        }
        Ok(())
    });
    if let Err(e) = &result {
        if matches!(e, Error::Numerical(_)) {
            eprintln!(
                "training aborted at epoch {}; the last completed epoch's checkpoint is in {}",
                trainer.state.epoch + 1,
                out.join(trainer::CHECKPOINT_DIR).display()
            );
        }
    }
    result?;
    let extra = vec![(
        "generator sha256".to_string(),
        params_checksum(&trainer.state.params),
    )];
    write_run_manifest(out, "train", &cfg, &extra)?;
    Ok(EXIT_OK)
}

/// Decode rule recorded in the checkpoint's configuration, unless overridden.
fn generator_for(checkpoint: &Path, decode: Option<&str>) -> Result<(QuantumGenerator, crate::qgen::GeneratorParams, PathBuf)> {
    let file = if checkpoint.is_file() {
        checkpoint.to_path_buf()
    } else {
        trainer::checkpoint_dir(checkpoint).join(trainer::GENERATOR_FILE)
    };
    let params = trainer::load_params(&file)?;
    let rule = match decode {
        Some(d) => parse_decode(d)?,
        None => {
            let cfg_path = file.with_file_name(CONFIG_FILE);
            if cfg_path.exists() {
                RunConfig::from_file(&cfg_path)?.train.decode
            } else {
                RunConfig::default().train.decode
            }
        }
    };
    log::info!(
        "generator parameters: {} sha256={}",
        file.display(),
        params_checksum(&params)
    );
    Ok((QuantumGenerator::new(params.blocks(), rule), params, file))
}

pub fn cmd_translate(
    checkpoint: &Path,
    direction: Direction,
    input: &Path,
    out: &Path,
    post: bool,
    decode: Option<&str>,
) -> Result<i32> {
    let (generator, params, file) = generator_for(checkpoint, decode)?;
    let inputs = if input.is_dir() {
        data::list_pngs(input)?
    } else {
        vec![input.to_path_buf()]
    };
    if inputs.is_empty() {
        return Err(Error::Data(format!("no PNG images found in {}", input.display())));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let imgs = inputs.iter().map(|p| data::read_png(p)).collect::<Result<Vec<_>>>()?;
    let mut outputs = generator.translate_batch(&imgs, &params, direction)?;
    if post {
        outputs = outputs.iter().map(post_process).collect();
    }
    let mut extra = vec![
        ("generator file".to_string(), file.display().to_string()),
        ("generator sha256".to_string(), params_checksum(&params)),
        ("direction".to_string(), direction.label().to_string()),
        ("post".to_string(), post.to_string()),
    ];
    for (path, img) in inputs.iter().zip(&outputs) {
        let name = path.file_name().unwrap();
        let bytes = data::encode_png(img)?;
        write_atomic(&out.join(name), &bytes)?;
        extra.push((
            format!("output {}", name.to_string_lossy()),
            hex::encode(Sha256::digest(&bytes)),
        ));
    }
    println!("translated {} image(s) with {} into {}", outputs.len(), direction.label(), out.display());
    write_run_manifest(out, "translate", &RunConfig { post, ..Default::default() }, &extra)?;
    Ok(EXIT_OK)
}

fn dataset_dirs(data: &Path) -> Result<Vec<PathBuf>> {
    if data.join(data::MANIFEST).exists() {
        return Ok(vec![data.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(data)
        .map_err(|e| Error::io(data, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(data::MANIFEST).exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Data(format!("no sub-dataset manifest under {}", data.display())));
    }
    Ok(dirs)
}

pub fn cmd_evaluate(checkpoint: &Path, data: &Path, out: &Path, post: bool, decode: Option<&str>) -> Result<i32> {
    let (generator, params, _) = generator_for(checkpoint, decode)?;
    let mut rows = Vec::new();
    for dir in dataset_dirs(data)? {
        let ds = SubDataset::load(&dir)?;
        rows.extend(evaluate_subdataset(&generator, &params, &ds, post)?);
    }
    let report = emit_report(&rows);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_atomic(out, report.as_bytes())?;
    print!("{report}");
    Ok(EXIT_OK)
}

pub fn cmd_check_inverse(seed: u64, trials: usize, corrupt_sign: bool) -> i32 {
    let mode = if corrupt_sign { InverseMode::NegateOnly } else { InverseMode::Exact };
    let report = audit::check_inverse(seed, trials, mode);
    println!("circuit,worst_deviation");
    for (k, d) in report.per_circuit.iter().enumerate() {
        println!("{k},{d:.3e}");
    }
    let status = if report.passed() { "PASS" } else { "FAIL" };
    println!(
        "{status}: {} trials, max deviation {:.3e} (tolerance {:.0e})",
        report.trials,
        report.max_deviation(),
        report.tolerance
    );
    if report.passed() {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}

pub fn cmd_grad_check(seed: u64, instances: usize) -> Result<i32> {
    let audits = audit::all_audits(seed, instances)?;
    let mut ok = true;
    for a in &audits {
        ok &= a.passed();
        println!(
            "{}: {}: {} instances, {} coordinates, max relative error {:.3e} (tolerance {:.0e})",
            if a.passed() { "PASS" } else { "FAIL" },
            a.name,
            a.instances,
            a.coordinates,
            a.max_rel_error,
            a.tolerance
        );
    }
    Ok(if ok { EXIT_OK } else { EXIT_NUMERICAL })
}

pub fn cmd_study(mut cfg: RunConfig, data_dir: &Path, out: &Path, grid: &[crate::study::Combination]) -> Result<i32> {
    let ds = SubDataset::load(data_dir)?;
    cfg.task = ds.task;
    cfg.label = ds.label;
    cfg.data_dir = Some(data_dir.to_path_buf());
    cfg.out_dir = Some(out.to_path_buf());
    cfg.validate()?;
    let grid_text: Vec<String> = grid.iter().map(|c| format!("({}, {}, {})", c.epsilon, c.eta, c.rho)).collect();
    write_run_manifest(out, "study", &cfg, &[("grid".into(), grid_text.join(" "))])?;
    let rows = run_study(&cfg.train, grid, &ds, cfg.post, |r| {
        println!(
            "eps={} eta={} rho={} epoch {} {}: FD {:.4} SSIM {:.4}",
            r.combination.epsilon, r.combination.eta, r.combination.rho, r.epoch, r.direction, r.fd, r.ssim
        );
    })?;
    write_atomic(&out.join("study.csv"), study_csv(&rows).as_bytes())?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> i32 {
        run(std::iter::once("ihqgan").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_args(&["no-such-command"]), EXIT_USAGE);
        assert_eq!(run_args(&["train"]), EXIT_USAGE);
        assert_eq!(run_args(&["--help"]), EXIT_OK);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        fs::write(&p, "epochs = 7\neta = 40\ndecode = sum\n").unwrap();
        let cli = Cli::try_parse_from(["ihqgan", "train", "--config", p.to_str().unwrap(), "--eta", "25", "--data", "d", "--out", "o", "--no-post"]).unwrap();
        let Command::Train { flags, .. } = cli.command else { panic!() };
        let cfg = flags.resolve().unwrap();
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.train.weights.eta, 25.0);
        assert_eq!(cfg.train.decode, crate::qgen::DecodeRule::SumNorm);
        assert!(!cfg.post);
    }

    #[test]
    fn check_inverse_exit_codes() {
        assert_eq!(cmd_check_inverse(0, 64, false), EXIT_OK);
        assert_eq!(cmd_check_inverse(0, 64, true), EXIT_NUMERICAL);
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Format { offset: 0, message: "x".into() }), EXIT_DATA);
        assert_eq!(exit_code(&Error::Numerical("x".into())), EXIT_NUMERICAL);
    }
}
