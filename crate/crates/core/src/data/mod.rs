//! Digit ingestion and the three unpaired translation datasets.
//!
//! Domain A holds the transformed digits (edge maps, bold strokes, noisy
//! digits) and domain B the plain digits, so the forward generator maps
//! A to B. Both domains are built from the same selected source images and
//! then shuffled independently, which breaks the pairing while keeping the
//! source index of every file recorded in the manifest.

pub mod idx;
pub mod synthetic;
pub mod transforms;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use idx::{load_mnist, LabeledImage};
pub use transforms::{crop_to_28, make_bold, make_edges, make_noisy, pad_to_32, CannyParams, Raster};

use crate::error::{Error, Result};
use crate::image::{ImageTensor, SIDE};
use crate::tensor_io::write_atomic;

pub const MANIFEST: &str = "manifest.txt";
pub const SPLIT_DIRS: [&str; 4] = ["trainA", "trainB", "testA", "testB"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    EdgeDetection,
    FontStyleTransfer,
    ImageDenoising,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::EdgeDetection, Task::FontStyleTransfer, Task::ImageDenoising];

    pub fn name(self) -> &'static str {
        match self {
            Task::EdgeDetection => "edge-detection",
            Task::FontStyleTransfer => "font-style-transfer",
            Task::ImageDenoising => "image-denoising",
        }
    }

    pub fn valid_labels(self) -> &'static [u8] {
        match self {
            Task::EdgeDetection | Task::FontStyleTransfer => &[0, 1, 2, 3, 4, 5, 6, 7],
            Task::ImageDenoising => &[0, 1, 7],
        }
    }

    pub fn check_label(self, label: u8) -> Result<()> {
        if self.valid_labels().contains(&label) {
            Ok(())
        } else {
            let list: Vec<String> = self.valid_labels().iter().map(u8::to_string).collect();
            Err(Error::Config(format!(
                "label {label} is not available for {}; valid labels are {{{}}}",
                self.name(),
                list.join(",")
            )))
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "edge-detection" | "edges" | "edge" => Ok(Task::EdgeDetection),
            "font-style-transfer" | "font" | "bold" => Ok(Task::FontStyleTransfer),
            "image-denoising" | "denoising" | "noise" => Ok(Task::ImageDenoising),
            other => Err(Error::Config(format!(
                "unknown task '{other}' (expected edge-detection, font-style-transfer or image-denoising)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildConfig {
    /// Training images per domain.
    pub train: usize,
    /// Test images per domain.
    pub test: usize,
    pub noise_sigma: f64,
    pub canny: CannyParams,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            train: 1000,
            test: 250,
            noise_sigma: 0.25,
            canny: CannyParams::default(),
        }
    }
}

impl BuildConfig {
    pub fn total(&self) -> usize {
        self.train + self.test
    }
}

/// One image together with the index of the source digit it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: ImageTensor,
    pub source: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubDataset {
    pub task: Task,
    pub label: u8,
    pub seed: u64,
    pub config: BuildConfig,
    pub train_a: Vec<Sample>,
    pub train_b: Vec<Sample>,
    pub test_a: Vec<Sample>,
    pub test_b: Vec<Sample>,
}

fn raster_of(img: &LabeledImage) -> Result<Raster> {
    Raster::new(img.rows, img.cols, img.pixels.clone())
}

/// Applies the task transform to one source digit.
pub fn transform(task: Task, raster: &Raster, config: &BuildConfig, seed: u64, source: usize) -> Result<Raster> {
    Ok(match task {
        Task::EdgeDetection => make_edges(raster, &config.canny),
        Task::FontStyleTransfer => make_bold(raster),
        Task::ImageDenoising => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(source as u64);
            make_noisy(raster, config.noise_sigma, &mut rng)?
        }
    })
}

pub fn build_subdataset(
    task: Task,
    label: u8,
    seed: u64,
    source: &[LabeledImage],
    config: &BuildConfig,
) -> Result<SubDataset> {
    task.check_label(label)?;
    let mut candidates: Vec<usize> = source
        .iter()
        .enumerate()
        .filter(|(_, img)| img.label == label)
        .map(|(i, _)| i)
        .collect();
    if candidates.len() < config.total() {
        return Err(Error::Data(format!(
            "digit {label} has {} images, {} are needed",
            candidates.len(),
            config.total()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);
    candidates.truncate(config.total());

    let pairs: Vec<(Sample, Sample)> = candidates
        .par_iter()
        .map(|&idx| {
            let raster = raster_of(&source[idx])?;
            let a = pad_to_32(&transform(task, &raster, config, seed, idx)?)?;
            let b = pad_to_32(&raster)?;
            Ok((
                Sample { image: a, source: idx },
                Sample { image: b, source: idx },
            ))
        })
        .collect::<Result<_>>()?;
    let (mut a, mut b): (Vec<Sample>, Vec<Sample>) = pairs.into_iter().unzip();
    let test_a = a.split_off(config.train);
    let test_b = b.split_off(config.train);
    let mut ds = SubDataset {
        task,
        label,
        seed,
        config: *config,
        train_a: a,
        train_b: b,
        test_a,
        test_b,
    };
    ds.train_a.shuffle(&mut rng);
    ds.train_b.shuffle(&mut rng);
    ds.test_a.shuffle(&mut rng);
    ds.test_b.shuffle(&mut rng);
    Ok(ds)
}

impl SubDataset {
    pub fn split(&self, name: &str) -> Option<&[Sample]> {
        match name {
            "trainA" => Some(&self.train_a),
            "trainB" => Some(&self.train_b),
            "testA" => Some(&self.test_a),
            "testB" => Some(&self.test_b),
            _ => None,
        }
    }

    fn split_mut(&mut self, name: &str) -> &mut Vec<Sample> {
        match name {
            "trainA" => &mut self.train_a,
            "trainB" => &mut self.train_b,
            "testA" => &mut self.test_a,
            _ => &mut self.test_b,
        }
    }

    /// Directory name used by [`save`](Self::save) callers that hold several
    /// sub-datasets side by side.
    pub fn dir_name(&self) -> String {
        format!("{}-{}", self.task.name(), self.label)
    }

    /// Writes PNGs under `trainA/ trainB/ testA/ testB/` and a manifest.
    /// Returns the SHA-256 of the manifest, which covers every image hash.
    pub fn save(&self, dir: &Path) -> Result<String> {
        let mut manifest = String::new();
        manifest.push_str(&format!("task={}\n", self.task.name()));
        manifest.push_str(&format!("label={}\n", self.label));
        manifest.push_str(&format!("seed={}\n", self.seed));
        manifest.push_str(&format!("train={}\n", self.config.train));
        manifest.push_str(&format!("test={}\n", self.config.test));
        manifest.push_str(&format!("noise_sigma={}\n", self.config.noise_sigma));
        manifest.push_str(&format!("canny_sigma={}\n", self.config.canny.sigma));
        manifest.push_str(&format!("canny_low_percentile={}\n", self.config.canny.low_percentile));
        manifest.push_str(&format!("canny_high_percentile={}\n", self.config.canny.high_percentile));
        for split in SPLIT_DIRS {
            let sub = dir.join(split);
            fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            let samples = self.split(split).unwrap();
            let encoded: Vec<(String, Vec<u8>)> = samples
                .par_iter()
                .enumerate()
                .map(|(i, s)| Ok((format!("{split}/{i:05}.png"), encode_png(&s.image)?)))
                .collect::<Result<_>>()?;
            for ((name, bytes), sample) in encoded.iter().zip(samples) {
                write_atomic(&dir.join(name), bytes)?;
                manifest.push_str(&format!(
                    "file {name} source={} sha256={}\n",
                    sample.source,
                    hex::encode(Sha256::digest(bytes))
                ));
            }
        }
        write_atomic(&dir.join(MANIFEST), manifest.as_bytes())?;
        Ok(hex::encode(Sha256::digest(manifest.as_bytes())))
    }

    /// Reads a directory written by [`save`](Self::save), verifying every
    /// image against its recorded hash.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut header = std::collections::BTreeMap::new();
        let mut files = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix("file ") {
                let mut parts = rest.split_whitespace();
                let name = parts.next().unwrap_or_default().to_string();
                let mut source = None;
                let mut sha = None;
                for p in parts {
                    if let Some(v) = p.strip_prefix("source=") {
                        source = v.parse::<usize>().ok();
                    } else if let Some(v) = p.strip_prefix("sha256=") {
                        sha = Some(v.to_string());
                    }
                }
                match (source, sha) {
                    (Some(s), Some(h)) => files.push((name, s, h)),
                    _ => return Err(Error::Data(format!("manifest line {} is malformed", n + 1))),
                }
            } else if let Some((k, v)) = line.split_once('=') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| -> Result<&String> {
            header
                .get(k)
                .ok_or_else(|| Error::Data(format!("manifest lacks '{k}'")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Data(format!("manifest value for '{k}' is not numeric")))
        };
        let config = BuildConfig {
            train: num("train")? as usize,
            test: num("test")? as usize,
            noise_sigma: num("noise_sigma")?,
            canny: CannyParams {
                sigma: num("canny_sigma")?,
                low_percentile: num("canny_low_percentile")?,
                high_percentile: num("canny_high_percentile")?,
            },
        };
        let mut ds = SubDataset {
            task: get("task")?.parse()?,
            label: num("label")? as u8,
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::Data("manifest seed is not an integer".into()))?,
            config,
            train_a: Vec::new(),
            train_b: Vec::new(),
            test_a: Vec::new(),
            test_b: Vec::new(),
        };
        let loaded: Vec<(String, Sample)> = files
            .par_iter()
            .map(|(name, source, sha)| {
                let p = dir.join(name);
                let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
                if hex::encode(Sha256::digest(&bytes)) != *sha {
                    return Err(Error::Data(format!("{} does not match its manifest hash", p.display())));
                }
                let split = name.split('/').next().unwrap_or_default().to_string();
                Ok((split, Sample { image: decode_png(&bytes)?, source: *source }))
            })
            .collect::<Result<_>>()?;
        for (split, sample) in loaded {
            if !SPLIT_DIRS.contains(&split.as_str()) {
                return Err(Error::Data(format!("unknown split directory '{split}'")));
            }
            ds.split_mut(&split).push(sample);
        }
        Ok(ds)
    }
}

pub fn encode_png(image: &ImageTensor) -> Result<Vec<u8>> {
    let gray = ::image::GrayImage::from_raw(SIDE as u32, SIDE as u32, image.to_bytes())
        .expect("32×32 buffer");
    let mut out = std::io::Cursor::new(Vec::new());
    gray.write_to(&mut out, ::image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_png(bytes: &[u8]) -> Result<ImageTensor> {
    let img = ::image::load_from_memory_with_format(bytes, ::image::ImageFormat::Png)?.into_luma8();
    if img.width() as usize != SIDE || img.height() as usize != SIDE {
        return Err(Error::shape(format!(
            "expected a {SIDE}×{SIDE} image, got {}×{}",
            img.width(),
            img.height()
        )));
    }
    ImageTensor::from_bytes(img.as_raw())
}

pub fn write_png(image: &ImageTensor, path: &Path) -> Result<()> {
    write_atomic(path, &encode_png(image)?)
}

pub fn read_png(path: &Path) -> Result<ImageTensor> {
    decode_png(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// PNG files in `dir`, sorted by name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    out.sort();
    Ok(out)
}

pub fn images(samples: &[Sample]) -> Vec<ImageTensor> {
    samples.iter().map(|s| s.image.clone()).collect()
}
